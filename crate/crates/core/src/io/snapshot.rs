//! Learner state as TOML, for resuming a replay.
//!
//! ```toml
//! step = 3
//! aos_values_ms = [0, 10000]
//! los_values_ms = [0, 10000]
//! counts = [[0, 1], [2, 2]]
//!
//! [previous_action]
//! aos_offset_ms = 10000
//! los_offset_ms = 0
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::{LearnerError, LearnerState};
use crate::model::{Duration, ModelError, OffsetGrid, OffsetPair};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("snapshot: {0}")]
    Grid(#[from] ModelError),
    #[error("snapshot: {0}")]
    State(#[from] LearnerError),
    #[error("snapshot: count table must have one row per AOS value, each with one entry per LOS value")]
    Shape,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    step: u64,
    aos_values_ms: Vec<i64>,
    los_values_ms: Vec<i64>,
    counts: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    previous_action: Option<OffsetPair>,
}

pub fn emit_snapshot(state: &LearnerState) -> String {
    let grid = state.grid();
    let ms = |v: &[Duration]| v.iter().map(|d| d.millis()).collect();
    let snap = Snapshot {
        step: state.step(),
        aos_values_ms: ms(grid.aos_values()),
        los_values_ms: ms(grid.los_values()),
        counts: state.counts().chunks(grid.n_los()).map(<[u64]>::to_vec).collect(),
        previous_action: state.previous_action(),
    };
    toml::to_string(&snap).expect("snapshot serializes")
}

pub fn parse_snapshot(text: &str) -> Result<LearnerState, SnapshotError> {
    let snap: Snapshot = toml::from_str(text)?;
    let to_durations = |v: Vec<i64>| v.into_iter().map(Duration::from_millis).collect();
    let grid = OffsetGrid::new(to_durations(snap.aos_values_ms), to_durations(snap.los_values_ms))?;
    if snap.counts.len() != grid.n_aos() || snap.counts.iter().any(|r| r.len() != grid.n_los()) {
        return Err(SnapshotError::Shape);
    }
    let counts = snap.counts.into_iter().flatten().collect();
    Ok(LearnerState::from_parts(grid, counts, snap.step, snap.previous_action)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeedbackMatrix;
    use proptest::prelude::*;

    #[test]
    fn fresh_state_roundtrip() {
        let s = LearnerState::new(OffsetGrid::from_secs(&[0, 10], &[0, 10, 20]).unwrap());
        let text = emit_snapshot(&s);
        assert!(!text.contains("previous_action"));
        assert_eq!(parse_snapshot(&text).unwrap(), s);
    }

    #[test]
    fn rejects_inconsistent_snapshots() {
        let base = "aos_values_ms = [0, 10000]\nlos_values_ms = [0]\n";
        assert!(matches!(
            parse_snapshot(&format!("step = 2\n{base}counts = [[0], [1], [1]]\n")),
            Err(SnapshotError::Shape)
        ));
        assert!(matches!(
            parse_snapshot(&format!("step = 2\n{base}counts = [[0], [2]]\n")),
            Err(SnapshotError::State(LearnerError::CountTooLarge { .. }))
        ));
        assert!(matches!(
            parse_snapshot(&format!("step = 0\n{base}counts = [[0], [0]]\n")),
            Err(SnapshotError::State(LearnerError::ZeroStep))
        ));
        assert!(matches!(
            parse_snapshot(&format!("step = 1\n{base}counts = [[0], [0]]\nbogus = 1\n")),
            Err(SnapshotError::Toml(_))
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_after_updates(
            n_aos in 1usize..4,
            n_los in 1usize..4,
            steps in prop::collection::vec((any::<u64>(), any::<u16>()), 0..12),
        ) {
            let aos: Vec<i64> = (0..n_aos as i64).map(|k| k * 5).collect();
            let los: Vec<i64> = (0..n_los as i64).map(|k| k * 3).collect();
            let grid = OffsetGrid::from_secs(&aos, &los).unwrap();
            let mut s = LearnerState::new(grid.clone());
            for (bits, choice) in steps {
                let fb = FeedbackMatrix::from_fn(&grid, |i, j| bits >> (i * n_los + j) & 1 == 1);
                s.update(&fb, grid.pair_at_flat(choice as usize % grid.len())).unwrap();
            }
            prop_assert_eq!(parse_snapshot(&emit_snapshot(&s)).unwrap(), s);
        }
    }
}
