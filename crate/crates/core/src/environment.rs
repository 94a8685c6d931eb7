//! Feedback sources: an i.i.d. Bernoulli environment for synthetic runs and a
//! replay environment that scores every grid action against recorded passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Duration, FeedbackMatrix, GroundWindow, OffsetGrid, PassEvents, PassRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("probability table is {rows}x{cols}, grid is {n_aos}x{n_los}")]
    DimensionMismatch { rows: usize, cols: usize, n_aos: usize, n_los: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("replay passes must share one relative orbit and be sorted by cycle")]
    UnsortedPasses,
}

/// Whether a dump commanded with offsets `(aos_offset, los_offset)` lands fully
/// inside the ground lock and lasts at least `dump_duration`.
pub fn success_predicate(
    events: &PassEvents,
    ground: &GroundWindow,
    aos_offset: Duration,
    los_offset: Duration,
    dump_duration: Duration,
) -> bool {
    let start = events.usable_start() + aos_offset;
    let stop = events.usable_end() - los_offset;
    start >= ground.lock_start() && stop <= ground.lock_end() && stop - start >= dump_duration
}

/// Stationary environment: each action succeeds independently with its own
/// probability at every step.
#[derive(Debug, Clone)]
pub struct BernoulliEnvironment {
    grid: OffsetGrid,
    probs: Vec<f64>,
    seed: u64,
}

impl BernoulliEnvironment {
    /// `probs` is indexed `[aos][los]`.
    pub fn new(grid: OffsetGrid, probs: &[Vec<f64>], seed: u64) -> Result<Self, EnvironmentError> {
        let rows = probs.len();
        let cols = probs.first().map_or(0, Vec::len);
        if rows != grid.n_aos() || probs.iter().any(|r| r.len() != grid.n_los()) {
            return Err(EnvironmentError::DimensionMismatch { rows, cols, n_aos: grid.n_aos(), n_los: grid.n_los() });
        }
        let flat: Vec<f64> = probs.iter().flatten().copied().collect();
        if let Some(&p) = flat.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(EnvironmentError::InvalidProbability(p));
        }
        Ok(BernoulliEnvironment { grid, probs: flat, seed })
    }

    pub fn grid(&self) -> &OffsetGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        BernoulliEnvironment { seed, ..self.clone() }
    }

    /// Flat, row-major probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, aos_index: usize, los_index: usize) -> f64 {
        self.probs[aos_index * self.grid.n_los() + los_index]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Samples `B_t` for every action. Bits come from a ChaCha stream selected
    /// by `t` and positioned by cell, so the result depends only on
    /// `(seed, t, cell)`.
    pub fn step(&self, t: u64) -> FeedbackMatrix {
        debug_assert!(t >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let n_los = self.grid.n_los();
        FeedbackMatrix::from_fn(&self.grid, |i, j| {
            let u: f64 = rng.random();
            u < self.probs[i * n_los + j]
        })
    }
}

/// Recorded passes of one relative orbit, in cycle order.
#[derive(Debug, Clone)]
pub struct ReplayEnvironment {
    grid: OffsetGrid,
    passes: Vec<PassRecord>,
    dump_duration: Duration,
}

impl ReplayEnvironment {
    pub fn new(grid: OffsetGrid, passes: Vec<PassRecord>, dump_duration: Duration) -> Result<Self, EnvironmentError> {
        let same_orbit = passes
            .windows(2)
            .all(|w| w[0].events.relative_orbit == w[1].events.relative_orbit && w[0].events.cycle < w[1].events.cycle);
        if !same_orbit {
            return Err(EnvironmentError::UnsortedPasses);
        }
        Ok(ReplayEnvironment { grid, passes, dump_duration })
    }

    pub fn grid(&self) -> &OffsetGrid {
        &self.grid
    }

    pub fn passes(&self) -> &[PassRecord] {
        &self.passes
    }

    pub fn dump_duration(&self) -> Duration {
        self.dump_duration
    }

    /// Full feedback for one pass, or `None` if it has no recorded lock window.
    ///
    /// Panics if `pass_index` is out of range.
    pub fn feedback(&self, pass_index: usize) -> Option<FeedbackMatrix> {
        let record = &self.passes[pass_index];
        let ground = record.ground.as_ref()?;
        Some(feedback_for(&self.grid, &record.events, ground, self.dump_duration))
    }
}

pub(crate) fn feedback_for(
    grid: &OffsetGrid,
    events: &PassEvents,
    ground: &GroundWindow,
    dump_duration: Duration,
) -> FeedbackMatrix {
    let (aos, los) = (grid.aos_values(), grid.los_values());
    FeedbackMatrix::from_fn(grid, |i, j| success_predicate(events, ground, aos[i], los[j], dump_duration))
}
