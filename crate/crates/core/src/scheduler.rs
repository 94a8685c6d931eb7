//! Start/stop dump commands derived from offsets and flight-dynamics events.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::model::{OffsetPair, PassEvents, PassKey, PassRecord, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("{key}: offsets {action} give an empty dump window (start {start_ms} >= stop {stop_ms})")]
    InfeasibleWindow { key: PassKey, action: OffsetPair, start_ms: i64, stop_ms: i64 },
    #[error("{0}: no flight-dynamics events for selection")]
    MissingEvents(PassKey),
    #[error("{0}: duplicate command")]
    DuplicateCommand(PassKey),
    #[error("{0}: command does not satisfy start < stop")]
    InvalidCommand(PassKey),
}

/// Single-repeat-cycle start/stop pair for one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DumpCommand {
    pub cycle: u32,
    pub relative_orbit: u32,
    pub start: Timestamp,
    pub stop: Timestamp,
    pub action: OffsetPair,
}

impl DumpCommand {
    pub fn key(&self) -> PassKey {
        PassKey { cycle: self.cycle, relative_orbit: self.relative_orbit }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    mission_id: String,
    commands: Vec<DumpCommand>,
}

impl Schedule {
    /// Sorts by `(cycle, relative_orbit)` and rejects duplicates.
    pub fn new(mission_id: impl Into<String>, mut commands: Vec<DumpCommand>) -> Result<Self, ScheduleError> {
        commands.sort_by_key(DumpCommand::key);
        if let Some(w) = commands.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(ScheduleError::DuplicateCommand(w[0].key()));
        }
        if let Some(c) = commands.iter().find(|c| c.start >= c.stop) {
            return Err(ScheduleError::InvalidCommand(c.key()));
        }
        Ok(Schedule { mission_id: mission_id.into(), commands })
    }

    pub fn mission_id(&self) -> &str {
        &self.mission_id
    }

    pub fn commands(&self) -> &[DumpCommand] {
        &self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

/// `(max(AOS5, AOSM) + a, min(LOS5, LOSM) - l)`.
pub fn dump_window(events: &PassEvents, action: OffsetPair) -> Result<(Timestamp, Timestamp), ScheduleError> {
    let start = events.usable_start() + action.aos_offset;
    let stop = events.usable_end() - action.los_offset;
    if start >= stop {
        return Err(ScheduleError::InfeasibleWindow {
            key: events.key(),
            action,
            start_ms: start.epoch_millis(),
            stop_ms: stop.epoch_millis(),
        });
    }
    Ok((start, stop))
}

/// Result of [`build_schedule`]: every feasible command, plus one error per
/// selection that could not be turned into a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleBuild {
    pub schedule: Schedule,
    pub errors: Vec<ScheduleError>,
}

pub fn build_schedule(
    mission_id: &str,
    records: &[PassRecord],
    selections: &BTreeMap<PassKey, OffsetPair>,
) -> ScheduleBuild {
    let by_key: HashMap<PassKey, &PassEvents> = records.iter().map(|r| (r.key(), &r.events)).collect();
    let mut commands = Vec::with_capacity(selections.len());
    let mut errors = Vec::new();
    for (&key, &action) in selections {
        let Some(events) = by_key.get(&key) else {
            errors.push(ScheduleError::MissingEvents(key));
            continue;
        };
        match dump_window(events, action) {
            Ok((start, stop)) => {
                commands.push(DumpCommand { cycle: key.cycle, relative_orbit: key.relative_orbit, start, stop, action })
            }
            Err(e) => errors.push(e),
        }
    }
    // Keys come from a map, so they are unique and already ordered.
    let schedule = Schedule::new(mission_id, commands).expect("selection keys are unique");
    ScheduleBuild { schedule, errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Duration;
    use proptest::prelude::*;

    const T0: i64 = 1_650_000_000_000;

    fn at(secs: i64) -> Timestamp {
        Timestamp::from_millis(T0 + secs * 1000).unwrap()
    }

    fn events(cycle: u32, ron: u32) -> PassEvents {
        PassEvents {
            cycle,
            relative_orbit: ron,
            aos0: at(0),
            aosm: at(120),
            aos5: at(100),
            los0: at(720),
            losm: at(680),
            los5: at(700),
        }
    }

    #[test]
    fn window_examples() {
        let ev = events(6, 1);
        assert_eq!(dump_window(&ev, OffsetPair::secs(30, 10)).unwrap(), (at(150), at(670)));
        assert_eq!(dump_window(&ev, OffsetPair::secs(0, 0)).unwrap(), (at(120), at(680)));
        assert!(matches!(dump_window(&ev, OffsetPair::secs(600, 0)), Err(ScheduleError::InfeasibleWindow { .. })));
    }

    #[test]
    fn build_empty_and_single() {
        let records: Vec<PassRecord> =
            [events(6, 1)].iter().map(|&e| PassRecord { events: e, ground: None, baseline_outcome: None }).collect();
        let out = build_schedule("S6", &records, &BTreeMap::new());
        assert!(out.schedule.is_empty());
        assert!(out.errors.is_empty());

        let sel = BTreeMap::from([(events(6, 1).key(), OffsetPair::secs(30, 10))]);
        let out = build_schedule("S6", &records, &sel);
        assert_eq!(out.schedule.commands().len(), 1);
        let c = out.schedule.commands()[0];
        assert_eq!((c.start, c.stop), (at(150), at(670)));
        assert_eq!(c.action, OffsetPair::secs(30, 10));
    }

    #[test]
    fn build_collects_errors() {
        let records = vec![PassRecord { events: events(6, 1), ground: None, baseline_outcome: None }];
        let sel = BTreeMap::from([
            (PassKey { cycle: 6, relative_orbit: 1 }, OffsetPair::secs(600, 0)),
            (PassKey { cycle: 7, relative_orbit: 1 }, OffsetPair::secs(30, 10)),
        ]);
        let out = build_schedule("S6", &records, &sel);
        assert!(out.schedule.is_empty());
        assert_eq!(out.errors.len(), 2);
        assert!(out.errors.contains(&ScheduleError::MissingEvents(PassKey { cycle: 7, relative_orbit: 1 })));
    }

    #[test]
    fn schedule_rejects_duplicates() {
        let c = DumpCommand { cycle: 6, relative_orbit: 1, start: at(0), stop: at(1), action: OffsetPair::secs(0, 0) };
        assert!(matches!(Schedule::new("x", vec![c, c]), Err(ScheduleError::DuplicateCommand(_))));
    }

    proptest! {
        #[test]
        fn window_is_translation_equivariant(shift in 0i64..10_000_000, a in 0i64..200, l in 0i64..200) {
            let ev = events(6, 3);
            let d = Duration::from_millis(shift);
            let act = OffsetPair::secs(a, l);
            let (s0, e0) = dump_window(&ev, act).unwrap();
            let (s1, e1) = dump_window(&ev.shifted(d), act).unwrap();
            prop_assert_eq!((s1 - s0, e1 - e0), (d, d));
        }
    }
}
