use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use super::telemetry::TelemetryEntry;
use crate::environment::success_predicate;
use crate::model::{Duration, OffsetPair, PassEvents, PassKey, PassRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("{0}: telemetry entry has no matching flight-dynamics events")]
    OrphanTelemetry(PassKey),
    #[error("{0}: duplicate record")]
    DuplicateKey(PassKey),
    #[error("{key}: relative orbit outside [1, {orbits_per_cycle}]")]
    OrbitOutOfRange { key: PassKey, orbits_per_cycle: u32 },
}

/// All passes of a mission, keyed by `(cycle, relative orbit)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissionDataset {
    mission_id: String,
    orbits_per_cycle: u32,
    records: Vec<PassRecord>,
}

impl MissionDataset {
    /// Sorts records by key and checks uniqueness and orbit range.
    pub fn new(
        mission_id: impl Into<String>,
        orbits_per_cycle: u32,
        mut records: Vec<PassRecord>,
    ) -> Result<Self, DatasetError> {
        records.sort_by_key(PassRecord::key);
        if let Some(w) = records.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(DatasetError::DuplicateKey(w[0].key()));
        }
        if let Some(r) =
            records.iter().find(|r| r.events.relative_orbit == 0 || r.events.relative_orbit > orbits_per_cycle)
        {
            return Err(DatasetError::OrbitOutOfRange { key: r.key(), orbits_per_cycle });
        }
        Ok(MissionDataset { mission_id: mission_id.into(), orbits_per_cycle, records })
    }

    pub fn mission_id(&self) -> &str {
        &self.mission_id
    }

    pub fn orbits_per_cycle(&self) -> u32 {
        self.orbits_per_cycle
    }

    /// Sorted by `(cycle, relative_orbit)`.
    pub fn records(&self) -> &[PassRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct cycle numbers, ascending.
    pub fn cycles(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.records.iter().map(|r| r.events.cycle).collect();
        c.dedup();
        c
    }

    /// Records grouped per relative orbit, each group in cycle order.
    pub fn by_orbit(&self) -> BTreeMap<u32, Vec<PassRecord>> {
        let mut out: BTreeMap<u32, Vec<PassRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.events.relative_orbit).or_default().push(*r);
        }
        out
    }

    pub fn events(&self) -> Vec<PassEvents> {
        self.records.iter().map(|r| r.events).collect()
    }

    pub fn telemetry(&self) -> Vec<TelemetryEntry> {
        self.records.iter().map(|r| TelemetryEntry { key: r.key(), frames: r.ground }).collect()
    }

    /// Fills `baseline_outcome` for every recorded pass from the baseline
    /// offsets; unrecorded passes get `None`.
    pub fn with_baseline(mut self, baseline: OffsetPair, dump_duration: Duration) -> Self {
        for r in &mut self.records {
            r.baseline_outcome = r
                .ground
                .map(|g| success_predicate(&r.events, &g, baseline.aos_offset, baseline.los_offset, dump_duration));
        }
        self
    }

    /// Recorded passes on which the baseline dump failed.
    pub fn baseline_failures(&self) -> usize {
        self.records.iter().filter(|r| r.baseline_outcome == Some(false)).count()
    }

    pub fn recorded(&self) -> usize {
        self.records.iter().filter(|r| r.is_recorded()).count()
    }
}

/// Joins events with telemetry on `(cycle, relative orbit)`. Passes without
/// telemetry keep an absent ground window.
pub fn merge_dataset(
    mission_id: &str,
    orbits_per_cycle: u32,
    events: &[PassEvents],
    telemetry: &[TelemetryEntry],
) -> Result<MissionDataset, DatasetError> {
    let mut seen = HashSet::new();
    for e in events {
        if !seen.insert(e.key()) {
            return Err(DatasetError::DuplicateKey(e.key()));
        }
    }
    let mut frames = HashMap::new();
    for t in telemetry {
        if !seen.contains(&t.key) {
            return Err(DatasetError::OrphanTelemetry(t.key));
        }
        if frames.insert(t.key, t.frames).is_some() {
            return Err(DatasetError::DuplicateKey(t.key));
        }
    }
    let records = events
        .iter()
        .map(|&e| PassRecord { events: e, ground: frames.get(&e.key()).copied().flatten(), baseline_outcome: None })
        .collect();
    MissionDataset::new(mission_id, orbits_per_cycle, records)
}
