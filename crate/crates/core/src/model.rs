//! Shared domain types: instants, offsets, pass events, ground lock windows
//! and full-information feedback.
//!
//! All times are integer milliseconds (UTC for instants). No floating point
//! enters this module.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("grid step must be positive, got {0} ms")]
    NonPositiveStep(i64),
    #[error("grid min {min} ms exceeds max {max} ms")]
    InvertedRange { min: i64, max: i64 },
    #[error("{axis} offsets must be non-empty")]
    EmptyAxis { axis: &'static str },
    #[error("{axis} offsets must be non-negative and strictly ascending")]
    UnorderedAxis { axis: &'static str },
    #[error("negative offset {0} ms")]
    NegativeOffset(i64),
    #[error("negative timestamp {0} ms")]
    NegativeTimestamp(i64),
    #[error("pass events violate ordering: {0}")]
    InvalidEvents(&'static str),
    #[error("ground window must satisfy lock_start < lock_end")]
    EmptyGroundWindow,
    #[error("relative orbit {ron} outside [1, {orbits_per_cycle}]")]
    OrbitOutOfRange { ron: u32, orbits_per_cycle: u32 },
}

/// Signed span of time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(i64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_millis(millis: i64) -> Self {
        Duration(millis)
    }

    pub const fn from_secs(secs: i64) -> Self {
        Duration(secs * 1000)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Whole-second view, used by trace output; `None` if not a whole second.
    pub fn whole_secs(self) -> Option<i64> {
        (self.0 % 1000 == 0).then_some(self.0 / 1000)
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.whole_secs() {
            Some(s) => write!(f, "{s}s"),
            None => write!(f, "{}ms", self.0),
        }
    }
}

/// Milliseconds since the Unix epoch, UTC. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_millis(epoch_millis: i64) -> Result<Self, ModelError> {
        if epoch_millis < 0 {
            return Err(ModelError::NegativeTimestamp(epoch_millis));
        }
        Ok(Timestamp(epoch_millis))
    }

    pub const fn epoch_millis(self) -> i64 {
        self.0
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 + rhs.0)
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 - rhs.0)
    }
}

impl Sub for Timestamp {
    type Output = Duration;
    fn sub(self, rhs: Timestamp) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

/// One action: how long after acquisition to start the dump and how long
/// before loss of signal to stop it.
/// Serialized as `{ aos_offset_ms, los_offset_ms }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "OffsetPairMs", into = "OffsetPairMs")]
pub struct OffsetPair {
    pub aos_offset: Duration,
    pub los_offset: Duration,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetPairMs {
    aos_offset_ms: i64,
    los_offset_ms: i64,
}

impl TryFrom<OffsetPairMs> for OffsetPair {
    type Error = ModelError;

    fn try_from(v: OffsetPairMs) -> Result<Self, ModelError> {
        OffsetPair::new(Duration(v.aos_offset_ms), Duration(v.los_offset_ms))
    }
}

impl From<OffsetPair> for OffsetPairMs {
    fn from(p: OffsetPair) -> Self {
        OffsetPairMs { aos_offset_ms: p.aos_offset.0, los_offset_ms: p.los_offset.0 }
    }
}

impl OffsetPair {
    pub fn new(aos_offset: Duration, los_offset: Duration) -> Result<Self, ModelError> {
        for d in [aos_offset, los_offset] {
            if d.is_negative() {
                return Err(ModelError::NegativeOffset(d.millis()));
            }
        }
        Ok(OffsetPair { aos_offset, los_offset })
    }

    /// Convenience for whole-second offsets. Panics on negative input.
    pub fn secs(aos: i64, los: i64) -> Self {
        OffsetPair::new(Duration::from_secs(aos), Duration::from_secs(los)).expect("offsets must be non-negative")
    }
}

impl fmt::Display for OffsetPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.aos_offset, self.los_offset)
    }
}

/// Returns `min, min+step, ...` up to the largest value not above `max`.
pub fn grid_linspace(min: Duration, max: Duration, step: Duration) -> Result<Vec<Duration>, ModelError> {
    if step.millis() <= 0 {
        return Err(ModelError::NonPositiveStep(step.millis()));
    }
    if min > max {
        return Err(ModelError::InvertedRange { min: min.millis(), max: max.millis() });
    }
    let n = (max.millis() - min.millis()) / step.millis() + 1;
    Ok((0..n).map(|k| Duration(min.millis() + k * step.millis())).collect())
}

/// The finite action set: the Cartesian product of AOS and LOS offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OffsetGrid {
    aos_values: Vec<Duration>,
    los_values: Vec<Duration>,
}

impl OffsetGrid {
    pub fn new(aos_values: Vec<Duration>, los_values: Vec<Duration>) -> Result<Self, ModelError> {
        check_axis(&aos_values, "AOS")?;
        check_axis(&los_values, "LOS")?;
        Ok(OffsetGrid { aos_values, los_values })
    }

    /// Whole-second axes; handy for fixtures.
    pub fn from_secs(aos: &[i64], los: &[i64]) -> Result<Self, ModelError> {
        OffsetGrid::new(
            aos.iter().map(|&s| Duration::from_secs(s)).collect(),
            los.iter().map(|&s| Duration::from_secs(s)).collect(),
        )
    }

    /// AOS 0..=120 s and LOS 0..=60 s, both in 1 s steps.
    pub fn default_mission() -> Self {
        let one = Duration::from_secs(1);
        OffsetGrid::new(
            grid_linspace(Duration::ZERO, Duration::from_secs(120), one).unwrap(),
            grid_linspace(Duration::ZERO, Duration::from_secs(60), one).unwrap(),
        )
        .unwrap()
    }

    pub fn aos_values(&self) -> &[Duration] {
        &self.aos_values
    }

    pub fn los_values(&self) -> &[Duration] {
        &self.los_values
    }

    pub fn n_aos(&self) -> usize {
        self.aos_values.len()
    }

    pub fn n_los(&self) -> usize {
        self.los_values.len()
    }

    /// Number of actions.
    pub fn len(&self) -> usize {
        self.n_aos() * self.n_los()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pair(&self, aos_index: usize, los_index: usize) -> OffsetPair {
        OffsetPair { aos_offset: self.aos_values[aos_index], los_offset: self.los_values[los_index] }
    }

    pub fn pair_at_flat(&self, flat: usize) -> OffsetPair {
        self.pair(flat / self.n_los(), flat % self.n_los())
    }

    pub fn index_of(&self, pair: &OffsetPair) -> Option<(usize, usize)> {
        let i = self.aos_values.binary_search(&pair.aos_offset).ok()?;
        let j = self.los_values.binary_search(&pair.los_offset).ok()?;
        Some((i, j))
    }

    pub fn flat_index_of(&self, pair: &OffsetPair) -> Option<usize> {
        self.index_of(pair).map(|(i, j)| i * self.n_los() + j)
    }

    pub fn contains(&self, pair: &OffsetPair) -> bool {
        self.index_of(pair).is_some()
    }

    /// All actions in row-major (AOS-major) order, which is also
    /// lexicographic order on `(aos, los)`.
    pub fn pairs(&self) -> impl Iterator<Item = OffsetPair> + '_ {
        (0..self.len()).map(|k| self.pair_at_flat(k))
    }
}

fn check_axis(values: &[Duration], axis: &'static str) -> Result<(), ModelError> {
    if values.is_empty() {
        return Err(ModelError::EmptyAxis { axis });
    }
    if values[0].is_negative() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::UnorderedAxis { axis });
    }
    Ok(())
}

/// Flight-dynamics event predictions for one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PassEvents {
    pub cycle: u32,
    pub relative_orbit: u32,
    pub aos0: Timestamp,
    pub aosm: Timestamp,
    pub aos5: Timestamp,
    pub los0: Timestamp,
    pub losm: Timestamp,
    pub los5: Timestamp,
}

impl PassEvents {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.cycle < 1 {
            return Err(ModelError::InvalidEvents("cycle must be >= 1"));
        }
        if self.relative_orbit < 1 {
            return Err(ModelError::InvalidEvents("relative orbit must be >= 1"));
        }
        if !(self.aos0 <= self.aosm && self.aosm <= self.los0) {
            return Err(ModelError::InvalidEvents("expected aos0 <= aosm <= los0"));
        }
        if self.losm > self.los0 {
            return Err(ModelError::InvalidEvents("expected losm <= los0"));
        }
        if self.usable_start() >= self.usable_end() {
            return Err(ModelError::InvalidEvents("expected max(aos5, aosm) < min(los5, losm)"));
        }
        Ok(())
    }

    /// Reference instant for the dump start: the later of AOS5 and AOSM.
    pub fn usable_start(&self) -> Timestamp {
        self.aos5.max(self.aosm)
    }

    /// Reference instant for the dump stop: the earlier of LOS5 and LOSM.
    pub fn usable_end(&self) -> Timestamp {
        self.los5.min(self.losm)
    }

    pub fn key(&self) -> PassKey {
        PassKey { cycle: self.cycle, relative_orbit: self.relative_orbit }
    }

    /// Same pass with every event moved by `delta`.
    pub fn shifted(&self, delta: Duration) -> PassEvents {
        PassEvents {
            aos0: self.aos0 + delta,
            aosm: self.aosm + delta,
            aos5: self.aos5 + delta,
            los0: self.los0 + delta,
            losm: self.losm + delta,
            los5: self.los5 + delta,
            ..*self
        }
    }
}

/// `(cycle, relative orbit)`; orders by cycle first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PassKey {
    pub cycle: u32,
    pub relative_orbit: u32,
}

impl fmt::Display for PassKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle {} ron {}", self.cycle, self.relative_orbit)
    }
}

/// Interval during which the ground station actually held lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundWindow {
    lock_start: Timestamp,
    lock_end: Timestamp,
}

impl GroundWindow {
    pub fn new(lock_start: Timestamp, lock_end: Timestamp) -> Result<Self, ModelError> {
        if lock_start >= lock_end {
            return Err(ModelError::EmptyGroundWindow);
        }
        Ok(GroundWindow { lock_start, lock_end })
    }

    pub fn lock_start(&self) -> Timestamp {
        self.lock_start
    }

    pub fn lock_end(&self) -> Timestamp {
        self.lock_end
    }
}

/// One row of a mission dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PassRecord {
    pub events: PassEvents,
    /// `None` when no telemetry was recorded for the pass.
    pub ground: Option<GroundWindow>,
    /// Whether the operational (baseline) dump succeeded; `None` if unknown.
    pub baseline_outcome: Option<bool>,
}

impl PassRecord {
    pub fn key(&self) -> PassKey {
        self.events.key()
    }

    pub fn is_recorded(&self) -> bool {
        self.ground.is_some()
    }
}

/// Success bits for every action at one time step, indexed `[aos][los]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeedbackMatrix {
    n_aos: usize,
    n_los: usize,
    bits: Vec<bool>,
}

impl FeedbackMatrix {
    pub fn from_fn(grid: &OffsetGrid, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let (n_aos, n_los) = (grid.n_aos(), grid.n_los());
        let mut bits = Vec::with_capacity(n_aos * n_los);
        for i in 0..n_aos {
            for j in 0..n_los {
                bits.push(f(i, j));
            }
        }
        FeedbackMatrix { n_aos, n_los, bits }
    }

    pub fn filled(grid: &OffsetGrid, value: bool) -> Self {
        FeedbackMatrix { n_aos: grid.n_aos(), n_los: grid.n_los(), bits: vec![value; grid.len()] }
    }

    /// Builds from nested rows; `None` if rows are ragged or empty.
    pub fn from_rows(rows: &[Vec<u8>]) -> Option<Self> {
        let n_aos = rows.len();
        let n_los = rows.first()?.len();
        if n_los == 0 || rows.iter().any(|r| r.len() != n_los) {
            return None;
        }
        let bits = rows.iter().flatten().map(|&b| b != 0).collect();
        Some(FeedbackMatrix { n_aos, n_los, bits })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_aos, self.n_los)
    }

    pub fn matches(&self, grid: &OffsetGrid) -> bool {
        self.dims() == (grid.n_aos(), grid.n_los())
    }

    pub fn get(&self, aos_index: usize, los_index: usize) -> bool {
        assert!(aos_index < self.n_aos && los_index < self.n_los, "feedback index out of range");
        self.bits[aos_index * self.n_los + los_index]
    }

    pub fn get_flat(&self, flat: usize) -> bool {
        self.bits[flat]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn secs(v: &[i64]) -> Vec<Duration> {
        v.iter().map(|&s| Duration::from_secs(s)).collect()
    }

    #[test]
    fn linspace_examples() {
        let s = Duration::from_secs;
        assert_eq!(grid_linspace(s(0), s(60), s(10)).unwrap(), secs(&[0, 10, 20, 30, 40, 50, 60]));
        assert_eq!(grid_linspace(s(30), s(30), s(5)).unwrap(), secs(&[30]));
        assert_eq!(grid_linspace(s(0), s(7), s(3)).unwrap(), secs(&[0, 3, 6]));
    }

    #[test]
    fn linspace_rejects_bad_input() {
        let s = Duration::from_secs;
        assert_eq!(grid_linspace(s(0), s(7), s(0)), Err(ModelError::NonPositiveStep(0)));
        assert!(matches!(grid_linspace(s(0), s(7), s(-1)), Err(ModelError::NonPositiveStep(_))));
        assert!(matches!(grid_linspace(s(8), s(7), s(1)), Err(ModelError::InvertedRange { .. })));
    }

    #[test]
    fn grid_validation() {
        assert!(OffsetGrid::from_secs(&[], &[1]).is_err());
        assert!(OffsetGrid::from_secs(&[0, 0], &[1]).is_err());
        assert!(OffsetGrid::from_secs(&[2, 1], &[1]).is_err());
        assert!(OffsetGrid::from_secs(&[-1, 1], &[1]).is_err());
        let g = OffsetGrid::default_mission();
        assert_eq!(g.len(), 121 * 61);
        assert!(g.contains(&OffsetPair::secs(30, 10)));
        assert!(!g.contains(&OffsetPair::new(Duration::from_millis(500), Duration::ZERO).unwrap()));
    }

    #[test]
    fn timestamp_arithmetic_is_exact() {
        let t = Timestamp::from_millis(1_000).unwrap();
        let d = Duration::from_millis(250);
        assert_eq!((t + d) - t, d);
        assert_eq!((t + d - d), t);
        assert!(Timestamp::from_millis(-1).is_err());
    }

    #[test]
    fn events_validation() {
        let t = |s: i64| Timestamp::from_millis(s * 1000).unwrap();
        let ok = PassEvents {
            cycle: 6,
            relative_orbit: 1,
            aos0: t(0),
            aosm: t(20),
            aos5: t(60),
            los0: t(1000),
            losm: t(980),
            los5: t(940),
        };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.usable_start(), t(60));
        assert_eq!(ok.usable_end(), t(940));
        let bad = PassEvents { aos0: t(30), ..ok };
        assert!(bad.validate().is_err());
        let no_window = PassEvents { aos5: t(950), ..ok };
        assert!(no_window.validate().is_err());
    }

    proptest! {
        #[test]
        fn grid_index_roundtrip(
            aos_step in 1i64..20, n_aos in 1usize..12,
            los_step in 1i64..20, n_los in 1usize..12,
        ) {
            let aos: Vec<i64> = (0..n_aos as i64).map(|k| k * aos_step).collect();
            let los: Vec<i64> = (0..n_los as i64).map(|k| 3 + k * los_step).collect();
            let g = OffsetGrid::from_secs(&aos, &los).unwrap();
            for flat in 0..g.len() {
                let p = g.pair_at_flat(flat);
                prop_assert_eq!(g.flat_index_of(&p), Some(flat));
            }
            let pairs: Vec<_> = g.pairs().collect();
            let mut sorted = pairs.clone();
            sorted.sort();
            prop_assert_eq!(pairs, sorted);
        }
    }
}
