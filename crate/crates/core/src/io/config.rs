//! Mission config: a flat TOML document.
//!
//! ```toml
//! mission_id = "S6-SYNTH"
//! orbits_per_cycle = 127
//! first_cycle = 6
//! cycles = 6
//! seed = 42
//! aos_min_ms = 0
//! aos_max_ms = 120000
//! aos_step_ms = 1000
//! los_min_ms = 0
//! los_max_ms = 60000
//! los_step_ms = 1000
//! baseline_aos_ms = 30000
//! baseline_los_ms = 10000
//! dump_duration_ms = 840000
//! tie_breaker = "safe-margin"
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::TieBreakerKind;
use crate::model::{grid_linspace, Duration, ModelError, OffsetGrid, OffsetPair};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config: {0}")]
    Model(#[from] ModelError),
    #[error("config: unknown tie-breaker {0:?}")]
    TieBreaker(String),
    #[error("config: baseline {0} is not on the grid")]
    BaselineOffGrid(OffsetPair),
    #[error("config: dump_duration_ms must be >= 0")]
    NegativeDuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub mission_id: String,
    pub orbits_per_cycle: u32,
    pub first_cycle: u32,
    pub cycles: u32,
    pub seed: u64,
    pub aos_min_ms: i64,
    pub aos_max_ms: i64,
    pub aos_step_ms: i64,
    pub los_min_ms: i64,
    pub los_max_ms: i64,
    pub los_step_ms: i64,
    pub baseline_aos_ms: i64,
    pub baseline_los_ms: i64,
    pub dump_duration_ms: i64,
    pub tie_breaker: String,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            mission_id: "S6-SYNTH".into(),
            orbits_per_cycle: 127,
            first_cycle: 6,
            cycles: 6,
            seed: 0,
            aos_min_ms: 0,
            aos_max_ms: 120_000,
            aos_step_ms: 1000,
            los_min_ms: 0,
            los_max_ms: 60_000,
            los_step_ms: 1000,
            baseline_aos_ms: 30_000,
            baseline_los_ms: 10_000,
            dump_duration_ms: 840_000,
            tie_breaker: TieBreakerKind::SafeMargin.name().into(),
        }
    }
}

impl MissionConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: MissionConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        let baseline = self.baseline()?;
        if !grid.contains(&baseline) {
            return Err(ConfigError::BaselineOffGrid(baseline));
        }
        if self.dump_duration_ms < 0 {
            return Err(ConfigError::NegativeDuration);
        }
        self.tie_breaker()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<OffsetGrid, ConfigError> {
        let ms = Duration::from_millis;
        let aos = grid_linspace(ms(self.aos_min_ms), ms(self.aos_max_ms), ms(self.aos_step_ms))?;
        let los = grid_linspace(ms(self.los_min_ms), ms(self.los_max_ms), ms(self.los_step_ms))?;
        Ok(OffsetGrid::new(aos, los)?)
    }

    pub fn baseline(&self) -> Result<OffsetPair, ConfigError> {
        Ok(OffsetPair::new(Duration::from_millis(self.baseline_aos_ms), Duration::from_millis(self.baseline_los_ms))?)
    }

    pub fn dump_duration(&self) -> Duration {
        Duration::from_millis(self.dump_duration_ms)
    }

    pub fn tie_breaker(&self) -> Result<TieBreakerKind, ConfigError> {
        self.tie_breaker.parse().map_err(|_| ConfigError::TieBreaker(self.tie_breaker.clone()))
    }
}
