//! Flat TOML metrics document for replay and bench runs.

use serde::{Deserialize, Serialize};

use crate::eval::{RegretReport, SavedPassReport};

/// Everything a run reports; sections absent for the run kind are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mission_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_breaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saved: Option<SavedPassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretReport>,
}

pub fn emit_metrics(record: &MetricsRecord) -> String {
    toml::to_string(record).expect("metrics serialize")
}

pub fn parse_metrics(text: &str) -> Result<MetricsRecord, toml::de::Error> {
    toml::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OffsetPair;
    use num_rational::BigRational;

    #[test]
    fn saved_roundtrip() {
        let r = MetricsRecord {
            mission_id: Some("S6".into()),
            tie_breaker: Some("stay".into()),
            saved: Some(SavedPassReport::new(762, 700, 67, 25, 20)),
            regret: None,
        };
        let text = emit_metrics(&r);
        assert!(text.contains("saved_fraction = \"42/67\""), "{text}");
        assert_eq!(parse_metrics(&text).unwrap(), r);
    }

    #[test]
    fn regret_roundtrip() {
        let r = MetricsRecord {
            regret: Some(RegretReport {
                horizon: 5,
                best_fixed_action: OffsetPair::secs(10, 0),
                best_fixed_reward: 5,
                learner_reward: 4,
                empirical_regret: 1,
                expected_regret: Some(BigRational::new(3.into(), 8.into())),
            }),
            ..MetricsRecord::default()
        };
        assert_eq!(parse_metrics(&emit_metrics(&r)).unwrap(), r);
    }
}
