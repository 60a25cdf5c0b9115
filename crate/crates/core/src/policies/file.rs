//! On-disk policy document (TOML).
//!
//! Field names are fixed so policy files round-trip bit-identically through
//! the CLI:
//!
//! ```toml
//! kind = "bonus"              # "coefficients" | "bonus" | "quota"
//! score_names = ["x"]
//! weights = [1.0]             # aligned with score_names
//! threshold = 50.0            # coefficients/bonus only
//!
//! [[bonuses]]                 # bonus only, one entry per attribute
//! attribute = "g"
//! amount = 25.0
//! group = "a"                 # "a" = designated group, "other" = complement
//!
//! [quota]                     # quota only
//! attribute = "g"
//! fraction = 0.3333
//! threshold_group_a = 30.0
//! threshold_other = 50.0
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BonusTerm, Policy, PolicyError, WeightVector};

#[derive(Debug, Error)]
pub enum PolicyFileError {
    #[error("policy parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("policy serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid policy document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BonusEntry {
    attribute: String,
    amount: f64,
    group: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuotaSection {
    attribute: String,
    fraction: f64,
    threshold_group_a: f64,
    threshold_other: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicyDoc {
    kind: String,
    score_names: Vec<String>,
    weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bonuses: Vec<BonusEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quota: Option<QuotaSection>,
}

/// A policy paired with the score-column names its weights refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub policy: Policy,
    pub score_names: Vec<String>,
}

impl PolicyFile {
    pub fn new(policy: Policy, score_names: Vec<String>) -> Self {
        Self {
            policy,
            score_names,
        }
    }

    pub fn to_toml(&self) -> Result<String, PolicyFileError> {
        let weights = self.policy.weights().components().to_vec();
        let doc = match &self.policy {
            Policy::Coefficients { threshold, .. } => PolicyDoc {
                kind: "coefficients".into(),
                score_names: self.score_names.clone(),
                weights,
                threshold: Some(*threshold),
                bonuses: Vec::new(),
                quota: None,
            },
            Policy::Bonus {
                bonuses, threshold, ..
            } => PolicyDoc {
                kind: "bonus".into(),
                score_names: self.score_names.clone(),
                weights,
                threshold: Some(*threshold),
                bonuses: bonuses
                    .iter()
                    .map(|(attr, term)| BonusEntry {
                        attribute: attr.clone(),
                        amount: term.amount,
                        group: if term.group_a { "a" } else { "other" }.into(),
                    })
                    .collect(),
                quota: None,
            },
            Policy::Quota {
                attribute,
                quota,
                threshold_group_a,
                threshold_other,
                ..
            } => PolicyDoc {
                kind: "quota".into(),
                score_names: self.score_names.clone(),
                weights,
                threshold: None,
                bonuses: Vec::new(),
                quota: Some(QuotaSection {
                    attribute: attribute.clone(),
                    fraction: *quota,
                    threshold_group_a: *threshold_group_a,
                    threshold_other: *threshold_other,
                }),
            },
        };
        Ok(toml::to_string(&doc)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, PolicyFileError> {
        let doc: PolicyDoc = toml::from_str(text)?;
        if doc.weights.len() != doc.score_names.len() {
            return Err(PolicyFileError::Invalid(format!(
                "{} weights for {} score names",
                doc.weights.len(),
                doc.score_names.len()
            )));
        }
        let weights = WeightVector::new(doc.weights)?;
        let policy = match doc.kind.as_str() {
            "coefficients" => Policy::Coefficients {
                weights,
                threshold: doc.threshold.ok_or_else(|| {
                    PolicyFileError::Invalid("coefficients policy needs a threshold".into())
                })?,
            },
            "bonus" => {
                let threshold = doc.threshold.ok_or_else(|| {
                    PolicyFileError::Invalid("bonus policy needs a threshold".into())
                })?;
                let mut bonuses = std::collections::BTreeMap::new();
                for entry in doc.bonuses {
                    let group_a = match entry.group.as_str() {
                        "a" => true,
                        "other" => false,
                        other => {
                            return Err(PolicyFileError::Invalid(format!(
                                "bonus group must be 'a' or 'other', found '{other}'"
                            )))
                        }
                    };
                    if entry.amount < 0.0 {
                        return Err(PolicyFileError::Policy(PolicyError::NegativeBonus {
                            attr: entry.attribute,
                            value: entry.amount,
                        }));
                    }
                    bonuses.insert(
                        entry.attribute,
                        BonusTerm {
                            amount: entry.amount,
                            group_a,
                        },
                    );
                }
                Policy::Bonus {
                    weights,
                    bonuses,
                    threshold,
                }
            }
            "quota" => {
                let section = doc.quota.ok_or_else(|| {
                    PolicyFileError::Invalid("quota policy needs a [quota] section".into())
                })?;
                if !(0.0..=1.0).contains(&section.fraction) {
                    return Err(PolicyFileError::Policy(PolicyError::InvalidQuota(
                        section.fraction,
                    )));
                }
                Policy::Quota {
                    weights,
                    attribute: section.attribute,
                    quota: section.fraction,
                    threshold_group_a: section.threshold_group_a,
                    threshold_other: section.threshold_other,
                }
            }
            other => {
                return Err(PolicyFileError::Invalid(format!(
                    "unknown policy kind '{other}'"
                )))
            }
        };
        Ok(Self {
            policy,
            score_names: doc.score_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample_policies() -> Vec<Policy> {
        let w = WeightVector::new(vec![0.25, 0.75]).unwrap();
        let mut bonuses = BTreeMap::new();
        bonuses.insert("g".to_string(), BonusTerm::for_group_a(25.0));
        bonuses.insert("h".to_string(), BonusTerm::for_complement(3.5));
        vec![
            Policy::Coefficients {
                weights: w.clone(),
                threshold: 41.5,
            },
            Policy::Bonus {
                weights: w.clone(),
                bonuses,
                threshold: 50.0,
            },
            Policy::Quota {
                weights: w,
                attribute: "g".into(),
                quota: 1.0 / 3.0,
                threshold_group_a: 30.0,
                threshold_other: f64::INFINITY,
            },
        ]
    }

    #[test]
    fn round_trips_bit_identically() {
        for policy in sample_policies() {
            let file = PolicyFile::new(policy, vec!["math".into(), "language".into()]);
            let text = file.to_toml().unwrap();
            let parsed = PolicyFile::from_toml(&text).unwrap();
            assert_eq!(parsed, file);
            assert_eq!(parsed.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn rejects_mismatched_weight_count() {
        let text = "kind = \"coefficients\"\nscore_names = [\"x\"]\nweights = [0.5, 0.5]\nthreshold = 1.0\n";
        assert!(matches!(
            PolicyFile::from_toml(text),
            Err(PolicyFileError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_unknown_kind() {
        let text = "kind = \"lottery\"\nscore_names = [\"x\"]\nweights = [1.0]\nthreshold = 1.0\n";
        assert!(PolicyFile::from_toml(text).is_err());
    }
}
