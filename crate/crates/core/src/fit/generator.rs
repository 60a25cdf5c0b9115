//! Synthetic population generator.
//!
//! Embodies the causal structure attributes → scores → outcome: group
//! membership is sampled per attribute, scores come from group-conditional
//! truncated normals, and the outcome is the linear model plus Gaussian
//! noise. The outcome is recorded for every generated candidate (the
//! simulator knows the ground truth); [`mask_outcomes`] hides outcomes
//! outside a reference selection for selective-observation experiments.
//!
//! With several attributes, a candidate's per-dimension mean and standard
//! deviation are the averages of the per-attribute group values, so the
//! single-attribute case reduces to the configured distributions exactly.
//! Truncated normals are sampled by rejection; configuration bounds are
//! expected to be wide enough that rejection rates stay negligible.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::model::{dot, Candidate, Population};
use crate::policies::Selection;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Truncated-normal parameters for one score dimension, for the designated
/// group (`*_a`) and its complement (`*_other`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupScoreDist {
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_other: f64,
    pub std_other: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeGen {
    pub name: String,
    /// Probability of membership in the designated group.
    pub prevalence: f64,
    /// One entry per score dimension, aligned with `score_names`.
    pub score_dists: Vec<GroupScoreDist>,
}

/// True outcome model used by the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub alpha0: f64,
    pub alpha: f64,
    /// True coefficients; must be non-negative with unit L1 norm.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Outcome noise standard deviation.
    pub noise_std: f64,
    pub score_names: Vec<String>,
    pub bounds: ScoreBounds,
    pub outcome: OutcomeSpec,
    pub attributes: Vec<AttributeGen>,
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self, FitError> {
        let cfg: GeneratorConfig = toml::from_str(text).map_err(|e| FitError::InvalidConfig {
            field: "config".into(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let fail = |field: &str, msg: String| {
            Err(FitError::InvalidConfig {
                field: field.to_string(),
                msg,
            })
        };
        if self.n < 2 {
            return fail("n", format!("must be >= 2, got {}", self.n));
        }
        if self.score_names.is_empty() {
            return fail("score_names", "at least one score dimension".into());
        }
        let bounds_ok = self.bounds.lo.is_finite()
            && self.bounds.hi.is_finite()
            && self.bounds.lo < self.bounds.hi;
        if !bounds_ok {
            return fail(
                "bounds",
                format!("lo {} must be < hi {}", self.bounds.lo, self.bounds.hi),
            );
        }
        if self.noise_std < 0.0 {
            return fail("noise_std", format!("must be >= 0, got {}", self.noise_std));
        }
        if self.attributes.is_empty() {
            return fail("attributes", "at least one attribute".into());
        }
        let d = self.score_names.len();
        for attr in &self.attributes {
            if !(attr.prevalence > 0.0 && attr.prevalence < 1.0) {
                return fail(
                    "prevalence",
                    format!(
                        "'{}' must lie in (0, 1), got {}",
                        attr.name, attr.prevalence
                    ),
                );
            }
            if attr.score_dists.len() != d {
                return fail(
                    "score_dists",
                    format!(
                        "'{}' has {} entries for {} score dimensions",
                        attr.name,
                        attr.score_dists.len(),
                        d
                    ),
                );
            }
            for dist in &attr.score_dists {
                if dist.std_a <= 0.0 || dist.std_other <= 0.0 {
                    return fail("std", format!("'{}' has a non-positive std", attr.name));
                }
            }
        }
        if self.outcome.coefficients.len() != d {
            return fail(
                "outcome.coefficients",
                format!(
                    "{} coefficients for {} score dimensions",
                    self.outcome.coefficients.len(),
                    d
                ),
            );
        }
        if self.outcome.coefficients.iter().any(|&c| c < 0.0) {
            return fail("outcome.coefficients", "must be non-negative".into());
        }
        let norm: f64 = self.outcome.coefficients.iter().sum();
        if (norm - 1.0).abs() > 1e-9 {
            return fail(
                "outcome.coefficients",
                format!("L1 norm is {norm}, expected 1"),
            );
        }
        if self.outcome.alpha < 0.0 {
            return fail("outcome.alpha", "must be >= 0".into());
        }
        Ok(())
    }
}

const MAX_REJECTIONS: usize = 1_000_000;

fn truncated_normal(
    rng: &mut ChaCha8Rng,
    mean: f64,
    std: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, FitError> {
    let normal = Normal::new(mean, std)
        .map_err(|e| FitError::Sampling(format!("normal({mean}, {std}): {e}")))?;
    for _ in 0..MAX_REJECTIONS {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return Ok(v);
        }
    }
    Err(FitError::Sampling(format!(
        "truncation [{lo}, {hi}] rejected {MAX_REJECTIONS} draws from normal({mean}, {std})"
    )))
}

/// Samples a population from the config. Deterministic given the seed.
pub fn generate_population(cfg: &GeneratorConfig) -> Result<Population, FitError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.score_names.len();

    // Pass 1: memberships for everyone, so a group-emptiness fix does not
    // disturb the score stream.
    let mut memberships: Vec<Vec<bool>> = (0..cfg.n)
        .map(|_| {
            cfg.attributes
                .iter()
                .map(|a| rng.gen_bool(a.prevalence))
                .collect()
        })
        .collect();
    for (ai, _) in cfg.attributes.iter().enumerate() {
        let count = memberships.iter().filter(|m| m[ai]).count();
        if count == 0 {
            memberships.last_mut().unwrap()[ai] = true;
        } else if count == cfg.n {
            memberships.last_mut().unwrap()[ai] = false;
        }
    }

    // Pass 2: scores and outcomes.
    let mut candidates = Vec::with_capacity(cfg.n);
    for (i, member) in memberships.iter().enumerate() {
        let mut scores = Vec::with_capacity(d);
        for j in 0..d {
            let m_attrs = cfg.attributes.len() as f64;
            let (mean_sum, std_sum) = cfg
                .attributes
                .iter()
                .enumerate()
                .map(|(ai, a)| {
                    let dist = &a.score_dists[j];
                    if member[ai] {
                        (dist.mean_a, dist.std_a)
                    } else {
                        (dist.mean_other, dist.std_other)
                    }
                })
                .fold((0.0, 0.0), |(ms, ss), (m, s)| (ms + m, ss + s));
            scores.push(truncated_normal(
                &mut rng,
                mean_sum / m_attrs,
                std_sum / m_attrs,
                cfg.bounds.lo,
                cfg.bounds.hi,
            )?);
        }
        let mut y =
            cfg.outcome.alpha0 + cfg.outcome.alpha * dot(&cfg.outcome.coefficients, &scores);
        if cfg.noise_std > 0.0 {
            let noise =
                Normal::new(0.0, cfg.noise_std).map_err(|e| FitError::Sampling(e.to_string()))?;
            y += noise.sample(&mut rng);
        }
        let attrs: BTreeMap<String, bool> = cfg
            .attributes
            .iter()
            .zip(member)
            .map(|(a, &m)| (a.name.clone(), m))
            .collect();
        candidates.push(Candidate {
            id: i as u64 + 1,
            attrs,
            scores,
            outcome: Some(y),
        });
    }

    Ok(Population::new(
        candidates,
        cfg.attributes.iter().map(|a| a.name.clone()).collect(),
        cfg.score_names.clone(),
    )?)
}

/// Keeps observed outcomes only for the admitted candidates of a reference
/// selection, mimicking data generated under that policy.
pub fn mask_outcomes(pop: &Population, reference: &Selection) -> Population {
    let candidates: Vec<Candidate> = pop
        .candidates()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if !reference.contains(c.id) {
                c.outcome = None;
            }
            c
        })
        .collect();
    Population::new(
        candidates,
        pop.attribute_names().to_vec(),
        pop.score_names().to_vec(),
    )
    .expect("masking outcomes preserves population invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_outcome_model;

    pub(crate) fn base_config(n: usize, seed: u64, noise_std: f64) -> GeneratorConfig {
        GeneratorConfig {
            n,
            seed,
            noise_std,
            score_names: vec!["s1".into(), "s2".into()],
            bounds: ScoreBounds { lo: 0.0, hi: 200.0 },
            outcome: OutcomeSpec {
                alpha0: 5.0,
                alpha: 1.5,
                coefficients: vec![0.6, 0.4],
            },
            attributes: vec![AttributeGen {
                name: "g".into(),
                prevalence: 0.4,
                score_dists: vec![
                    GroupScoreDist {
                        mean_a: 50.0,
                        std_a: 15.0,
                        mean_other: 100.0,
                        std_other: 15.0,
                    },
                    GroupScoreDist {
                        mean_a: 55.0,
                        std_a: 12.0,
                        mean_other: 105.0,
                        std_other: 12.0,
                    },
                ],
            }],
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = base_config(100, 7, 3.0);
        let a = generate_population(&cfg).unwrap();
        let b = generate_population(&cfg).unwrap();
        assert_eq!(a.candidates(), b.candidates());
    }

    #[test]
    fn scores_respect_truncation() {
        let cfg = base_config(500, 11, 0.0);
        let pop = generate_population(&cfg).unwrap();
        for c in pop.candidates() {
            for &s in &c.scores {
                assert!((0.0..=200.0).contains(&s));
            }
        }
    }

    #[test]
    fn shifted_group_means_separate() {
        // Group a shifted -50 on every dimension; the mean gap at N = 10000
        // must exceed 25.
        let cfg = base_config(10_000, 3, 0.0);
        let pop = generate_population(&cfg).unwrap();
        let mean_of = |in_group: bool| {
            let vals: Vec<f64> = pop
                .candidates()
                .iter()
                .filter(|c| c.attrs["g"] == in_group)
                .map(|c| c.scores.iter().sum::<f64>() / c.scores.len() as f64)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        assert!(mean_of(false) - mean_of(true) > 25.0);
    }

    #[test]
    fn noiseless_generation_recovers_truth() {
        let cfg = base_config(300, 19, 0.0);
        let pop = generate_population(&cfg).unwrap();
        let fit = fit_outcome_model(&pop).unwrap();
        assert!((fit.model.alpha0 - 5.0).abs() < 1e-9);
        assert!((fit.model.alpha - 1.5).abs() < 1e-9);
        for (got, want) in fit.model.weights.components().iter().zip([0.6, 0.4]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_config_names_field() {
        let mut cfg = base_config(100, 1, 0.0);
        cfg.n = 0;
        match generate_population(&cfg) {
            Err(FitError::InvalidConfig { field, .. }) => assert_eq!(field, "n"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = base_config(100, 1, 2.0);
        let text = cfg.to_toml();
        let parsed = GeneratorConfig::from_toml(&text).unwrap();
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn mask_outcomes_hides_non_admitted() {
        let cfg = base_config(20, 5, 0.0);
        let pop = generate_population(&cfg).unwrap();
        let ids: std::collections::BTreeSet<u64> = [1u64, 2, 3].into_iter().collect();
        let masked = mask_outcomes(&pop, &Selection::from_ids(ids, pop.len()));
        for c in masked.candidates() {
            assert_eq!(c.outcome.is_some(), c.id <= 3);
        }
    }
}
