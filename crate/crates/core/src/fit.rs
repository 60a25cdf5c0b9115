//! Outcome-model fitting and synthetic population generation.
//!
//! The outcome model is the linear expectation `m(x) = alpha0 + alpha * c·x`
//! with `c` an L1-normalized non-negative weight vector. It is fitted by
//! ordinary least squares of the observed outcomes on the input scores,
//! restricted to candidates whose outcome was recorded. Negative OLS slopes
//! are clipped to zero before normalization (admission weights are
//! non-negative shares by convention); every clipped component is reported.

mod generator;

pub use generator::{
    generate_population, mask_outcomes, AttributeGen, GeneratorConfig, GroupScoreDist, OutcomeSpec,
    ScoreBounds,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{dot, Population};
use crate::policies::{PolicyError, WeightVector};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} candidates with observed outcomes, found {found}")]
    InsufficientOutcomes { needed: usize, found: usize },
    #[error("design matrix is rank-deficient (rank {rank} < {dim})")]
    RankDeficient { rank: usize, dim: usize },
    #[error("least-squares solve failed")]
    SolveFailed,
    #[error("no non-negative signal: every fitted slope is negative")]
    NoNonNegativeSignal,
    #[error("invalid generator config field '{field}': {msg}")]
    InvalidConfig { field: String, msg: String },
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Linear expected-performance model `m(x) = alpha0 + alpha * c·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub alpha0: f64,
    /// Scale factor, `>= 0`.
    pub alpha: f64,
    /// Normalized score weights `c`.
    pub weights: WeightVector,
}

impl OutcomeModel {
    pub fn predict(&self, scores: &[f64]) -> f64 {
        self.alpha0 + self.alpha * dot(self.weights.components(), scores)
    }
}

/// Fit result: the factorized model plus the names of any score dimensions
/// whose negative OLS slope was clipped to zero.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: OutcomeModel,
    pub clipped: Vec<String>,
}

/// Ordinary least squares of outcome on scores over the outcome-observed
/// candidates, factorized into `(alpha0, alpha, c)`.
///
/// Requires at least `d + 2` observed outcomes and a full-column-rank score
/// matrix. Columns are centered before the solve; the intercept is
/// recovered from the means.
pub fn fit_outcome_model(pop: &Population) -> Result<FitOutcome, FitError> {
    let d = pop.dim();
    let observed: Vec<(&[f64], f64)> = pop
        .candidates()
        .iter()
        .filter_map(|c| c.outcome.map(|y| (c.scores.as_slice(), y)))
        .collect();
    let n = observed.len();
    if n < d + 2 {
        return Err(FitError::InsufficientOutcomes {
            needed: d + 2,
            found: n,
        });
    }

    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for (x, y) in &observed {
        for (m, v) in x_mean.iter_mut().zip(*x) {
            *m += v;
        }
        y_mean += y;
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    y_mean /= n as f64;

    let xc = DMatrix::from_fn(n, d, |i, j| observed[i].0[j] - x_mean[j]);
    let yc = DVector::from_fn(n, |i, _| observed[i].1 - y_mean);

    let svd = xc.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * 1e-12 * (n.max(d) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < d {
        return Err(FitError::RankDeficient { rank, dim: d });
    }
    let slopes = svd.solve(&yc, eps).map_err(|_| FitError::SolveFailed)?;
    let intercept = y_mean - slopes.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();

    let mut clipped = Vec::new();
    let mut relu = Vec::with_capacity(d);
    for (j, &b) in slopes.iter().enumerate() {
        if b < 0.0 {
            clipped.push(pop.score_names()[j].clone());
            relu.push(0.0);
        } else {
            relu.push(b);
        }
    }
    let alpha: f64 = relu.iter().sum();
    if alpha <= 0.0 {
        return Err(FitError::NoNonNegativeSignal);
    }
    let weights = WeightVector::l1_normalized(relu)?;
    Ok(FitOutcome {
        model: OutcomeModel {
            alpha0: intercept,
            alpha,
            weights,
        },
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Candidate;
    use std::collections::BTreeMap;

    fn pop_with_outcomes(rows: &[(f64, f64)]) -> Population {
        // One binary attribute just to satisfy the population invariant.
        let candidates = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let mut attrs = BTreeMap::new();
                attrs.insert("g".to_string(), i % 2 == 0);
                Candidate {
                    id: i as u64 + 1,
                    attrs,
                    scores: vec![x],
                    outcome: Some(y),
                }
            })
            .collect();
        Population::new(candidates, vec!["g".to_string()], vec!["x".to_string()]).unwrap()
    }

    #[test]
    fn exact_line_fit() {
        let pop = pop_with_outcomes(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]);
        let fit = fit_outcome_model(&pop).unwrap();
        assert!((fit.model.alpha0 - 1.0).abs() < 1e-12);
        assert!((fit.model.alpha - 2.0).abs() < 1e-12);
        assert_eq!(fit.model.weights.components(), &[1.0]);
        assert!(fit.clipped.is_empty());
    }

    #[test]
    fn factorization_reproduces_raw_prediction() {
        let pop = pop_with_outcomes(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0), (4.0, 9.0)]);
        let fit = fit_outcome_model(&pop).unwrap();
        for x in [0.0, 1.5, 10.0] {
            let raw = 1.0 + 2.0 * x;
            assert!((fit.model.predict(&[x]) - raw).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_slope_is_rejected_when_nothing_remains() {
        let pop = pop_with_outcomes(&[(1.0, 7.0), (2.0, 5.0), (3.0, 3.0)]);
        assert!(matches!(
            fit_outcome_model(&pop),
            Err(FitError::NoNonNegativeSignal)
        ));
    }

    #[test]
    fn insufficient_outcomes() {
        let pop = pop_with_outcomes(&[(1.0, 3.0), (2.0, 5.0)]);
        assert!(matches!(
            fit_outcome_model(&pop),
            Err(FitError::InsufficientOutcomes {
                needed: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn rank_deficient_design() {
        // Two identical columns.
        let candidates = (0..6u64)
            .map(|i| {
                let mut attrs = BTreeMap::new();
                attrs.insert("g".to_string(), i % 2 == 0);
                let x = i as f64;
                Candidate {
                    id: i + 1,
                    attrs,
                    scores: vec![x, x],
                    outcome: Some(2.0 * x + 1.0),
                }
            })
            .collect();
        let pop = Population::new(
            candidates,
            vec!["g".to_string()],
            vec!["x1".to_string(), "x2".to_string()],
        )
        .unwrap();
        assert!(matches!(
            fit_outcome_model(&pop),
            Err(FitError::RankDeficient { .. })
        ));
    }
}
