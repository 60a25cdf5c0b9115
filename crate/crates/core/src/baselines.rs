//! Comparison baselines: quantile distribution repair and prefix-fair
//! re-ranking.
//!
//! * [`median_repair`] replaces every score with the mean of the two groups'
//!   inverse CDFs at the candidate's in-group quantile rank, one dimension
//!   at a time. Repaired scores no longer reveal group membership while
//!   in-group score order is preserved per dimension. With exactly two
//!   groups the median of the group quantile values is their mean.
//! * [`fair_rerank`] builds a ranking that keeps each group's internal order
//!   but forces, in every prefix, at least the number of protected
//!   candidates a binomial test at level `alpha` deems plausible for a
//!   target proportion `rho`. The raw per-prefix test is used (no
//!   multiple-testing adjustment): the selection-set comparisons this
//!   baseline supports are insensitive to that adjustment.

use thiserror::Error;

use crate::fit::OutcomeModel;
use crate::metrics::{self, MetricsError};
use crate::model::{dot, EmpiricalDist, ModelError, Population};
use crate::policies::{target_count, PolicyError, Selection, WeightVector};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("parameter {name} = {value} must lie strictly inside (0, 1)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(
        "protected pool exhausted at position {position}: {required} required, {available} left"
    )]
    ProtectedExhausted {
        position: usize,
        required: usize,
        available: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

// ---------------------------------------------------------------------------
// MEDIAN quantile repair
// ---------------------------------------------------------------------------

/// In-group quantile rank with average rank for ties, clipped to (0, 1].
fn quantile_rank(sorted: &[f64], value: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < value);
    let at_or_below = sorted.partition_point(|&v| v <= value);
    // Average of 1-based positions below+1 ..= at_or_below.
    let avg = (below + 1 + at_or_below) as f64 / 2.0;
    (avg / sorted.len() as f64).min(1.0)
}

/// Quantile-matching score repair for one binary attribute.
///
/// For each dimension, a candidate at in-group quantile `beta` receives
/// `(inverse_cdf_a(beta) + inverse_cdf_other(beta)) / 2`. The returned
/// population keeps ids, attributes, and outcomes; score names gain a
/// `repaired_` prefix.
pub fn median_repair(pop: &Population, attr: &str) -> Result<Population, BaselineError> {
    if !pop.has_attribute(attr) {
        return Err(ModelError::UnknownAttribute(attr.to_string()).into());
    }
    let d = pop.dim();
    let mut repaired: Vec<Vec<f64>> = vec![Vec::with_capacity(d); pop.len()];
    for dim in 0..d {
        let collect = |in_group: bool| -> Vec<f64> {
            let mut vals: Vec<f64> = pop
                .candidates()
                .iter()
                .filter(|c| c.attrs[attr] == in_group)
                .map(|c| c.scores[dim])
                .collect();
            vals.sort_by(f64::total_cmp);
            vals
        };
        let sorted_a = collect(true);
        let sorted_other = collect(false);
        let dist_a = EmpiricalDist::from_values(sorted_a.clone())?;
        let dist_other = EmpiricalDist::from_values(sorted_other.clone())?;
        for (idx, cand) in pop.candidates().iter().enumerate() {
            let own = if cand.attrs[attr] {
                &sorted_a
            } else {
                &sorted_other
            };
            let beta = quantile_rank(own, cand.scores[dim]);
            let value = (dist_a.inverse_cdf(beta)? + dist_other.inverse_cdf(beta)?) / 2.0;
            repaired[idx].push(value);
        }
    }
    let renamed: Vec<String> = pop
        .score_names()
        .iter()
        .map(|name| format!("repaired_{name}"))
        .collect();
    Ok(pop.with_scores(repaired)?.with_score_names(renamed)?)
}

// ---------------------------------------------------------------------------
// Prefix-fair re-ranking
// ---------------------------------------------------------------------------

/// Test parameters: significance level `alpha` and target minimum protected
/// proportion `rho`.
#[derive(Debug, Clone, Copy)]
pub struct FairRankingConfig {
    pub alpha: f64,
    pub rho: f64,
}

impl FairRankingConfig {
    pub fn new(alpha: f64, rho: f64) -> Result<Self, BaselineError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BaselineError::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(BaselineError::InvalidParameter {
                name: "rho",
                value: rho,
            });
        }
        Ok(Self { alpha, rho })
    }
}

/// `P(X <= t)` for `X ~ Binomial(trials, p)`, by direct summation of the
/// probability mass terms (log-space recurrence, so long lower tails do not
/// underflow to zero).
pub fn binomial_cdf(t: usize, trials: usize, p: f64) -> f64 {
    if t >= trials {
        return 1.0;
    }
    let log_p = p.ln();
    let log_q = (1.0 - p).ln();
    let mut log_term = trials as f64 * log_q; // P(X = 0)
    let mut sum = log_term.exp();
    for i in 0..t {
        log_term += ((trials - i) as f64 / (i + 1) as f64).ln() + log_p - log_q;
        sum += log_term.exp();
    }
    sum.min(1.0)
}

/// Minimum protected count per prefix length: the smallest `t` with
/// `BinomialCDF(t; r, rho) > alpha`.
pub fn required_protected_table(k: usize, cfg: &FairRankingConfig) -> Vec<usize> {
    (1..=k)
        .map(|r| {
            (0..=r)
                .find(|&t| binomial_cdf(t, r, cfg.rho) > cfg.alpha)
                .unwrap_or(r)
        })
        .collect()
}

/// One position of the produced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub position: usize,
    pub id: u64,
    pub group_a: bool,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct FairRerank {
    pub selection: Selection,
    pub ranking: Vec<RankedEntry>,
    pub required: Vec<usize>,
}

/// Greedy prefix-fair ranking of the top k = round_half_up(theta * N).
///
/// Two score-ordered queues (protected = designated group, non-protected)
/// are merged: whenever the prefix quota is unmet the best remaining
/// protected candidate is emitted, otherwise the best remaining candidate
/// overall (ties by id). The first k form the selection.
pub fn fair_rerank(
    pop: &Population,
    weights: &WeightVector,
    theta: f64,
    attr: &str,
    cfg: &FairRankingConfig,
) -> Result<FairRerank, BaselineError> {
    if !pop.has_attribute(attr) {
        return Err(ModelError::UnknownAttribute(attr.to_string()).into());
    }
    let k = target_count(theta, pop.len())?;
    let required = required_protected_table(k, cfg);

    let queue = |in_group: bool| -> Vec<(u64, f64)> {
        let mut q: Vec<(u64, f64)> = pop
            .candidates()
            .iter()
            .filter(|c| c.attrs[attr] == in_group)
            .map(|c| (c.id, dot(weights.components(), &c.scores)))
            .collect();
        q.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        q
    };
    let protected = queue(true);
    let other = queue(false);

    let mut ranking = Vec::with_capacity(k);
    let (mut pi, mut oi) = (0usize, 0usize);
    let mut protected_taken = 0usize;
    for position in 1..=k {
        let need_protected = protected_taken < required[position - 1];
        let take_protected = if need_protected {
            if pi >= protected.len() {
                return Err(BaselineError::ProtectedExhausted {
                    position,
                    required: required[position - 1],
                    available: protected_taken,
                });
            }
            true
        } else {
            match (protected.get(pi), other.get(oi)) {
                (Some(p), Some(o)) => p.1 > o.1 || (p.1 == o.1 && p.0 < o.0),
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!("k never exceeds the population size"),
            }
        };
        let (id, score, group_a) = if take_protected {
            let entry = protected[pi];
            pi += 1;
            protected_taken += 1;
            (entry.0, entry.1, true)
        } else {
            let entry = other[oi];
            oi += 1;
            (entry.0, entry.1, false)
        };
        ranking.push(RankedEntry {
            position,
            id,
            group_a,
            score,
        });
    }

    let admitted = ranking.iter().map(|e| e.id).collect();
    Ok(FairRerank {
        selection: Selection::from_ids(admitted, pop.len()),
        ranking,
        required,
    })
}

// ---------------------------------------------------------------------------
// Selection comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct SelectionComparison {
    pub equal: bool,
    pub counts_a: (usize, usize),
    pub counts_b: (usize, usize),
    pub group_counts_equal: bool,
    pub symmetric_difference: Vec<u64>,
    pub delta_uos: f64,
    pub delta_dmd: f64,
}

/// Set and metric comparison of two selections over the same population.
pub fn compare_selections(
    a: &Selection,
    b: &Selection,
    pop: &Population,
    attr: &str,
    model: &OutcomeModel,
) -> Result<SelectionComparison, BaselineError> {
    let counts_a = a.group_counts(pop, attr)?;
    let counts_b = b.group_counts(pop, attr)?;
    let symmetric_difference: Vec<u64> = a
        .admitted_ids()
        .symmetric_difference(b.admitted_ids())
        .copied()
        .collect();
    let delta_uos = (metrics::uos(a, pop, model)? - metrics::uos(b, pop, model)?).abs();
    let delta_dmd = (metrics::dmd(a, pop, attr)? - metrics::dmd(b, pop, attr)?).abs();
    Ok(SelectionComparison {
        equal: symmetric_difference.is_empty(),
        counts_a,
        counts_b,
        group_counts_equal: counts_a == counts_b,
        symmetric_difference,
        delta_uos,
        delta_dmd,
    })
}
