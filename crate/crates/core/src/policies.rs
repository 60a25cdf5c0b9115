//! Policy representations, scoring, admission, and threshold calibration.
//!
//! All policies rank candidates by a linear selection score. Calibration to
//! a target fraction `theta` uses one deterministic rule throughout:
//!
//! * the target count is `k = round_half_up(theta * N)`;
//! * candidates are ranked by (selection score descending, id ascending);
//! * the threshold is the k-th ranked score, and exact-k admission follows
//!   the rank order, so the admitted count is `k` even when scores tie at
//!   the threshold.
//!
//! [`calibrate_bonus_binary_search`] calibrates a bonus policy by bisecting
//! the threshold over `[tau, tau + b]`, the interval that is guaranteed to
//! contain the calibrated threshold; a threshold calibrated for a smaller
//! bonus is a valid lower bound and can be supplied as a hint.
//!
//! Policies are immutable values and admission/calibration are pure
//! functions of (policy, population); everything here is safe to evaluate
//! concurrently.

mod file;

pub use file::PolicyFile;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{dot, Candidate, Population};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("weight vector must have at least one component")]
    EmptyWeights,
    #[error("weight component {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight vector L1 norm is {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("policy dimension {policy} does not match candidate dimension {candidate}")]
    DimensionMismatch { policy: usize, candidate: usize },
    #[error("bonus for '{attr}' is negative ({value})")]
    NegativeBonus { attr: String, value: f64 },
    #[error("population lacks attribute '{0}' required by the policy")]
    MissingAttribute(String),
    #[error("theta {theta} must lie in (0, 1]")]
    InvalidTheta { theta: f64 },
    #[error("theta {theta} selects zero candidates out of {n}")]
    ZeroTarget { theta: f64, n: usize },
    #[error("quota fraction {0} outside [0, 1]")]
    InvalidQuota(f64),
    #[error("calibration invariant violated: {0}")]
    CalibrationInvariant(String),
    #[error("policy is not calibrated: {0}")]
    NotCalibrated(String),
    #[error("unsupported policy kind for this operation: {0}")]
    UnsupportedKind(String),
}

/// L1-normalized, non-negative score weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

const WEIGHT_NORM_TOL: f64 = 1e-9;

impl WeightVector {
    /// Validates non-negativity and `|w|_1 == 1` within 1e-9.
    pub fn new(components: Vec<f64>) -> Result<Self, PolicyError> {
        if components.is_empty() {
            return Err(PolicyError::EmptyWeights);
        }
        for (index, &value) in components.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(PolicyError::NegativeWeight { index, value });
            }
        }
        let norm: f64 = components.iter().sum();
        if (norm - 1.0).abs() > WEIGHT_NORM_TOL {
            return Err(PolicyError::NotNormalized { norm });
        }
        Ok(Self(components))
    }

    /// Scales a non-negative raw vector to unit L1 norm.
    pub fn l1_normalized(raw: Vec<f64>) -> Result<Self, PolicyError> {
        if raw.is_empty() {
            return Err(PolicyError::EmptyWeights);
        }
        for (index, &value) in raw.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(PolicyError::NegativeWeight { index, value });
            }
        }
        let norm: f64 = raw.iter().sum();
        if norm <= 0.0 {
            return Err(PolicyError::NotNormalized { norm });
        }
        Ok(Self(raw.into_iter().map(|v| v / norm).collect()))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = PolicyError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.0
    }
}

/// Additive bonus for one attribute, granted to the designated group
/// (`group_a == true`) or to its complement when the designated group turned
/// out to be the advantaged one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusTerm {
    pub amount: f64,
    pub group_a: bool,
}

impl BonusTerm {
    pub fn for_group_a(amount: f64) -> Self {
        Self {
            amount,
            group_a: true,
        }
    }

    pub fn for_complement(amount: f64) -> Self {
        Self {
            amount,
            group_a: false,
        }
    }
}

/// A selection policy with its decision threshold(s).
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Coefficients {
        weights: WeightVector,
        threshold: f64,
    },
    Bonus {
        weights: WeightVector,
        bonuses: BTreeMap<String, BonusTerm>,
        threshold: f64,
    },
    Quota {
        weights: WeightVector,
        attribute: String,
        /// Fraction of the admitted that must come from the designated group.
        quota: f64,
        threshold_group_a: f64,
        threshold_other: f64,
    },
}

impl Policy {
    pub fn weights(&self) -> &WeightVector {
        match self {
            Policy::Coefficients { weights, .. }
            | Policy::Bonus { weights, .. }
            | Policy::Quota { weights, .. } => weights,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Policy::Coefficients { .. } => "coefficients",
            Policy::Bonus { .. } => "bonus",
            Policy::Quota { .. } => "quota",
        }
    }
}

/// Policy parameters before a threshold has been chosen.
#[derive(Debug, Clone)]
pub enum PolicyForm {
    Coefficients {
        weights: WeightVector,
    },
    Bonus {
        weights: WeightVector,
        bonuses: BTreeMap<String, BonusTerm>,
    },
}

impl PolicyForm {
    pub fn coefficients(weights: WeightVector) -> Self {
        PolicyForm::Coefficients { weights }
    }

    pub fn single_bonus(weights: WeightVector, attr: impl Into<String>, term: BonusTerm) -> Self {
        let mut bonuses = BTreeMap::new();
        bonuses.insert(attr.into(), term);
        PolicyForm::Bonus { weights, bonuses }
    }

    pub fn weights(&self) -> &WeightVector {
        match self {
            PolicyForm::Coefficients { weights } | PolicyForm::Bonus { weights, .. } => weights,
        }
    }

    fn bonuses(&self) -> Option<&BTreeMap<String, BonusTerm>> {
        match self {
            PolicyForm::Coefficients { .. } => None,
            PolicyForm::Bonus { bonuses, .. } => Some(bonuses),
        }
    }

    fn validate(&self, pop: &Population) -> Result<(), PolicyError> {
        if self.weights().dim() != pop.dim() {
            return Err(PolicyError::DimensionMismatch {
                policy: self.weights().dim(),
                candidate: pop.dim(),
            });
        }
        if let Some(bonuses) = self.bonuses() {
            for (attr, term) in bonuses {
                if term.amount < 0.0 {
                    return Err(PolicyError::NegativeBonus {
                        attr: attr.clone(),
                        value: term.amount,
                    });
                }
                if !pop.has_attribute(attr) {
                    return Err(PolicyError::MissingAttribute(attr.clone()));
                }
            }
        }
        Ok(())
    }

    fn with_threshold(&self, threshold: f64) -> Policy {
        match self {
            PolicyForm::Coefficients { weights } => Policy::Coefficients {
                weights: weights.clone(),
                threshold,
            },
            PolicyForm::Bonus { weights, bonuses } => Policy::Bonus {
                weights: weights.clone(),
                bonuses: bonuses.clone(),
                threshold,
            },
        }
    }
}

/// The outcome of an admission round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    admitted: BTreeSet<u64>,
    k: usize,
    theta_effective: f64,
}

impl Selection {
    pub fn from_ids(admitted: BTreeSet<u64>, population_size: usize) -> Self {
        let k = admitted.len();
        Self {
            admitted,
            k,
            theta_effective: k as f64 / population_size as f64,
        }
    }

    pub fn admitted_ids(&self) -> &BTreeSet<u64> {
        &self.admitted
    }

    pub fn contains(&self, id: u64) -> bool {
        self.admitted.contains(&id)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta_effective(&self) -> f64 {
        self.theta_effective
    }

    /// Admitted counts (designated group, complement) for one attribute.
    pub fn group_counts(
        &self,
        pop: &Population,
        attr: &str,
    ) -> Result<(usize, usize), PolicyError> {
        if !pop.has_attribute(attr) {
            return Err(PolicyError::MissingAttribute(attr.to_string()));
        }
        let mut in_group = 0usize;
        let mut other = 0usize;
        for cand in pop.candidates() {
            if self.contains(cand.id) {
                if cand.attrs[attr] {
                    in_group += 1;
                } else {
                    other += 1;
                }
            }
        }
        Ok((in_group, other))
    }
}

fn bonus_for(cand: &Candidate, bonuses: &BTreeMap<String, BonusTerm>) -> f64 {
    bonuses
        .iter()
        .filter(|(attr, term)| cand.attrs.get(*attr).copied() == Some(term.group_a))
        .map(|(_, term)| term.amount)
        .sum()
}

/// Selection score of one candidate under a policy.
///
/// Coefficients and Quota score `w·x`; Bonus adds the per-attribute bonus
/// for every attribute whose favored group contains the candidate.
pub fn selection_score(policy: &Policy, cand: &Candidate) -> Result<f64, PolicyError> {
    if policy.weights().dim() != cand.scores.len() {
        return Err(PolicyError::DimensionMismatch {
            policy: policy.weights().dim(),
            candidate: cand.scores.len(),
        });
    }
    let base = dot(policy.weights().components(), &cand.scores);
    Ok(match policy {
        Policy::Bonus { bonuses, .. } => base + bonus_for(cand, bonuses),
        _ => base,
    })
}

fn form_score(form: &PolicyForm, cand: &Candidate) -> f64 {
    let base = dot(form.weights().components(), &cand.scores);
    match form.bonuses() {
        Some(bonuses) => base + bonus_for(cand, bonuses),
        None => base,
    }
}

/// Threshold admission: everyone whose selection score reaches the
/// applicable threshold is admitted. Under score ties at the threshold the
/// admitted count may exceed the calibration target; exact-k admission is
/// what [`calibrate_topk`] returns.
pub fn admit(policy: &Policy, pop: &Population) -> Result<Selection, PolicyError> {
    let mut admitted = BTreeSet::new();
    match policy {
        Policy::Coefficients { threshold, .. } | Policy::Bonus { threshold, .. } => {
            for cand in pop.candidates() {
                if selection_score(policy, cand)? >= *threshold {
                    admitted.insert(cand.id);
                }
            }
        }
        Policy::Quota {
            attribute,
            threshold_group_a,
            threshold_other,
            ..
        } => {
            if !pop.has_attribute(attribute) {
                return Err(PolicyError::MissingAttribute(attribute.clone()));
            }
            for cand in pop.candidates() {
                let score = selection_score(policy, cand)?;
                let tau = if cand.attrs[attribute] {
                    *threshold_group_a
                } else {
                    *threshold_other
                };
                if score >= tau {
                    admitted.insert(cand.id);
                }
            }
        }
    }
    Ok(Selection::from_ids(admitted, pop.len()))
}

/// Calibration target `k = round_half_up(theta * N)`.
pub fn target_count(theta: f64, n: usize) -> Result<usize, PolicyError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(PolicyError::InvalidTheta { theta });
    }
    let k = (theta * n as f64).round() as usize;
    if k == 0 {
        return Err(PolicyError::ZeroTarget { theta, n });
    }
    Ok(k.min(n))
}

/// Ids with scores, ranked by (score descending, id ascending).
fn ranked(form: &PolicyForm, pop: &Population) -> Vec<(u64, f64)> {
    let mut scored: Vec<(u64, f64)> = pop
        .candidates()
        .iter()
        .map(|c| (c.id, form_score(form, c)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// A policy together with the exact-k selection its calibration produced.
#[derive(Debug, Clone)]
pub struct CalibratedPolicy {
    pub policy: Policy,
    pub selection: Selection,
}

impl CalibratedPolicy {
    pub fn threshold(&self) -> f64 {
        match self.policy {
            Policy::Coefficients { threshold, .. } | Policy::Bonus { threshold, .. } => threshold,
            Policy::Quota { .. } => unreachable!("calibrate_topk never builds quota policies"),
        }
    }
}

/// Calibrates a Coefficients or Bonus policy to admit exactly
/// `round_half_up(theta * N)` candidates.
///
/// The threshold is set to the k-th ranked selection score; the returned
/// selection follows the rank order, so it has exactly k members even when
/// scores tie at the threshold.
pub fn calibrate_topk(
    form: &PolicyForm,
    pop: &Population,
    theta: f64,
) -> Result<CalibratedPolicy, PolicyError> {
    form.validate(pop)?;
    let k = target_count(theta, pop.len())?;
    let scored = ranked(form, pop);
    let threshold = scored[k - 1].1;
    let admitted: BTreeSet<u64> = scored[..k].iter().map(|(id, _)| *id).collect();
    Ok(CalibratedPolicy {
        policy: form.with_threshold(threshold),
        selection: Selection::from_ids(admitted, pop.len()),
    })
}

/// Binary-search calibration of a single-attribute bonus policy.
///
/// Bisects over the score values inside `[max(tau_base, tau_hint),
/// tau_base + b]` for the largest threshold admitting at least k candidates.
/// `tau_base` is the calibrated Coefficients threshold for the same weights;
/// `tau_hint`, when given, must be the calibrated threshold of a smaller
/// bonus and narrows the interval without changing the result.
///
/// Returns the threshold, which always equals the k-th ranked bonus-adjusted
/// score; if no threshold in the interval admits at least k candidates the
/// search-interval invariant is broken and an internal error is reported.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_bonus_binary_search(
    weights: &WeightVector,
    attr: &str,
    group_a: bool,
    b: f64,
    pop: &Population,
    theta: f64,
    tau_base: f64,
    tau_hint: Option<f64>,
) -> Result<f64, PolicyError> {
    if b < 0.0 {
        return Err(PolicyError::NegativeBonus {
            attr: attr.to_string(),
            value: b,
        });
    }
    let form = PolicyForm::single_bonus(weights.clone(), attr, BonusTerm { amount: b, group_a });
    form.validate(pop)?;
    let k = target_count(theta, pop.len())?;
    let n = pop.len();

    let mut sorted: Vec<f64> = pop
        .candidates()
        .iter()
        .map(|c| form_score(&form, c))
        .collect();
    sorted.sort_by(f64::total_cmp);

    let lo = tau_hint.map_or(tau_base, |h| h.max(tau_base));
    let hi = tau_base + b;
    let lo_idx = sorted.partition_point(|&v| v < lo);
    let hi_idx = sorted.partition_point(|&v| v <= hi);
    let admits_k = |idx: usize| n - sorted.partition_point(|&v| v < sorted[idx]) >= k;
    if lo_idx >= hi_idx || !admits_k(lo_idx) {
        return Err(PolicyError::CalibrationInvariant(format!(
            "no threshold in [{lo}, {hi}] admits {k} candidates"
        )));
    }
    let (mut lo_i, mut hi_i) = (lo_idx, hi_idx - 1);
    while lo_i < hi_i {
        let mid = (lo_i + hi_i).div_ceil(2);
        if admits_k(mid) {
            lo_i = mid;
        } else {
            hi_i = mid - 1;
        }
    }
    let tau_b = sorted[lo_i];
    let kth = sorted[n - k];
    if tau_b != kth {
        return Err(PolicyError::CalibrationInvariant(format!(
            "binary-search threshold {tau_b} differs from the k-th ranked score {kth}"
        )));
    }
    Ok(tau_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::pop6;

    fn w1() -> WeightVector {
        WeightVector::new(vec![1.0]).unwrap()
    }

    fn ids(selection: &Selection) -> Vec<u64> {
        selection.admitted_ids().iter().copied().collect()
    }

    #[test]
    fn weight_vector_invariants() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            WeightVector::new(vec![0.5, 0.4]),
            Err(PolicyError::NotNormalized { .. })
        ));
        assert!(matches!(
            WeightVector::new(vec![1.5, -0.5]),
            Err(PolicyError::NegativeWeight { index: 1, .. })
        ));
        let w = WeightVector::l1_normalized(vec![2.0, 6.0]).unwrap();
        assert_eq!(w.components(), &[0.25, 0.75]);
    }

    #[test]
    fn selection_score_examples() {
        let pop = pop6();
        let coeff = Policy::Coefficients {
            weights: w1(),
            threshold: 0.0,
        };
        assert_eq!(
            selection_score(&coeff, pop.candidate_by_id(4).unwrap()).unwrap(),
            40.0
        );
        let mut bonuses = BTreeMap::new();
        bonuses.insert("g".to_string(), BonusTerm::for_group_a(25.0));
        let bonus = Policy::Bonus {
            weights: w1(),
            bonuses,
            threshold: 0.0,
        };
        assert_eq!(
            selection_score(&bonus, pop.candidate_by_id(1).unwrap()).unwrap(),
            35.0
        );
        assert_eq!(
            selection_score(&bonus, pop.candidate_by_id(4).unwrap()).unwrap(),
            40.0
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let pop = pop6();
        let coeff = Policy::Coefficients {
            weights: WeightVector::new(vec![0.5, 0.5]).unwrap(),
            threshold: 0.0,
        };
        assert!(matches!(
            selection_score(&coeff, pop.candidate_by_id(1).unwrap()),
            Err(PolicyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn admit_by_threshold() {
        let pop = pop6();
        let coeff = Policy::Coefficients {
            weights: w1(),
            threshold: 40.0,
        };
        assert_eq!(ids(&admit(&coeff, &pop).unwrap()), vec![4, 5, 6]);

        let mut bonuses = BTreeMap::new();
        bonuses.insert("g".to_string(), BonusTerm::for_group_a(25.0));
        let bonus = Policy::Bonus {
            weights: w1(),
            bonuses,
            threshold: 50.0,
        };
        // adjusted scores: a {35, 45, 55}, other {40, 50, 60}
        assert_eq!(ids(&admit(&bonus, &pop).unwrap()), vec![3, 5, 6]);

        let everyone = Policy::Coefficients {
            weights: w1(),
            threshold: f64::NEG_INFINITY,
        };
        assert_eq!(admit(&everyone, &pop).unwrap().k(), 6);
    }

    #[test]
    fn calibrate_topk_examples() {
        let pop = pop6();
        let coeff = PolicyForm::coefficients(w1());
        let cal = calibrate_topk(&coeff, &pop, 0.5).unwrap();
        assert_eq!(cal.threshold(), 40.0);
        assert_eq!(ids(&cal.selection), vec![4, 5, 6]);

        let all = calibrate_topk(&coeff, &pop, 1.0).unwrap();
        assert_eq!(all.threshold(), 10.0);
        assert_eq!(all.selection.k(), 6);

        // b = 30 makes both groups {40, 50, 60}; the 50-tie between ids 2
        // and 5 goes to id 2.
        let bonus = PolicyForm::single_bonus(w1(), "g", BonusTerm::for_group_a(30.0));
        let cal = calibrate_topk(&bonus, &pop, 0.5).unwrap();
        assert_eq!(ids(&cal.selection), vec![2, 3, 6]);
        assert_eq!(cal.threshold(), 50.0);
    }

    #[test]
    fn calibrate_topk_zero_target() {
        let pop = pop6();
        let coeff = PolicyForm::coefficients(w1());
        assert!(matches!(
            calibrate_topk(&coeff, &pop, 0.05),
            Err(PolicyError::ZeroTarget { .. })
        ));
        assert!(matches!(
            calibrate_topk(&coeff, &pop, 1.5),
            Err(PolicyError::InvalidTheta { .. })
        ));
    }

    #[test]
    fn round_half_up_target() {
        assert_eq!(target_count(0.25, 10).unwrap(), 3); // 2.5 rounds up
        assert_eq!(target_count(0.5, 6).unwrap(), 3);
        assert_eq!(target_count(1.0, 6).unwrap(), 6);
    }

    #[test]
    fn binary_search_matches_kth_ranked_score() {
        let pop = pop6();
        let tau_base = 40.0;
        for (b, expected) in [(0.0, 40.0), (25.0, 50.0), (30.0, 50.0)] {
            let tau = calibrate_bonus_binary_search(&w1(), "g", true, b, &pop, 0.5, tau_base, None)
                .unwrap();
            assert_eq!(tau, expected, "b = {b}");
        }
    }

    #[test]
    fn binary_search_hint_is_pure_optimization() {
        let pop = pop6();
        let tau_small =
            calibrate_bonus_binary_search(&w1(), "g", true, 12.0, &pop, 0.5, 40.0, None).unwrap();
        let without =
            calibrate_bonus_binary_search(&w1(), "g", true, 25.0, &pop, 0.5, 40.0, None).unwrap();
        let with =
            calibrate_bonus_binary_search(&w1(), "g", true, 25.0, &pop, 0.5, 40.0, Some(tau_small))
                .unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn bonus_zero_equals_coefficients() {
        let pop = pop6();
        let coeff = calibrate_topk(&PolicyForm::coefficients(w1()), &pop, 0.5).unwrap();
        let bonus = calibrate_topk(
            &PolicyForm::single_bonus(w1(), "g", BonusTerm::for_group_a(0.0)),
            &pop,
            0.5,
        )
        .unwrap();
        assert_eq!(coeff.selection, bonus.selection);
        assert_eq!(coeff.threshold(), bonus.threshold());
    }
}
