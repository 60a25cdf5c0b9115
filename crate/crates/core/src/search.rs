//! Policy search.
//!
//! * [`search_coefficients`] — grid-like rotation search over score weights:
//!   starting from the fitted coefficients, the weight vector is rotated by
//!   small increments in configured coordinate planes, renormalized, and the
//!   recalibrated policy is scored after every step.
//! * [`b_dmd`] — upper end of the bonus interval worth searching: the gap
//!   between the advantaged and disadvantaged groups' `(1 - theta)`-quantile
//!   scores, which is the bonus equalizing the two admission rates.
//! * [`search_bonus`] — grid search for the best bonus in `[0, b_dmd]`,
//!   calibrating each grid point by binary search seeded with the previous
//!   threshold (thresholds are monotone in the bonus).
//! * [`bonus_to_quota`] / [`quota_to_bonus`] — exact conversion between the
//!   two policy families; both admit the same candidates.
//! * [`search_bonus_multi`] — greedy incremental bonus assignment for
//!   several sensitive attributes.
//!
//! Every search returns calibrated policies (exact-k admission) and breaks
//! objective ties toward the earliest evaluation, so results do not depend
//! on evaluation order.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fit::OutcomeModel;
use crate::metrics::{self, EvalReport, MetricsError};
use crate::model::{dot, group_score_dist, ModelError, Population};
use crate::policies::{
    calibrate_bonus_binary_search, calibrate_topk, target_count, BonusTerm, CalibratedPolicy,
    Policy, PolicyError, PolicyForm, Selection, WeightVector,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("rotation requires at least 2 score dimensions, population has {0}")]
    DimensionTooSmall(usize),
    #[error("rotation direction ({i}, {j}) invalid for dimension {dim}")]
    InvalidDirection { i: usize, j: usize, dim: usize },
    #[error(
        "step angle {angle} and steps {steps} must satisfy angle > 0 and angle * steps < pi/2"
    )]
    InvalidRotation { angle: f64, steps: usize },
    #[error("grid granularity must be at least 1")]
    ZeroGranularity,
    #[error("greedy increment must be positive, got {0}")]
    InvalidIncrement(f64),
    #[error("greedy max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error(
        "no bonus admits {target_a} from the designated group and {target_other} from the \
         complement; nearest achievable is ({nearest_a}, {nearest_other})"
    )]
    TargetUnreachable {
        target_a: usize,
        target_other: usize,
        nearest_a: usize,
        nearest_other: usize,
    },
    #[error("expected a single-attribute {expected} policy, found {found}")]
    WrongPolicyKind {
        expected: &'static str,
        found: String,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Coefficients search (rotation grid)
// ---------------------------------------------------------------------------

/// Rotation schedule: coordinate planes `(i, j)` (ordered pairs, so both
/// orientations are expressible), a step angle, and the number of
/// successive steps per direction.
#[derive(Debug, Clone)]
pub struct RotationPlan {
    directions: Vec<(usize, usize)>,
    step_angle: f64,
    steps: usize,
}

impl RotationPlan {
    pub fn new(
        directions: Vec<(usize, usize)>,
        step_angle: f64,
        steps: usize,
    ) -> Result<Self, SearchError> {
        if directions.iter().any(|&(i, j)| i == j) {
            let &(i, j) = directions.iter().find(|&&(i, j)| i == j).unwrap();
            return Err(SearchError::InvalidDirection { i, j, dim: 0 });
        }
        // Keep the cumulative rotation short of a quarter turn so the
        // clamped weights stay renormalizable.
        let angle_ok = step_angle.is_finite() && step_angle > 0.0;
        if !angle_ok || step_angle * steps as f64 >= std::f64::consts::FRAC_PI_2 {
            return Err(SearchError::InvalidRotation {
                angle: step_angle,
                steps,
            });
        }
        Ok(Self {
            directions,
            step_angle,
            steps,
        })
    }

    /// Every ordered coordinate pair of a d-dimensional weight vector.
    pub fn coordinate_pairs(
        dim: usize,
        step_angle: f64,
        steps: usize,
    ) -> Result<Self, SearchError> {
        let mut directions = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    directions.push((i, j));
                }
            }
        }
        Self::new(directions, step_angle, steps)
    }

    pub fn directions(&self) -> &[(usize, usize)] {
        &self.directions
    }

    pub fn step_angle(&self) -> f64 {
        self.step_angle
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// One evaluated weight vector in the rotation grid.
#[derive(Debug, Clone)]
pub struct CoefficientsPoint {
    /// `None` for the starting point `w = c`.
    pub direction: Option<(usize, usize)>,
    pub step: usize,
    /// Cumulative rotation angle within the direction.
    pub angle: f64,
    pub weights: Vec<f64>,
    pub uos: f64,
    pub dmd: BTreeMap<String, f64>,
    pub phi: f64,
}

#[derive(Debug)]
pub struct CoefficientsSearch {
    pub policy: Policy,
    pub report: EvalReport,
    pub trace: Vec<CoefficientsPoint>,
}

fn givens(v: &mut [f64], i: usize, j: usize, angle: f64) {
    let (sin, cos) = angle.sin_cos();
    let (a, b) = (v[i], v[j]);
    v[i] = a * cos - b * sin;
    v[j] = a * sin + b * cos;
}

fn clamp_normalize(raw: &[f64]) -> Result<WeightVector, PolicyError> {
    let clamped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    WeightVector::l1_normalized(clamped)
}

/// Rotation search for score weights (starts at the fitted coefficients).
///
/// For each direction the weight vector is rotated step by step; after each
/// step negative components are clamped to zero, the vector is
/// L1-renormalized, the threshold is recalibrated, and the objective is
/// evaluated. Returns the best policy seen including the start; ties go to
/// the earliest evaluation.
pub fn search_coefficients(
    pop: &Population,
    model: &OutcomeModel,
    theta: f64,
    lambda: &BTreeMap<String, f64>,
    plan: &RotationPlan,
) -> Result<CoefficientsSearch, SearchError> {
    let dim = pop.dim();
    if !plan.directions.is_empty() && dim < 2 {
        return Err(SearchError::DimensionTooSmall(dim));
    }
    for &(i, j) in &plan.directions {
        if i >= dim || j >= dim {
            return Err(SearchError::InvalidDirection { i, j, dim });
        }
    }

    let evaluate_weights =
        |weights: WeightVector| -> Result<(CalibratedPolicy, EvalReport), SearchError> {
            let cal = calibrate_topk(&PolicyForm::coefficients(weights), pop, theta)?;
            let report = metrics::evaluate(&cal.selection, pop, model, lambda)?;
            Ok((cal, report))
        };

    let start = model.weights.clone();
    let (start_cal, start_report) = evaluate_weights(start.clone())?;
    let mut trace = vec![CoefficientsPoint {
        direction: None,
        step: 0,
        angle: 0.0,
        weights: start.components().to_vec(),
        uos: start_report.uos,
        dmd: start_report.dmd.clone(),
        phi: start_report.objective,
    }];
    let mut best = (start_cal, start_report);

    for &(i, j) in &plan.directions {
        // The raw vector accumulates the rotation; clamping applies only to
        // the evaluated candidate so step s sits at angle s * step_angle.
        let mut raw = start.components().to_vec();
        for step in 1..=plan.steps {
            givens(&mut raw, i, j, plan.step_angle);
            let weights = clamp_normalize(&raw)?;
            let (cal, report) = evaluate_weights(weights.clone())?;
            trace.push(CoefficientsPoint {
                direction: Some((i, j)),
                step,
                angle: plan.step_angle * step as f64,
                weights: weights.components().to_vec(),
                uos: report.uos,
                dmd: report.dmd.clone(),
                phi: report.objective,
            });
            if report.objective > best.1.objective {
                best = (cal, report);
            }
        }
    }

    Ok(CoefficientsSearch {
        policy: best.0.policy,
        report: best.1,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Bonus range and grid search
// ---------------------------------------------------------------------------

/// The bonus interval endpoint `h(1 - theta) - g(1 - theta)`, where `g` and
/// `h` are the disadvantaged and advantaged groups' inverse score CDFs under
/// the calibrated Coefficients policy.
#[derive(Debug, Clone, Copy)]
pub struct BonusRange {
    pub value: f64,
    /// True when the designated group turned out to be advantaged, so the
    /// roles were swapped and a bonus would go to the complement group.
    pub swapped: bool,
}

fn disadvantage(
    pop: &Population,
    weights: &WeightVector,
    theta: f64,
    attr: &str,
) -> Result<(CalibratedPolicy, bool), SearchError> {
    let base = calibrate_topk(&PolicyForm::coefficients(weights.clone()), pop, theta)?;
    let disparity = metrics::dmd(&base.selection, pop, attr)?;
    Ok((base, disparity > 0.0))
}

/// Bonus range for one attribute. If the designated group is actually
/// advantaged under the calibrated Coefficients policy, the roles are
/// swapped internally and the result is flagged.
pub fn b_dmd(
    pop: &Population,
    weights: &WeightVector,
    theta: f64,
    attr: &str,
) -> Result<BonusRange, SearchError> {
    let (_, swapped) = disadvantage(pop, weights, theta, attr)?;
    let beta = 1.0 - theta;
    if beta <= 0.0 {
        // theta = 1 admits everyone; no bonus can change anything.
        return Ok(BonusRange {
            value: 0.0,
            swapped,
        });
    }
    let disadvantaged_is_a = !swapped;
    let g = group_score_dist(pop, attr, disadvantaged_is_a, weights.components())?;
    let h = group_score_dist(pop, attr, !disadvantaged_is_a, weights.components())?;
    let value = (h.inverse_cdf(beta)? - g.inverse_cdf(beta)?).max(0.0);
    Ok(BonusRange { value, swapped })
}

/// Grid search configuration: grid granularity and the objective's lambda
/// map.
#[derive(Debug, Clone)]
pub struct BonusSearchConfig {
    pub grid_k: usize,
    pub lambda: BTreeMap<String, f64>,
}

/// One evaluated grid point of the bonus search.
#[derive(Debug, Clone)]
pub struct BonusPoint {
    pub bonus: f64,
    pub threshold: f64,
    pub uos: f64,
    pub dmd: BTreeMap<String, f64>,
    pub phi: f64,
}

#[derive(Debug)]
pub struct BonusSearch {
    pub policy: Policy,
    pub report: EvalReport,
    /// Which side receives the bonus (true = designated group).
    pub favored_group_a: bool,
    /// Set when the designated group was advantaged and roles were swapped.
    pub swapped: bool,
    pub b_dmd: f64,
    /// True when `b_dmd == 0`: no disparity to repair, the b = 0 policy is
    /// returned.
    pub degenerate: bool,
    pub grid: Vec<BonusPoint>,
}

/// Grid search for the best single-attribute bonus.
///
/// Fixes the score weights to the fitted coefficients (an optimal bonus
/// policy exists with those weights), evaluates `b` over the uniform grid
/// `{0, eps, ..., b_dmd}` with `eps = b_dmd / grid_k`, and calibrates each
/// point by binary search hinted with the previous threshold. Returns the
/// argmax of the objective, earliest grid index on ties.
pub fn search_bonus(
    pop: &Population,
    model: &OutcomeModel,
    theta: f64,
    attr: &str,
    cfg: &BonusSearchConfig,
) -> Result<BonusSearch, SearchError> {
    if cfg.grid_k == 0 {
        return Err(SearchError::ZeroGranularity);
    }
    let weights = model.weights.clone();
    let (base, swapped) = disadvantage(pop, &weights, theta, attr)?;
    let favored_group_a = !swapped;
    let range = b_dmd(pop, &weights, theta, attr)?;
    let tau_base = base.threshold();

    let evaluate_bonus =
        |b: f64, hint: Option<f64>| -> Result<(f64, CalibratedPolicy, EvalReport), SearchError> {
            let tau = calibrate_bonus_binary_search(
                &weights,
                attr,
                favored_group_a,
                b,
                pop,
                theta,
                tau_base,
                hint,
            )?;
            let form = PolicyForm::single_bonus(
                weights.clone(),
                attr,
                BonusTerm {
                    amount: b,
                    group_a: favored_group_a,
                },
            );
            let cal = calibrate_topk(&form, pop, theta)?;
            debug_assert_eq!(cal.threshold(), tau);
            let report = metrics::evaluate(&cal.selection, pop, model, &cfg.lambda)?;
            Ok((tau, cal, report))
        };

    let (tau0, cal0, report0) = evaluate_bonus(0.0, None)?;
    let mut grid = vec![BonusPoint {
        bonus: 0.0,
        threshold: tau0,
        uos: report0.uos,
        dmd: report0.dmd.clone(),
        phi: report0.objective,
    }];
    let mut best = (0usize, cal0, report0);

    let degenerate = range.value <= 0.0;
    if !degenerate {
        let eps = range.value / cfg.grid_k as f64;
        let mut prev_tau = tau0;
        for i in 1..=cfg.grid_k {
            let b = if i == cfg.grid_k {
                range.value
            } else {
                i as f64 * eps
            };
            let (tau, cal, report) = evaluate_bonus(b, Some(prev_tau))?;
            prev_tau = tau;
            grid.push(BonusPoint {
                bonus: b,
                threshold: tau,
                uos: report.uos,
                dmd: report.dmd.clone(),
                phi: report.objective,
            });
            if report.objective > best.2.objective {
                best = (i, cal, report);
            }
        }
    }

    Ok(BonusSearch {
        policy: best.1.policy,
        report: best.2,
        favored_group_a,
        swapped,
        b_dmd: range.value,
        degenerate,
        grid,
    })
}

// ---------------------------------------------------------------------------
// Bonus <-> Quota conversion
// ---------------------------------------------------------------------------

fn single_bonus_parts(
    policy: &Policy,
) -> Result<(&WeightVector, &str, BonusTerm, f64), SearchError> {
    match policy {
        Policy::Bonus {
            weights,
            bonuses,
            threshold,
        } if bonuses.len() == 1 => {
            let (attr, term) = bonuses.iter().next().unwrap();
            Ok((weights, attr.as_str(), *term, *threshold))
        }
        other => Err(SearchError::WrongPolicyKind {
            expected: "bonus",
            found: other.kind_name().to_string(),
        }),
    }
}

/// In-group scores ranked by (score descending, id ascending).
fn group_ranked_scores(pop: &Population, attr: &str, in_group: bool, w: &[f64]) -> Vec<(u64, f64)> {
    let mut scored: Vec<(u64, f64)> = pop
        .candidates()
        .iter()
        .filter(|c| c.attrs[attr] == in_group)
        .map(|c| (c.id, dot(w, &c.scores)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Converts a calibrated single-attribute Bonus policy into the Quota policy
/// admitting exactly the same candidates.
///
/// The quota is the admitted share of the designated group; the per-group
/// thresholds are each group's own k_g-th ranked raw score (positive
/// infinity for a group with no admits).
pub fn bonus_to_quota(
    policy: &Policy,
    pop: &Population,
    theta: f64,
) -> Result<Policy, SearchError> {
    let (weights, attr, term, threshold) = single_bonus_parts(policy)?;
    if !pop.has_attribute(attr) {
        return Err(PolicyError::MissingAttribute(attr.to_string()).into());
    }
    let form = PolicyForm::single_bonus(weights.clone(), attr, term);
    let cal = calibrate_topk(&form, pop, theta)?;
    if cal.threshold() != threshold {
        return Err(PolicyError::NotCalibrated(format!(
            "threshold {threshold} is not the k-th ranked score {} for theta {theta}",
            cal.threshold()
        ))
        .into());
    }
    let (count_a, count_other) = cal.selection.group_counts(pop, attr)?;
    let k = cal.selection.k();

    let group_threshold = |in_group: bool, count: usize| -> f64 {
        if count == 0 {
            f64::INFINITY
        } else {
            group_ranked_scores(pop, attr, in_group, weights.components())[count - 1].1
        }
    };
    Ok(Policy::Quota {
        weights: weights.clone(),
        attribute: attr.to_string(),
        quota: count_a as f64 / k as f64,
        threshold_group_a: group_threshold(true, count_a),
        threshold_other: group_threshold(false, count_other),
    })
}

/// Smallest bonus whose calibrated policy admits exactly `target_a`
/// candidates from the designated group (and `k - target_a` from the
/// complement).
///
/// The admitted set changes only at cross-group score differences
/// (breakpoints). The favored group's t-th best member enters the top k
/// exactly when its score plus the bonus reaches the complement's
/// (k - t + 1)-th best score, so the infimum bonus is that one score
/// difference; it is checked under the tie rule, and when the tie at the
/// breakpoint resolves against the favored group the answer lies strictly
/// above it (the midpoint to the next breakpoint is used).
pub fn bonus_matching_count(
    pop: &Population,
    weights: &WeightVector,
    theta: f64,
    attr: &str,
    target_a: usize,
) -> Result<(Policy, Selection), SearchError> {
    if !pop.has_attribute(attr) {
        return Err(PolicyError::MissingAttribute(attr.to_string()).into());
    }
    let k = target_count(theta, pop.len())?;
    let n_a = pop.group_size(attr, true)?;
    let n_other = pop.group_size(attr, false)?;
    if target_a > k || target_a > n_a || k - target_a > n_other {
        return Err(SearchError::TargetUnreachable {
            target_a,
            target_other: k - target_a,
            nearest_a: target_a.min(n_a).min(k),
            nearest_other: (k - target_a).min(n_other),
        });
    }

    let calibrated_at = |b: f64, favored_a: bool| -> Result<CalibratedPolicy, SearchError> {
        let form = PolicyForm::single_bonus(
            weights.clone(),
            attr,
            BonusTerm {
                amount: b,
                group_a: favored_a,
            },
        );
        Ok(calibrate_topk(&form, pop, theta)?)
    };

    let natural = calibrated_at(0.0, true)?;
    let (natural_a, _) = natural.selection.group_counts(pop, attr)?;
    if natural_a == target_a {
        let selection = natural.selection.clone();
        return Ok((natural.policy, selection));
    }
    let favored_a = target_a > natural_a;
    let target_favored = if favored_a { target_a } else { k - target_a };

    // Raw scores per side, descending.
    let side_scores = |in_group: bool| -> Vec<f64> {
        let mut s: Vec<f64> = pop
            .candidates()
            .iter()
            .filter(|c| c.attrs[attr] == in_group)
            .map(|c| dot(weights.components(), &c.scores))
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let favored_scores = side_scores(favored_a);
    let other_scores = side_scores(!favored_a);

    // target_favored > natural favored count >= k - |other side|, so the
    // (k - t + 1)-th best of the other side exists.
    let entering = favored_scores[target_favored - 1];
    let blocking = other_scores[k - target_favored];
    let b_exact = (blocking - entering).max(0.0);

    // Next breakpoint strictly above b_exact, for the just-above fallback.
    let mut next_breakpoint: Option<f64> = None;
    for &o in &other_scores {
        for &f in &favored_scores {
            let d = o - f;
            if d > b_exact && next_breakpoint.is_none_or(|nb| d < nb) {
                next_breakpoint = Some(d);
            }
        }
    }
    let just_above = next_breakpoint.map_or(b_exact + 1.0, |nb| (b_exact + nb) / 2.0);

    let mut nearest = (natural_a, k - natural_a);
    for b in [b_exact, just_above] {
        let cal = calibrated_at(b, favored_a)?;
        let counts = cal.selection.group_counts(pop, attr)?;
        if counts == (target_a, k - target_a) {
            let selection = cal.selection.clone();
            return Ok((cal.policy, selection));
        }
        nearest = counts;
    }
    Err(SearchError::TargetUnreachable {
        target_a,
        target_other: k - target_a,
        nearest_a: nearest.0,
        nearest_other: nearest.1,
    })
}

/// Converts a calibrated Quota policy into the Bonus policy with the
/// smallest bonus admitting the same per-group counts.
pub fn quota_to_bonus(
    policy: &Policy,
    pop: &Population,
    theta: f64,
) -> Result<Policy, SearchError> {
    let (weights, attr) = match policy {
        Policy::Quota {
            weights, attribute, ..
        } => (weights, attribute.as_str()),
        other => {
            return Err(SearchError::WrongPolicyKind {
                expected: "quota",
                found: other.kind_name().to_string(),
            })
        }
    };
    let selection = crate::policies::admit(policy, pop)?;
    let k = target_count(theta, pop.len())?;
    if selection.k() != k {
        return Err(PolicyError::NotCalibrated(format!(
            "quota thresholds admit {} candidates, calibration target is {k}",
            selection.k()
        ))
        .into());
    }
    let (target_a, _) = selection.group_counts(pop, attr)?;
    let (bonus_policy, _) = bonus_matching_count(pop, weights, theta, attr, target_a)?;
    Ok(bonus_policy)
}

// ---------------------------------------------------------------------------
// Greedy multi-attribute bonus search
// ---------------------------------------------------------------------------

/// Greedy search configuration: the bonus increment, a step budget, and the
/// objective's lambda map (its keys are the attributes searched).
#[derive(Debug, Clone)]
pub struct GreedyConfig {
    pub increment: f64,
    pub max_steps: usize,
    pub lambda: BTreeMap<String, f64>,
}

/// One accepted greedy step.
#[derive(Debug, Clone)]
pub struct GreedyStep {
    pub attribute: String,
    /// Bonus amounts after the step, keyed by attribute.
    pub bonuses: BTreeMap<String, f64>,
    pub phi: f64,
}

#[derive(Debug)]
pub struct GreedySearch {
    pub policy: Policy,
    pub report: EvalReport,
    pub steps: Vec<GreedyStep>,
    /// Favored side per attribute (true = designated group), fixed at the
    /// start from the disadvantage direction under the fitted coefficients.
    pub favored_group_a: BTreeMap<String, bool>,
}

/// Incremental multi-attribute bonus search: at every step, the bonus of the
/// attribute whose increment improves the objective most is raised by the
/// configured amount; stops when no increment strictly improves or the step
/// budget is exhausted. Increment ties go to the earliest attribute in the
/// population's attribute order.
pub fn search_bonus_multi(
    pop: &Population,
    model: &OutcomeModel,
    theta: f64,
    cfg: &GreedyConfig,
) -> Result<GreedySearch, SearchError> {
    if !cfg.increment.is_finite() || cfg.increment <= 0.0 {
        return Err(SearchError::InvalidIncrement(cfg.increment));
    }
    if cfg.max_steps == 0 {
        return Err(SearchError::ZeroMaxSteps);
    }
    let weights = model.weights.clone();
    let attrs: Vec<String> = pop
        .attribute_names()
        .iter()
        .filter(|a| cfg.lambda.contains_key(*a))
        .cloned()
        .collect();
    for attr in cfg.lambda.keys() {
        if !pop.has_attribute(attr) {
            return Err(PolicyError::MissingAttribute(attr.clone()).into());
        }
    }

    let mut favored = BTreeMap::new();
    for attr in &attrs {
        let (_, swapped) = disadvantage(pop, &weights, theta, attr)?;
        favored.insert(attr.clone(), !swapped);
    }

    let mut bonuses: BTreeMap<String, BonusTerm> = attrs
        .iter()
        .map(|a| {
            (
                a.clone(),
                BonusTerm {
                    amount: 0.0,
                    group_a: favored[a],
                },
            )
        })
        .collect();

    let evaluate_state =
        |bonuses: &BTreeMap<String, BonusTerm>| -> Result<(CalibratedPolicy, EvalReport), SearchError> {
            let form = PolicyForm::Bonus {
                weights: weights.clone(),
                bonuses: bonuses.clone(),
            };
            let cal = calibrate_topk(&form, pop, theta)?;
            let report = metrics::evaluate(&cal.selection, pop, model, &cfg.lambda)?;
            Ok((cal, report))
        };

    let mut current = evaluate_state(&bonuses)?;
    let mut steps = Vec::new();
    for _ in 0..cfg.max_steps {
        let mut best_step: Option<(String, CalibratedPolicy, EvalReport)> = None;
        for attr in &attrs {
            let mut trial = bonuses.clone();
            trial.get_mut(attr).unwrap().amount += cfg.increment;
            let (cal, report) = evaluate_state(&trial)?;
            let better_than_best = match &best_step {
                Some((_, _, best_report)) => report.objective > best_report.objective,
                None => true,
            };
            if better_than_best {
                best_step = Some((attr.clone(), cal, report));
            }
        }
        match best_step {
            Some((attr, cal, report)) if report.objective > current.1.objective => {
                bonuses.get_mut(&attr).unwrap().amount += cfg.increment;
                steps.push(GreedyStep {
                    attribute: attr,
                    bonuses: bonuses.iter().map(|(a, t)| (a.clone(), t.amount)).collect(),
                    phi: report.objective,
                });
                current = (cal, report);
            }
            _ => break,
        }
    }

    Ok(GreedySearch {
        policy: current.0.policy,
        report: current.1,
        steps,
        favored_group_a: favored,
    })
}
