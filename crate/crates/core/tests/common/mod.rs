//! Shared helpers for integration tests: seeded random populations and
//! oracles that are independent of the library's search/calibration paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairsel::model::{Candidate, Population};
use fairsel::policies::WeightVector;
use fairsel::OutcomeModel;

/// Per-attribute generation recipe for [`random_population_multi`].
pub struct AttrSpec {
    pub name: &'static str,
    pub prevalence: f64,
    /// Mean shift applied to every score dimension for designated-group
    /// members (negative = disadvantaged).
    pub shift: f64,
}

/// Random population with continuous scores (ties have probability zero).
/// Group-a members are shifted down by `gap` on every dimension.
pub fn random_population(seed: u64, n: usize, d: usize, prevalence: f64, gap: f64) -> Population {
    random_population_multi(
        seed,
        n,
        d,
        &[AttrSpec {
            name: "g",
            prevalence,
            shift: -gap,
        }],
    )
}

pub fn random_population_multi(seed: u64, n: usize, d: usize, attrs: &[AttrSpec]) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut memberships: Vec<Vec<bool>> = (0..n)
        .map(|_| attrs.iter().map(|a| rng.gen_bool(a.prevalence)).collect())
        .collect();
    for ai in 0..attrs.len() {
        let count = memberships.iter().filter(|m| m[ai]).count();
        if count == 0 {
            memberships.last_mut().unwrap()[ai] = true;
        } else if count == n {
            memberships.last_mut().unwrap()[ai] = false;
        }
    }
    let candidates = memberships
        .iter()
        .enumerate()
        .map(|(i, member)| {
            let shift: f64 = attrs
                .iter()
                .enumerate()
                .filter(|(ai, _)| member[*ai])
                .map(|(_, a)| a.shift)
                .sum();
            let scores = (0..d)
                .map(|_| 60.0 + shift + rng.gen_range(-30.0..30.0))
                .collect();
            let attrs_map: BTreeMap<String, bool> = attrs
                .iter()
                .zip(member)
                .map(|(a, &m)| (a.name.to_string(), m))
                .collect();
            Candidate {
                id: i as u64 + 1,
                attrs: attrs_map,
                scores,
                outcome: None,
            }
        })
        .collect();
    Population::new(
        candidates,
        attrs.iter().map(|a| a.name.to_string()).collect(),
        (0..d).map(|j| format!("s{j}")).collect(),
    )
    .unwrap()
}

pub fn random_weights(seed: u64, d: usize) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..1.0)).collect();
    WeightVector::l1_normalized(raw).unwrap()
}

pub fn model_with_weights(weights: WeightVector) -> OutcomeModel {
    OutcomeModel {
        alpha0: 0.0,
        alpha: 1.0,
        weights,
    }
}

pub fn lambda_map(attr: &str, value: f64) -> BTreeMap<String, f64> {
    BTreeMap::from_iter([(attr.to_string(), value)])
}

// ---------------------------------------------------------------------------
// Independent oracles (no library search/calibration calls)
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn predict(model: &OutcomeModel, scores: &[f64]) -> f64 {
    model.alpha0 + model.alpha * dot(model.weights.components(), scores)
}

/// Maximum of `sum m(x)` over all k-subsets, by exhaustive enumeration
/// (bitmask; population sizes up to ~20).
pub fn best_subset_outcome_sum(pop: &Population, model: &OutcomeModel, k: usize) -> f64 {
    let values: Vec<f64> = pop
        .candidates()
        .iter()
        .map(|c| predict(model, &c.scores))
        .collect();
    let n = values.len();
    assert!(n <= 20, "exhaustive enumeration is for small populations");
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let sum: f64 = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| values[i])
            .sum();
        if sum > best {
            best = sum;
        }
    }
    best
}

/// Exact-k admission under a single-attribute bonus, reimplemented inline:
/// rank by (adjusted score descending, id ascending), take the first k.
pub fn oracle_bonus_selection(
    pop: &Population,
    weights: &[f64],
    attr: &str,
    favored_a: bool,
    bonus: f64,
    k: usize,
) -> BTreeSet<u64> {
    let mut scored: Vec<(u64, f64)> = pop
        .candidates()
        .iter()
        .map(|c| {
            let mut s = dot(weights, &c.scores);
            if c.attrs[attr] == favored_a {
                s += bonus;
            }
            (c.id, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored[..k].iter().map(|(id, _)| *id).collect()
}

/// Objective of a selection, computed inline.
pub fn oracle_phi(
    pop: &Population,
    model: &OutcomeModel,
    admitted: &BTreeSet<u64>,
    lambda: &BTreeMap<String, f64>,
) -> f64 {
    let mut total = 0.0;
    for cand in pop.candidates() {
        if admitted.contains(&cand.id) {
            total += predict(model, &cand.scores);
        }
    }
    let uos = total / admitted.len() as f64;
    let mut penalty = 0.0;
    for (attr, &l) in lambda {
        let mut counts = [0usize; 2];
        let mut hits = [0usize; 2];
        for cand in pop.candidates() {
            let g = usize::from(cand.attrs[attr]);
            counts[g] += 1;
            if admitted.contains(&cand.id) {
                hits[g] += 1;
            }
        }
        let dmd = hits[1] as f64 / counts[1] as f64 - hits[0] as f64 / counts[0] as f64;
        penalty += l * dmd.abs();
    }
    uos - penalty
}

/// Every bonus value at which the admitted set can change, for a bonus to
/// the `favored_a` side: zero, each positive cross-group score difference,
/// the midpoints between consecutive differences, and one value past the
/// largest difference.
pub fn oracle_bonus_candidates(
    pop: &Population,
    weights: &[f64],
    attr: &str,
    favored_a: bool,
) -> Vec<f64> {
    let favored: Vec<f64> = pop
        .candidates()
        .iter()
        .filter(|c| c.attrs[attr] == favored_a)
        .map(|c| dot(weights, &c.scores))
        .collect();
    let other: Vec<f64> = pop
        .candidates()
        .iter()
        .filter(|c| c.attrs[attr] != favored_a)
        .map(|c| dot(weights, &c.scores))
        .collect();
    let mut diffs: Vec<f64> = other
        .iter()
        .flat_map(|o| favored.iter().map(move |f| o - f))
        .filter(|d| *d > 0.0)
        .collect();
    diffs.sort_by(f64::total_cmp);
    diffs.dedup();
    let mut candidates = vec![0.0];
    for (i, &bp) in diffs.iter().enumerate() {
        candidates.push(bp);
        match diffs.get(i + 1) {
            Some(&next) => candidates.push((bp + next) / 2.0),
            None => candidates.push(bp + 1.0),
        }
    }
    candidates
}

/// Best objective over every admissible single-attribute bonus policy with
/// bonus at most `max_bonus` (`None` = unbounded), by exhaustive breakpoint
/// enumeration. Fully independent of the library's grid search and
/// binary-search calibration.
pub fn oracle_best_bonus_phi(
    pop: &Population,
    model: &OutcomeModel,
    theta: f64,
    attr: &str,
    favored_a: bool,
    lambda: &BTreeMap<String, f64>,
    max_bonus: Option<f64>,
) -> f64 {
    let k = (theta * pop.len() as f64).round() as usize;
    let weights = model.weights.components();
    oracle_bonus_candidates(pop, weights, attr, favored_a)
        .iter()
        .filter(|&&b| max_bonus.is_none_or(|limit| b <= limit))
        .map(|&b| {
            let admitted = oracle_bonus_selection(pop, weights, attr, favored_a, b, k);
            oracle_phi(pop, model, &admitted, lambda)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Binomial CDF oracle: per-term evaluation through the binomial
/// coefficient product, no shared recurrence with the implementation.
pub fn oracle_binomial_cdf(t: usize, trials: usize, p: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..=t.min(trials) {
        let mut coef = 1.0;
        for j in 1..=i {
            coef *= (trials - i + j) as f64 / j as f64;
        }
        sum += coef * p.powi(i as i32) * (1.0 - p).powi((trials - i) as i32);
    }
    sum.min(1.0)
}
