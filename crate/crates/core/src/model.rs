//! Domain types: candidates, populations, and empirical score distributions.
//!
//! A [`Population`] is an immutable, id-ordered collection of [`Candidate`]s
//! sharing a score dimension and a set of binary sensitive attributes. Every
//! attribute must split the population into two non-empty groups: the
//! designated group (`attrs[name] == true`) and its complement.
//!
//! [`EmpiricalDist`] is the step CDF of a finite sample together with its
//! left-continuous generalized inverse: `inverse_cdf(beta)` is the smallest
//! sample value whose CDF reaches `beta`. This convention makes quantile
//! computations deterministic on tied values.

mod csv_io;

pub use csv_io::{load_population, write_population, AttributeCoding, AttributeColumn, CsvSchema};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("row {line}: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("missing column '{0}' in header")]
    MissingColumn(String),
    #[error("row {line}: attribute '{attr}' has non-binary value '{value}'")]
    NonBinaryAttribute {
        line: u64,
        attr: String,
        value: String,
    },
    #[error("duplicate candidate id {0}")]
    DuplicateId(u64),
    #[error(
        "attribute '{attr}' has an empty group (all candidates have {attr} = {uniform_value})"
    )]
    EmptyGroup { attr: String, uniform_value: bool },
    #[error("candidate {id}: expected {expected} scores, found {found}")]
    ScoreDimension {
        id: u64,
        expected: usize,
        found: usize,
    },
    #[error("candidate {id} is missing attribute '{attr}'")]
    MissingAttribute { id: u64, attr: String },
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("beta {0} outside (0, 1]")]
    InvalidBeta(f64),
    #[error("weight vector has length {found}, population dimension is {expected}")]
    WeightDimension { expected: usize, found: usize },
    #[error("population has no candidates")]
    EmptyPopulation,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One applicant: sensitive attribute memberships, input scores, and an
/// optional observed outcome (present only when performance was recorded).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: u64,
    /// attribute name -> true when the candidate belongs to the designated group.
    pub attrs: BTreeMap<String, bool>,
    pub scores: Vec<f64>,
    pub outcome: Option<f64>,
}

/// Immutable, id-ordered candidate collection.
#[derive(Debug, Clone)]
pub struct Population {
    candidates: Vec<Candidate>,
    attribute_names: Vec<String>,
    score_names: Vec<String>,
}

impl Population {
    /// Validates the invariants and sorts candidates by ascending id.
    ///
    /// Rejects duplicate ids, score-dimension mismatches, candidates missing
    /// an attribute, and any attribute whose designated group or complement
    /// is empty.
    pub fn new(
        mut candidates: Vec<Candidate>,
        attribute_names: Vec<String>,
        score_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        if candidates.is_empty() {
            return Err(ModelError::EmptyPopulation);
        }
        candidates.sort_by_key(|c| c.id);
        for pair in candidates.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateId(pair[0].id));
            }
        }
        let d = score_names.len();
        for cand in &candidates {
            if cand.scores.len() != d {
                return Err(ModelError::ScoreDimension {
                    id: cand.id,
                    expected: d,
                    found: cand.scores.len(),
                });
            }
            for attr in &attribute_names {
                if !cand.attrs.contains_key(attr) {
                    return Err(ModelError::MissingAttribute {
                        id: cand.id,
                        attr: attr.clone(),
                    });
                }
            }
        }
        for attr in &attribute_names {
            let in_group = candidates.iter().filter(|c| c.attrs[attr]).count();
            if in_group == 0 || in_group == candidates.len() {
                return Err(ModelError::EmptyGroup {
                    attr: attr.clone(),
                    uniform_value: in_group != 0,
                });
            }
        }
        Ok(Self {
            candidates,
            attribute_names,
            score_names,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Score dimension d.
    pub fn dim(&self) -> usize {
        self.score_names.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn score_names(&self) -> &[String] {
        &self.score_names
    }

    pub fn has_attribute(&self, attr: &str) -> bool {
        self.attribute_names.iter().any(|a| a == attr)
    }

    pub fn candidate_by_id(&self, id: u64) -> Option<&Candidate> {
        self.candidates
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.candidates[i])
    }

    /// Ids of the candidates with `attrs[attr] == in_group`.
    pub fn group_ids(&self, attr: &str, in_group: bool) -> Result<BTreeSet<u64>, ModelError> {
        if !self.has_attribute(attr) {
            return Err(ModelError::UnknownAttribute(attr.to_string()));
        }
        Ok(self
            .candidates
            .iter()
            .filter(|c| c.attrs[attr] == in_group)
            .map(|c| c.id)
            .collect())
    }

    pub fn group_size(&self, attr: &str, in_group: bool) -> Result<usize, ModelError> {
        if !self.has_attribute(attr) {
            return Err(ModelError::UnknownAttribute(attr.to_string()));
        }
        Ok(self
            .candidates
            .iter()
            .filter(|c| c.attrs[attr] == in_group)
            .count())
    }

    /// Same candidates under renamed score columns (used when writing
    /// derived populations such as quantile-repaired scores).
    pub fn with_score_names(&self, score_names: Vec<String>) -> Result<Self, ModelError> {
        if score_names.len() != self.dim() {
            return Err(ModelError::WeightDimension {
                expected: self.dim(),
                found: score_names.len(),
            });
        }
        Ok(Self {
            candidates: self.candidates.clone(),
            attribute_names: self.attribute_names.clone(),
            score_names,
        })
    }

    /// Replaces every candidate's scores, keeping ids, attributes, and
    /// outcomes. `scores` must be keyed in candidate iteration order.
    pub(crate) fn with_scores(&self, scores: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        assert_eq!(scores.len(), self.len());
        let candidates = self
            .candidates
            .iter()
            .zip(scores)
            .map(|(c, s)| Candidate {
                id: c.id,
                attrs: c.attrs.clone(),
                scores: s,
                outcome: c.outcome,
            })
            .collect();
        Population::new(
            candidates,
            self.attribute_names.clone(),
            self.score_names.clone(),
        )
    }
}

/// Weighted score `w·x`. Callers validate dimensions.
pub(crate) fn dot(w: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), x.len());
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Step CDF of a finite sample, with its left-continuous inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted_values: Vec<f64>,
}

impl EmpiricalDist {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyDistribution);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            sorted_values: values,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn min(&self) -> f64 {
        self.sorted_values[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted_values.last().unwrap()
    }

    /// Fraction of sample values `<= s`.
    pub fn cdf(&self, s: f64) -> f64 {
        let le = self.sorted_values.partition_point(|&v| v <= s);
        le as f64 / self.n() as f64
    }

    /// Smallest sample value whose CDF reaches `beta`, for `beta` in (0, 1].
    pub fn inverse_cdf(&self, beta: f64) -> Result<f64, ModelError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(ModelError::InvalidBeta(beta));
        }
        let n = self.n();
        let mut k = (beta * n as f64).ceil() as usize;
        k = k.clamp(1, n);
        // Guard the ceil against floating error in beta * n.
        while k > 1 && (k - 1) as f64 / n as f64 >= beta {
            k -= 1;
        }
        while (k as f64) / (n as f64) < beta {
            k += 1;
        }
        Ok(self.sorted_values[k - 1])
    }
}

/// Empirical distribution of `w·x` over the candidates with
/// `attrs[attr] == in_group`.
///
/// Composed with [`EmpiricalDist::inverse_cdf`], this yields the per-group
/// quantile functions used by the bonus range computation.
pub fn group_score_dist(
    pop: &Population,
    attr: &str,
    in_group: bool,
    w: &[f64],
) -> Result<EmpiricalDist, ModelError> {
    if !pop.has_attribute(attr) {
        return Err(ModelError::UnknownAttribute(attr.to_string()));
    }
    if w.len() != pop.dim() {
        return Err(ModelError::WeightDimension {
            expected: pop.dim(),
            found: w.len(),
        });
    }
    let values: Vec<f64> = pop
        .candidates()
        .iter()
        .filter(|c| c.attrs[attr] == in_group)
        .map(|c| dot(w, &c.scores))
        .collect();
    EmpiricalDist::from_values(values)
}
