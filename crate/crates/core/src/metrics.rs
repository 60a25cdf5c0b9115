//! Utility, disparity, and objective evaluation.
//!
//! * `uos` — mean predicted performance `m(x)` over the admitted candidates.
//!   Evaluation always goes through the fitted outcome model, including for
//!   candidates whose true outcome was observed, so that different policies
//!   stay comparable.
//! * `dmd` — admitted fraction of the designated group minus the admitted
//!   fraction of its complement, one value per attribute.
//! * `objective` — `phi = uos - sum_i lambda_i * |dmd_i|`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::fit::OutcomeModel;
use crate::fmt::sig9;
use crate::model::Population;
use crate::policies::Selection;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("lambda for '{attr}' is negative ({value})")]
    NegativeLambda { attr: String, value: f64 },
    #[error("selection references id {0} not present in the population")]
    UnknownId(u64),
}

/// Mean `m(x)` over the admitted candidates.
pub fn uos(
    selection: &Selection,
    pop: &Population,
    model: &OutcomeModel,
) -> Result<f64, MetricsError> {
    if selection.k() == 0 {
        return Err(MetricsError::EmptySelection);
    }
    let mut total = 0.0;
    for &id in selection.admitted_ids() {
        let cand = pop.candidate_by_id(id).ok_or(MetricsError::UnknownId(id))?;
        total += model.predict(&cand.scores);
    }
    Ok(total / selection.k() as f64)
}

/// Admission-rate difference `P(admitted | group) - P(admitted | complement)`.
pub fn dmd(selection: &Selection, pop: &Population, attr: &str) -> Result<f64, MetricsError> {
    if !pop.has_attribute(attr) {
        return Err(MetricsError::UnknownAttribute(attr.to_string()));
    }
    let mut counts = [0usize; 2]; // [complement, group]
    let mut admitted = [0usize; 2];
    for cand in pop.candidates() {
        let g = usize::from(cand.attrs[attr]);
        counts[g] += 1;
        if selection.contains(cand.id) {
            admitted[g] += 1;
        }
    }
    Ok(admitted[1] as f64 / counts[1] as f64 - admitted[0] as f64 / counts[0] as f64)
}

/// `phi = uos - sum_i lambda_i * |dmd_i|` over the attributes named in the
/// lambda map.
pub fn objective(
    uos: f64,
    dmd: &BTreeMap<String, f64>,
    lambda: &BTreeMap<String, f64>,
) -> Result<f64, MetricsError> {
    let mut penalty = 0.0;
    for (attr, &l) in lambda {
        if l < 0.0 {
            return Err(MetricsError::NegativeLambda {
                attr: attr.clone(),
                value: l,
            });
        }
        let d = dmd
            .get(attr)
            .ok_or_else(|| MetricsError::UnknownAttribute(attr.clone()))?;
        penalty += l * d.abs();
    }
    Ok(uos - penalty)
}

/// Full evaluation of a selection: utility, per-attribute disparity, and
/// objective value.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub uos: f64,
    pub dmd: BTreeMap<String, f64>,
    pub objective: f64,
    pub lambda: BTreeMap<String, f64>,
    pub selection: Selection,
}

impl EvalReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV header matching [`EvalReport::csv_row`]; dmd and lambda
    /// columns appear in attribute order.
    pub fn csv_header(&self) -> Vec<String> {
        let mut cols = vec!["uos".to_string()];
        for attr in self.dmd.keys() {
            cols.push(format!("dmd_{attr}"));
        }
        cols.push("objective".into());
        for attr in self.lambda.keys() {
            cols.push(format!("lambda_{attr}"));
        }
        cols.push("k".into());
        cols.push("theta_effective".into());
        cols
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![sig9(self.uos)];
        for v in self.dmd.values() {
            row.push(sig9(*v));
        }
        row.push(sig9(self.objective));
        for v in self.lambda.values() {
            row.push(sig9(*v));
        }
        row.push(self.selection.k().to_string());
        row.push(sig9(self.selection.theta_effective()));
        row
    }
}

/// Evaluates a selection: `dmd` is computed for every population attribute,
/// the objective penalizes the attributes in `lambda`.
pub fn evaluate(
    selection: &Selection,
    pop: &Population,
    model: &OutcomeModel,
    lambda: &BTreeMap<String, f64>,
) -> Result<EvalReport, MetricsError> {
    let u = uos(selection, pop, model)?;
    let mut disparities = BTreeMap::new();
    for attr in pop.attribute_names() {
        disparities.insert(attr.clone(), dmd(selection, pop, attr)?);
    }
    for attr in lambda.keys() {
        if !disparities.contains_key(attr) {
            return Err(MetricsError::UnknownAttribute(attr.clone()));
        }
    }
    let phi = objective(u, &disparities, lambda)?;
    Ok(EvalReport {
        uos: u,
        dmd: disparities,
        objective: phi,
        lambda: lambda.clone(),
        selection: selection.clone(),
    })
}
