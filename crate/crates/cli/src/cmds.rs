//! Subcommand implementations. Every command writes its outputs through an
//! [`OutputGuard`] and finishes with a run manifest, so failures leave no
//! partial artifacts and successes are reproducible from disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use fairsel::baselines::{self, FairRankingConfig};
use fairsel::fmt::sig9;
use fairsel::metrics::{self, EvalReport};
use fairsel::policies::{admit, calibrate_topk, BonusTerm, Policy, PolicyFile, PolicyForm};
use fairsel::search::{
    self, bonus_to_quota, quota_to_bonus, BonusSearchConfig, GreedyConfig, RotationPlan,
};
use fairsel::{GeneratorConfig, Population};

use crate::io::{
    csv_line, digest_inputs, read_policy, read_population, read_selection, resolve_model,
    write_model, write_selection, OutputGuard, RunManifest,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn parse_lambdas(entries: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for entry in entries {
        let (attr, value) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("--lambda expects ATTR=FLOAT, got '{entry}'"))?;
        let value: f64 = value
            .parse()
            .with_context(|| format!("--lambda value in '{entry}'"))?;
        if value < 0.0 {
            bail!("--lambda must be non-negative, got '{entry}'");
        }
        map.insert(attr.to_string(), value);
    }
    Ok(map)
}

fn manifest(
    command: &str,
    inputs: &[&Path],
    theta: Option<f64>,
    lambda: &BTreeMap<String, f64>,
    seed: Option<u64>,
) -> Result<RunManifest> {
    Ok(RunManifest {
        command: command.to_string(),
        version: VERSION.to_string(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        theta,
        lambda: lambda.clone(),
        seed,
        config_digest: digest_inputs(inputs)?,
        outputs: Vec::new(),
    })
}

fn population_csv(pop: &Population) -> Result<String> {
    let mut buf = Vec::new();
    fairsel::model::write_population(pop, &mut buf)?;
    Ok(String::from_utf8(buf).expect("population CSV is UTF-8"))
}

// ---------------------------------------------------------------------------

pub fn simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    observe_top: Option<f64>,
) -> Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading generator config {}", config.display()))?;
    let mut cfg = GeneratorConfig::from_toml(&text)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let mut pop = fairsel::generate_population(&cfg)?;
    // Selective observation: keep outcomes only for the candidates a
    // reference policy (the true coefficients, calibrated at the given
    // fraction) would admit, mimicking data recorded under that policy.
    if let Some(theta) = observe_top {
        let weights = fairsel::WeightVector::new(cfg.outcome.coefficients.clone())
            .context("generator outcome coefficients")?;
        let reference = calibrate_topk(&PolicyForm::coefficients(weights), &pop, theta)?;
        pop = fairsel::fit::mask_outcomes(&pop, &reference.selection);
    }
    let mut guard = OutputGuard::new();
    guard.write(out, &population_csv(&pop)?)?;
    let m = manifest(
        "simulate",
        &[config],
        observe_top,
        &BTreeMap::new(),
        Some(cfg.seed),
    )?;
    guard.finish(out, &m)
}

pub fn fit(input: &Path, attrs: &[String], out: &Path) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let fitted = fairsel::fit_outcome_model(&pop)?;
    for name in &fitted.clipped {
        log::warn!("fitted slope for '{name}' was negative and clipped to zero");
    }
    let mut guard = OutputGuard::new();
    guard.write(out, &write_model(&fitted.model, pop.score_names())?)?;
    let m = manifest("fit", &[input], None, &BTreeMap::new(), None)?;
    guard.finish(out, &m)
}

fn search_report_json(report: &EvalReport, extra: serde_json::Value) -> String {
    let mut doc = serde_json::json!({ "report": report });
    if let (Some(obj), Some(extra)) = (doc.as_object_mut(), extra.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    format!("{doc:#}\n")
}

#[allow(clippy::too_many_arguments)]
pub fn search_coeffs(
    input: &Path,
    attrs: &[String],
    theta: f64,
    lambda_args: &[String],
    model_path: Option<&Path>,
    step_angle: f64,
    steps: usize,
    out: &Path,
    report_out: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let lambda = parse_lambdas(lambda_args)?;
    let model = resolve_model(model_path, &pop)?;
    let plan = RotationPlan::coordinate_pairs(pop.dim(), step_angle, steps)?;
    let result = search::search_coefficients(&pop, &model, theta, &lambda, &plan)?;

    let mut guard = OutputGuard::new();
    let policy_file = PolicyFile::new(result.policy.clone(), pop.score_names().to_vec());
    guard.write(out, &policy_file.to_toml()?)?;
    if let Some(path) = report_out {
        guard.write(
            path,
            &search_report_json(&result.report, serde_json::json!({})),
        )?;
    }
    if let Some(path) = trace_out {
        let mut lines = Vec::new();
        let mut header = vec!["direction".to_string(), "step".into(), "angle".into()];
        header.extend(pop.score_names().iter().map(|s| format!("w_{s}")));
        header.push("uos".into());
        header.extend(result.trace[0].dmd.keys().map(|a| format!("dmd_{a}")));
        header.push("phi".into());
        lines.push(csv_line(&header));
        for point in &result.trace {
            let mut row = vec![
                point
                    .direction
                    .map(|(i, j)| format!("{i}>{j}"))
                    .unwrap_or_else(|| "start".into()),
                point.step.to_string(),
                sig9(point.angle),
            ];
            row.extend(point.weights.iter().map(|w| sig9(*w)));
            row.push(sig9(point.uos));
            row.extend(point.dmd.values().map(|d| sig9(*d)));
            row.push(sig9(point.phi));
            lines.push(csv_line(&row));
        }
        guard.write(path, &(lines.join("\n") + "\n"))?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("search-coeffs", &inputs, Some(theta), &lambda, None)?;
    guard.finish(out, &m)
}

#[allow(clippy::too_many_arguments)]
pub fn search_bonus(
    input: &Path,
    attrs: &[String],
    theta: f64,
    lambda_args: &[String],
    grid_k: usize,
    model_path: Option<&Path>,
    out: &Path,
    report_out: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let lambda = parse_lambdas(lambda_args)?;
    if lambda.len() != 1 {
        bail!(
            "search-bonus expects exactly one --lambda ATTR=FLOAT naming the attribute to repair"
        );
    }
    let attr = lambda.keys().next().unwrap().clone();
    let model = resolve_model(model_path, &pop)?;
    let cfg = BonusSearchConfig {
        grid_k,
        lambda: lambda.clone(),
    };
    let result = search::search_bonus(&pop, &model, theta, &attr, &cfg)?;
    if result.swapped {
        log::warn!(
            "designated group of '{attr}' is advantaged under the fitted weights; \
             the bonus applies to the complement group"
        );
    }
    if result.degenerate {
        log::warn!("b_dmd is zero for '{attr}': no disparity to repair, returning b = 0");
    }

    let mut guard = OutputGuard::new();
    let policy_file = PolicyFile::new(result.policy.clone(), pop.score_names().to_vec());
    guard.write(out, &policy_file.to_toml()?)?;
    if let Some(path) = report_out {
        guard.write(
            path,
            &search_report_json(
                &result.report,
                serde_json::json!({
                    "b_dmd": result.b_dmd,
                    "swapped": result.swapped,
                    "degenerate": result.degenerate,
                }),
            ),
        )?;
    }
    if let Some(path) = trace_out {
        let mut lines = Vec::new();
        let mut header = vec!["b".to_string(), "threshold".into(), "uos".into()];
        header.extend(result.grid[0].dmd.keys().map(|a| format!("dmd_{a}")));
        header.push("phi".into());
        lines.push(csv_line(&header));
        for point in &result.grid {
            let mut row = vec![sig9(point.bonus), sig9(point.threshold), sig9(point.uos)];
            row.extend(point.dmd.values().map(|d| sig9(*d)));
            row.push(sig9(point.phi));
            lines.push(csv_line(&row));
        }
        guard.write(path, &(lines.join("\n") + "\n"))?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("search-bonus", &inputs, Some(theta), &lambda, None)?;
    guard.finish(out, &m)
}

#[allow(clippy::too_many_arguments)]
pub fn search_bonus_multi(
    input: &Path,
    attrs: &[String],
    theta: f64,
    lambda_args: &[String],
    delta_b: f64,
    max_steps: usize,
    model_path: Option<&Path>,
    out: &Path,
    report_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let lambda = parse_lambdas(lambda_args)?;
    let model = resolve_model(model_path, &pop)?;
    let cfg = GreedyConfig {
        increment: delta_b,
        max_steps,
        lambda: lambda.clone(),
    };
    let result = search::search_bonus_multi(&pop, &model, theta, &cfg)?;

    let mut guard = OutputGuard::new();
    let policy_file = PolicyFile::new(result.policy.clone(), pop.score_names().to_vec());
    guard.write(out, &policy_file.to_toml()?)?;
    if let Some(path) = report_out {
        let steps: Vec<serde_json::Value> = result
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "attribute": s.attribute,
                    "bonuses": s.bonuses,
                    "phi": s.phi,
                })
            })
            .collect();
        guard.write(
            path,
            &search_report_json(
                &result.report,
                serde_json::json!({
                    "steps": steps,
                    "favored_group_a": result.favored_group_a,
                }),
            ),
        )?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("search-bonus-multi", &inputs, Some(theta), &lambda, None)?;
    guard.finish(out, &m)
}

pub fn convert_policy(
    to_quota: bool,
    input: &Path,
    attrs: &[String],
    policy_path: &Path,
    theta: f64,
    out: &Path,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let policy = read_policy(policy_path, &pop)?;
    let converted = if to_quota {
        bonus_to_quota(&policy.policy, &pop, theta)?
    } else {
        quota_to_bonus(&policy.policy, &pop, theta)?
    };
    let mut guard = OutputGuard::new();
    guard.write(
        out,
        &PolicyFile::new(converted, pop.score_names().to_vec()).to_toml()?,
    )?;
    let name = if to_quota {
        "bonus-to-quota"
    } else {
        "quota-to-bonus"
    };
    let m = manifest(
        name,
        &[input, policy_path],
        Some(theta),
        &BTreeMap::new(),
        None,
    )?;
    guard.finish(out, &m)
}

#[allow(clippy::too_many_arguments)]
pub fn baseline_median(
    input: &Path,
    attrs: &[String],
    out: &Path,
    model_path: Option<&Path>,
    theta: Option<f64>,
    selection_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let attr = &attrs[0];
    let repaired = baselines::median_repair(&pop, attr)?;
    let mut guard = OutputGuard::new();
    guard.write(out, &population_csv(&repaired)?)?;
    if let Some(path) = selection_out {
        let theta = theta.ok_or_else(|| anyhow!("--selection-out requires --theta"))?;
        let model = resolve_model(model_path, &pop)?;
        let cal = calibrate_topk(
            &PolicyForm::coefficients(model.weights.clone()),
            &repaired,
            theta,
        )?;
        guard.write(path, &write_selection(&cal.selection))?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("baseline-median", &inputs, theta, &BTreeMap::new(), None)?;
    guard.finish(out, &m)
}

#[allow(clippy::too_many_arguments)]
pub fn baseline_fair(
    input: &Path,
    attrs: &[String],
    theta: f64,
    model_path: Option<&Path>,
    alpha: f64,
    rho: f64,
    out: &Path,
    selection_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let attr = &attrs[0];
    let model = resolve_model(model_path, &pop)?;
    let cfg = FairRankingConfig::new(alpha, rho)?;
    let result = baselines::fair_rerank(&pop, &model.weights, theta, attr, &cfg)?;

    let mut guard = OutputGuard::new();
    let mut lines = vec![csv_line(&[
        "position".into(),
        "id".into(),
        "group".into(),
        "score".into(),
    ])];
    for entry in &result.ranking {
        lines.push(csv_line(&[
            entry.position.to_string(),
            entry.id.to_string(),
            if entry.group_a { "a" } else { "other" }.into(),
            sig9(entry.score),
        ]));
    }
    guard.write(out, &(lines.join("\n") + "\n"))?;
    if let Some(path) = selection_out {
        guard.write(path, &write_selection(&result.selection))?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest(
        "baseline-fair",
        &inputs,
        Some(theta),
        &BTreeMap::new(),
        None,
    )?;
    guard.finish(out, &m)
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    input: &Path,
    attrs: &[String],
    policy_path: &Path,
    model_path: Option<&Path>,
    lambda_args: &[String],
    theta: Option<f64>,
    format: &str,
    out: &Path,
    selection_out: Option<&Path>,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let policy = read_policy(policy_path, &pop)?;
    let model = resolve_model(model_path, &pop)?;
    let lambda = parse_lambdas(lambda_args)?;
    // Plain threshold admission by default; with --theta, exact-k admission
    // under the calibration tie rule (scores tied at the threshold are
    // ranked by id), which reproduces the selection a search produced.
    let selection = match (theta, &policy.policy) {
        (None, _) => admit(&policy.policy, &pop)?,
        (Some(_), Policy::Quota { .. }) => {
            log::info!("quota policies always admit by their per-group thresholds; --theta ignored");
            admit(&policy.policy, &pop)?
        }
        (Some(theta), Policy::Coefficients { weights, .. }) => {
            calibrate_topk(&PolicyForm::coefficients(weights.clone()), &pop, theta)?.selection
        }
        (
            Some(theta),
            Policy::Bonus {
                weights, bonuses, ..
            },
        ) => {
            calibrate_topk(
                &PolicyForm::Bonus {
                    weights: weights.clone(),
                    bonuses: bonuses.clone(),
                },
                &pop,
                theta,
            )?
            .selection
        }
    };
    let report = metrics::evaluate(&selection, &pop, &model, &lambda)?;

    let mut guard = OutputGuard::new();
    match format {
        "json" => guard.write(out, &(report.to_json_string() + "\n"))?,
        "csv" => {
            let text = format!(
                "{}\n{}\n",
                csv_line(&report.csv_header()),
                csv_line(&report.csv_row())
            );
            guard.write(out, &text)?;
        }
        other => bail!("--format must be csv or json, got '{other}'"),
    }
    if let Some(path) = selection_out {
        guard.write(path, &write_selection(&selection))?;
    }
    let mut inputs: Vec<&Path> = vec![input, policy_path];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("evaluate", &inputs, theta, &lambda, None)?;
    guard.finish(out, &m)
}

pub fn compare(
    input: &Path,
    attrs: &[String],
    a: &Path,
    b: &Path,
    model_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let attr = &attrs[0];
    let model = resolve_model(model_path, &pop)?;
    let sel_a = read_selection(a, &pop)?;
    let sel_b = read_selection(b, &pop)?;
    let cmp = baselines::compare_selections(&sel_a, &sel_b, &pop, attr, &model)?;
    let mut guard = OutputGuard::new();
    guard.write(out, &format!("{:#}\n", serde_json::to_value(&cmp)?))?;
    let mut inputs: Vec<&Path> = vec![input, a, b];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    let m = manifest("compare", &inputs, None, &BTreeMap::new(), None)?;
    guard.finish(out, &m)
}

// ---------------------------------------------------------------------------
// Frontier sweeps
// ---------------------------------------------------------------------------

/// A requested objective column: `--lambda 100` prices every requested
/// attribute at 100; `--lambda g=50` prices only `g`.
struct LambdaColumn {
    label: String,
    map: BTreeMap<String, f64>,
}

fn parse_lambda_columns(entries: &[String], sweep_attrs: &[String]) -> Result<Vec<LambdaColumn>> {
    let mut columns = Vec::new();
    for entry in entries {
        let (label, map) = match entry.split_once('=') {
            Some((attr, value)) => {
                let value: f64 = value
                    .parse()
                    .with_context(|| format!("--lambda value in '{entry}'"))?;
                (
                    format!("{attr}_{value}"),
                    BTreeMap::from_iter([(attr.to_string(), value)]),
                )
            }
            None => {
                let value: f64 = entry
                    .parse()
                    .with_context(|| format!("--lambda value in '{entry}'"))?;
                (
                    format!("{value}"),
                    sweep_attrs
                        .iter()
                        .map(|a| (a.clone(), value))
                        .collect::<BTreeMap<_, _>>(),
                )
            }
        };
        for value in map.values() {
            if *value < 0.0 {
                bail!("--lambda must be non-negative, got '{entry}'");
            }
        }
        columns.push(LambdaColumn {
            label: label.replace('.', "p"),
            map,
        });
    }
    if columns.is_empty() {
        bail!("frontier needs at least one --lambda");
    }
    Ok(columns)
}

fn phi_for(uos: f64, dmd: &BTreeMap<String, f64>, lambda: &BTreeMap<String, f64>) -> Result<f64> {
    Ok(metrics::objective(uos, dmd, lambda)?)
}

#[allow(clippy::too_many_arguments)]
pub fn frontier(
    input: &Path,
    attrs: &[String],
    mode: &str,
    theta: f64,
    lambda_args: &[String],
    model_path: Option<&Path>,
    grid_k: usize,
    step_angle: f64,
    steps: usize,
    out: &Path,
) -> Result<()> {
    let pop = read_population(input, attrs)?;
    let model = resolve_model(model_path, &pop)?;
    let sweep_attr = attrs[0].clone();
    let columns = parse_lambda_columns(lambda_args, &attrs[..1])?;

    let mut lines = Vec::new();
    match mode {
        "bonus" => {
            // The grid rows (uos, dmd, threshold) do not depend on lambda;
            // run the search with a zero map and price the columns here.
            let cfg = BonusSearchConfig {
                grid_k,
                lambda: BTreeMap::from_iter([(sweep_attr.clone(), 0.0)]),
            };
            let result = search::search_bonus(&pop, &model, theta, &sweep_attr, &cfg)?;
            let mut header = vec!["b".to_string(), "threshold".into(), "uos".into()];
            header.extend(result.grid[0].dmd.keys().map(|a| format!("dmd_{a}")));
            for col in &columns {
                header.push(format!("phi_{}", col.label));
            }
            header.push("quota_q".into());
            lines.push(csv_line(&header));
            for point in &result.grid {
                let mut row = vec![sig9(point.bonus), sig9(point.threshold), sig9(point.uos)];
                row.extend(point.dmd.values().map(|d| sig9(*d)));
                for col in &columns {
                    row.push(sig9(phi_for(point.uos, &point.dmd, &col.map)?));
                }
                let policy = Policy::Bonus {
                    weights: model.weights.clone(),
                    bonuses: BTreeMap::from_iter([(
                        sweep_attr.clone(),
                        BonusTerm {
                            amount: point.bonus,
                            group_a: result.favored_group_a,
                        },
                    )]),
                    threshold: point.threshold,
                };
                let quota = match bonus_to_quota(&policy, &pop, theta)? {
                    Policy::Quota { quota, .. } => quota,
                    _ => unreachable!(),
                };
                row.push(sig9(quota));
                lines.push(csv_line(&row));
            }
        }
        "coefficients" => {
            let plan = RotationPlan::coordinate_pairs(pop.dim(), step_angle, steps)?;
            let zero: BTreeMap<String, f64> = attrs.iter().map(|a| (a.clone(), 0.0)).collect();
            let result = search::search_coefficients(&pop, &model, theta, &zero, &plan)?;
            let mut header = vec!["direction".to_string(), "step".into(), "angle".into()];
            header.extend(pop.score_names().iter().map(|s| format!("w_{s}")));
            header.push("uos".into());
            header.extend(result.trace[0].dmd.keys().map(|a| format!("dmd_{a}")));
            for col in &columns {
                header.push(format!("phi_{}", col.label));
            }
            lines.push(csv_line(&header));
            for point in &result.trace {
                let mut row = vec![
                    point
                        .direction
                        .map(|(i, j)| format!("{i}>{j}"))
                        .unwrap_or_else(|| "start".into()),
                    point.step.to_string(),
                    sig9(point.angle),
                ];
                row.extend(point.weights.iter().map(|w| sig9(*w)));
                row.push(sig9(point.uos));
                row.extend(point.dmd.values().map(|d| sig9(*d)));
                for col in &columns {
                    row.push(sig9(phi_for(point.uos, &point.dmd, &col.map)?));
                }
                lines.push(csv_line(&row));
            }
        }
        other => bail!("--mode must be bonus or coefficients, got '{other}'"),
    }

    let mut guard = OutputGuard::new();
    guard.write(out, &(lines.join("\n") + "\n"))?;
    let mut inputs: Vec<&Path> = vec![input];
    if let Some(p) = model_path {
        inputs.push(p);
    }
    // The manifest's lambda map records the first requested column.
    let m = manifest("frontier", &inputs, Some(theta), &columns[0].map, None)?;
    guard.finish(out, &m)
}
