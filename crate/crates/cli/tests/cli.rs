//! End-to-end tests of the `fairsel` binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fairsel")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

const GEN_CONFIG: &str = r#"
n = 220
seed = 42
noise_std = 2.0
score_names = ["grades", "math"]

[bounds]
lo = 0.0
hi = 200.0

[outcome]
alpha0 = 5.0
alpha = 1.5
coefficients = [0.6, 0.4]

[[attributes]]
name = "low_income"
prevalence = 0.4

[[attributes.score_dists]]
mean_a = 70.0
std_a = 18.0
mean_other = 105.0
std_other = 18.0

[[attributes.score_dists]]
mean_a = 75.0
std_a = 15.0
mean_other = 100.0
std_other = 15.0
"#;

struct Workspace {
    _dir: TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("gen.toml"), GEN_CONFIG).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

fn simulate(ws: &Workspace, out: &str) {
    run_ok(&[
        "simulate",
        "--config",
        &ws.arg("gen.toml"),
        "--out",
        &ws.arg(out),
    ]);
}

#[test]
fn simulate_is_deterministic_and_writes_manifest() {
    let ws = Workspace::new();
    simulate(&ws, "pop_a.csv");
    simulate(&ws, "pop_b.csv");
    let a = fs::read(ws.path("pop_a.csv")).unwrap();
    let b = fs::read(ws.path("pop_b.csv")).unwrap();
    assert_eq!(a, b, "same seed must produce byte-identical populations");

    run_ok(&[
        "simulate",
        "--config",
        &ws.arg("gen.toml"),
        "--seed",
        "7",
        "--out",
        &ws.arg("pop_c.csv"),
    ]);
    let c = fs::read(ws.path("pop_c.csv")).unwrap();
    assert_ne!(a, c, "a different seed must change the population");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("pop_a.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 42);
    assert!(manifest["config_digest"]
        .as_str()
        .unwrap()
        .starts_with("sha256:"));
    assert!(manifest["outputs"].as_array().unwrap().len() >= 2);
}

#[test]
fn invalid_config_fails_cleanly() {
    let ws = Workspace::new();
    let bad = GEN_CONFIG.replace("n = 220", "n = 0");
    fs::write(ws.path("bad.toml"), bad).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        &ws.arg("bad.toml"),
        "--out",
        &ws.arg("pop.csv"),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("'n'"),
        "stderr must name the field: {stderr}"
    );
    assert!(
        !ws.path("pop.csv").exists(),
        "failed run must not leave outputs behind"
    );
    assert!(!ws.path("pop.csv.manifest.json").exists());
}

#[test]
fn search_pipeline_round_trips() {
    let ws = Workspace::new();
    simulate(&ws, "pop.csv");
    run_ok(&[
        "fit",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--out",
        &ws.arg("model.toml"),
    ]);
    run_ok(&[
        "search-bonus",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--theta",
        "0.3",
        "--lambda",
        "low_income=100",
        "--grid-k",
        "40",
        "--model",
        &ws.arg("model.toml"),
        "--out",
        &ws.arg("bonus.toml"),
        "--report",
        &ws.arg("report.json"),
        "--trace",
        &ws.arg("trace.csv"),
    ]);

    // Policy files round-trip bit-identically through parse + serialize.
    let text = fs::read_to_string(ws.path("bonus.toml")).unwrap();
    let parsed = fairsel::policies::PolicyFile::from_toml(&text).unwrap();
    assert_eq!(parsed.to_toml().unwrap(), text);

    // 41 grid rows plus the header.
    let trace = fs::read_to_string(ws.path("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 42);
    assert!(trace
        .lines()
        .next()
        .unwrap()
        .starts_with("b,threshold,uos,dmd_low_income"));

    run_ok(&[
        "bonus-to-quota",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--policy",
        &ws.arg("bonus.toml"),
        "--theta",
        "0.3",
        "--out",
        &ws.arg("quota.toml"),
    ]);
    run_ok(&[
        "quota-to-bonus",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--policy",
        &ws.arg("quota.toml"),
        "--theta",
        "0.3",
        "--out",
        &ws.arg("bonus2.toml"),
    ]);
    let quota = fs::read_to_string(ws.path("quota.toml")).unwrap();
    assert!(quota.contains("kind = \"quota\""));
    let bonus2 = fs::read_to_string(ws.path("bonus2.toml")).unwrap();
    assert!(bonus2.contains("kind = \"bonus\""));

    // Evaluating the searched policy and the round-tripped one under
    // exact-k admission gives the same admitted counts. (The round-tripped
    // bonus is the smallest equivalent one, which sits at a breakpoint, so
    // plain threshold admission would over-admit the tied pair.)
    for (policy, sel) in [("bonus.toml", "sel1.csv"), ("bonus2.toml", "sel2.csv")] {
        run_ok(&[
            "evaluate",
            "--input",
            &ws.arg("pop.csv"),
            "--attr",
            "low_income",
            "--policy",
            &ws.arg(policy),
            "--model",
            &ws.arg("model.toml"),
            "--lambda",
            "low_income=100",
            "--theta",
            "0.3",
            "--out",
            &ws.arg(&format!("{policy}.report.json")),
            "--selection-out",
            &ws.arg(sel),
        ]);
    }
    run_ok(&[
        "compare",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--a",
        &ws.arg("sel1.csv"),
        "--b",
        &ws.arg("sel2.csv"),
        "--model",
        &ws.arg("model.toml"),
        "--out",
        &ws.arg("cmp.json"),
    ]);
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("cmp.json")).unwrap()).unwrap();
    assert_eq!(cmp["group_counts_equal"], true);
}

#[test]
fn evaluate_csv_format() {
    let ws = Workspace::new();
    simulate(&ws, "pop.csv");
    run_ok(&[
        "search-coeffs",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--theta",
        "0.3",
        "--lambda",
        "low_income=50",
        "--steps",
        "10",
        "--out",
        &ws.arg("coeffs.toml"),
    ]);
    run_ok(&[
        "evaluate",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--policy",
        &ws.arg("coeffs.toml"),
        "--lambda",
        "low_income=50",
        "--format",
        "csv",
        "--out",
        &ws.arg("report.csv"),
    ]);
    let report = fs::read_to_string(ws.path("report.csv")).unwrap();
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("uos,dmd_low_income,objective"));
    assert_eq!(
        lines.next().unwrap().split(',').count(),
        header.split(',').count()
    );
}

#[test]
fn frontier_emits_lambda_columns_and_quota() {
    let ws = Workspace::new();
    simulate(&ws, "pop.csv");
    run_ok(&[
        "frontier",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--mode",
        "bonus",
        "--theta",
        "0.3",
        "--lambda",
        "0",
        "--lambda",
        "100",
        "--grid-k",
        "25",
        "--out",
        &ws.arg("frontier.csv"),
    ]);
    let text = fs::read_to_string(ws.path("frontier.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        vec![
            "b",
            "threshold",
            "uos",
            "dmd_low_income",
            "phi_0",
            "phi_100",
            "quota_q"
        ]
    );
    let mut rows = 0;
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (dmd, phi0, phi100) = (cells[3], cells[4], cells[5]);
        if dmd != 0.0 {
            assert!(phi0 > phi100, "phi_0 must exceed phi_100 when dmd != 0");
        }
        let q = cells[6];
        assert!((0.0..=1.0).contains(&q));
        rows += 1;
    }
    assert_eq!(rows, 26);

    // Coefficients mode.
    run_ok(&[
        "frontier",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--mode",
        "coefficients",
        "--theta",
        "0.3",
        "--lambda",
        "100",
        "--steps",
        "8",
        "--out",
        &ws.arg("frontier_coeffs.csv"),
    ]);
    let text = fs::read_to_string(ws.path("frontier_coeffs.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("direction,step,angle,w_grades,w_math,uos,dmd_low_income,phi_100"));
    // start row + 2 directions x 8 steps
    assert_eq!(text.lines().count(), 1 + 1 + 16);
}

#[test]
fn baseline_outputs() {
    let ws = Workspace::new();
    simulate(&ws, "pop.csv");
    run_ok(&[
        "baseline-median",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--theta",
        "0.3",
        "--out",
        &ws.arg("repaired.csv"),
        "--selection-out",
        &ws.arg("sel_median.csv"),
    ]);
    let repaired = fs::read_to_string(ws.path("repaired.csv")).unwrap();
    assert!(repaired
        .lines()
        .next()
        .unwrap()
        .starts_with("id,low_income,repaired_grades,repaired_math"));

    run_ok(&[
        "baseline-fair",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "low_income",
        "--theta",
        "0.3",
        "--rho",
        "0.3",
        "--out",
        &ws.arg("ranking.csv"),
        "--selection-out",
        &ws.arg("sel_fair.csv"),
    ]);
    let ranking = fs::read_to_string(ws.path("ranking.csv")).unwrap();
    assert_eq!(ranking.lines().next().unwrap(), "position,id,group,score");
    assert_eq!(ranking.lines().count(), 1 + 66); // header + k rows

    let sel = fs::read_to_string(ws.path("sel_fair.csv")).unwrap();
    assert_eq!(sel.lines().count(), 1 + 66);
}

#[test]
fn observe_top_masks_outcomes() {
    let ws = Workspace::new();
    run_ok(&[
        "simulate",
        "--config",
        &ws.arg("gen.toml"),
        "--observe-top",
        "0.3",
        "--out",
        &ws.arg("pop.csv"),
    ]);
    let text = fs::read_to_string(ws.path("pop.csv")).unwrap();
    let observed = text.lines().skip(1).filter(|l| !l.ends_with(',')).count();
    // 30% of 220, exactly.
    assert_eq!(observed, 66);
}

#[test]
fn unknown_attribute_is_reported() {
    let ws = Workspace::new();
    simulate(&ws, "pop.csv");
    let out = run(&[
        "fit",
        "--input",
        &ws.arg("pop.csv"),
        "--attr",
        "nope",
        "--out",
        &ws.arg("model.toml"),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope"), "stderr: {stderr}");
    assert!(!ws.path("model.toml").exists());
}
