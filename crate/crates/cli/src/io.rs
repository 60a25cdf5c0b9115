//! File plumbing: population/selection/model loading, run manifests, and
//! cleanup of partially written outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fairsel::model::{load_population, CsvSchema};
use fairsel::policies::{PolicyFile, Selection, WeightVector};
use fairsel::{OutcomeModel, Population};

/// Reads a population CSV; the first header column is the id, the named
/// columns are `{0,1}`-coded attributes, an `outcome` column is optional,
/// and every other column is a score.
pub fn read_population(path: &Path, attrs: &[String]) -> Result<Population> {
    if attrs.is_empty() {
        bail!("at least one --attr is required to interpret the population columns");
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading population {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .context("reading CSV header")?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let attr_refs: Vec<&str> = attrs.iter().map(|s| s.as_str()).collect();
    for attr in &attr_refs {
        if !header.iter().any(|h| h == attr) {
            bail!(
                "attribute column '{attr}' not found in {} (header: {})",
                path.display(),
                header.join(", ")
            );
        }
    }
    let schema = CsvSchema::infer(&header, &attr_refs)?;
    load_population(text.as_bytes(), &schema)
        .with_context(|| format!("parsing population {}", path.display()))
}

pub fn read_policy(path: &Path, pop: &Population) -> Result<PolicyFile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading policy {}", path.display()))?;
    let file = PolicyFile::from_toml(&text)
        .with_context(|| format!("parsing policy {}", path.display()))?;
    if file.score_names != pop.score_names() {
        bail!(
            "policy {} was built for score columns [{}], population has [{}]",
            path.display(),
            file.score_names.join(", "),
            pop.score_names().join(", ")
        );
    }
    Ok(file)
}

/// Serialized outcome model.
///
/// ```toml
/// alpha0 = 4.0
/// alpha = 2.0
/// score_names = ["math", "language"]
/// weights = [0.7, 0.3]
/// ```
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    alpha0: f64,
    alpha: f64,
    score_names: Vec<String>,
    weights: Vec<f64>,
}

pub fn write_model(model: &OutcomeModel, score_names: &[String]) -> Result<String> {
    let doc = ModelDoc {
        alpha0: model.alpha0,
        alpha: model.alpha,
        score_names: score_names.to_vec(),
        weights: model.weights.components().to_vec(),
    };
    Ok(toml::to_string(&doc)?)
}

pub fn read_model(path: &Path, pop: &Population) -> Result<OutcomeModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let doc: ModelDoc =
        toml::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
    if doc.score_names != pop.score_names() {
        bail!(
            "model {} was fitted on score columns [{}], population has [{}]",
            path.display(),
            doc.score_names.join(", "),
            pop.score_names().join(", ")
        );
    }
    Ok(OutcomeModel {
        alpha0: doc.alpha0,
        alpha: doc.alpha,
        weights: WeightVector::new(doc.weights).context("model weights")?,
    })
}

/// Loads `--model` when given, otherwise fits from the outcome column.
pub fn resolve_model(model_path: Option<&Path>, pop: &Population) -> Result<OutcomeModel> {
    match model_path {
        Some(path) => read_model(path, pop),
        None => {
            let fit = fairsel::fit_outcome_model(pop).context(
                "no --model given and fitting from the outcome column failed; \
                 supply --model or a population with observed outcomes",
            )?;
            for name in &fit.clipped {
                log::warn!("fitted slope for '{name}' was negative and clipped to zero");
            }
            Ok(fit.model)
        }
    }
}

/// Selections on disk are a one-column CSV of admitted ids.
pub fn write_selection(selection: &Selection) -> String {
    let mut out = String::from("id\n");
    for id in selection.admitted_ids() {
        out.push_str(&format!("{id}\n"));
    }
    out
}

pub fn read_selection(path: &Path, pop: &Population) -> Result<Selection> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading selection {}", path.display()))?;
    let mut ids = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 {
            if line != "id" {
                bail!(
                    "selection {} must start with an 'id' header",
                    path.display()
                );
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let id: u64 = line
            .parse()
            .with_context(|| format!("selection {} line {}", path.display(), i + 1))?;
        if pop.candidate_by_id(id).is_none() {
            bail!(
                "selection {} names unknown candidate id {id}",
                path.display()
            );
        }
        ids.insert(id);
    }
    Ok(Selection::from_ids(ids, pop.len()))
}

// ---------------------------------------------------------------------------
// Run manifest and output cleanup
// ---------------------------------------------------------------------------

/// Written alongside every command's primary output so a run can be
/// reproduced from its artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub lambda: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// SHA-256 over the concatenated input files, in listed order.
    pub config_digest: String,
    pub outputs: Vec<String>,
}

pub fn digest_inputs(paths: &[&Path]) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in paths {
        let mut file =
            fs::File::open(path).with_context(|| format!("digesting {}", path.display()))?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        hasher.update(&buf);
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(format!("sha256:{hex}"))
}

/// Tracks files written by a command; anything registered but not committed
/// is deleted on drop, so failed runs leave no partial outputs behind.
pub struct OutputGuard {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self {
            written: Vec::new(),
            committed: false,
        }
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.written.push(path.to_path_buf());
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn written(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.display().to_string())
            .collect()
    }

    /// Writes the manifest next to the primary output and commits.
    pub fn finish(mut self, primary_out: &Path, manifest: &RunManifest) -> Result<()> {
        let mut manifest_path = primary_out.as_os_str().to_owned();
        manifest_path.push(".manifest.json");
        let path = PathBuf::from(manifest_path);
        let mut doc = serde_json::to_value(manifest)?;
        doc["outputs"] = serde_json::to_value({
            let mut outs = self.written();
            outs.push(path.display().to_string());
            outs
        })?;
        self.write(&path, &format!("{:#}\n", doc))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

/// Joins CSV cells; values are already formatted.
pub fn csv_line(cells: &[String]) -> String {
    cells.join(",")
}
