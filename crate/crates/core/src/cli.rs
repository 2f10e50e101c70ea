//! The commands behind the `layerfuse` binary. Each returns a report whose `ok` flag
//! decides the exit code.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{run_cv, wilcoxon_signed_rank, CvSettings};
use crate::report::{write_atomic, ResultsFile, RunReport, ScoresFile};
use crate::sidecar::{reducer_to_bytes, svm_to_bytes};
use crate::tensor_store::{stratified_folds, DatasetManifest, Diagnostic};

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_TABLE: &str = "results.txt";
pub const SCORES_JSON: &str = "scores.json";
pub const MODELS_DIR: &str = "models";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub ok: bool,
    pub json: Value,
    pub text: String,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.ok {
            0
        } else {
            1
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
                s.push('\n');
                s
            }
            OutputFormat::Table => self.text.clone(),
        }
    }

    fn error(err: &Error) -> Self {
        Self {
            ok: false,
            json: json!({ "ok": false, "error": err.to_string() }),
            text: format!("error: {err}\n"),
        }
    }
}

/// Runs a command and turns an error into a failing report.
pub fn into_report(result: Result<Report>) -> Report {
    result.unwrap_or_else(|e| Report::error(&e))
}

/// Loads a manifest and opens every tensor it lists.
pub fn cmd_validate(manifest_path: impl AsRef<Path>) -> Report {
    let path = manifest_path.as_ref();
    let diagnostics: Vec<Diagnostic> = match DatasetManifest::load(path) {
        Ok(m) => m.validate_files(),
        Err(e) => vec![Diagnostic {
            sample: None,
            layer: None,
            path: Some(path.to_path_buf()),
            message: e.to_string(),
        }],
    };
    let ok = diagnostics.is_empty();
    let text = if ok {
        format!("ok: {}\n", path.display())
    } else {
        diagnostics.iter().map(|d| format!("{d}\n")).collect()
    };
    Report {
        ok,
        json: json!({ "ok": ok, "manifest": path, "diagnostics": diagnostics }),
        text,
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Cross-validates a configuration and writes the results, fused scores, table and
/// per-fold model sidecars under the configured output directory.
pub fn cmd_run(config_path: impl AsRef<Path>) -> Result<Report> {
    let config = PipelineConfig::load(config_path)?;
    let manifest = DatasetManifest::load(config.manifest_path())?;
    let plans = config.plans()?;
    let rows = config.method_rows()?;
    let layers = config.resolve_layers(&manifest.layers)?;
    let folds = stratified_folds(&manifest.labels(), config.cv.k, config.cv.seed)?;
    let settings = CvSettings {
        layers,
        raw_policy: config.reduction.raw_policy(),
        svm: config.svm,
        sffs: config.sffs,
        keep_models: true,
    };
    let outcome = run_cv(&manifest, &folds, &plans, &rows, &settings)?;

    let dataset = config.dataset_name();
    let results = ResultsFile::new(vec![RunReport::from_outcome(&dataset, folds.k, &outcome)]);
    let out_dir = config.output_path();
    let models_dir = out_dir.join(MODELS_DIR);
    fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    let results_json = results.to_json()?;
    let table = results.render_table();
    write_atomic(out_dir.join(RESULTS_JSON), results_json.as_bytes())?;
    write_atomic(out_dir.join(RESULTS_TABLE), table.as_bytes())?;
    let mut scores = serde_json::to_string(&ScoresFile::from_outcome(&dataset, &outcome))?;
    scores.push('\n');
    write_atomic(out_dir.join(SCORES_JSON), scores.as_bytes())?;
    for m in &outcome.models {
        let dir = models_dir.join(format!("fold{}", m.fold));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = format!("{}__{}", file_safe(&m.id.layer), file_safe(&m.id.method));
        write_atomic(dir.join(format!("{stem}.reducer")), &reducer_to_bytes(&m.reducer))?;
        write_atomic(dir.join(format!("{stem}.svm")), &svm_to_bytes(&m.svm))?;
    }

    Ok(Report {
        ok: true,
        json: serde_json::to_value(&results)?,
        text: table,
    })
}

/// Mean accuracy per id. Without a method filter ids are `dataset/method`; with one
/// they are dataset names.
fn keyed_means(file: &ResultsFile, method: Option<&str>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for run in &file.runs {
        for row in &run.rows {
            match method {
                Some(m) if row.method == m => {
                    out.insert(run.dataset.clone(), row.mean_accuracy);
                }
                Some(_) => {}
                None => {
                    out.insert(format!("{}/{}", run.dataset, row.method), row.mean_accuracy);
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct CompareReport<'a> {
    ok: bool,
    ids: Vec<&'a str>,
    a: Vec<f64>,
    b: Vec<f64>,
    n_effective: usize,
    w: f64,
    p_value: f64,
    method: crate::eval::WilcoxonMethod,
}

/// Pairs mean accuracies of two results files by id and runs the signed-rank test.
pub fn cmd_compare(
    a: impl AsRef<Path>,
    b: impl AsRef<Path>,
    method_a: Option<&str>,
    method_b: Option<&str>,
) -> Result<Report> {
    let fa = ResultsFile::load(a)?;
    let fb = ResultsFile::load(b)?;
    if method_a.is_some() != method_b.is_some() {
        return Err(Error::argument("give both --method-a and --method-b or neither"));
    }
    let ka = keyed_means(&fa, method_a);
    let kb = keyed_means(&fb, method_b);
    if ka.is_empty() || ka.keys().ne(kb.keys()) {
        let list = |m: &BTreeMap<String, f64>| m.keys().cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::argument(format!(
            "results files cover different ids; a: [{}]; b: [{}]",
            list(&ka),
            list(&kb)
        )));
    }
    let av: Vec<f64> = ka.values().copied().collect();
    let bv: Vec<f64> = kb.values().copied().collect();
    let w = wilcoxon_signed_rank(&av, &bv)?;
    let report = CompareReport {
        ok: true,
        ids: ka.keys().map(String::as_str).collect(),
        a: av,
        b: bv,
        n_effective: w.n_effective,
        w: w.w,
        p_value: w.p_value,
        method: w.method,
    };
    let text = format!(
        "pairs = {}\nn = {}\nW = {}\np = {}\nmethod = {}\n",
        report.ids.len(),
        w.n_effective,
        w.w,
        w.p_value,
        match w.method {
            crate::eval::WilcoxonMethod::Exact => "exact",
            crate::eval::WilcoxonMethod::NormalApproximation => "normal-approximation",
        }
    );
    Ok(Report {
        ok: true,
        json: serde_json::to_value(&report)?,
        text,
    })
}

/// Combines single-dataset results files into one multi-dataset file.
pub fn cmd_merge(inputs: &[PathBuf], output: impl AsRef<Path>) -> Result<Report> {
    if inputs.is_empty() {
        return Err(Error::argument("nothing to merge"));
    }
    let files = inputs
        .iter()
        .map(ResultsFile::load)
        .collect::<Result<Vec<_>>>()?;
    let merged = ResultsFile::merge(&files)?;
    write_atomic(output, merged.to_json()?.as_bytes())?;
    Ok(Report {
        ok: true,
        json: serde_json::to_value(&merged)?,
        text: merged.render_table(),
    })
}
