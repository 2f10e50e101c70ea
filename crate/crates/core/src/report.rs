//! Results files: JSON reports, fused scores and the plain-text accuracy table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSelection;
use crate::error::{Error, Result};
use crate::eval::{CvOutcome, FoldScores};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowReport {
    pub method: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selections: Option<Vec<EnsembleSelection>>,
}

/// One dataset evaluated under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub dataset: String,
    pub folds: usize,
    #[serde(default)]
    pub layers: Vec<String>,
    #[serde(default)]
    pub classifiers: Vec<String>,
    pub rows: Vec<RowReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub format_version: u32,
    pub runs: Vec<RunReport>,
}

impl RunReport {
    pub fn from_outcome(dataset: impl Into<String>, folds: usize, outcome: &CvOutcome) -> Self {
        Self {
            dataset: dataset.into(),
            folds,
            layers: outcome.layers.clone(),
            classifiers: outcome.classifiers.iter().map(ToString::to_string).collect(),
            rows: outcome
                .results
                .iter()
                .map(|r| RowReport {
                    method: r.method.clone(),
                    fold_accuracies: r.fold_accuracies.clone(),
                    mean_accuracy: r.mean_accuracy,
                    selections: r.selections.clone(),
                })
                .collect(),
        }
    }
}

impl ResultsFile {
    pub fn new(runs: Vec<RunReport>) -> Self {
        Self {
            format_version: RESULTS_FORMAT_VERSION,
            runs,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.format_version != RESULTS_FORMAT_VERSION {
            return Err(Error::argument(format!(
                "unsupported results format version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::argument(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Concatenates runs; dataset ids must stay unique.
    pub fn merge(files: &[ResultsFile]) -> Result<Self> {
        let mut runs: Vec<RunReport> = Vec::new();
        for run in files.iter().flat_map(|f| &f.runs) {
            if runs.iter().any(|r| r.dataset == run.dataset) {
                return Err(Error::argument(format!("dataset {:?} appears twice", run.dataset)));
            }
            runs.push(run.clone());
        }
        Ok(Self::new(runs))
    }

    /// Aligned text table. A single run shows its folds plus `Avg`; several runs show one
    /// column per dataset plus `Avg` over datasets.
    pub fn render_table(&self) -> String {
        let (header, body): (Vec<String>, Vec<(String, Vec<Option<f64>>)>) = match self.runs.as_slice() {
            [run] => {
                let mut header: Vec<String> = (1..=run.folds).map(|f| format!("Fold{f}")).collect();
                header.push("Avg".into());
                let body = run
                    .rows
                    .iter()
                    .map(|r| {
                        let mut cells: Vec<Option<f64>> = r.fold_accuracies.iter().map(|&a| Some(a)).collect();
                        cells.push(Some(r.mean_accuracy));
                        (r.method.clone(), cells)
                    })
                    .collect();
                (header, body)
            }
            runs => {
                let mut methods: Vec<&str> = Vec::new();
                for row in runs.iter().flat_map(|r| &r.rows) {
                    if !methods.contains(&row.method.as_str()) {
                        methods.push(&row.method);
                    }
                }
                let mut header: Vec<String> = runs.iter().map(|r| r.dataset.clone()).collect();
                header.push("Avg".into());
                let body = methods
                    .iter()
                    .map(|m| {
                        let mut cells: Vec<Option<f64>> = runs
                            .iter()
                            .map(|r| r.rows.iter().find(|row| row.method == *m).map(|row| row.mean_accuracy))
                            .collect();
                        let present: Vec<f64> = cells.iter().flatten().copied().collect();
                        cells.push((!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64));
                        (m.to_string(), cells)
                    })
                    .collect();
                (header, body)
            }
        };

        let first_width = body
            .iter()
            .map(|(m, _)| m.len())
            .chain(std::iter::once("Method".len()))
            .max()
            .unwrap_or(6);
        let widths: Vec<usize> = header.iter().map(|h| h.len().max(6)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<first_width$}", "Method");
        for (h, w) in header.iter().zip(&widths) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for (method, cells) in &body {
            let _ = write!(out, "{method:<first_width$}");
            for (cell, w) in cells.iter().zip(&widths) {
                match cell {
                    Some(v) => {
                        let _ = write!(out, "  {v:>w$.4}");
                    }
                    None => {
                        let _ = write!(out, "  {:>w$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowScores {
    pub method: String,
    pub folds: Vec<FoldScores>,
}

/// Per-fold fused score matrices of every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub format_version: u32,
    pub dataset: String,
    pub rows: Vec<RowScores>,
}

impl ScoresFile {
    pub fn from_outcome(dataset: impl Into<String>, outcome: &CvOutcome) -> Self {
        Self {
            format_version: RESULTS_FORMAT_VERSION,
            dataset: dataset.into(),
            rows: outcome
                .results
                .iter()
                .map(|r| RowScores {
                    method: r.method.clone(),
                    folds: r.fold_scores.clone(),
                })
                .collect(),
        }
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::argument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
