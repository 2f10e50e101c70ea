//! Multiclass linear SVMs over reduced layer features, emitting per-class score rows.

mod binary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binary::{train_binary, BinarySvmModel, SolverParams};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::sidecar::{Reader, Writer};

/// Per-feature z-score statistics. Zero standard deviations are stored as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Population mean and standard deviation of each column.
    pub fn fit(rows: &FeatureMatrix) -> Self {
        let (n, d) = (rows.rows() as f64, rows.cols());
        let mut mean = vec![0.0; d];
        for r in rows.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows.iter_rows() {
            for j in 0..d {
                let diff = r[j] - mean[j];
                var[j] += diff * diff;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &FeatureMatrix) -> FeatureMatrix {
        let data: Vec<f64> = rows.iter_rows().flat_map(|r| self.apply_row(r)).collect();
        FeatureMatrix::from_vec(rows.rows(), rows.cols(), data).expect("same shape")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coding {
    OneVsAll,
    OneVsOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSettings {
    #[serde(default = "default_coding")]
    pub coding: Coding,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_coding() -> Coding {
    Coding::OneVsAll
}
fn default_c() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-4
}
fn default_max_epochs() -> usize {
    1000
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            coding: Coding::OneVsAll,
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

/// One binary subproblem: `positive` vs `negative` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTask {
    pub positive: usize,
    /// `None` means "every other class".
    pub negative: Option<usize>,
    pub model: BinarySvmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel {
    pub classes: usize,
    pub coding: Coding,
    pub stats: StandardizationStats,
    pub tasks: Vec<BinaryTask>,
}

/// Binary task layout for a coding: `(positive, negative)` pairs.
///
/// One-vs-all with two classes collapses to the single task `0 vs 1` so both codings agree.
pub fn task_layout(coding: Coding, classes: usize) -> Vec<(usize, Option<usize>)> {
    match coding {
        Coding::OneVsAll if classes == 2 => vec![(0, None)],
        Coding::OneVsAll => (0..classes).map(|k| (k, None)).collect(),
        Coding::OneVsOne => (0..classes)
            .flat_map(|a| (a + 1..classes).map(move |b| (a, Some(b))))
            .collect(),
    }
}

fn task_seed(base: u64, task: usize) -> u64 {
    base.wrapping_add((task as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Standardizes `rows` and trains the coding's binary problems (in parallel).
pub fn train_multiclass(
    rows: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    settings: &SvmSettings,
) -> Result<MulticlassSvmModel> {
    if classes < 2 {
        return Err(Error::Training(format!("need at least 2 classes, got {classes}")));
    }
    if labels.len() != rows.rows() {
        return Err(Error::argument(format!(
            "{} labels for {} rows",
            labels.len(),
            rows.rows()
        )));
    }
    let mut present = vec![false; classes];
    for &l in labels {
        *present
            .get_mut(l)
            .ok_or_else(|| Error::argument(format!("label {l} >= class count {classes}")))? = true;
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(Error::Training(format!("class {missing} has no training rows")));
    }

    let stats = StandardizationStats::fit(rows);
    let standardized = stats.apply(rows);
    let layout = task_layout(settings.coding, classes);
    let tasks = layout
        .par_iter()
        .enumerate()
        .map(|(t, &(positive, negative))| {
            let params = SolverParams {
                c: settings.c,
                tol: settings.tol,
                max_epochs: settings.max_epochs,
                seed: task_seed(settings.seed, t),
            };
            let model = match negative {
                None => {
                    let y: Vec<i8> = labels
                        .iter()
                        .map(|&l| if l == positive { 1 } else { -1 })
                        .collect();
                    train_binary(&standardized, &y, &params)?
                }
                Some(neg) => {
                    let idx: Vec<usize> = (0..labels.len())
                        .filter(|&i| labels[i] == positive || labels[i] == neg)
                        .collect();
                    let y: Vec<i8> = idx
                        .iter()
                        .map(|&i| if labels[i] == positive { 1 } else { -1 })
                        .collect();
                    train_binary(&standardized.select_rows(&idx), &y, &params)?
                }
            };
            Ok(BinaryTask {
                positive,
                negative,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MulticlassSvmModel {
        classes,
        coding: settings.coding,
        stats,
        tasks,
    })
}

/// Row-stochastic `samples x classes` score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    samples: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    /// Checks shape, nonnegativity and unit row sums (within 1e-9).
    pub fn new(samples: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != samples * classes {
            return Err(Error::argument(format!(
                "score matrix {samples}x{classes} needs {} values, got {}",
                samples * classes,
                data.len()
            )));
        }
        let m = Self {
            samples,
            classes,
            data,
        };
        for (i, row) in m.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::argument(format!(
                    "score row {i} is not a probability vector: {row:?}"
                )));
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::argument("score rows differ in length"));
        }
        let samples = rows.len();
        Self::new(samples, classes, rows.into_iter().flatten().collect())
    }

    pub(crate) fn from_raw(samples: usize, classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), samples * classes);
        Self {
            samples,
            classes,
            data,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.samples).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let data = indices.iter().flat_map(|&i| self.row(i).to_vec()).collect();
        Self::from_raw(indices.len(), self.classes, data)
    }
}

fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl MulticlassSvmModel {
    pub fn feature_dim(&self) -> usize {
        self.stats.mean.len()
    }

    /// Raw decision value of every binary task for one (unstandardized) row.
    pub fn decisions(&self, row: &[f64]) -> Vec<f64> {
        let z = self.stats.apply_row(row);
        self.tasks.iter().map(|t| t.model.decision(&z)).collect()
    }

    /// Turns per-task decision values into a score row.
    pub fn scores_from_decisions(&self, decisions: &[f64]) -> Vec<f64> {
        let k = self.classes;
        match self.coding {
            Coding::OneVsAll if k == 2 => softmax(&[decisions[0], -decisions[0]]),
            Coding::OneVsAll => softmax(decisions),
            Coding::OneVsOne => {
                let mut votes = vec![0.0; k];
                for (task, &dv) in self.tasks.iter().zip(decisions) {
                    let winner = if dv >= 0.0 {
                        task.positive
                    } else {
                        task.negative.expect("one-vs-one task")
                    };
                    votes[winner] += 1.0;
                }
                let pairs = (k * (k - 1) / 2) as f64;
                votes.iter_mut().for_each(|v| *v /= pairs);
                let total: f64 = votes.iter().sum();
                votes.into_iter().map(|v| v / total).collect()
            }
        }
    }

    pub fn predict_scores(&self, rows: &FeatureMatrix) -> Result<ScoreMatrix> {
        if rows.cols() != self.feature_dim() && rows.rows() > 0 {
            return Err(Error::argument(format!(
                "model expects {} features, got {}",
                self.feature_dim(),
                rows.cols()
            )));
        }
        let data = rows
            .iter_rows()
            .flat_map(|r| self.scores_from_decisions(&self.decisions(r)))
            .collect();
        Ok(ScoreMatrix::from_raw(rows.rows(), self.classes, data))
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u64(self.classes as u64);
        w.u8(matches!(self.coding, Coding::OneVsOne) as u8);
        w.f64s(&self.stats.mean);
        w.f64s(&self.stats.std);
        w.u64(self.tasks.len() as u64);
        for t in &self.tasks {
            w.u64(t.positive as u64);
            w.u64(t.negative.map_or(u64::MAX, |n| n as u64));
            w.f64s(&t.model.weights);
            w.f64(t.model.bias);
            w.f64(t.model.c);
            w.u64(t.model.epochs as u64);
            w.f64(t.model.kkt_violation);
            w.u8(t.model.converged as u8);
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let classes = r.usize()?;
        let coding = if r.u8()? == 1 {
            Coding::OneVsOne
        } else {
            Coding::OneVsAll
        };
        let stats = StandardizationStats {
            mean: r.f64s()?,
            std: r.f64s()?,
        };
        let count = r.usize()?;
        let mut tasks = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let positive = r.usize()?;
            let neg = r.u64()?;
            let weights = r.f64s()?;
            if weights.len() != stats.mean.len() {
                return Err(Error::Sidecar("weight vector length mismatch".into()));
            }
            let model = BinarySvmModel {
                weights,
                bias: r.f64()?,
                c: r.f64()?,
                epochs: r.usize()?,
                kkt_violation: r.f64()?,
                converged: r.u8()? == 1,
                dual_objective: Vec::new(),
                alphas: Vec::new(),
            };
            tasks.push(BinaryTask {
                positive,
                negative: (neg != u64::MAX).then_some(neg as usize),
                model,
            });
        }
        Ok(Self {
            classes,
            coding,
            stats,
            tasks,
        })
    }
}
