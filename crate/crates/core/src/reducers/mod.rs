//! Layer selection, reduction triggers and budgets, and the per-layer feature transforms.

mod chi2;
mod cooc;
mod dct;
mod lbp;
mod pca;
mod pooling;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chi2::{chi2_scores, chi2_select, DEFAULT_BINS};
pub use cooc::{cooc_channel_values, cooc_tensor, DEFAULT_EPSILON, DEFAULT_RADIUS};
pub use dct::{dct_channel, dct_global, zigzag_order, Dct, Dct2d};
pub use lbp::{bin_table as lbp_bin_table, lbp_histogram, LBP_BINS};
pub use pca::{pca_fit, Pca};
pub use pooling::{gep_value, gmtp_values, GEP_BINS};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::tensor_store::ActivationTensor;

/// Layers with more flattened features than this are reduced.
pub const REDUCTION_THRESHOLD: usize = 5000;
/// Total feature budget per reduced layer.
pub const DEFAULT_TARGET_DIM: usize = 1000;

/// 1-based indices of the layers to tap: every `stride`-th layer from the middle of the
/// network plus the last `tail` layers, ascending and deduplicated.
pub fn select_layers(layer_count: usize, stride: usize, tail: usize) -> Vec<usize> {
    if layer_count == 0 {
        return Vec::new();
    }
    let stride = stride.max(1);
    let middle = layer_count.div_ceil(2);
    let mut layers: Vec<usize> = (middle..=layer_count).step_by(stride).collect();
    layers.extend(layer_count.saturating_sub(tail) + 1..=layer_count);
    layers.sort_unstable();
    layers.dedup();
    layers
}

pub fn needs_reduction(flattened_dim: usize) -> bool {
    flattened_dim > REDUCTION_THRESHOLD
}

/// Features kept per channel when `total` is shared across `channel_count` channels.
pub fn channel_budget(channel_count: usize, total: usize) -> usize {
    (total / channel_count.max(1)).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReductionMethod {
    #[serde(rename = "DCT")]
    Dct,
    #[serde(rename = "GDCT")]
    GlobalDct,
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "CHI")]
    Chi,
    #[serde(rename = "LBP_CHI")]
    LbpChi,
    #[serde(rename = "COOC")]
    Cooc,
    #[serde(rename = "GEP")]
    Gep,
    #[serde(rename = "GMTP")]
    Gmtp,
    #[serde(rename = "RAW")]
    Raw,
}

impl ReductionMethod {
    pub const ALL: [ReductionMethod; 9] = [
        Self::Dct,
        Self::GlobalDct,
        Self::Pca,
        Self::Chi,
        Self::LbpChi,
        Self::Cooc,
        Self::Gep,
        Self::Gmtp,
        Self::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dct => "DCT",
            Self::GlobalDct => "GDCT",
            Self::Pca => "PCA",
            Self::Chi => "CHI",
            Self::LbpChi => "LBP_CHI",
            Self::Cooc => "COOC",
            Self::Gep => "GEP",
            Self::Gmtp => "GMTP",
            Self::Raw => "RAW",
        }
    }

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&m| m == self).unwrap() as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Methods that emit exactly one value per channel.
    pub fn is_channel_pooling(self) -> bool {
        matches!(self, Self::Cooc | Self::Gep | Self::Gmtp)
    }
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::config(format!(
                    "unknown reduction method {s:?}; valid: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Reduce each channel separately and concatenate.
    Local,
    /// Reduce the flattened layer vector as a whole.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub method: ReductionMethod,
    pub scope: Scope,
    /// Total output features (split across channels for local scope).
    pub target_dim: usize,
    pub pca_postprocess: bool,
}

impl ReductionPlan {
    pub fn new(
        method: ReductionMethod,
        scope: Scope,
        target_dim: usize,
        pca_postprocess: bool,
    ) -> Result<Self> {
        let plan = Self {
            method,
            scope,
            target_dim,
            pca_postprocess,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Default scope for the method with the standard 1000-feature budget.
    pub fn for_method(method: ReductionMethod) -> Self {
        let scope = match method {
            ReductionMethod::GlobalDct | ReductionMethod::Raw => Scope::Global,
            _ => Scope::Local,
        };
        Self {
            method,
            scope,
            target_dim: DEFAULT_TARGET_DIM,
            pca_postprocess: false,
        }
    }

    pub fn raw() -> Self {
        Self::for_method(ReductionMethod::Raw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_dim == 0 {
            return Err(Error::config("target_dim must be at least 1"));
        }
        match (self.method, self.scope) {
            (ReductionMethod::GlobalDct, Scope::Local) => {
                Err(Error::config("GDCT is a global-scope method"))
            }
            (m, Scope::Global) if m.is_channel_pooling() => Err(Error::config(format!(
                "{m} emits one value per channel and needs local scope"
            ))),
            _ => Ok(()),
        }
    }
}

/// Which plan a layer actually gets: layers in the raw tail of the network, or small
/// enough not to need reduction, are used as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    /// Flattened sizes above this are reduced.
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    /// The last `raw_tail` layers of the network always use raw features.
    #[serde(default = "default_raw_tail")]
    pub raw_tail: usize,
}

fn default_threshold() -> usize {
    REDUCTION_THRESHOLD
}

fn default_raw_tail() -> usize {
    4
}

impl Default for RawPolicy {
    fn default() -> Self {
        Self {
            threshold: REDUCTION_THRESHOLD,
            raw_tail: 4,
        }
    }
}

impl RawPolicy {
    /// `position` is 1-based within a network of `layer_count` layers.
    pub fn plan_for_layer(
        &self,
        position: usize,
        layer_count: usize,
        flattened_dim: usize,
        plan: ReductionPlan,
    ) -> ReductionPlan {
        let in_tail = position + self.raw_tail > layer_count;
        if in_tail || flattened_dim <= self.threshold {
            ReductionPlan::raw()
        } else {
            plan
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Stage {
    Raw,
    LocalDct { keep: usize },
    GlobalDct { keep: usize },
    LocalPca(Vec<Pca>),
    GlobalPca(Pca),
    LocalChi(Vec<Vec<usize>>),
    GlobalChi(Vec<usize>),
    LocalLbpChi(Vec<Vec<usize>>),
    GlobalLbpChi(Vec<usize>),
    Cooc { radius: usize, epsilon: f64 },
    Gep,
    Gmtp,
}

/// A reduction fitted on training samples of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedReducer {
    plan: ReductionPlan,
    dims: (usize, usize, usize),
    stage: Stage,
    post: Option<Pca>,
}

/// Per-transform scratch state (FFT plans are not serializable).
struct Workspace {
    dct2d: Option<Dct2d>,
    dct1d: Option<Dct>,
}

impl FittedReducer {
    /// Fits `plan` on the training tensors of one layer. All tensors must share dims.
    pub fn fit(
        plan: &ReductionPlan,
        train: &[&ActivationTensor],
        labels: &[usize],
    ) -> Result<Self> {
        plan.validate()?;
        let first = train
            .first()
            .ok_or_else(|| Error::Fit("no training tensors".into()))?;
        let dims = first.dims();
        check_dims(train, dims)?;
        if labels.len() != train.len() {
            return Err(Error::argument(format!(
                "{} labels for {} tensors",
                labels.len(),
                train.len()
            )));
        }
        let (d, m, n) = dims;
        let map_len = m * n;
        let budget = channel_budget(d, plan.target_dim);
        let global_keep = plan.target_dim.min(d * map_len);

        let stage = match (plan.method, plan.scope) {
            (ReductionMethod::Raw, _) => Stage::Raw,
            (ReductionMethod::Dct, Scope::Local) => Stage::LocalDct {
                keep: budget.min(map_len),
            },
            (ReductionMethod::Dct | ReductionMethod::GlobalDct, _) => {
                Stage::GlobalDct { keep: global_keep }
            }
            (ReductionMethod::Pca, Scope::Local) => {
                let pcas = (0..d)
                    .into_par_iter()
                    .map(|c| {
                        let rows = channel_rows(train, c);
                        pca_fit(&rows, budget)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Stage::LocalPca(pcas)
            }
            (ReductionMethod::Pca, Scope::Global) => {
                let rows = FeatureMatrix::from_rows(train.iter().map(|t| to_f64(t.values())).collect())?;
                Stage::GlobalPca(pca_fit(&rows, plan.target_dim)?)
            }
            (ReductionMethod::Chi, Scope::Local) => {
                let picks = (0..d)
                    .into_par_iter()
                    .map(|c| select_by_chi2(&channel_rows(train, c), labels, budget))
                    .collect();
                Stage::LocalChi(picks)
            }
            (ReductionMethod::Chi, Scope::Global) => {
                let rows = FeatureMatrix::from_rows(train.iter().map(|t| to_f64(t.values())).collect())?;
                Stage::GlobalChi(select_by_chi2(&rows, labels, plan.target_dim))
            }
            (ReductionMethod::LbpChi, scope) => {
                let hists = train
                    .iter()
                    .map(|t| lbp_features(t))
                    .collect::<Result<Vec<_>>>()?;
                let all = FeatureMatrix::from_rows(hists)?;
                if scope == Scope::Local {
                    let keep = budget.min(LBP_BINS);
                    let picks = (0..d)
                        .map(|c| {
                            let cols: Vec<usize> = (c * LBP_BINS..(c + 1) * LBP_BINS).collect();
                            select_by_chi2(&select_cols(&all, &cols), labels, keep)
                        })
                        .collect();
                    Stage::LocalLbpChi(picks)
                } else {
                    Stage::GlobalLbpChi(select_by_chi2(&all, labels, plan.target_dim))
                }
            }
            (ReductionMethod::Cooc, _) => Stage::Cooc {
                radius: DEFAULT_RADIUS,
                epsilon: DEFAULT_EPSILON,
            },
            (ReductionMethod::Gep, _) => Stage::Gep,
            (ReductionMethod::Gmtp, _) => Stage::Gmtp,
        };

        let mut fitted = Self {
            plan: *plan,
            dims,
            stage,
            post: None,
        };
        if plan.pca_postprocess {
            let reduced = fitted.stage_features(train)?;
            fitted.post = Some(pca_fit(&reduced, plan.target_dim)?);
        }
        Ok(fitted)
    }

    pub fn plan(&self) -> &ReductionPlan {
        &self.plan
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn post_pca(&self) -> Option<&Pca> {
        self.post.as_ref()
    }

    /// Output feature count.
    pub fn output_dim(&self) -> usize {
        if let Some(p) = &self.post {
            return p.kept();
        }
        self.stage_dim()
    }

    fn stage_dim(&self) -> usize {
        let (d, m, n) = self.dims;
        match &self.stage {
            Stage::Raw => d * m * n,
            Stage::LocalDct { keep } => d * keep,
            Stage::GlobalDct { keep } => *keep,
            Stage::LocalPca(p) => p.iter().map(Pca::kept).sum(),
            Stage::GlobalPca(p) => p.kept(),
            Stage::LocalChi(s) | Stage::LocalLbpChi(s) => s.iter().map(Vec::len).sum(),
            Stage::GlobalChi(s) | Stage::GlobalLbpChi(s) => s.len(),
            Stage::Cooc { .. } | Stage::Gep | Stage::Gmtp => d,
        }
    }

    fn workspace(&self) -> Workspace {
        let (d, m, n) = self.dims;
        Workspace {
            dct2d: matches!(self.stage, Stage::LocalDct { .. }).then(|| Dct2d::new(m, n)),
            dct1d: matches!(self.stage, Stage::GlobalDct { .. }).then(|| Dct::new(d * m * n)),
        }
    }

    fn stage_one(&self, ws: &Workspace, t: &ActivationTensor) -> Result<Vec<f64>> {
        if t.dims() != self.dims {
            return Err(Error::config(format!(
                "tensor dims {:?} do not match reducer dims {:?}",
                t.dims(),
                self.dims
            )));
        }
        let values = to_f64(t.values());
        let map_len = t.map_len();
        let channels = || values.chunks_exact(map_len);
        Ok(match &self.stage {
            Stage::Raw => values,
            Stage::LocalDct { keep } => {
                let plan = ws.dct2d.as_ref().expect("dct2d workspace");
                channels()
                    .flat_map(|map| plan.low_frequencies(map, *keep))
                    .collect()
            }
            Stage::GlobalDct { keep } => {
                let mut out = ws.dct1d.as_ref().expect("dct workspace").forward(&values);
                out.truncate(*keep);
                out
            }
            Stage::LocalPca(pcas) => {
                let mut out = Vec::with_capacity(self.stage_dim());
                for (map, p) in channels().zip(pcas) {
                    out.extend(p.project(map)?);
                }
                out
            }
            Stage::GlobalPca(p) => p.project(&values)?,
            Stage::LocalChi(picks) => channels()
                .zip(picks)
                .flat_map(|(map, idx)| idx.iter().map(move |&i| map[i]))
                .collect(),
            Stage::GlobalChi(idx) => idx.iter().map(|&i| values[i]).collect(),
            Stage::LocalLbpChi(picks) => {
                let hist = lbp_features(t)?;
                picks
                    .iter()
                    .enumerate()
                    .flat_map(|(c, idx)| idx.iter().map(move |&i| c * LBP_BINS + i))
                    .map(|i| hist[i])
                    .collect()
            }
            Stage::GlobalLbpChi(idx) => {
                let hist = lbp_features(t)?;
                idx.iter().map(|&i| hist[i]).collect()
            }
            Stage::Cooc { radius, epsilon } => {
                cooc_channel_values(&cooc_tensor(t, *radius, *epsilon), t.channels())
            }
            Stage::Gep => channels().map(gep_value).collect(),
            Stage::Gmtp => gmtp_values(t),
        })
    }

    fn stage_features(&self, tensors: &[&ActivationTensor]) -> Result<FeatureMatrix> {
        let ws = self.workspace();
        let rows = tensors
            .iter()
            .map(|t| self.stage_one(&ws, t))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(FeatureMatrix::zeros(0, self.stage_dim()));
        }
        FeatureMatrix::from_rows(rows)
    }

    /// Reduced feature vector of one tensor.
    pub fn transform(&self, tensor: &ActivationTensor) -> Result<Vec<f64>> {
        let row = self.stage_one(&self.workspace(), tensor)?;
        match &self.post {
            Some(p) => p.project(&row),
            None => Ok(row),
        }
    }

    /// Reduced features of many tensors, one row each.
    pub fn transform_batch(&self, tensors: &[&ActivationTensor]) -> Result<FeatureMatrix> {
        let staged = self.stage_features(tensors)?;
        match &self.post {
            None => Ok(staged),
            Some(p) => {
                let rows = staged
                    .iter_rows()
                    .map(|r| p.project(r))
                    .collect::<Result<Vec<_>>>()?;
                if rows.is_empty() {
                    return Ok(FeatureMatrix::zeros(0, p.kept()));
                }
                FeatureMatrix::from_rows(rows)
            }
        }
    }
}

/// Fits `plan` on `train` and reduces `apply_to` with the fitted state.
pub fn reduce_layer(
    plan: &ReductionPlan,
    train: &[&ActivationTensor],
    labels: &[usize],
    apply_to: &[&ActivationTensor],
) -> Result<(FittedReducer, FeatureMatrix)> {
    let fitted = FittedReducer::fit(plan, train, labels)?;
    let features = fitted.transform_batch(apply_to)?;
    Ok((fitted, features))
}

fn check_dims(tensors: &[&ActivationTensor], dims: (usize, usize, usize)) -> Result<()> {
    match tensors.iter().position(|t| t.dims() != dims) {
        Some(i) => Err(Error::config(format!(
            "tensor {i} has dims {:?}, expected {dims:?}",
            tensors[i].dims()
        ))),
        None => Ok(()),
    }
}

fn to_f64(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

fn channel_rows(tensors: &[&ActivationTensor], channel: usize) -> FeatureMatrix {
    let map_len = tensors[0].map_len();
    let data = tensors
        .iter()
        .flat_map(|t| t.channel(channel).iter().map(|&v| v as f64))
        .collect();
    FeatureMatrix::from_vec(tensors.len(), map_len, data).expect("uniform dims")
}

fn select_cols(m: &FeatureMatrix, cols: &[usize]) -> FeatureMatrix {
    let data = m
        .iter_rows()
        .flat_map(|r| cols.iter().map(move |&c| r[c]))
        .collect();
    FeatureMatrix::from_vec(m.rows(), cols.len(), data).expect("column selection")
}

fn select_by_chi2(rows: &FeatureMatrix, labels: &[usize], keep: usize) -> Vec<usize> {
    let scores: Vec<f64> = (0..rows.cols())
        .map(|j| chi2_scores(&rows.column(j), labels, DEFAULT_BINS))
        .collect();
    chi2_select(&scores, keep)
}

/// Concatenated per-channel LBP histograms, `channels * 59` values.
fn lbp_features(t: &ActivationTensor) -> Result<Vec<f64>> {
    let (_, m, n) = t.dims();
    let mut out = Vec::with_capacity(t.channels() * LBP_BINS);
    for map in t.channel_maps() {
        out.extend(lbp_histogram(&to_f64(map), m, n)?);
    }
    Ok(out)
}

// Sidecar (de)serialization lives with the private stage representation.
impl FittedReducer {
    pub(crate) fn encode(&self, w: &mut crate::sidecar::Writer) {
        w.u8(self.plan.method.code());
        w.u8(matches!(self.plan.scope, Scope::Global) as u8);
        w.u64(self.plan.target_dim as u64);
        w.u8(self.plan.pca_postprocess as u8);
        let (d, m, n) = self.dims;
        w.u64(d as u64);
        w.u64(m as u64);
        w.u64(n as u64);
        match &self.stage {
            Stage::Raw => w.u8(0),
            Stage::LocalDct { keep } => {
                w.u8(1);
                w.u64(*keep as u64);
            }
            Stage::GlobalDct { keep } => {
                w.u8(2);
                w.u64(*keep as u64);
            }
            Stage::LocalPca(ps) => {
                w.u8(3);
                w.u64(ps.len() as u64);
                ps.iter().for_each(|p| encode_pca(w, p));
            }
            Stage::GlobalPca(p) => {
                w.u8(4);
                encode_pca(w, p);
            }
            Stage::LocalChi(s) => {
                w.u8(5);
                w.u64(s.len() as u64);
                s.iter().for_each(|v| w.indices(v));
            }
            Stage::GlobalChi(s) => {
                w.u8(6);
                w.indices(s);
            }
            Stage::LocalLbpChi(s) => {
                w.u8(7);
                w.u64(s.len() as u64);
                s.iter().for_each(|v| w.indices(v));
            }
            Stage::GlobalLbpChi(s) => {
                w.u8(8);
                w.indices(s);
            }
            Stage::Cooc { radius, epsilon } => {
                w.u8(9);
                w.u64(*radius as u64);
                w.f64(*epsilon);
            }
            Stage::Gep => w.u8(10),
            Stage::Gmtp => w.u8(11),
        }
        match &self.post {
            None => w.u8(0),
            Some(p) => {
                w.u8(1);
                encode_pca(w, p);
            }
        }
    }

    pub(crate) fn decode(r: &mut crate::sidecar::Reader<'_>) -> Result<Self> {
        let method = ReductionMethod::from_code(r.u8()?)
            .ok_or_else(|| Error::Sidecar("unknown reduction method code".into()))?;
        let scope = if r.u8()? == 1 { Scope::Global } else { Scope::Local };
        let target_dim = r.usize()?;
        let pca_postprocess = r.u8()? == 1;
        let dims = (r.usize()?, r.usize()?, r.usize()?);
        let stage = match r.u8()? {
            0 => Stage::Raw,
            1 => Stage::LocalDct { keep: r.usize()? },
            2 => Stage::GlobalDct { keep: r.usize()? },
            3 => {
                let count = r.usize()?;
                Stage::LocalPca((0..count).map(|_| decode_pca(r)).collect::<Result<_>>()?)
            }
            4 => Stage::GlobalPca(decode_pca(r)?),
            5 => {
                let count = r.usize()?;
                Stage::LocalChi((0..count).map(|_| r.indices()).collect::<Result<_>>()?)
            }
            6 => Stage::GlobalChi(r.indices()?),
            7 => {
                let count = r.usize()?;
                Stage::LocalLbpChi((0..count).map(|_| r.indices()).collect::<Result<_>>()?)
            }
            8 => Stage::GlobalLbpChi(r.indices()?),
            9 => Stage::Cooc {
                radius: r.usize()?,
                epsilon: r.f64()?,
            },
            10 => Stage::Gep,
            11 => Stage::Gmtp,
            other => return Err(Error::Sidecar(format!("unknown reducer stage {other}"))),
        };
        let post = match r.u8()? {
            0 => None,
            _ => Some(decode_pca(r)?),
        };
        Ok(Self {
            plan: ReductionPlan {
                method,
                scope,
                target_dim,
                pca_postprocess,
            },
            dims,
            stage,
            post,
        })
    }
}

fn encode_pca(w: &mut crate::sidecar::Writer, p: &Pca) {
    w.f64s(&p.mean);
    w.f64s(&p.components);
    w.f64s(&p.explained_variance);
}

fn decode_pca(r: &mut crate::sidecar::Reader<'_>) -> Result<Pca> {
    let mean = r.f64s()?;
    let components = r.f64s()?;
    let explained_variance = r.f64s()?;
    if components.len() != mean.len() * explained_variance.len() {
        return Err(Error::Sidecar("PCA component matrix has wrong size".into()));
    }
    Ok(Pca {
        mean,
        components,
        explained_variance,
    })
}
