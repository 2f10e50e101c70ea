//! Declarative pipeline configuration (TOML).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{builtin_methods, parse_row, MethodRow, NamedPlan, SffsSettings};
use crate::reducers::{
    select_layers, RawPolicy, ReductionMethod, ReductionPlan, Scope, DEFAULT_TARGET_DIM,
    REDUCTION_THRESHOLD,
};
use crate::svm::SvmSettings;
use crate::tensor_store::LayerInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSelection {
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_tail")]
    pub tail: usize,
    /// Explicit layer ids; replaces the stride/tail rule.
    #[serde(default)]
    pub select: Option<Vec<String>>,
}

fn default_stride() -> usize {
    10
}
fn default_tail() -> usize {
    4
}

impl Default for LayerSelection {
    fn default() -> Self {
        Self {
            stride: 10,
            tail: 4,
            select: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSettings {
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default = "default_tail")]
    pub raw_tail: usize,
    /// Budget for the built-in methods.
    #[serde(default = "default_target_dim")]
    pub target_dim: usize,
}

fn default_threshold() -> usize {
    REDUCTION_THRESHOLD
}
fn default_target_dim() -> usize {
    DEFAULT_TARGET_DIM
}

impl Default for ReductionSettings {
    fn default() -> Self {
        Self {
            threshold: REDUCTION_THRESHOLD,
            raw_tail: 4,
            target_dim: DEFAULT_TARGET_DIM,
        }
    }
}

impl ReductionSettings {
    pub fn raw_policy(&self) -> RawPolicy {
        RawPolicy {
            threshold: self.threshold,
            raw_tail: self.raw_tail,
        }
    }
}

/// A user-defined method under `[methods.NAME]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: ReductionMethod,
    #[serde(default)]
    pub scope: Option<Scope>,
    #[serde(default)]
    pub target_dim: Option<usize>,
    #[serde(default)]
    pub pca_postprocess: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset id used in results files; defaults to the manifest's file stem.
    #[serde(default)]
    pub name: Option<String>,
    /// Relative paths resolve against the config file's directory.
    pub manifest: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub rows: Vec<String>,
    #[serde(default)]
    pub layers: LayerSelection,
    #[serde(default)]
    pub reduction: ReductionSettings,
    #[serde(default)]
    pub methods: BTreeMap<String, MethodSpec>,
    #[serde(default)]
    pub svm: SvmSettings,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub sffs: SffsSettings,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    fn check(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::config("`rows` lists no methods"));
        }
        if self.cv.k < 2 {
            return Err(Error::config(format!("cv.k must be >= 2, got {}", self.cv.k)));
        }
        if !(self.svm.c > 0.0) || !(self.svm.tol > 0.0) || self.svm.max_epochs == 0 {
            return Err(Error::config("svm.c and svm.tol must be positive and max_epochs >= 1"));
        }
        let f = self.sffs.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config(format!(
                "sffs.validation_fraction must lie in (0, 1), got {f}"
            )));
        }
        if self.reduction.target_dim == 0 {
            return Err(Error::config("reduction.target_dim must be at least 1"));
        }
        if let Some(select) = &self.layers.select {
            if select.is_empty() {
                return Err(Error::config("layers.select is empty"));
            }
        }
        self.method_rows()?;
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.base_dir.join(&self.manifest)
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// Built-in methods (with the configured budget) followed by the `[methods]` entries;
    /// a user entry with a built-in name replaces it.
    pub fn plans(&self) -> Result<Vec<NamedPlan>> {
        let mut plans: Vec<NamedPlan> = builtin_methods()
            .into_iter()
            .filter(|p| !self.methods.contains_key(&p.name))
            .map(|mut p| {
                p.plan.target_dim = self.reduction.target_dim;
                p
            })
            .collect();
        for (name, spec) in &self.methods {
            if name.is_empty() || name.contains(['+', '(', ')']) || name.starts_with("SFFS") {
                return Err(Error::config(format!("invalid method name {name:?}")));
            }
            let default = ReductionPlan::for_method(spec.method);
            let plan = ReductionPlan::new(
                spec.method,
                spec.scope.unwrap_or(default.scope),
                spec.target_dim.unwrap_or(self.reduction.target_dim),
                spec.pca_postprocess,
            )
            .map_err(|e| Error::config(format!("methods.{name}: {e}")))?;
            plans.push(NamedPlan::new(name.clone(), plan));
        }
        Ok(plans)
    }

    pub fn method_rows(&self) -> Result<Vec<MethodRow>> {
        let known: Vec<String> = self.plans()?.into_iter().map(|p| p.name).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| parse_row(r, &known))
            .collect::<Result<Vec<_>>>()?;
        for (i, r) in rows.iter().enumerate() {
            if rows[..i].iter().any(|p| p.label == r.label) {
                return Err(Error::config(format!("row {:?} listed twice", r.label)));
            }
        }
        Ok(rows)
    }

    /// Indices of the layers to use, network order.
    pub fn resolve_layers(&self, layers: &[LayerInfo]) -> Result<Vec<usize>> {
        match &self.layers.select {
            Some(ids) => {
                let mut out = ids
                    .iter()
                    .map(|id| {
                        layers.iter().position(|l| &l.id == id).ok_or_else(|| {
                            let all: Vec<&str> = layers.iter().map(|l| l.id.as_str()).collect();
                            Error::config(format!(
                                "unknown layer {id:?}; manifest layers: {}",
                                all.join(", ")
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
            None => Ok(select_layers(layers.len(), self.layers.stride, self.layers.tail)
                .into_iter()
                .map(|l| l - 1)
                .collect()),
        }
    }

    /// Dataset id: `name`, else the manifest file stem.
    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.manifest
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}
