use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accuracy;
use super::rows::{MethodRow, NamedPlan, RowKind};
use crate::ensemble::{
    argmax_predict, drop_last_layers, sffs_select, sum_rule, ClassifierId, ClassifierPool,
    EnsembleSelection,
};
use crate::error::{Error, Result};
use crate::reducers::{FittedReducer, RawPolicy, ReductionMethod, ReductionPlan};
use crate::svm::{train_multiclass, MulticlassSvmModel, ScoreMatrix, SvmSettings};
use crate::tensor_store::{
    stratified_holdout, ActivationTensor, DatasetManifest, FoldSpec, LayerInfo,
};

/// Anything that can hand out one layer's tensors for every sample.
pub trait LayerSource: Sync {
    fn sample_ids(&self) -> Vec<String>;
    fn labels(&self) -> Vec<usize>;
    fn class_count(&self) -> usize;
    /// Network order.
    fn layers(&self) -> Vec<LayerInfo>;
    fn load_layer(&self, layer: usize) -> Result<Vec<ActivationTensor>>;
}

impl LayerSource for DatasetManifest {
    fn sample_ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    fn labels(&self) -> Vec<usize> {
        DatasetManifest::labels(self)
    }

    fn class_count(&self) -> usize {
        DatasetManifest::class_count(self)
    }

    fn layers(&self) -> Vec<LayerInfo> {
        self.layers.clone()
    }

    fn load_layer(&self, layer: usize) -> Result<Vec<ActivationTensor>> {
        DatasetManifest::load_layer(self, layer)
    }
}

/// Tensors held in memory, `tensors[layer][sample]`.
#[derive(Debug, Clone)]
pub struct InMemoryDataset {
    pub classes: usize,
    pub layers: Vec<LayerInfo>,
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub tensors: Vec<Vec<ActivationTensor>>,
}

impl InMemoryDataset {
    pub fn new(
        classes: usize,
        layers: Vec<LayerInfo>,
        sample_ids: Vec<String>,
        labels: Vec<usize>,
        tensors: Vec<Vec<ActivationTensor>>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if labels.len() != n {
            return Err(Error::argument(format!("{} labels for {n} samples", labels.len())));
        }
        if tensors.len() != layers.len() {
            return Err(Error::argument(format!(
                "{} tensor lists for {} layers",
                tensors.len(),
                layers.len()
            )));
        }
        for (info, list) in layers.iter().zip(&tensors) {
            if list.len() != n {
                return Err(Error::argument(format!(
                    "layer {} has {} tensors for {n} samples",
                    info.id,
                    list.len()
                )));
            }
            if let Some(t) = list.iter().find(|t| t.dims() != (info.d, info.m, info.n)) {
                return Err(Error::argument(format!(
                    "layer {} declared {}x{}x{} but holds a {:?} tensor",
                    info.id,
                    info.d,
                    info.m,
                    info.n,
                    t.dims()
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::argument(format!("label {l} >= class count {classes}")));
        }
        Ok(Self {
            classes,
            layers,
            sample_ids,
            labels,
            tensors,
        })
    }
}

impl LayerSource for InMemoryDataset {
    fn sample_ids(&self) -> Vec<String> {
        self.sample_ids.clone()
    }

    fn labels(&self) -> Vec<usize> {
        self.labels.clone()
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn layers(&self) -> Vec<LayerInfo> {
        self.layers.clone()
    }

    fn load_layer(&self, layer: usize) -> Result<Vec<ActivationTensor>> {
        Ok(self.tensors[layer].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SffsSettings {
    /// Share of each training fold held out to score candidate subsets.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl Default for SffsSettings {
    fn default() -> Self {
        Self {
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSettings {
    /// Indices into the source's layers, in network order.
    pub layers: Vec<usize>,
    pub raw_policy: RawPolicy,
    pub svm: SvmSettings,
    pub sffs: SffsSettings,
    /// Return the fitted reducers and SVMs of every fold.
    pub keep_models: bool,
}

/// Fused scores of one test fold, rows in sample-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub sample_ids: Vec<String>,
    pub truth: Vec<usize>,
    pub scores: ScoreMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub method: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub fold_scores: Vec<FoldScores>,
    /// One per fold for SFFS rows.
    pub selections: Option<Vec<EnsembleSelection>>,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub fold: usize,
    pub id: ClassifierId,
    pub reducer: FittedReducer,
    pub svm: MulticlassSvmModel,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub results: Vec<CvResult>,
    /// Selected layer ids, network order.
    pub layers: Vec<String>,
    /// Every classifier trained per fold, pool order.
    pub classifiers: Vec<ClassifierId>,
    pub models: Vec<TrainedClassifier>,
}

/// A classifier of the pool: which plan it runs and which method names map onto it.
/// Layers that fall back to raw features share one classifier across methods.
struct PoolEntry {
    layer: usize,
    id: ClassifierId,
    plan: ReductionPlan,
    methods: BTreeSet<String>,
}

fn build_entries(
    layers: &[LayerInfo],
    selected: &[usize],
    plans: &[&NamedPlan],
    policy: &RawPolicy,
) -> Vec<PoolEntry> {
    let mut entries: Vec<PoolEntry> = Vec::new();
    for &layer in selected {
        let info = &layers[layer];
        let first = entries.len();
        for named in plans {
            let plan = policy.plan_for_layer(layer + 1, layers.len(), info.flattened_dim(), named.plan);
            let method = if plan.method == ReductionMethod::Raw {
                "RAW".to_string()
            } else {
                named.name.clone()
            };
            let id = ClassifierId::new(&info.id, method);
            match entries[first..].iter_mut().find(|e| e.id == id) {
                Some(e) => {
                    e.methods.insert(named.name.clone());
                }
                None => entries.push(PoolEntry {
                    layer,
                    id,
                    plan,
                    methods: BTreeSet::from([named.name.clone()]),
                }),
            }
        }
    }
    entries
}

struct FoldPlan {
    /// Positions into the source's samples, sorted by sample id.
    train: Vec<usize>,
    test: Vec<usize>,
    /// Subsets of `train` for SFFS scoring.
    inner: Option<(Vec<usize>, Vec<usize>)>,
}

struct Trained {
    test: ScoreMatrix,
    valid: Option<ScoreMatrix>,
    model: Option<(FittedReducer, MulticlassSvmModel)>,
}

fn fit_and_score(
    plan: &ReductionPlan,
    tensors: &[ActivationTensor],
    labels: &[usize],
    classes: usize,
    train: &[usize],
    apply: &[usize],
    svm: &SvmSettings,
) -> Result<(FittedReducer, MulticlassSvmModel, ScoreMatrix)> {
    let train_t: Vec<&ActivationTensor> = train.iter().map(|&i| &tensors[i]).collect();
    let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let reducer = FittedReducer::fit(plan, &train_t, &train_y)?;
    let features = reducer.transform_batch(&train_t)?;
    let model = train_multiclass(&features, &train_y, classes, svm)?;
    let apply_t: Vec<&ActivationTensor> = apply.iter().map(|&i| &tensors[i]).collect();
    let scores = model.predict_scores(&reducer.transform_batch(&apply_t)?)?;
    Ok((reducer, model, scores))
}

/// Cross-validates every method row over `folds`.
///
/// Reducers and SVMs see only the training part of each fold. SFFS rows pick their
/// subset on a stratified holdout of the training fold, scored by classifiers trained
/// on the remainder, and the chosen subset is then fused from the full-fold classifiers.
/// The candidate pool of an SFFS row is every classifier of the fusion rows' methods.
pub fn run_cv(
    source: &dyn LayerSource,
    folds: &FoldSpec,
    plans: &[NamedPlan],
    rows: &[MethodRow],
    settings: &CvSettings,
) -> Result<CvOutcome> {
    let ids = source.sample_ids();
    let labels = source.labels();
    let classes = source.class_count();
    let layers = source.layers();
    if folds.len() != ids.len() {
        return Err(Error::argument(format!(
            "fold assignment covers {} samples, dataset has {}",
            folds.len(),
            ids.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::config("no method rows configured"));
    }
    if settings.layers.is_empty() {
        return Err(Error::config("no layers selected"));
    }
    if let Some(&bad) = settings.layers.iter().find(|&&l| l >= layers.len()) {
        return Err(Error::config(format!(
            "layer index {bad} out of range for {} layers",
            layers.len()
        )));
    }
    let mut selected = settings.layers.clone();
    selected.sort_unstable();
    selected.dedup();
    for row in rows {
        if let RowKind::Fusion { drop_last, .. } = row.kind {
            if drop_last > 0 && drop_last >= selected.len() {
                return Err(Error::config(format!(
                    "row {}: cannot drop the last {drop_last} of {} selected layers",
                    row.label,
                    selected.len()
                )));
            }
        }
    }

    let fusion_methods: BTreeSet<&str> = rows
        .iter()
        .flat_map(|r| r.methods().iter().map(String::as_str))
        .collect();
    let has_sffs = rows.iter().any(|r| matches!(r.kind, RowKind::Sffs { .. }));
    if has_sffs && fusion_methods.is_empty() {
        return Err(Error::config(
            "SFFS rows draw their pool from the other rows' methods, but there are none",
        ));
    }
    let known: Vec<String> = plans.iter().map(|p| p.name.clone()).collect();
    if let Some(missing) = fusion_methods.iter().find(|m| !known.iter().any(|k| k == *m)) {
        return Err(Error::config(format!(
            "unknown method {missing:?}; valid methods: {}",
            known.join(", ")
        )));
    }
    let used: Vec<&NamedPlan> = plans
        .iter()
        .filter(|p| fusion_methods.contains(p.name.as_str()))
        .collect();
    let entries = build_entries(&layers, &selected, &used, &settings.raw_policy);
    let layer_order: Vec<String> = selected.iter().map(|&l| layers[l].id.clone()).collect();

    // Canonical sample order makes results independent of manifest order.
    let mut canonical: Vec<usize> = (0..ids.len()).collect();
    canonical.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let fold_plans = (0..folds.k)
        .map(|f| {
            let train: Vec<usize> = canonical
                .iter()
                .copied()
                .filter(|&i| folds.assignment[i] != f)
                .collect();
            let test: Vec<usize> = canonical
                .iter()
                .copied()
                .filter(|&i| folds.assignment[i] == f)
                .collect();
            if test.is_empty() {
                return Err(Error::argument(format!("fold {f} has no test samples")));
            }
            let inner = if has_sffs {
                let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                let (a, b) = stratified_holdout(
                    &train_y,
                    settings.sffs.validation_fraction,
                    settings.sffs.seed.wrapping_add(f as u64),
                )?;
                Some((
                    a.iter().map(|&p| train[p]).collect(),
                    b.iter().map(|&p| train[p]).collect(),
                ))
            } else {
                None
            };
            Ok(FoldPlan { train, test, inner })
        })
        .collect::<Result<Vec<_>>>()?;

    // trained[fold][entry]
    let mut trained: Vec<Vec<Option<Trained>>> = (0..folds.k)
        .map(|_| (0..entries.len()).map(|_| None).collect())
        .collect();
    for &layer in &selected {
        let members: Vec<usize> = (0..entries.len()).filter(|&e| entries[e].layer == layer).collect();
        if members.is_empty() {
            continue;
        }
        log::info!("layer {}: {} classifiers", layers[layer].id, members.len());
        let tensors = source.load_layer(layer)?;
        let jobs: Vec<(usize, usize)> = (0..folds.k)
            .flat_map(|f| members.iter().map(move |&e| (f, e)))
            .collect();
        let outputs = jobs
            .par_iter()
            .map(|&(f, e)| {
                let fp = &fold_plans[f];
                let plan = &entries[e].plan;
                let (reducer, model, test) =
                    fit_and_score(plan, &tensors, &labels, classes, &fp.train, &fp.test, &settings.svm)
                        .map_err(|err| annotate(err, &entries[e].id, f))?;
                let valid = match &fp.inner {
                    Some((tr, va)) => Some(
                        fit_and_score(plan, &tensors, &labels, classes, tr, va, &settings.svm)
                            .map_err(|err| annotate(err, &entries[e].id, f))?
                            .2,
                    ),
                    None => None,
                };
                Ok(Trained {
                    test,
                    valid,
                    model: settings.keep_models.then_some((reducer, model)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (&(f, e), out) in jobs.iter().zip(outputs) {
            trained[f][e] = Some(out);
        }
    }

    let mut models = Vec::new();
    let mut test_pools = Vec::with_capacity(folds.k);
    let mut valid_pools = Vec::with_capacity(folds.k);
    for (f, fold) in trained.into_iter().enumerate() {
        let mut test = Vec::with_capacity(entries.len());
        let mut valid = Vec::with_capacity(entries.len());
        for (e, slot) in fold.into_iter().enumerate() {
            let t = slot.expect("every classifier trained");
            let id = entries[e].id.clone();
            if let Some((reducer, svm)) = t.model {
                models.push(TrainedClassifier {
                    fold: f,
                    id: id.clone(),
                    reducer,
                    svm,
                });
            }
            if let Some(v) = t.valid {
                valid.push((id.clone(), v));
            }
            test.push((id, t.test));
        }
        test_pools.push(ClassifierPool::from_entries(test)?);
        valid_pools.push(ClassifierPool::from_entries(valid)?);
    }

    let mut results = Vec::with_capacity(rows.len());
    for row in rows {
        let mut fold_accuracies = Vec::with_capacity(folds.k);
        let mut fold_scores = Vec::with_capacity(folds.k);
        let mut selections = Vec::new();
        for (f, fp) in fold_plans.iter().enumerate() {
            let subset: Vec<ClassifierId> = match &row.kind {
                RowKind::Fusion { methods, drop_last } => {
                    let members = test_pools[f].filter(|id| {
                        entries
                            .iter()
                            .any(|e| &e.id == id && methods.iter().any(|m| e.methods.contains(m)))
                    });
                    drop_last_layers(&members, &layer_order, *drop_last)
                        .map_err(|e| Error::config(format!("row {}: {e}", row.label)))?
                        .ids()
                        .cloned()
                        .collect()
                }
                RowKind::Sffs { max_size } => {
                    let (_, va) = fp.inner.as_ref().expect("holdout prepared for SFFS");
                    let va_y: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
                    let selection = sffs_select(&valid_pools[f], &va_y, *max_size)?;
                    let chosen = selection.chosen.clone();
                    selections.push(selection);
                    chosen
                }
            };
            let fused = sum_rule(&test_pools[f], &subset)?;
            let truth: Vec<usize> = fp.test.iter().map(|&i| labels[i]).collect();
            fold_accuracies.push(accuracy(&argmax_predict(&fused), &truth)?);
            fold_scores.push(FoldScores {
                sample_ids: fp.test.iter().map(|&i| ids[i].clone()).collect(),
                truth,
                scores: fused,
            });
        }
        let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
        results.push(CvResult {
            method: row.label.clone(),
            fold_accuracies,
            mean_accuracy,
            fold_scores,
            selections: matches!(row.kind, RowKind::Sffs { .. }).then_some(selections),
        });
    }

    Ok(CvOutcome {
        results,
        layers: layer_order,
        classifiers: entries.into_iter().map(|e| e.id).collect(),
        models,
    })
}

fn annotate(err: Error, id: &ClassifierId, fold: usize) -> Error {
    match err {
        Error::Fit(m) => Error::Fit(format!("{id}, fold {fold}: {m}")),
        Error::Training(m) => Error::Training(format!("{id}, fold {fold}: {m}")),
        other => other,
    }
}
