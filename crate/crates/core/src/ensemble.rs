//! Sum-rule fusion of per-classifier score matrices and floating forward selection of
//! classifier subsets.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::ScoreMatrix;

/// Identifies the classifier trained on one layer with one reduction method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassifierId {
    pub layer: String,
    pub method: String,
}

impl ClassifierId {
    pub fn new(layer: impl Into<String>, method: impl Into<String>) -> Self {
        Self {
            layer: layer.into(),
            method: method.into(),
        }
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.layer, self.method)
    }
}

/// Ordered classifiers whose score matrices cover the same samples and classes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifierPool {
    entries: Vec<(ClassifierId, ScoreMatrix)>,
}

impl ClassifierPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: ClassifierId, scores: ScoreMatrix) -> Result<()> {
        if let Some((_, first)) = self.entries.first() {
            if (first.samples(), first.classes()) != (scores.samples(), scores.classes()) {
                return Err(Error::argument(format!(
                    "classifier {id} scores are {}x{}, pool is {}x{}",
                    scores.samples(),
                    scores.classes(),
                    first.samples(),
                    first.classes()
                )));
            }
        }
        if self.position(&id).is_some() {
            return Err(Error::argument(format!("duplicate classifier id {id}")));
        }
        self.entries.push((id, scores));
        Ok(())
    }

    pub fn from_entries(entries: Vec<(ClassifierId, ScoreMatrix)>) -> Result<Self> {
        let mut pool = Self::new();
        for (id, s) in entries {
            pool.push(id, s)?;
        }
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ClassifierId> {
        self.entries.iter().map(|(id, _)| id)
    }

    pub fn scores(&self, index: usize) -> &ScoreMatrix {
        &self.entries[index].1
    }

    pub fn id(&self, index: usize) -> &ClassifierId {
        &self.entries[index].0
    }

    pub fn position(&self, id: &ClassifierId) -> Option<usize> {
        self.entries.iter().position(|(e, _)| e == id)
    }

    pub fn samples(&self) -> usize {
        self.entries.first().map_or(0, |(_, s)| s.samples())
    }

    pub fn classes(&self) -> usize {
        self.entries.first().map_or(0, |(_, s)| s.classes())
    }

    /// Keeps the classifiers matching `keep`, in pool order.
    pub fn filter(&self, mut keep: impl FnMut(&ClassifierId) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| keep(id))
                .cloned()
                .collect(),
        }
    }

    fn indices_of(&self, subset: &[ClassifierId]) -> Result<Vec<usize>> {
        subset
            .iter()
            .map(|id| {
                self.position(id)
                    .ok_or_else(|| Error::argument(format!("unknown classifier id {id}")))
            })
            .collect()
    }

    /// Elementwise sum of the chosen matrices (no normalization).
    fn summed(&self, indices: &[usize]) -> Vec<f64> {
        let mut acc = vec![0.0; self.samples() * self.classes()];
        for &i in indices {
            acc.iter_mut()
                .zip(self.entries[i].1.as_slice())
                .for_each(|(a, s)| *a += s);
        }
        acc
    }

    fn fuse_indices(&self, indices: &[usize]) -> Result<ScoreMatrix> {
        if indices.is_empty() {
            return Err(Error::argument("sum rule needs a non-empty subset"));
        }
        let count = indices.len() as f64;
        let data = self.summed(indices).into_iter().map(|v| v / count).collect();
        Ok(ScoreMatrix::from_raw(self.samples(), self.classes(), data))
    }
}

/// Average of the subset's score matrices.
pub fn sum_rule(pool: &ClassifierPool, subset: &[ClassifierId]) -> Result<ScoreMatrix> {
    pool.fuse_indices(&pool.indices_of(subset)?)
}

/// Plain elementwise sum, without dividing by the subset size.
pub fn sum_scores(pool: &ClassifierPool, subset: &[ClassifierId]) -> Result<Vec<f64>> {
    let idx = pool.indices_of(subset)?;
    if idx.is_empty() {
        return Err(Error::argument("sum rule needs a non-empty subset"));
    }
    Ok(pool.summed(&idx))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_predict(scores: &ScoreMatrix) -> Vec<usize> {
    scores.iter_rows().map(argmax).collect()
}

/// Removes every classifier built on one of the last `k` layers of `layer_order`.
pub fn drop_last_layers(
    pool: &ClassifierPool,
    layer_order: &[String],
    k: usize,
) -> Result<ClassifierPool> {
    let distinct: HashSet<&str> = pool.ids().map(|id| id.layer.as_str()).collect();
    if k > 0 && (k >= distinct.len() || k > layer_order.len()) {
        return Err(Error::argument(format!(
            "cannot drop the last {k} layers of a pool over {} layers",
            distinct.len()
        )));
    }
    let dropped: HashSet<&str> = layer_order[layer_order.len() - k..]
        .iter()
        .map(String::as_str)
        .collect();
    Ok(pool.filter(|id| !dropped.contains(id.layer.as_str())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub kind: StepKind,
    pub id: ClassifierId,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSelection {
    /// Final members, in the order they were (last) added.
    pub chosen: Vec<ClassifierId>,
    /// Accepted steps; criteria are strictly increasing after the first.
    pub steps: Vec<SelectionStep>,
}

impl EnsembleSelection {
    pub fn criterion(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.criterion)
    }

    pub fn criterion_trace(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.criterion).collect()
    }
}

fn fused_accuracy(pool: &ClassifierPool, members: &[usize], labels: &[usize]) -> f64 {
    let classes = pool.classes();
    let count = members.len() as f64;
    let fused: Vec<f64> = pool.summed(members).into_iter().map(|v| v / count).collect();
    let correct = fused
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Best candidate by fused accuracy; ties go to the lower pool index.
fn best_of(candidates: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    candidates.fold(None, |best, (i, acc)| match best {
        Some((_, b)) if acc <= b => best,
        _ => Some((i, acc)),
    })
}

/// Sequential forward floating selection of at most `max_size` classifiers, scored by
/// the sum-rule accuracy against `labels`.
///
/// Each forward step adds the classifier giving the best augmented subset and stops when
/// nothing improves on the current accuracy (the first step always adds). After each
/// addition, members are removed one at a time while a removal strictly improves.
pub fn sffs_select(
    pool: &ClassifierPool,
    labels: &[usize],
    max_size: usize,
) -> Result<EnsembleSelection> {
    if pool.is_empty() {
        return Err(Error::argument("SFFS needs a non-empty pool"));
    }
    if labels.len() != pool.samples() || labels.is_empty() {
        return Err(Error::argument(format!(
            "{} labels for {} scored samples",
            labels.len(),
            pool.samples()
        )));
    }
    let max_size = max_size.max(1);
    let mut members: Vec<usize> = Vec::new();
    let mut current = f64::NEG_INFINITY;
    let mut steps = Vec::new();

    while members.len() < max_size {
        let add = best_of((0..pool.len()).filter(|i| !members.contains(i)).map(|i| {
            let mut trial = members.clone();
            trial.push(i);
            (i, fused_accuracy(pool, &trial, labels))
        }));
        let Some((pick, acc)) = add else { break };
        if !members.is_empty() && acc <= current {
            break;
        }
        members.push(pick);
        current = acc;
        steps.push(SelectionStep {
            kind: StepKind::Add,
            id: pool.id(pick).clone(),
            criterion: acc,
        });

        while members.len() > 1 {
            let mut by_index = members.clone();
            by_index.sort_unstable();
            let removal = best_of(by_index.into_iter().map(|m| {
                let trial: Vec<usize> = members.iter().copied().filter(|&x| x != m).collect();
                (m, fused_accuracy(pool, &trial, labels))
            }));
            match removal {
                Some((m, acc)) if acc > current => {
                    members.retain(|&x| x != m);
                    current = acc;
                    steps.push(SelectionStep {
                        kind: StepKind::Remove,
                        id: pool.id(m).clone(),
                        criterion: acc,
                    });
                }
                _ => break,
            }
        }
    }

    Ok(EnsembleSelection {
        chosen: members.iter().map(|&i| pool.id(i).clone()).collect(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn id(layer: &str, method: &str) -> ClassifierId {
        ClassifierId::new(layer, method)
    }

    #[test]
    fn sum_rule_cases() {
        let mut pool = ClassifierPool::new();
        pool.push(id("a", "DC"), matrix(&[&[1.0, 0.0]])).unwrap();
        pool.push(id("b", "DC"), matrix(&[&[0.0, 1.0]])).unwrap();
        pool.push(id("c", "DC"), matrix(&[&[0.0, 1.0]])).unwrap();
        let fused = sum_rule(&pool, &[id("a", "DC"), id("b", "DC")]).unwrap();
        assert_eq!(fused.row(0), &[0.5, 0.5]);
        let single = sum_rule(&pool, &[id("b", "DC")]).unwrap();
        assert_eq!(&single, pool.scores(1));
        let same = sum_rule(&pool, &[id("b", "DC"), id("c", "DC")]).unwrap();
        assert_eq!(&same, pool.scores(1));
        assert!(sum_rule(&pool, &[]).is_err());
        assert!(sum_rule(&pool, &[id("z", "DC")]).is_err());
    }

    #[test]
    fn pool_rejects_mismatched_shapes_and_duplicates() {
        let mut pool = ClassifierPool::new();
        pool.push(id("a", "DC"), matrix(&[&[1.0, 0.0]])).unwrap();
        assert!(pool.push(id("b", "DC"), matrix(&[&[1.0, 0.0, 0.0]])).is_err());
        assert!(pool.push(id("a", "DC"), matrix(&[&[0.0, 1.0]])).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.4, 1.0, 1.0]), 1);
    }

    #[test]
    fn drop_last_two_layers() {
        let layers: Vec<String> = ["45", "47", "48", "49", "50"].map(String::from).to_vec();
        let mut pool = ClassifierPool::new();
        for l in &layers {
            pool.push(id(l, "DC"), matrix(&[&[1.0, 0.0]])).unwrap();
        }
        let kept = drop_last_layers(&pool, &layers, 2).unwrap();
        assert_eq!(kept.len(), 3);
        assert!(kept.ids().all(|i| i.layer != "49" && i.layer != "50"));
        assert_eq!(drop_last_layers(&pool, &layers, 0).unwrap(), pool);
        assert!(drop_last_layers(&pool, &layers, 5).is_err());
    }

    #[test]
    fn sffs_single_classifier() {
        let mut pool = ClassifierPool::new();
        pool.push(id("a", "DC"), matrix(&[&[0.9, 0.1], &[0.6, 0.4]])).unwrap();
        let sel = sffs_select(&pool, &[0, 1], 5).unwrap();
        assert_eq!(sel.chosen, vec![id("a", "DC")]);
        assert_eq!(sel.criterion(), 0.5);
        assert!(sffs_select(&ClassifierPool::new(), &[], 3).is_err());
    }

    #[test]
    fn sffs_stops_when_nothing_improves() {
        // A is right on every sample; B and C are always wrong and confident
        let labels = [0, 1, 0, 1];
        let good = matrix(&[&[0.6, 0.4], &[0.4, 0.6], &[0.6, 0.4], &[0.4, 0.6]]);
        let bad = matrix(&[&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let pool = ClassifierPool::from_entries(vec![
            (id("b", "X"), bad.clone()),
            (id("a", "X"), good),
            (id("c", "X"), bad),
        ])
        .unwrap();
        let sel = sffs_select(&pool, &labels, 3).unwrap();
        assert_eq!(sel.chosen, vec![id("a", "X")]);
        assert_eq!(sel.criterion_trace(), vec![1.0]);
    }
}
