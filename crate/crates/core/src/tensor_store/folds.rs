use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold assignment for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldSpec {
    pub fn new(k: usize, assignment: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::argument(format!("fold count must be >= 2, got {k}")));
        }
        if let Some(bad) = assignment.iter().find(|&&f| f >= k) {
            return Err(Error::argument(format!("fold index {bad} out of range for k={k}")));
        }
        Ok(Self { k, assignment })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    /// Applies a sample permutation: sample `i` of the new order is `order[i]` of the old.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            k: self.k,
            assignment: order.iter().map(|&i| self.assignment[i]).collect(),
        }
    }
}

/// Stratified fold assignment: each class is shuffled with a seeded generator and dealt
/// round-robin, continuing the rotation across classes so overall fold sizes stay balanced.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldSpec> {
    if k < 2 {
        return Err(Error::argument(format!("fold count must be >= 2, got {k}")));
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0usize;
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            log::warn!(
                "class {class} has {} samples, fewer than {k} folds",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for idx in members {
            assignment[idx] = next % k;
            next += 1;
        }
    }
    FoldSpec::new(k, assignment)
}

/// Stratified holdout of roughly `fraction` of each class. Classes with a single
/// member stay entirely in the training part. Returns `(train, validation)`
/// as ascending positions into `labels`.
pub fn stratified_holdout(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::argument(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let take = if members.len() < 2 {
            0
        } else {
            ((members.len() as f64 * fraction).round() as usize).clamp(1, members.len() - 1)
        };
        valid.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(spec: &FoldSpec, labels: &[usize], class: usize) -> Vec<usize> {
        let mut c = vec![0; spec.k];
        for (i, &f) in spec.assignment.iter().enumerate() {
            if labels[i] == class {
                c[f] += 1;
            }
        }
        c
    }

    #[test]
    fn five_by_two_gives_one_per_fold() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let spec = stratified_folds(&labels, 5, 3).unwrap();
        for class in 0..2 {
            assert_eq!(counts(&spec, &labels, class), vec![1; 5]);
        }
    }

    #[test]
    fn two_folds_of_three() {
        let labels = [0, 0, 0, 1, 1, 1];
        let spec = stratified_folds(&labels, 2, 0).unwrap();
        assert_eq!(spec.test_indices(0).len(), 3);
        assert_eq!(spec.test_indices(1).len(), 3);
        for class in 0..2 {
            assert!(counts(&spec, &labels, class).iter().all(|&c| c >= 1));
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let a = stratified_folds(&labels, 5, 7).unwrap();
        let b = stratified_folds(&labels, 5, 7).unwrap();
        let c = stratified_folds(&labels, 5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn k_below_two_is_an_error() {
        assert!(stratified_folds(&[0, 1], 1, 0).is_err());
    }

    #[test]
    fn holdout_keeps_every_class_in_train() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (train, valid) = stratified_holdout(&labels, 0.2, 1).unwrap();
        assert_eq!(valid.len(), 6);
        assert_eq!(train.len() + valid.len(), 30);
        for class in 0..3 {
            assert!(train.iter().any(|&i| labels[i] == class));
            assert_eq!(valid.iter().filter(|&&i| labels[i] == class).count(), 2);
        }
    }

    proptest! {
        #[test]
        fn folds_are_stratified(labels in proptest::collection::vec(0usize..4, 2..120), k in 2usize..7, seed in any::<u64>()) {
            let spec = stratified_folds(&labels, k, seed).unwrap();
            prop_assert_eq!(spec.len(), labels.len());
            for class in 0..4 {
                let c = counts(&spec, &labels, class);
                let (lo, hi) = (c.iter().min().unwrap(), c.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            let sizes: Vec<usize> = (0..k).map(|f| spec.test_indices(f).len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
