//! Cross-validation, accuracy and paired comparison of methods.

mod cv;
mod rows;
mod wilcoxon;

pub use cv::{
    run_cv, CvOutcome, CvResult, CvSettings, FoldScores, InMemoryDataset, LayerSource,
    SffsSettings, TrainedClassifier,
};
pub use rows::{builtin_methods, parse_row, MethodRow, NamedPlan, RowKind};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_LIMIT};

use crate::error::{Error, Result};

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::argument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::argument("accuracy of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
