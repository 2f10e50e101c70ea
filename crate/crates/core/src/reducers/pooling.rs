//! Global pooling measurements: entropy pooling (GEP) and mean-threshold pooling (GMTP).

use crate::tensor_store::ActivationTensor;

pub const GEP_BINS: usize = 256;

/// Entropy of a map's 256-bin intensity histogram after min-max scaling to `[0, 255]`.
///
/// A constant map puts all its mass in bin 0 and scores 0.
pub fn gep_value(map: &[f64]) -> f64 {
    if map.is_empty() {
        return 0.0;
    }
    let (lo, hi) = map
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut hist = [0usize; GEP_BINS];
    let range = hi - lo;
    if range > 0.0 {
        for &v in map {
            // multiply before dividing so integer grids land on exact bins;
            // (x * 255) / x can round below 255, so the maximum is placed directly
            let bin = if v == hi {
                GEP_BINS - 1
            } else {
                (((v - lo) * 255.0 / range).floor() as usize).min(GEP_BINS - 1)
            };
            hist[bin] += 1;
        }
    } else {
        hist[0] = map.len();
    }
    let n = map.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Per channel, the fraction of elements strictly below the mean of the whole tensor.
pub fn gmtp_values(activation: &ActivationTensor) -> Vec<f64> {
    let values = activation.values();
    let threshold = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    let plane = activation.map_len() as f64;
    activation
        .channel_maps()
        .map(|map| map.iter().filter(|&&v| (v as f64) < threshold).count() as f64 / plane)
        .collect()
}
