//! Deep co-occurrence tensors.
//!
//! An element is "active" when it exceeds the mean of the whole activation tensor. The
//! co-occurrence value at `(c, i, j)` is zero unless that element is active; otherwise it
//! sums the active values in the `(2r+1) x (2r+1)` window around `(i, j)` over every
//! channel, with the element's own channel weighted by `epsilon` and all others by 1.
//! Out-of-bounds window positions count as zero.

use crate::tensor_store::ActivationTensor;

pub const DEFAULT_RADIUS: usize = 1;
pub const DEFAULT_EPSILON: f64 = 0.0;

/// Co-occurrence tensor, channel-major with the same dims as `activation`.
pub fn cooc_tensor(activation: &ActivationTensor, radius: usize, epsilon: f64) -> Vec<f64> {
    let (d, h, w) = activation.dims();
    let values = activation.values();
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    let active: Vec<bool> = values.iter().map(|&v| v as f64 > mean).collect();
    let masked: Vec<f64> = values
        .iter()
        .zip(&active)
        .map(|(&v, &a)| if a { v as f64 } else { 0.0 })
        .collect();

    let plane = h * w;
    let window_sums: Vec<f64> = (0..d)
        .flat_map(|c| box_sum(&masked[c * plane..(c + 1) * plane], h, w, radius))
        .collect();
    let mut total = vec![0.0; plane];
    for c in 0..d {
        for (t, s) in total.iter_mut().zip(&window_sums[c * plane..(c + 1) * plane]) {
            *t += s;
        }
    }

    let mut out = vec![0.0; values.len()];
    for c in 0..d {
        for p in 0..plane {
            let idx = c * plane + p;
            if active[idx] {
                out[idx] = total[p] - (1.0 - epsilon) * window_sums[idx];
            }
        }
    }
    out
}

/// Zero-padded `(2r+1)^2` window sum of a row-major map.
fn box_sum(map: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        let (r0, r1) = (i.saturating_sub(r), (i + r).min(h - 1));
        for j in 0..w {
            let (c0, c1) = (j.saturating_sub(r), (j + r).min(w - 1));
            let mut s = 0.0;
            for ii in r0..=r1 {
                s += map[ii * w + c0..=ii * w + c1].iter().sum::<f64>();
            }
            out[i * w + j] = s;
        }
    }
    out
}

/// One value per channel: the spatial sum of that channel of the co-occurrence tensor.
pub fn cooc_channel_values(cooc: &[f64], channels: usize) -> Vec<f64> {
    assert!(channels > 0 && cooc.len().is_multiple_of(channels));
    cooc.chunks_exact(cooc.len() / channels)
        .map(|c| c.iter().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_tensor_has_no_cooccurrence() {
        let t = ActivationTensor::new(3, 4, 4, vec![0.7; 48]).unwrap();
        assert!(cooc_tensor(&t, 1, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_channel_with_zero_self_weight_is_zero() {
        let values: Vec<f32> = (0..16).map(|i| (i * 7 % 5) as f32).collect();
        let t = ActivationTensor::new(1, 4, 4, values).unwrap();
        assert!(cooc_tensor(&t, 1, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_channel_hand_case() {
        // mean = 1; active: ch0 (0,0)=3, ch1 (0,1)=2 and (1,1)=2
        let t = ActivationTensor::new(
            2,
            2,
            2,
            vec![3.0, 0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 2.0],
        )
        .unwrap();
        let c = cooc_tensor(&t, 1, 0.0);
        // ch0 (0,0) sees all of ch1's active values in its window: 2 + 2
        assert_eq!(c[0], 4.0);
        // ch1 elements see ch0's 3
        assert_eq!(c[5], 3.0);
        assert_eq!(c[7], 3.0);
        assert_eq!(c[6], 0.0);
        assert_eq!(cooc_channel_values(&c, 2), vec![4.0, 6.0]);
    }

    #[test]
    fn channel_values_sum_planes() {
        let mut v = vec![0.0; 12];
        v[..4].copy_from_slice(&[1.0; 4]);
        assert_eq!(cooc_channel_values(&v, 3), vec![4.0, 0.0, 0.0]);
    }
}
