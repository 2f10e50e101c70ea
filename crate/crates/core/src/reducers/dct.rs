//! Orthonormal DCT-II (and its inverse, DCT-III) computed through a same-length
//! complex FFT, plus the 2-D separable transform and zigzag coefficient order.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Precomputed plan for orthonormal DCT-II / DCT-III of one length.
pub struct Dct {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // exp(-i*pi*k / 2N)
    twiddles: Vec<Complex64>,
}

impl std::fmt::Debug for Dct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("len", &self.len).finish()
    }
}

impl Dct {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let mut planner = FftPlanner::new();
        let twiddles = (0..len)
            .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * len as f64)))
            .collect();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn scale(&self, k: usize) -> f64 {
        let n = self.len as f64;
        if k == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        }
    }

    /// Orthonormal DCT-II of `input` (length must equal the plan length).
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let n = self.len;
        assert_eq!(input.len(), n);
        // Even samples ascending, odd samples descending.
        let mut buf: Vec<Complex64> = vec![Complex64::default(); n];
        for i in 0..n.div_ceil(2) {
            buf[i] = Complex64::new(input[2 * i], 0.0);
        }
        for i in 0..n / 2 {
            buf[n - 1 - i] = Complex64::new(input[2 * i + 1], 0.0);
        }
        self.forward.process(&mut buf);
        (0..n)
            .map(|k| (buf[k] * self.twiddles[k]).re * self.scale(k))
            .collect()
    }

    /// Orthonormal DCT-III, the inverse of [`Dct::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.len;
        assert_eq!(coeffs.len(), n);
        let raw: Vec<f64> = (0..n).map(|k| coeffs[k] / self.scale(k)).collect();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let mirrored = if k == 0 { 0.0 } else { raw[n - k] };
                self.twiddles[k].conj() * Complex64::new(raw[k], -mirrored)
            })
            .collect();
        self.inverse.process(&mut buf);
        let norm = 1.0 / n as f64;
        let mut out = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            out[2 * i] = buf[i].re * norm;
        }
        for i in 0..n / 2 {
            out[2 * i + 1] = buf[n - 1 - i].re * norm;
        }
        out
    }
}

/// Separable 2-D DCT over a row-major `height x width` map.
#[derive(Debug)]
pub struct Dct2d {
    height: usize,
    width: usize,
    rows: Dct,
    cols: Dct,
    zigzag: Vec<usize>,
}

impl Dct2d {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: Dct::new(width),
            cols: Dct::new(height),
            zigzag: zigzag_order(height, width),
        }
    }

    fn apply(&self, map: &[f64], inverse: bool) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        assert_eq!(map.len(), h * w);
        let mut out = Vec::with_capacity(h * w);
        for row in map.chunks_exact(w) {
            if inverse {
                out.extend(self.rows.inverse(row));
            } else {
                out.extend(self.rows.forward(row));
            }
        }
        let mut column = vec![0.0; h];
        for j in 0..w {
            for i in 0..h {
                column[i] = out[i * w + j];
            }
            let t = if inverse {
                self.cols.inverse(&column)
            } else {
                self.cols.forward(&column)
            };
            for i in 0..h {
                out[i * w + j] = t[i];
            }
        }
        out
    }

    /// Full coefficient grid, row-major (vertical frequency major).
    pub fn forward(&self, map: &[f64]) -> Vec<f64> {
        self.apply(map, false)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        self.apply(coeffs, true)
    }

    /// First `keep` coefficients in zigzag order.
    pub fn low_frequencies(&self, map: &[f64], keep: usize) -> Vec<f64> {
        let grid = self.forward(map);
        self.zigzag[..keep].iter().map(|&i| grid[i]).collect()
    }
}

/// Row-major indices of a `height x width` grid in JPEG-style zigzag order,
/// starting at the DC term and walking the anti-diagonals.
pub fn zigzag_order(height: usize, width: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(height * width);
    for s in 0..height + width - 1 {
        let lo = s.saturating_sub(width - 1);
        let hi = s.min(height - 1);
        if s % 2 == 0 {
            for i in (lo..=hi).rev() {
                order.push(i * width + (s - i));
            }
        } else {
            for i in lo..=hi {
                order.push(i * width + (s - i));
            }
        }
    }
    order
}

/// 2-D orthonormal DCT-II of one channel map, first `keep` coefficients in zigzag order.
pub fn dct_channel(map: &[f64], height: usize, width: usize, keep: usize) -> Result<Vec<f64>> {
    if map.len() != height * width {
        return Err(Error::argument(format!(
            "map has {} values, expected {height}x{width}",
            map.len()
        )));
    }
    if keep > height * width {
        return Err(Error::argument(format!(
            "cannot keep {keep} coefficients of a {height}x{width} map"
        )));
    }
    Ok(Dct2d::new(height, width).low_frequencies(map, keep))
}

/// 1-D orthonormal DCT-II of a whole vector, first `keep` coefficients.
pub fn dct_global(vector: &[f64], keep: usize) -> Result<Vec<f64>> {
    if keep > vector.len() {
        return Err(Error::argument(format!(
            "cannot keep {keep} coefficients of a length-{} vector",
            vector.len()
        )));
    }
    if vector.is_empty() {
        return Ok(Vec::new());
    }
    let mut coeffs = Dct::new(vector.len()).forward(vector);
    coeffs.truncate(keep);
    Ok(coeffs)
}
