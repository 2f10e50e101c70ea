//! Independent reference implementations used by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// ---------------------------------------------------------------- DCT

/// Orthonormal DCT-II basis, `basis[k][i]`.
pub fn dct_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| s * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

pub fn dct1_oracle(x: &[f64]) -> Vec<f64> {
    dct_basis(x.len())
        .iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `C_h * X * C_w^T`, row-major.
pub fn dct2_oracle(map: &[f64], h: usize, w: usize) -> Vec<f64> {
    let ch = dct_basis(h);
    let cw = dct_basis(w);
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            let mut s = 0.0;
            for i in 0..h {
                for j in 0..w {
                    s += ch[u][i] * map[i * w + j] * cw[v][j];
                }
            }
            out[u * w + v] = s;
        }
    }
    out
}

/// JPEG zigzag: anti-diagonals in order; odd diagonals walk down the rows, even ones up.
pub fn zigzag_oracle(h: usize, w: usize) -> Vec<usize> {
    let mut cells: Vec<(usize, usize)> = (0..h).flat_map(|i| (0..w).map(move |j| (i, j))).collect();
    cells.sort_by_key(|&(i, j)| {
        let s = i + j;
        (s, if s % 2 == 0 { -(i as i64) } else { i as i64 })
    });
    cells.into_iter().map(|(i, j)| i * w + j).collect()
}

// ---------------------------------------------------------------- eigen / PCA

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// (descending) and matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b][b].total_cmp(&m[a][a]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (n - 1 denominator).
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= (n - 1) as f64);
    cov
}

// ---------------------------------------------------------------- CoOC

/// Literal evaluation of the thresholded activation convolved with the co-occurrence
/// filter bank, times the threshold mask. Channel-major output.
pub fn cooc_oracle(values: &[f64], d: usize, m: usize, n: usize, r: usize, eps: f64) -> Vec<f64> {
    let at = |k: usize, i: usize, j: usize| values[k * m * n + i * n + j];
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let rho = |k: usize, i: usize, j: usize| if at(k, i, j) > mean { 1.0 } else { 0.0 };
    let mut out = vec![0.0; values.len()];
    for k in 0..d {
        for i in 0..m {
            for j in 0..n {
                let mut conv = 0.0;
                for k2 in 0..d {
                    let weight = if k2 == k { eps } else { 1.0 };
                    for di in -(r as isize)..=r as isize {
                        for dj in -(r as isize)..=r as isize {
                            let (ii, jj) = (i as isize + di, j as isize + dj);
                            if ii < 0 || jj < 0 || ii >= m as isize || jj >= n as isize {
                                continue;
                            }
                            let (ii, jj) = (ii as usize, jj as usize);
                            conv += weight * at(k2, ii, jj) * rho(k2, ii, jj);
                        }
                    }
                }
                out[k * m * n + i * n + j] = conv * rho(k, i, j);
            }
        }
    }
    out
}

// ---------------------------------------------------------------- chi-square

pub fn chi2_oracle(column: &[f64], labels: &[usize], bins: usize) -> f64 {
    let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return 0.0;
    }
    let classes = *labels.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0f64; classes]; bins];
    for (&x, &y) in column.iter().zip(labels) {
        let mut b = ((x - lo) / (hi - lo) * bins as f64).floor() as usize;
        if b >= bins {
            b = bins - 1;
        }
        table[b][y] += 1.0;
    }
    let table: Vec<Vec<f64>> = table.into_iter().filter(|r| r.iter().sum::<f64>() > 0.0).collect();
    let cols: Vec<usize> = (0..classes).filter(|&c| table.iter().map(|r| r[c]).sum::<f64>() > 0.0).collect();
    let n = column.len() as f64;
    let mut stat = 0.0;
    for row in &table {
        let rt: f64 = row.iter().sum();
        for &c in &cols {
            let ct: f64 = table.iter().map(|r| r[c]).sum();
            let e = rt * ct / n;
            stat += (row[c] - e).powi(2) / e;
        }
    }
    stat
}

// ---------------------------------------------------------------- Wilcoxon

/// Two-sided exact p by listing every sign assignment of the observed ranks.
pub fn wilcoxon_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|&x| {
            let below = mags.iter().filter(|&&y| y < x).count() as f64;
            let equal = mags.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let t_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let w = t_plus.min(total - t_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let tp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if tp.min(total - tp) <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, hits as f64 / (1u64 << n) as f64)
}

// ---------------------------------------------------------------- SVM

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Maximizes `sum(alpha) - 1/2 alpha^T Q alpha` over the box `[0, C]^n` by trying every
/// assignment of each variable to lower bound, upper bound or free. Returns the best
/// feasible `(objective, weights, bias)` with `Q_ij = y_i y_j (x_i . x_j + 1)`.
pub fn svm_dual_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * (x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0)).collect())
        .collect();
    let objective = |alpha: &[f64]| {
        let lin: f64 = alpha.iter().sum();
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| alpha[i] * q[i][j] * alpha[j]).sum::<f64>()).sum();
        lin - 0.5 * quad
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| q[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q[i][j] * c).sum::<f64>())
                .collect();
            let Some(sol) = solve(a, b) else { continue };
            if sol.iter().any(|&v| v < -1e-12 || v > c + 1e-12) {
                continue;
            }
            for (&i, v) in free.iter().zip(sol) {
                alpha[i] = v.clamp(0.0, c);
            }
        }
        let obj = objective(&alpha);
        if best.as_ref().map_or(true, |(b, _)| obj > *b) {
            best = Some((obj, alpha));
        }
    }
    let (obj, alpha) = best.unwrap();
    let d = x[0].len();
    let w: Vec<f64> = (0..d).map(|k| (0..n).map(|i| alpha[i] * y[i] * x[i][k]).sum()).collect();
    let b: f64 = (0..n).map(|i| alpha[i] * y[i]).sum();
    (obj, w, b)
}

// ---------------------------------------------------------------- fusion / SFFS

/// `scores[classifier][sample][class]` for a pool of noisy classifiers of varying
/// quality, plus labels `i % classes`.
pub fn random_pool(seed: u64, classifiers: usize, samples: usize, classes: usize) -> (Vec<Vec<Vec<f64>>>, Vec<usize>) {
    let mut rng = rng(seed);
    let labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    let pool = (0..classifiers)
        .map(|_| {
            let quality: f64 = rng.random_range(0.35..0.8);
            labels
                .iter()
                .map(|&y| {
                    let peak = if rng.random_bool(quality) { y } else { rng.random_range(0..classes) };
                    let logits: Vec<f64> = (0..classes)
                        .map(|k| rng.random_range(0.0..1.0) + if k == peak { 1.5 } else { 0.0 })
                        .collect();
                    let total: f64 = logits.iter().map(|v| v.exp()).sum();
                    logits.iter().map(|v| v.exp() / total).collect()
                })
                .collect()
        })
        .collect();
    (pool, labels)
}

fn first_max(row: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..row.len() {
        if row[k] > row[best] {
            best = k;
        }
    }
    best
}

/// Accuracy of the argmax of the summed scores of `subset`.
pub fn subset_accuracy(pool: &[Vec<Vec<f64>>], labels: &[usize], subset: &[usize]) -> f64 {
    let classes = pool[0][0].len();
    let hits = (0..labels.len())
        .filter(|&s| {
            let mut sum = vec![0.0; classes];
            for &c in subset {
                for k in 0..classes {
                    sum[k] += pool[c][s][k];
                }
            }
            let count = subset.len() as f64;
            sum.iter_mut().for_each(|v| *v /= count);
            first_max(&sum) == labels[s]
        })
        .count();
    hits as f64 / labels.len() as f64
}

/// Best accuracy over every non-empty subset of at most `max_size` classifiers.
pub fn exhaustive_best(pool: &[Vec<Vec<f64>>], labels: &[usize], max_size: usize) -> f64 {
    let m = pool.len();
    (1u32..(1 << m))
        .filter(|mask| mask.count_ones() as usize <= max_size)
        .map(|mask| {
            let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            subset_accuracy(pool, labels, &subset)
        })
        .fold(0.0, f64::max)
}
