use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// A fitted principal component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub(crate) mean: Vec<f64>,
    /// `kept x dim`, row-major, orthonormal rows.
    pub(crate) components: Vec<f64>,
    pub(crate) explained_variance: Vec<f64>,
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn kept(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.components[i * d..(i + 1) * d]
    }

    /// Variance along each kept component, non-increasing.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `(row - mean) . components^T`
    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::argument(format!(
                "PCA expects rows of length {}, got {}",
                self.dim(),
                row.len()
            )));
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok((0..self.kept())
            .map(|i| dot(self.component(i), &centered))
            .collect())
    }

    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, &p) in projected.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(i)) {
                *o += p * c;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the top `min(keep, d, n - 1)` principal directions of `rows`.
///
/// Uses the `d x d` covariance when `d <= n`, otherwise the `n x n` Gram matrix of the
/// centered rows. Each component is signed so its largest-magnitude entry is positive.
pub fn pca_fit(rows: &FeatureMatrix, keep: usize) -> Result<Pca> {
    let (n, d) = (rows.rows(), rows.cols());
    if n < 2 {
        return Err(Error::Fit(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::Fit("PCA needs at least one column".into()));
    }
    let k = keep.min(d).min(n - 1);
    let mut mean = vec![0.0; d];
    for row in rows.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows.get(i, j) - mean[j]);
    let denom = (n - 1) as f64;

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        for idx in descending(eig.eigenvalues.as_slice()).into_iter().take(k) {
            variances.push(eig.eigenvalues[idx].max(0.0));
            components.push(eig.eigenvectors.column(idx).iter().copied().collect());
        }
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        for idx in descending(eig.eigenvalues.as_slice()).into_iter().take(k) {
            let lambda = eig.eigenvalues[idx];
            variances.push(lambda.max(0.0));
            if lambda > scale * 1e-12 {
                let v = centered.transpose() * eig.eigenvectors.column(idx);
                let norm = v.norm();
                components.push(v.iter().map(|x| x / norm).collect());
            } else {
                components.push(Vec::new());
            }
        }
    }
    complete_orthonormal(&mut components, d);
    for c in &mut components {
        fix_sign(c);
    }
    Ok(Pca {
        mean,
        components: components.into_iter().flatten().collect(),
        explained_variance: variances,
    })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Replaces empty slots (null-space directions) with unit vectors orthogonal to the rest,
/// built by Gram-Schmidt over the standard basis.
fn complete_orthonormal(components: &mut [Vec<f64>], d: usize) {
    let mut basis = 0;
    for slot in 0..components.len() {
        if !components[slot].is_empty() {
            continue;
        }
        while basis < d {
            let mut v = vec![0.0; d];
            v[basis] = 1.0;
            basis += 1;
            for other in components.iter().filter(|c| !c.is_empty()) {
                let p = dot(&v, other);
                v.iter_mut().zip(other).for_each(|(x, o)| *x -= p * o);
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                components[slot] = v;
                break;
            }
        }
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
