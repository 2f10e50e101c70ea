//! Linear soft-margin SVM (hinge loss) solved in the dual by coordinate ascent.
//!
//! The bias is handled as an extra constant-1 input feature, so it is regularized with
//! the weights and the dual has only box constraints `0 <= alpha_i <= C`:
//!
//! maximize  sum(alpha) - 1/2 * || sum(alpha_i * y_i * [x_i, 1]) ||^2

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epochs: usize,
    /// Largest projected-gradient magnitude seen in the last epoch.
    pub kkt_violation: f64,
    pub converged: bool,
    /// Dual objective after each epoch.
    pub dual_objective: Vec<f64>,
    /// Final dual variables, one per training row.
    pub alphas: Vec<f64>,
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on `rows` with labels in {-1, +1}.
pub fn train_binary(rows: &FeatureMatrix, labels: &[i8], params: &SolverParams) -> Result<BinarySvmModel> {
    let n = rows.rows();
    if labels.len() != n {
        return Err(Error::argument(format!("{} labels for {n} rows", labels.len())));
    }
    if n < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {n}")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::argument(format!("binary labels must be +1/-1, got {bad}")));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::Training("both classes must be present".into()));
    }
    if !(params.c > 0.0) {
        return Err(Error::argument(format!("C must be positive, got {}", params.c)));
    }

    let d = rows.cols();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let diag: Vec<f64> = rows.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = Vec::new();
    let mut violation = f64::INFINITY;
    let mut converged = false;

    while trace.len() < params.max_epochs {
        order.shuffle(&mut rng);
        violation = 0.0;
        for &i in &order {
            let x = rows.row(i);
            let grad = y[i] * (dot(&w, x) + b) - 1.0;
            let projected = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= c {
                grad.max(0.0)
            } else {
                grad
            };
            violation = f64::max(violation, projected.abs());
            if projected != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - grad / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    w.iter_mut().zip(x).for_each(|(wj, xj)| *wj += step * xj);
                    b += step;
                }
            }
        }
        let objective = alpha.iter().sum::<f64>() - 0.5 * (dot(&w, &w) + b * b);
        trace.push(objective);
        if violation < params.tol {
            converged = true;
            break;
        }
    }

    Ok(BinarySvmModel {
        weights: w,
        bias: b,
        c,
        epochs: trace.len(),
        kkt_violation: violation,
        converged,
        dual_objective: trace,
        alphas: alpha,
    })
}
