//! Cost-sensitive SVM dual without offset over a precomputed Gram matrix:
//!
//! ```text
//! max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij   s.t. 0 <= a_i <= c_i
//! ```
//!
//! solved by exact coordinate maximization. Problems up to
//! `greedy_limit` examples pick the maximal KKT violator each step (lowest
//! index on ties); larger problems use seeded random-permutation sweeps.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernels::{is_psd, min_eigenvalue};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct DualOptions {
    /// Stop when the largest projected-gradient violation is below `tol`.
    pub tol: f64,
    /// Coordinate updates (greedy) or sweeps (permutation).
    pub max_iter: usize,
    pub greedy_limit: usize,
    pub seed: u64,
    /// Largest problem for which the eigenvalue PSD check runs.
    pub psd_check_limit: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            tol: 1e-6,
            max_iter: 10_000_000,
            greedy_limit: 2000,
            seed: 0,
            psd_check_limit: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub costs: Vec<f64>,
    /// Final dual objective.
    pub objective: f64,
    /// Primal minus dual objective, both in the `sum c_i xi_i + 1/2 |f|^2` scale.
    pub gap: f64,
    /// Largest projected-gradient violation at exit.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal jitter that was added because the Gram was not PSD.
    pub jitter: f64,
}

impl DualSolution {
    /// Expansion coefficients `r_i = a_i y_i`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alphas.iter().zip(&self.labels).map(|(a, y)| a * y).collect()
    }
}

#[inline]
fn violation(alpha: f64, cost: f64, grad: f64) -> f64 {
    if alpha <= 0.0 {
        grad.max(0.0)
    } else if alpha >= cost {
        (-grad).max(0.0)
    } else {
        grad.abs()
    }
}

/// Exact maximizer of the dual along coordinate `i`.
#[inline]
fn coordinate_step(alpha: f64, cost: f64, grad: f64, kii: f64) -> f64 {
    if kii > 0.0 {
        (alpha + grad / kii).clamp(0.0, cost)
    } else if grad > 0.0 {
        cost
    } else if grad < 0.0 {
        0.0
    } else {
        alpha
    }
}

fn objective_and_gap(alphas: &[f64], costs: &[f64], grad: &[f64]) -> (f64, f64) {
    // y_i f(x_i) = 1 - grad_i, so alpha^T Y K Y alpha = sum a_i (1 - grad_i).
    let quad: f64 = alphas.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum();
    let lin: f64 = alphas.iter().sum();
    let dual = lin - 0.5 * quad;
    let hinge: f64 = costs.iter().zip(grad).map(|(c, g)| c * g.max(0.0)).sum();
    let primal = 0.5 * quad + hinge;
    (dual, (primal - dual).max(0.0))
}

pub fn solve_dual_svm(gram: &Array2<f64>, labels: &[f64], costs: &[f64], opts: &DualOptions) -> Result<DualSolution> {
    let m = labels.len();
    if m == 0 {
        return Err(Error::invalid("dual problem needs at least one example"));
    }
    check_dim(m, gram.nrows())?;
    check_dim(m, gram.ncols())?;
    check_dim(m, costs.len())?;
    check_finite(labels, "labels")?;
    check_finite(costs, "costs")?;
    if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid(format!("labels must be +1 or -1, found {y}")));
    }
    if costs.iter().any(|&c| c < 0.0) {
        return Err(Error::invalid("costs must be nonnegative"));
    }
    let gram = gram.as_standard_layout();
    check_finite(gram.as_slice().expect("standard layout"), "gram matrix")?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }

    let mut jitter = 0.0;
    let mut owned;
    let mut k: &[f64] = gram.as_slice().expect("standard layout");
    if m <= opts.psd_check_limit && !is_psd(&gram.to_owned(), 1e-8) {
        log::warn!(
            "Gram matrix is not PSD within tolerance (min eigenvalue {:e}); adding diagonal jitter 1e-10",
            min_eigenvalue(&gram.to_owned())
        );
        jitter = 1e-10;
        owned = gram.to_owned();
        for i in 0..m {
            owned[[i, i]] += jitter;
        }
        k = owned.as_slice().expect("standard layout");
    } else if gram.diag().iter().any(|&d| d < 0.0) {
        return Err(Error::Numerical("Gram matrix has a negative diagonal entry".into()));
    }

    let mut alphas = vec![0.0; m];
    let mut grad = vec![1.0; m];
    let mut iterations = 0;
    let mut converged = false;

    let update = |i: usize, alphas: &mut [f64], grad: &mut [f64]| {
        let kii = k[i * m + i];
        let new = coordinate_step(alphas[i], costs[i], grad[i], kii);
        let delta = new - alphas[i];
        if delta != 0.0 {
            alphas[i] = new;
            let row = &k[i * m..(i + 1) * m];
            let s = delta * labels[i];
            for j in 0..m {
                grad[j] -= s * labels[j] * row[j];
            }
        }
    };

    let max_violation = |alphas: &[f64], grad: &[f64]| -> (usize, f64) {
        let mut best = (0, -1.0);
        for i in 0..m {
            let v = violation(alphas[i], costs[i], grad[i]);
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    };

    if m <= opts.greedy_limit {
        while iterations < opts.max_iter {
            let (i, v) = max_violation(&alphas, &grad);
            if v < opts.tol {
                converged = true;
                break;
            }
            update(i, &mut alphas, &mut grad);
            iterations += 1;
        }
        if !converged {
            converged = max_violation(&alphas, &grad).1 < opts.tol;
        }
    } else {
        let mut rng = seed::rng(opts.seed);
        let mut order: Vec<usize> = (0..m).collect();
        while iterations < opts.max_iter {
            if max_violation(&alphas, &grad).1 < opts.tol {
                converged = true;
                break;
            }
            order.shuffle(&mut rng);
            for &i in &order {
                update(i, &mut alphas, &mut grad);
            }
            iterations += 1;
        }
        if !converged {
            converged = max_violation(&alphas, &grad).1 < opts.tol;
        }
    }

    let (objective, gap) = objective_and_gap(&alphas, costs, &grad);
    let kkt_violation = max_violation(&alphas, &grad).1;
    if !converged {
        log::warn!("dual solver stopped after {iterations} iterations with KKT violation {kkt_violation:e}");
    }
    Ok(DualSolution {
        alphas,
        labels: labels.to_vec(),
        costs: costs.to_vec(),
        objective,
        gap,
        kkt_violation,
        iterations,
        converged,
        jitter,
    })
}

/// Decision value `sum_i a_i y_i k_i` for a row of kernel values against
/// the training examples.
pub fn predict_dual(sol: &DualSolution, kernel_row: &[f64]) -> Result<f64> {
    check_dim(sol.alphas.len(), kernel_row.len())?;
    Ok(sol
        .alphas
        .iter()
        .zip(&sol.labels)
        .zip(kernel_row)
        .map(|((a, y), k)| a * y * k)
        .sum())
}

/// Dual objective at an arbitrary feasible point (used by tests and by
/// optimality checks).
pub fn dual_objective(gram: &Array2<f64>, labels: &[f64], alphas: &[f64]) -> f64 {
    let m = alphas.len();
    let mut quad = 0.0;
    for i in 0..m {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            quad += alphas[i] * alphas[j] * labels[i] * labels[j] * gram[[i, j]];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}
