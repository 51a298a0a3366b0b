//! Dual coordinate descent for linear predictors over explicit features.
//!
//! Minimizes `sum_i w_i loss(w.z_i, y_i) + lambda |w|^2` where the example
//! weights `w_i` are `1/(N n_task)` (per-task) or `1/M` (plain
//! concatenation). Dividing by `2 lambda` gives the usual SVM scaling
//! `sum_i c_i loss_i + 1/2 |w|^2` with box bounds `c_i = w_i / (2 lambda)`;
//! the solver works in that scaling and reports objectives in the original.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::seed;
use crate::solver::loss::Loss;

/// Row access to a feature matrix.
pub trait FeatureRows: Sync {
    fn n_rows(&self) -> usize;
    fn dim(&self) -> usize;
    fn dot(&self, i: usize, w: &[f64]) -> f64;
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]);
    fn sq_norm(&self, i: usize) -> f64;
}

/// Dense row-major `f64` rows.
#[derive(Debug, Clone)]
pub struct DenseRows {
    data: Vec<f64>,
    dim: usize,
}

impl DenseRows {
    pub fn new(features: &Array2<f64>) -> Self {
        DenseRows {
            data: features.as_standard_layout().iter().copied().collect(),
            dim: features.ncols(),
        }
    }

    pub fn from_vec(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::invalid("feature buffer is not a whole number of rows"));
        }
        Ok(DenseRows { data, dim })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl FeatureRows for DenseRows {
    fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }
    #[inline]
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for (wj, z) in w.iter_mut().zip(self.row(i)) {
            *wj += a * z;
        }
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum()
    }
}

/// Row-major rows stored in single precision (arithmetic stays in `f64`).
/// Halves the footprint of large random-feature training sets.
#[derive(Debug, Clone)]
pub struct CompactRows {
    data: Vec<f32>,
    dim: usize,
}

impl CompactRows {
    pub fn with_capacity(rows: usize, dim: usize) -> Self {
        CompactRows {
            data: Vec::with_capacity(rows * dim),
            dim,
        }
    }

    pub fn push_rows(&mut self, block: &Array2<f64>) -> Result<()> {
        check_dim(self.dim, block.ncols())?;
        self.data.extend(block.iter().map(|&v| v as f32));
        Ok(())
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl FeatureRows for CompactRows {
    fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(&a, b)| f64::from(a) * b).sum()
    }
    #[inline]
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for (wj, &z) in w.iter_mut().zip(self.row(i)) {
            *wj += a * f64::from(z);
        }
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }
}

/// How examples are weighted in the empirical risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting<'a> {
    /// `1/(N n_i)` for an example of task `i`; rows are grouped by task in
    /// the order of the given sizes.
    PerTask(&'a [usize]),
    /// `1/M` for every example.
    Uniform,
}

impl Weighting<'_> {
    /// Per-example risk weights (summing to one).
    pub fn example_weights(&self, m: usize) -> Result<Vec<f64>> {
        match *self {
            Weighting::Uniform => Ok(vec![1.0 / m as f64; m]),
            Weighting::PerTask(sizes) => {
                let total: usize = sizes.iter().sum();
                check_dim(m, total)?;
                if sizes.contains(&0) {
                    return Err(Error::invalid("task sizes must be positive"));
                }
                let n_tasks = sizes.len() as f64;
                Ok(sizes
                    .iter()
                    .flat_map(|&n| std::iter::repeat(1.0 / (n_tasks * n as f64)).take(n))
                    .collect())
            }
        }
    }
}

/// Box bounds `c_i = w_i / (2 lambda)` of the scaled dual.
pub fn box_costs(weighting: Weighting<'_>, m: usize, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(weighting
        .example_weights(m)?
        .into_iter()
        .map(|w| w / (2.0 * lambda))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOptions {
    /// Stop when `gap < tol * (1 + |primal|)`.
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            tol: 1e-4,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolution {
    #[serde(with = "crate::learner::persist::vec_f64")]
    pub weights: Vec<f64>,
    pub loss: Loss,
    pub lambda: f64,
    /// Regularized empirical risk at `weights`.
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Primal objective after every epoch.
    pub objective_trace: Vec<f64>,
    /// Internal dual variables (alphas for hinge, signed betas for the
    /// tube loss). Not persisted.
    #[serde(skip)]
    pub dual: Vec<f64>,
}

struct Objectives {
    primal: f64,
    dual: f64,
}

fn objectives<R: FeatureRows>(
    rows: &R,
    labels: &[f64],
    loss: Loss,
    costs: &[f64],
    dual: &[f64],
    w: &[f64],
) -> Objectives {
    let half_w2 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let risk: f64 = (0..rows.n_rows())
        .map(|i| costs[i] * loss.eval(rows.dot(i, w), labels[i]))
        .sum();
    let dual_val = match loss {
        Loss::Hinge => dual.iter().sum::<f64>() - half_w2,
        Loss::EpsInsensitive { epsilon } => {
            dual.iter()
                .zip(labels)
                .map(|(b, y)| b * y - epsilon * b.abs())
                .sum::<f64>()
                - half_w2
        }
    };
    Objectives {
        primal: half_w2 + risk,
        dual: dual_val,
    }
}

#[inline]
fn hinge_step(alpha: f64, cost: f64, g: f64, qii: f64) -> f64 {
    let pg = if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= cost {
        g.max(0.0)
    } else {
        g
    };
    if pg == 0.0 {
        return alpha;
    }
    if qii > 0.0 {
        (alpha - g / qii).clamp(0.0, cost)
    } else if g < 0.0 {
        cost
    } else {
        0.0
    }
}

#[inline]
fn tube_step(beta: f64, cost: f64, g: f64, eps: f64, qii: f64) -> f64 {
    let gp = g + eps;
    let gn = g - eps;
    if qii <= 0.0 {
        return if gp < 0.0 {
            cost
        } else if gn > 0.0 {
            -cost
        } else {
            0.0
        };
    }
    let d = if gp < qii * beta {
        -gp / qii
    } else if gn > qii * beta {
        -gn / qii
    } else {
        -beta
    };
    (beta + d).clamp(-cost, cost)
}

pub fn solve_linear<R: FeatureRows>(
    rows: &R,
    labels: &[f64],
    loss: Loss,
    weighting: Weighting<'_>,
    lambda: f64,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    let m = rows.n_rows();
    if m == 0 {
        return Err(Error::invalid("linear problem needs at least one example"));
    }
    check_dim(m, labels.len())?;
    check_finite(labels, "labels")?;
    loss.validate()?;
    loss.check_labels(labels)?;
    let costs = box_costs(weighting, m, lambda)?;
    solve_linear_with_costs(rows, labels, loss, &costs, lambda, opts)
}

/// Variant taking the box bounds directly.
pub fn solve_linear_with_costs<R: FeatureRows>(
    rows: &R,
    labels: &[f64],
    loss: Loss,
    costs: &[f64],
    lambda: f64,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    let m = rows.n_rows();
    check_dim(m, costs.len())?;
    check_dim(m, labels.len())?;
    let dim = rows.dim();
    let qdiag: Vec<f64> = (0..m).map(|i| rows.sq_norm(i)).collect();
    let mut w = vec![0.0; dim];
    let mut dual = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = seed::rng(opts.seed);
    let scale = 2.0 * lambda;

    let mut trace = Vec::new();
    let mut epochs = 0;
    let mut converged = false;
    let mut last = objectives(rows, labels, loss, costs, &dual, &w);

    while epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let wz = rows.dot(i, &w);
            let (old, new) = match loss {
                Loss::Hinge => {
                    let g = labels[i] * wz - 1.0;
                    (dual[i], hinge_step(dual[i], costs[i], g, qdiag[i]))
                }
                Loss::EpsInsensitive { epsilon } => {
                    let g = wz - labels[i];
                    (dual[i], tube_step(dual[i], costs[i], g, epsilon, qdiag[i]))
                }
            };
            let delta = new - old;
            if delta != 0.0 {
                dual[i] = new;
                let a = match loss {
                    Loss::Hinge => delta * labels[i],
                    Loss::EpsInsensitive { .. } => delta,
                };
                rows.axpy(i, a, &mut w);
            }
        }
        epochs += 1;
        last = objectives(rows, labels, loss, costs, &dual, &w);
        let primal = scale * last.primal;
        trace.push(primal);
        let gap = scale * (last.primal - last.dual);
        if gap < opts.tol * (1.0 + primal.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "linear solver stopped after {epochs} epochs, gap {:e}",
            scale * (last.primal - last.dual)
        );
    }
    check_finite(&w, "solver weights")
        .map_err(|_| Error::Numerical("linear solver produced non-finite weights".into()))?;

    Ok(LinearSolution {
        weights: w,
        loss,
        lambda,
        objective: scale * last.primal,
        dual_objective: scale * last.dual,
        gap: (scale * (last.primal - last.dual)).max(0.0),
        epochs,
        converged,
        objective_trace: trace,
        dual,
    })
}

impl LinearSolution {
    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), z.len())?;
        Ok(self.weights.iter().zip(z).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn per_task_weights_sum_to_one() {
        let w = Weighting::PerTask(&[2, 3]).example_weights(5).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], 0.25);
        assert!((w[4] - 1.0 / 6.0).abs() < 1e-15);
        assert!(Weighting::PerTask(&[2, 2]).example_weights(5).is_err());
    }

    #[test]
    fn wide_tube_gives_zero_weights() {
        let x = DenseRows::new(&array![[1.0, 0.0], [0.5, 0.5], [0.0, 2.0]]);
        let y = [0.1, -0.2, 0.3];
        let sol = solve_linear(
            &x,
            &y,
            Loss::EpsInsensitive { epsilon: 1.0 },
            Weighting::Uniform,
            0.01,
            &LinearOptions::default(),
        )
        .unwrap();
        assert!(sol.weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn huge_lambda_shrinks_weights() {
        let x = DenseRows::new(&array![[1.0, 0.2], [-0.5, 0.9], [0.3, -1.0]]);
        let y = [1.0, -1.0, 1.0];
        let sol = solve_linear(&x, &y, Loss::Hinge, Weighting::Uniform, 1e6, &LinearOptions::default()).unwrap();
        let norm = sol.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-3);
    }

    #[test]
    fn hinge_dual_stays_in_box() {
        let x = DenseRows::new(&array![[1.0, 0.2], [-0.5, 0.9], [0.3, -1.0], [0.1, 0.1]]);
        let y = [1.0, -1.0, 1.0, -1.0];
        let sol = solve_linear(
            &x,
            &y,
            Loss::Hinge,
            Weighting::PerTask(&[1, 3]),
            0.05,
            &LinearOptions::default(),
        )
        .unwrap();
        let costs = box_costs(Weighting::PerTask(&[1, 3]), 4, 0.05).unwrap();
        for (a, c) in sol.dual.iter().zip(&costs) {
            assert!(*a >= 0.0 && *a <= *c);
        }
        assert!(sol.converged);
    }

    #[test]
    fn compact_rows_match_dense_closely() {
        let f = array![[1.0, 0.2], [-0.5, 0.9], [0.3, -1.0]];
        let mut c = CompactRows::with_capacity(3, 2);
        c.push_rows(&f).unwrap();
        let y = [1.0, -1.0, 1.0];
        let opts = LinearOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let a = solve_linear(&DenseRows::new(&f), &y, Loss::Hinge, Weighting::Uniform, 0.1, &opts).unwrap();
        let b = solve_linear(&c, &y, Loss::Hinge, Weighting::Uniform, 0.1, &opts).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-5);
        }
    }
}
