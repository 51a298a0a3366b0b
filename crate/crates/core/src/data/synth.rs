//! Synthetic tasks.
//!
//! Ellipse tasks: points on an ellipse with semi-axes `a > b` whose major
//! axis is rotated by `alpha`; a point is labelled `+1` when it lies to the
//! left of the major axis (positive inner product with
//! `(-sin alpha, cos alpha)`). Every task has the same mean, but the
//! marginal's orientation determines the labelling rule.

use std::f64::consts::{FRAC_PI_4, PI};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::bag::Bag;
use crate::data::{BagCollection, Provenance};
use crate::error::{Error, Result};
use crate::seed::{child_seed, rng};

pub const DEFAULT_SEMI_MAJOR: f64 = 1.0;
pub const DEFAULT_SEMI_MINOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseTaskParams {
    pub a: f64,
    pub b: f64,
    /// Rotation of the major axis, in `[pi/4, 3pi/4]`.
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
}

impl EllipseTaskParams {
    pub fn new(alpha: f64, n: usize, seed: u64) -> Self {
        EllipseTaskParams {
            a: DEFAULT_SEMI_MAJOR,
            b: DEFAULT_SEMI_MINOR,
            alpha,
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b > 0.0 && self.a > self.b) {
            return Err(Error::invalid(format!(
                "ellipse needs a > b > 0, got a={} b={}",
                self.a, self.b
            )));
        }
        if !(FRAC_PI_4..=3.0 * FRAC_PI_4).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "rotation must lie in [pi/4, 3pi/4], got {}",
                self.alpha
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("a task needs at least one point"));
        }
        Ok(())
    }
}

/// Label of point `p` under rotation `alpha`.
pub fn ellipse_label(p: [f64; 2], alpha: f64) -> f64 {
    let s = -alpha.sin() * p[0] + alpha.cos() * p[1];
    if s > 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn gen_ellipse_task(task_id: impl Into<String>, params: &EllipseTaskParams) -> Result<Bag> {
    params.validate()?;
    let mut r = rng(params.seed);
    let (sa, ca) = params.alpha.sin_cos();
    let mut points = Array2::zeros((params.n, 2));
    let mut labels = Vec::with_capacity(params.n);
    for i in 0..params.n {
        let t: f64 = r.gen_range(0.0..2.0 * PI);
        let (u, v) = (params.a * t.cos(), params.b * t.sin());
        let p = [ca * u - sa * v, sa * u + ca * v];
        points[[i, 0]] = p[0];
        points[[i, 1]] = p[1];
        labels.push(ellipse_label(p, params.alpha));
    }
    Bag::new(task_id, points, Some(labels))
}

/// Rotation of task `index` of the collection with master seed `seed`.
pub fn sample_rotation(seed: u64, index: u64) -> f64 {
    let mut r = rng(child_seed(seed, "alpha", index));
    r.gen_range(FRAC_PI_4..=3.0 * FRAC_PI_4)
}

/// Parameters of task `index`; `gen_collection` uses exactly these.
pub fn task_params(seed: u64, index: u64, n: usize, a: f64, b: f64) -> EllipseTaskParams {
    EllipseTaskParams {
        a,
        b,
        alpha: sample_rotation(seed, index),
        n,
        seed: child_seed(seed, "points", index),
    }
}

pub fn gen_collection(n_tasks: usize, n: usize, seed: u64) -> Result<BagCollection> {
    gen_collection_with(n_tasks, n, seed, DEFAULT_SEMI_MAJOR, DEFAULT_SEMI_MINOR, "task")
}

/// Ellipse collection with explicit semi-axes and task-id prefix.
pub fn gen_collection_with(n_tasks: usize, n: usize, seed: u64, a: f64, b: f64, prefix: &str) -> Result<BagCollection> {
    if n_tasks == 0 || n == 0 {
        return Err(Error::invalid("need at least one task and one point per task"));
    }
    let bags = (0..n_tasks)
        .map(|i| gen_ellipse_task(format!("{prefix}{i:04}"), &task_params(seed, i as u64, n, a, b)))
        .collect::<Result<Vec<_>>>()?;
    BagCollection::new(
        bags,
        Provenance {
            source: format!("ellipse(a={a}, b={b})"),
            seed: Some(seed),
        },
    )
}

/// Regression tasks whose target depends on the task's marginal.
///
/// Task `i` draws a scale `s_i ~ U[0.5, 2]`; points are `x ~ N(0, s_i^2 I_2)`
/// and `y = s_i cos(x_1 / s_i) + 0.1 s_i e` with standard normal `e`, so
/// both the regression function and the noise level vary across tasks and
/// the scale is recoverable from the unlabelled bag.
pub fn gen_regression_collection(n_tasks: usize, n: usize, seed: u64) -> Result<BagCollection> {
    if n_tasks == 0 || n == 0 {
        return Err(Error::invalid("need at least one task and one point per task"));
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let bags = (0..n_tasks)
        .map(|i| {
            let mut r = rng(child_seed(seed, "regression", i as u64));
            let s: f64 = r.gen_range(0.5..=2.0);
            let mut points = Array2::zeros((n, 2));
            let mut labels = Vec::with_capacity(n);
            for j in 0..n {
                let x0 = s * std.sample(&mut r);
                let x1 = s * std.sample(&mut r);
                points[[j, 0]] = x0;
                points[[j, 1]] = x1;
                labels.push(s * (x0 / s).cos() + 0.1 * s * std.sample(&mut r));
            }
            Bag::new(format!("reg{i:04}"), points, Some(labels))
        })
        .collect::<Result<Vec<_>>>()?;
    BagCollection::new(
        bags,
        Provenance {
            source: "heteroscedastic-regression".into(),
            seed: Some(seed),
        },
    )
}
