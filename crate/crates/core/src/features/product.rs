//! Two-stage random Fourier features for the product kernel.
//!
//! Stage one embeds each bag with an RFF map for `k'X`:
//! `Z_P(P) = (1/n) sum_i z'(x_i)`, a vector of length `2L`.
//! With Gaussian `kX` and Gaussian-like `kP` the approximate product kernel
//! `exp(-|Z_P - Z_P'|^2 / 2 sP^2) exp(-|x - x'|^2 / 2 sX^2)` is a single
//! Gaussian of bandwidth `sP sX` on the concatenation
//! `u = (sX Z_P(P), sP x)`, so stage two is a plain RFF map on `u` with
//! `Q` frequencies.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::features::rff::{cos_sin_into, gaussian_matrix, sample_rff, RffMap};
use crate::kernels::KernelSpec;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRffMap {
    inner: RffMap,
    /// `Q x (2L + d)`; row `q` is `v_q`.
    #[serde(with = "crate::learner::persist::array2")]
    outer: Array2<f64>,
    sigma_x: f64,
    sigma_p: f64,
    seed: u64,
}

/// The per-bag part of every outer phase: `sX * v_q[..2L] . Z_P(P)`.
#[derive(Debug, Clone)]
pub struct BagProjection {
    offsets: Vec<f64>,
}

const GAUSSIAN_ONLY: &str = "RFF path requires all-Gaussian kernels";

pub fn sample_product_rff(seed: u64, spec: &KernelSpec, l: usize, q: usize, d: usize) -> Result<ProductRffMap> {
    let (sigma_x, sigma_xp, sigma_p) = spec
        .gaussian_bandwidths()
        .ok_or_else(|| Error::incompatible(GAUSSIAN_ONLY))?;
    if q == 0 {
        return Err(Error::invalid("outer feature count Q must be >= 1"));
    }
    let inner = sample_rff(seed::child_seed(seed, "inner", 0), l, sigma_xp, d)?;
    let outer = gaussian_matrix(
        seed::child_seed(seed, "outer", 0),
        q,
        2 * l + d,
        1.0 / (sigma_p * sigma_x),
    );
    Ok(ProductRffMap {
        inner,
        outer,
        sigma_x,
        sigma_p,
        seed,
    })
}

impl ProductRffMap {
    pub fn inner(&self) -> &RffMap {
        &self.inner
    }

    pub fn outer(&self) -> &Array2<f64> {
        &self.outer
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    pub fn num_outer(&self) -> usize {
        self.outer.nrows()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_outer()
    }

    /// Stage-one embedding `Z_P` of a bag.
    pub fn embed_bag(&self, bag: &Bag) -> Result<Vec<f64>> {
        self.inner.embed_bag(bag)
    }

    pub fn project_bag(&self, bag: &Bag) -> Result<BagProjection> {
        let zp = self.embed_bag(bag)?;
        Ok(self.project_embedding(&zp))
    }

    pub(crate) fn project_embedding(&self, zp: &[f64]) -> BagProjection {
        let two_l = zp.len();
        let offsets = self
            .outer
            .rows()
            .into_iter()
            .map(|v| {
                let v = v.as_slice().expect("standard layout");
                self.sigma_x * v[..two_l].iter().zip(zp).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        BagProjection { offsets }
    }

    pub(crate) fn feature_into(&self, proj: &BagProjection, x: &[f64], phases: &mut [f64], out: &mut [f64]) {
        let two_l = self.inner.output_dim();
        for ((p, v), off) in phases.iter_mut().zip(self.outer.rows()).zip(&proj.offsets) {
            let v = v.as_slice().expect("standard layout");
            let vx: f64 = v[two_l..].iter().zip(x).map(|(a, b)| a * b).sum();
            *p = off + self.sigma_p * vx;
        }
        let scale = 1.0 / (self.num_outer() as f64).sqrt();
        cos_sin_into(phases, scale, out);
    }

    /// `zbar((P, x))` for the empirical distribution of `bag` and point `x`.
    pub fn product_feature(&self, bag: &Bag, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        check_finite(x, "feature input")?;
        let proj = self.project_bag(bag)?;
        let mut phases = vec![0.0; self.num_outer()];
        let mut out = vec![0.0; self.output_dim()];
        self.feature_into(&proj, x, &mut phases, &mut out);
        Ok(out)
    }

    /// Features of `points`, all paired with the distribution of `bag`.
    pub fn transform_points(&self, bag: &Bag, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), points.ncols())?;
        let proj = self.project_bag(bag)?;
        let dim = self.output_dim();
        let points = points.as_standard_layout();
        let flat = points.as_slice().expect("standard layout");
        check_finite(flat, "feature input")?;
        let d = self.input_dim();
        let mut out = Array2::zeros((points.nrows(), dim));
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(dim)
            .zip(flat.par_chunks(d))
            .for_each_init(
                || vec![0.0; self.num_outer()],
                |phases, (row, x)| self.feature_into(&proj, x, phases, row),
            );
        Ok(out)
    }
}
