//! Empirical check of the two-stage RFF concentration bound.
//!
//! For a fixed pair of extended points the probability (over the frequency
//! draw) that `|kbar - zbar.zbar'| >= eps_l + eps_q` is at most
//! `2 exp(-Q eps_q^2 / 2) + 6 n1 n2 exp(-L eps^2 / 2)` with
//! `eps = (sP^2 / 2) log(1 + eps_l)`.

use ndarray::Array2;
use rand::Rng as _;
use serde::Serialize;

use crate::bag::Bag;
use crate::error::{Error, Result};
use crate::features::product::sample_product_rff;
use crate::kernels::{product_kernel, ExtendedPoint, KernelSpec};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxConfig {
    /// Inner (distribution) frequencies.
    pub l: usize,
    /// Outer (product) frequencies.
    pub q: usize,
    pub n_pairs: usize,
    pub n_repeats: usize,
    /// Points per bag; the bound's `n1 = n2`.
    pub bag_size: usize,
    pub dim: usize,
    pub eps_l: f64,
    pub eps_q: f64,
    pub seed: u64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig {
            l: 2048,
            q: 2048,
            n_pairs: 20,
            n_repeats: 50,
            bag_size: 10,
            dim: 3,
            eps_l: 0.5,
            eps_q: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatStats {
    pub repeat: usize,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Fraction of pairs whose error reached `eps_l + eps_q` in this repeat.
    pub exceed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxReport {
    pub config: ApproxConfig,
    pub sigma_p: f64,
    pub repeats: Vec<RepeatStats>,
    /// Bound value for the configuration.
    pub bound: f64,
    /// Exceedance frequency pooled over every (pair, repeat).
    pub empirical_exceedance: f64,
    pub median_max_error: f64,
    pub median_mean_error: f64,
    /// Every `|kbar - zbar.zbar'|`, repeat-major.
    #[serde(skip)]
    pub abs_errors: Vec<f64>,
}

impl ApproxReport {
    /// Fraction of (pair, repeat) errors at or above `threshold`.
    pub fn exceedance_at(&self, threshold: f64) -> f64 {
        let hits = self.abs_errors.iter().filter(|&&e| e >= threshold).count();
        hits as f64 / self.abs_errors.len() as f64
    }
}

/// The two terms of the bound, `(outer, inner)`.
pub fn bound_terms(l: usize, q: usize, eps_l: f64, eps_q: f64, sigma_p: f64, n1: usize, n2: usize) -> (f64, f64) {
    let eps = 0.5 * sigma_p * sigma_p * (1.0 + eps_l).ln();
    let outer = 2.0 * (-(q as f64) * eps_q * eps_q / 2.0).exp();
    let inner = 6.0 * n1 as f64 * n2 as f64 * (-(l as f64) * eps * eps / 2.0).exp();
    (outer, inner)
}

/// Probability bound on `|kbar - zbar.zbar'| >= eps_l + eps_q` for one pair.
pub fn concentration_bound(l: usize, q: usize, eps_l: f64, eps_q: f64, sigma_p: f64, n1: usize, n2: usize) -> f64 {
    let (a, b) = bound_terms(l, q, eps_l, eps_q, sigma_p, n1, n2);
    a + b
}

fn unit_cube_bag(rng: &mut seed::Rng, id: String, n: usize, d: usize) -> Bag {
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    Bag::new(id, Array2::from_shape_vec((n, d), data).expect("shape"), None).expect("finite")
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A fixed set of (bag, point) pairs from the unit cube, drawn from the
/// `pairs` child stream of `seed`.
pub fn unit_cube_pairs(seed: u64, n_pairs: usize, bag_size: usize, dim: usize) -> Vec<[(Bag, Vec<f64>); 2]> {
    (0..n_pairs)
        .map(|p| {
            let mut rng = seed::rng(seed::child_seed(seed, "pairs", p as u64));
            let mut side = |s: usize| {
                let bag = unit_cube_bag(&mut rng, format!("p{p}{s}"), bag_size, dim);
                let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                (bag, x)
            };
            [side(0), side(1)]
        })
        .collect()
}

/// Draw `n_repeats` fresh product maps and measure their error against the
/// exact product kernel on a fixed set of unit-cube pairs.
pub fn approx_error_stats(spec: &KernelSpec, cfg: &ApproxConfig) -> Result<ApproxReport> {
    if cfg.l == 0 || cfg.q == 0 || cfg.n_pairs == 0 || cfg.n_repeats == 0 || cfg.bag_size == 0 || cfg.dim == 0 {
        return Err(Error::invalid("approximation check counts must all be >= 1"));
    }
    let (_, _, sigma_p) = spec
        .gaussian_bandwidths()
        .ok_or_else(|| Error::incompatible("RFF path requires all-Gaussian kernels"))?;

    let pairs = unit_cube_pairs(cfg.seed, cfg.n_pairs, cfg.bag_size, cfg.dim);
    let exact: Vec<f64> = pairs
        .iter()
        .map(|[(ba, xa), (bb, xb)]| product_kernel(ExtendedPoint::new(ba, xa), ExtendedPoint::new(bb, xb), spec))
        .collect::<Result<_>>()?;

    let threshold = cfg.eps_l + cfg.eps_q;
    let mut repeats = Vec::with_capacity(cfg.n_repeats);
    let mut exceed_total = 0usize;
    let mut abs_errors = Vec::with_capacity(cfg.n_repeats * cfg.n_pairs);
    for r in 0..cfg.n_repeats {
        let map = sample_product_rff(
            seed::child_seed(cfg.seed, "maps", r as u64),
            spec,
            cfg.l,
            cfg.q,
            cfg.dim,
        )?;
        let mut max_err = 0.0_f64;
        let mut sum_err = 0.0;
        let mut exceed = 0usize;
        for ([(ba, xa), (bb, xb)], k) in pairs.iter().zip(&exact) {
            let za = map.product_feature(ba, xa)?;
            let zb = map.product_feature(bb, xb)?;
            let approx: f64 = za.iter().zip(&zb).map(|(a, b)| a * b).sum();
            let err = (k - approx).abs();
            abs_errors.push(err);
            max_err = max_err.max(err);
            sum_err += err;
            if err >= threshold {
                exceed += 1;
            }
        }
        exceed_total += exceed;
        repeats.push(RepeatStats {
            repeat: r,
            max_abs_error: max_err,
            mean_abs_error: sum_err / cfg.n_pairs as f64,
            exceed_fraction: exceed as f64 / cfg.n_pairs as f64,
        });
    }

    let bound = concentration_bound(cfg.l, cfg.q, cfg.eps_l, cfg.eps_q, sigma_p, cfg.bag_size, cfg.bag_size);
    Ok(ApproxReport {
        config: cfg.clone(),
        sigma_p,
        median_max_error: median(repeats.iter().map(|s| s.max_abs_error).collect()),
        median_mean_error: median(repeats.iter().map(|s| s.mean_abs_error).collect()),
        empirical_exceedance: exceed_total as f64 / (cfg.n_pairs * cfg.n_repeats) as f64,
        repeats,
        bound,
        abs_errors,
    })
}
