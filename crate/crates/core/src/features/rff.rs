use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::seed;

/// Random Fourier features for the Gaussian kernel of bandwidth `sigma`.
///
/// `z(x) = (1/sqrt(L)) [cos(w_1.x), sin(w_1.x), ..., cos(w_L.x), sin(w_L.x)]`
/// with every entry of `w_l` drawn from `Normal(0, 1/sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    sigma: f64,
    seed: u64,
    /// `L x d`, row `l` is `w_l`.
    #[serde(with = "crate::learner::persist::array2")]
    frequencies: Array2<f64>,
}

pub fn sample_rff(seed: u64, l: usize, sigma: f64, d: usize) -> Result<RffMap> {
    if l == 0 || d == 0 {
        return Err(Error::invalid("random feature map needs L >= 1 and d >= 1"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {sigma}")));
    }
    let frequencies = gaussian_matrix(seed, l, d, 1.0 / sigma);
    Ok(RffMap {
        sigma,
        seed,
        frequencies,
    })
}

pub(crate) fn gaussian_matrix(seed: u64, rows: usize, cols: usize, sd: f64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    let normal = Normal::new(0.0, sd).expect("finite positive sd");
    let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape")
}

/// Write the interleaved cos/sin block for the given phases, scaled by `scale`.
#[inline]
pub(crate) fn cos_sin_into(phases: &[f64], scale: f64, out: &mut [f64]) {
    for (p, pair) in phases.iter().zip(out.chunks_exact_mut(2)) {
        let (s, c) = p.sin_cos();
        pair[0] = scale * c;
        pair[1] = scale * s;
    }
}

impl RffMap {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of frequencies `L`.
    pub fn num_frequencies(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_frequencies()
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.frequencies
    }

    pub(crate) fn phases_into(&self, x: &[f64], phases: &mut [f64]) {
        for (p, w) in phases.iter_mut().zip(self.frequencies.rows()) {
            *p = w.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub(crate) fn transform_into(&self, x: &[f64], phases: &mut [f64], out: &mut [f64]) {
        self.phases_into(x, phases);
        let scale = 1.0 / (self.num_frequencies() as f64).sqrt();
        cos_sin_into(phases, scale, out);
    }

    /// Feature vector `z(x)` of length `2L`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        check_finite(x, "feature input")?;
        let mut phases = vec![0.0; self.num_frequencies()];
        let mut out = vec![0.0; self.output_dim()];
        self.transform_into(x, &mut phases, &mut out);
        Ok(out)
    }

    /// Mean of `z(x)` over the bag's rows: the random-feature estimate of
    /// the bag's kernel mean embedding.
    pub fn embed_bag(&self, bag: &Bag) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), bag.dim())?;
        let mut phases = vec![0.0; self.num_frequencies()];
        let mut z = vec![0.0; self.output_dim()];
        let mut acc = vec![0.0; self.output_dim()];
        for x in bag.rows() {
            self.transform_into(x, &mut phases, &mut z);
            for (a, v) in acc.iter_mut().zip(&z) {
                *a += v;
            }
        }
        let inv_n = 1.0 / bag.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv_n);
        Ok(acc)
    }
}
