use nalgebra::SymmetricEigen;
use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernels::{dist_kernel_matrix, gram_matrix, self_inners, to_nalgebra, ExtendedPoint, KernelSpec};
use crate::seed;

/// Default relative eigenvalue cutoff.
pub const DEFAULT_EPS_EIG: f64 = 1e-10;

/// Nystrom feature map `z(x) = D^{-1/2} V^T [k(x, l_1), ..., k(x, l_m)]`
/// built from `m` landmark extended points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NystromMap {
    spec: KernelSpec,
    seed: u64,
    eps_eig: f64,
    /// Distinct bags the landmarks come from (labels stripped).
    #[serde(with = "crate::learner::persist::bags")]
    landmark_bags: Vec<Bag>,
    landmark_bag_index: Vec<usize>,
    /// `m x d`
    #[serde(with = "crate::learner::persist::array2")]
    landmarks: Array2<f64>,
    /// Retained eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// `r x m`
    #[serde(with = "crate::learner::persist::array2")]
    whitening: Array2<f64>,
}

/// Fit a Nystrom map from `m` landmarks sampled uniformly without replacement.
pub fn fit_nystrom(
    points: &[ExtendedPoint<'_>],
    spec: &KernelSpec,
    m: usize,
    seed: u64,
    eps_eig: f64,
) -> Result<NystromMap> {
    spec.validate()?;
    if m == 0 || m > points.len() {
        return Err(Error::invalid(format!(
            "landmark count must be in 1..={}, got {m}",
            points.len()
        )));
    }
    if !(eps_eig >= 0.0 && eps_eig.is_finite()) {
        return Err(Error::invalid("eigenvalue threshold must be >= 0"));
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, points.len(), m).into_vec();
    picked.sort_unstable();
    let chosen: Vec<ExtendedPoint<'_>> = picked.iter().map(|&i| points[i]).collect();
    let d = chosen[0].x.len();

    let k_hat = gram_matrix(&chosen, spec, true)?;
    let eig = SymmetricEigen::new(to_nalgebra(&k_hat));
    let max_ev = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max_ev > 0.0) {
        return Err(Error::Numerical("landmark Gram has no positive eigenvalue".into()));
    }
    let mut keep: Vec<usize> = (0..m).filter(|&k| eig.eigenvalues[k] > eps_eig * max_ev).collect();
    if keep.is_empty() {
        return Err(Error::Numerical("all eigenvalues below threshold".into()));
    }
    // Descending eigenvalue, ties by index.
    keep.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite")
            .then(a.cmp(&b))
    });

    let mut whitening = Array2::zeros((keep.len(), m));
    let mut eigenvalues = Vec::with_capacity(keep.len());
    for (r, &k) in keep.iter().enumerate() {
        let ev = eig.eigenvalues[k];
        let col = eig.eigenvectors.column(k);
        // Fix the sign: largest-magnitude component positive.
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / ev.sqrt();
        for j in 0..m {
            whitening[[r, j]] = col[j] * scale;
        }
        eigenvalues.push(ev);
    }

    let mut landmark_bags: Vec<Bag> = Vec::new();
    let mut landmark_bag_index = Vec::with_capacity(m);
    let mut landmarks = Array2::zeros((m, d));
    for (row, p) in chosen.iter().enumerate() {
        let pos = landmark_bags
            .iter()
            .position(|b| b.task_id() == p.bag.task_id() && b.points() == p.bag.points());
        let id = match pos {
            Some(id) => id,
            None => {
                landmark_bags.push(p.bag.without_labels());
                landmark_bags.len() - 1
            }
        };
        landmark_bag_index.push(id);
        landmarks.row_mut(row).assign(&ndarray::ArrayView1::from(p.x));
    }

    Ok(NystromMap {
        spec: *spec,
        seed,
        eps_eig,
        landmark_bags,
        landmark_bag_index,
        landmarks,
        eigenvalues,
        whitening,
    })
}

impl NystromMap {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_landmarks(&self) -> usize {
        self.landmarks.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.whitening.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.landmarks.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let m = self.landmarks.nrows();
        if self.whitening.ncols() != m
            || self.landmark_bag_index.len() != m
            || self.eigenvalues.len() != self.whitening.nrows()
            || self.landmark_bag_index.iter().any(|&i| i >= self.landmark_bags.len())
        {
            return Err(Error::invalid("inconsistent Nystrom map"));
        }
        Ok(())
    }

    /// Distribution kernel between `bag` and the bag of every landmark.
    pub(crate) fn landmark_kp_row(&self, bag: &Bag) -> Vec<f64> {
        let lb: Vec<&Bag> = self.landmark_bags.iter().collect();
        let lb_self = self_inners(&lb, &self.spec);
        let bag_self = self_inners(&[bag], &self.spec);
        let kp = dist_kernel_matrix(&[bag], &bag_self, &lb, &lb_self, &self.spec);
        self.landmark_bag_index.iter().map(|&b| kp[[0, b]]).collect()
    }

    pub(crate) fn features_into(&self, kp_row: &[f64], x: &[f64], kvec: &mut [f64], out: &mut [f64]) {
        let kx = self.spec.kx();
        let d = self.input_dim();
        let m = self.num_landmarks();
        let landmarks = self.landmarks.as_slice().expect("standard layout");
        let whitening = self.whitening.as_slice().expect("standard layout");
        for (j, kv) in kvec.iter_mut().enumerate() {
            *kv = kp_row[j] * kx.eval(x, &landmarks[j * d..(j + 1) * d]);
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = whitening[i * m..(i + 1) * m]
                .iter()
                .zip(kvec.iter())
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Features of `points`, all paired with the distribution of `bag`.
    pub fn transform_points(&self, bag: &Bag, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), points.ncols())?;
        check_dim(self.input_dim(), bag.dim())?;
        let points = points.as_standard_layout();
        let flat = points.as_slice().expect("standard layout");
        check_finite(flat, "feature input")?;
        let kp_row = self.landmark_kp_row(bag);
        let r = self.output_dim();
        let mut out = Array2::zeros((points.nrows(), r));
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(r)
            .zip(flat.par_chunks(self.input_dim()))
            .for_each_init(
                || vec![0.0; self.num_landmarks()],
                |kvec, (row, x)| self.features_into(&kp_row, x, kvec, row),
            );
        Ok(out)
    }

    /// Feature vector for a single extended point.
    pub fn transform(&self, bag: &Bag, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.transform_points(bag, view)?.into_raw_vec_and_offset().0)
    }
}
