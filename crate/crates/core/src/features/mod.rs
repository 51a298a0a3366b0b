//! Approximate feature maps: plain RFF for a Gaussian base kernel, the
//! two-stage RFF map for the product kernel, and the Nystrom map.

pub mod approx;
pub mod nystrom;
pub mod product;
pub mod rff;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use approx::{approx_error_stats, bound_terms, concentration_bound, ApproxConfig, ApproxReport, RepeatStats};
pub use nystrom::{fit_nystrom, NystromMap, DEFAULT_EPS_EIG};
pub use product::{sample_product_rff, BagProjection, ProductRffMap};
pub use rff::{sample_rff, RffMap};

use crate::bag::Bag;
use crate::error::{check_dim, check_finite, Result};

/// A realized feature transform on the extended space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// RFF on the point only; the bag is ignored (pooling).
    PointRff {
        map: RffMap,
    },
    /// Two-stage RFF on `(bag, point)`.
    ProductRff {
        map: ProductRffMap,
    },
    Nystrom {
        map: NystromMap,
    },
}

/// Bag-level quantities shared by every point of the bag.
#[derive(Debug, Clone)]
pub enum PreparedBag {
    Point,
    Product(BagProjection),
    /// Distribution kernel against each landmark.
    Nystrom(Vec<f64>),
}

impl FeatureMap {
    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::PointRff { map } => map.output_dim(),
            FeatureMap::ProductRff { map } => map.output_dim(),
            FeatureMap::Nystrom { map } => map.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::PointRff { map } => map.input_dim(),
            FeatureMap::ProductRff { map } => map.input_dim(),
            FeatureMap::Nystrom { map } => map.input_dim(),
        }
    }

    fn scratch_len(&self) -> usize {
        match self {
            FeatureMap::PointRff { map } => map.num_frequencies(),
            FeatureMap::ProductRff { map } => map.num_outer(),
            FeatureMap::Nystrom { map } => map.num_landmarks(),
        }
    }

    pub fn prepare(&self, bag: &Bag) -> Result<PreparedBag> {
        check_dim(self.input_dim(), bag.dim())?;
        Ok(match self {
            FeatureMap::PointRff { .. } => PreparedBag::Point,
            FeatureMap::ProductRff { map } => PreparedBag::Product(map.project_bag(bag)?),
            FeatureMap::Nystrom { map } => PreparedBag::Nystrom(map.landmark_kp_row(bag)),
        })
    }

    /// Unchecked per-point transform; `x` must have the input dimension
    /// and `prep` must come from this map.
    pub(crate) fn features_into(&self, prep: &PreparedBag, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        match (self, prep) {
            (FeatureMap::PointRff { map }, _) => map.transform_into(x, scratch, out),
            (FeatureMap::ProductRff { map }, PreparedBag::Product(p)) => map.feature_into(p, x, scratch, out),
            (FeatureMap::Nystrom { map }, PreparedBag::Nystrom(kp)) => map.features_into(kp, x, scratch, out),
            _ => unreachable!("prepared bag from a different map"),
        }
    }

    /// Features of every row of `points`, each paired with the empirical
    /// distribution of `bag`.
    pub fn transform_points(&self, bag: &Bag, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), points.ncols())?;
        let prep = self.prepare(bag)?;
        let points = points.as_standard_layout();
        let flat = points.as_slice().expect("standard layout");
        check_finite(flat, "feature input")?;
        let dim = self.output_dim();
        let mut out = Array2::zeros((points.nrows(), dim));
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(dim)
            .zip(flat.par_chunks(self.input_dim()))
            .for_each_init(
                || vec![0.0; self.scratch_len()],
                |scratch, (row, x)| self.features_into(&prep, x, scratch, row),
            );
        Ok(out)
    }

    pub fn transform_bag(&self, bag: &Bag) -> Result<Array2<f64>> {
        self.transform_points(bag, bag.points())
    }

    /// `w . z((bag, x))` for every row `x` of `points`, without storing the
    /// feature matrix.
    pub fn decision_values(&self, bag: &Bag, points: ArrayView2<'_, f64>, weights: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), points.ncols())?;
        check_dim(self.output_dim(), weights.len())?;
        let prep = self.prepare(bag)?;
        let points = points.as_standard_layout();
        let flat = points.as_slice().expect("standard layout");
        check_finite(flat, "feature input")?;
        let dim = self.output_dim();
        Ok(flat
            .par_chunks(self.input_dim())
            .map_init(
                || (vec![0.0; self.scratch_len()], vec![0.0; dim]),
                |(scratch, z), x| {
                    self.features_into(&prep, x, scratch, z);
                    z.iter().zip(weights).map(|(a, b)| a * b).sum()
                },
            )
            .collect())
    }
}
