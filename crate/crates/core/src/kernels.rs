//! Exact kernel evaluations on the extended space `(distribution, point)`.
//!
//! The extended kernel has product form `kbar((P1,x1),(P2,x2)) = kP(P1,P2) kX(x1,x2)`.
//! `kP` is built from kernel mean embeddings under a second base kernel
//! `k'X`; for empirical distributions every embedding inner product reduces
//! to the average `(1/(n n')) sum_i sum_j k'X(x_i, x'_j)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, check_finite, Error, Result};

/// Kernel on the feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKernel {
    /// `exp(-|x-y|^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `<x, y>`
    Linear,
}

impl BaseKernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = BaseKernel::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseKernel::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(Error::invalid(format!(
                "gaussian bandwidth must be positive, got {sigma}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            BaseKernel::Gaussian { sigma } => Some(sigma),
            BaseKernel::Linear => None,
        }
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            BaseKernel::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            BaseKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Checked base kernel evaluation.
pub fn base_kernel(kernel: &BaseKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    check_dim(x.len(), y.len())?;
    check_finite(x, "kernel argument")?;
    check_finite(y, "kernel argument")?;
    Ok(kernel.eval(x, y))
}

/// Kernel on distributions, applied to mean embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistKernel {
    /// `exp(-|Psi(P) - Psi(P')|^2 / (2 sigma^2))`
    GaussianLike { sigma: f64 },
    /// `exp(kappa <Psi(P), Psi(P')>)`
    ExponentialInner { kappa: f64 },
    /// `<Psi(P), Psi(P')>`
    LinearInner,
    /// Identically one. This is the pooling baseline.
    Constant,
}

impl DistKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistKernel::GaussianLike { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(Error::invalid(format!(
                "distribution bandwidth must be positive, got {sigma}"
            ))),
            DistKernel::ExponentialInner { kappa } if !(kappa.is_finite() && kappa > 0.0) => Err(Error::invalid(
                format!("exponential scale must be positive, got {kappa}"),
            )),
            _ => Ok(()),
        }
    }

    /// Evaluate from the three embedding inner products `g_aa`, `g_bb`, `g_ab`.
    #[inline]
    pub fn from_inner(&self, g_aa: f64, g_bb: f64, g_ab: f64, normalize: bool) -> f64 {
        match *self {
            DistKernel::Constant => 1.0,
            DistKernel::GaussianLike { sigma } => {
                let d2 = (g_aa + g_bb - 2.0 * g_ab).max(0.0);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            DistKernel::LinearInner => {
                if !normalize {
                    g_ab
                } else if g_ab == g_aa && g_ab == g_bb {
                    1.0
                } else {
                    g_ab / (g_aa * g_bb).sqrt()
                }
            }
            DistKernel::ExponentialInner { kappa } => {
                if !normalize {
                    (kappa * g_ab).exp()
                } else {
                    (kappa * (g_ab - 0.5 * (g_aa + g_bb))).exp()
                }
            }
        }
    }
}

/// Declarative description of the three kernels. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kx: BaseKernel,
    kxp: BaseKernel,
    kp: DistKernel,
    #[serde(default)]
    normalize_kp: bool,
}

impl KernelSpec {
    pub fn new(kx: BaseKernel, kxp: BaseKernel, kp: DistKernel) -> Result<Self> {
        let spec = KernelSpec {
            kx,
            kxp,
            kp,
            normalize_kp: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian `kX`, Gaussian `k'X` and Gaussian-like `kP`.
    pub fn all_gaussian(sigma_x: f64, sigma_xp: f64, sigma_p: f64) -> Result<Self> {
        KernelSpec::new(
            BaseKernel::Gaussian { sigma: sigma_x },
            BaseKernel::Gaussian { sigma: sigma_xp },
            DistKernel::GaussianLike { sigma: sigma_p },
        )
    }

    /// Normalized form `k(a,b) / sqrt(k(a,a) k(b,b))` of the distribution
    /// kernel. Only the inner-product kinds accept it; the Gaussian-like
    /// kernel already has unit diagonal.
    pub fn with_normalized_kp(self) -> Result<Self> {
        let spec = KernelSpec {
            normalize_kp: true,
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same spec with `kP` replaced by the constant kernel.
    pub fn pooled(&self) -> Self {
        KernelSpec {
            kp: DistKernel::Constant,
            normalize_kp: false,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kx.validate()?;
        self.kxp.validate()?;
        self.kp.validate()?;
        if self.normalize_kp && !matches!(self.kp, DistKernel::LinearInner | DistKernel::ExponentialInner { .. }) {
            return Err(Error::invalid(
                "normalization applies to linear_inner and exponential_inner only",
            ));
        }
        Ok(())
    }

    pub fn kx(&self) -> BaseKernel {
        self.kx
    }

    pub fn kxp(&self) -> BaseKernel {
        self.kxp
    }

    pub fn kp(&self) -> DistKernel {
        self.kp
    }

    pub fn normalize_kp(&self) -> bool {
        self.normalize_kp
    }

    pub fn is_pooling(&self) -> bool {
        self.kp == DistKernel::Constant
    }

    /// `(sigma_X, sigma'_X, sigma_P)` when every kernel is Gaussian.
    pub fn gaussian_bandwidths(&self) -> Option<(f64, f64, f64)> {
        match (self.kx, self.kxp, self.kp) {
            (
                BaseKernel::Gaussian { sigma: sx },
                BaseKernel::Gaussian { sigma: sxp },
                DistKernel::GaussianLike { sigma: sp },
            ) => Some((sx, sxp, sp)),
            _ => None,
        }
    }

    #[inline]
    pub(crate) fn dist_from_inner(&self, g_aa: f64, g_bb: f64, g_ab: f64) -> f64 {
        self.kp.from_inner(g_aa, g_bb, g_ab, self.normalize_kp)
    }
}

/// Order a bag pair canonically so that the double sum is evaluated in the
/// same order whichever way round the arguments come.
fn canonical<'a>(a: &'a Bag, b: &'a Bag) -> (&'a Bag, &'a Bag) {
    let ka = (a.len(), a.content_hash());
    let kb = (b.len(), b.content_hash());
    if ka <= kb {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn embedding_inner_unchecked(a: &Bag, b: &Bag, kxp: &BaseKernel) -> f64 {
    let (a, b) = canonical(a, b);
    let mut total = 0.0;
    for xa in a.rows() {
        let mut row = 0.0;
        for xb in b.rows() {
            row += kxp.eval(xa, xb);
        }
        total += row;
    }
    total / (a.len() as f64 * b.len() as f64)
}

/// Inner product of the mean embeddings of two bags under `kxp`.
pub fn embedding_inner(a: &Bag, b: &Bag, kxp: &BaseKernel) -> Result<f64> {
    kxp.validate()?;
    check_dim(a.dim(), b.dim())?;
    Ok(embedding_inner_unchecked(a, b, kxp))
}

/// Kernel between the empirical distributions of two bags.
pub fn distribution_kernel(a: &Bag, b: &Bag, spec: &KernelSpec) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if spec.is_pooling() {
        return Ok(1.0);
    }
    let kxp = spec.kxp();
    let g_ab = embedding_inner_unchecked(a, b, &kxp);
    let needs_norms = spec.normalize_kp() || matches!(spec.kp(), DistKernel::GaussianLike { .. });
    let (g_aa, g_bb) = if needs_norms {
        (
            embedding_inner_unchecked(a, a, &kxp),
            embedding_inner_unchecked(b, b, &kxp),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(spec.dist_from_inner(g_aa, g_bb, g_ab))
}

/// A point of the extended input space: a bag (standing for its empirical
/// distribution) together with a feature vector.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedPoint<'a> {
    pub bag: &'a Bag,
    pub x: &'a [f64],
}

impl<'a> ExtendedPoint<'a> {
    pub fn new(bag: &'a Bag, x: &'a [f64]) -> Self {
        ExtendedPoint { bag, x }
    }

    /// All extended points `(bag, x_j)` of a bag.
    pub fn of_bag(bag: &'a Bag) -> impl Iterator<Item = ExtendedPoint<'a>> + 'a {
        bag.rows().map(move |x| ExtendedPoint { bag, x })
    }
}

/// Exact product kernel `kP(P_a, P_b) kX(x_a, x_b)`.
pub fn product_kernel(a: ExtendedPoint<'_>, b: ExtendedPoint<'_>, spec: &KernelSpec) -> Result<f64> {
    check_dim(a.bag.dim(), a.x.len())?;
    check_dim(b.bag.dim(), b.x.len())?;
    check_finite(a.x, "extended point")?;
    check_finite(b.x, "extended point")?;
    let kp = distribution_kernel(a.bag, b.bag, spec)?;
    Ok(kp * spec.kx().eval(a.x, b.x))
}

type BagKey = (String, u64);

fn bag_key(bag: &Bag) -> BagKey {
    (bag.task_id().to_owned(), bag.content_hash())
}

/// Distinct bags among a point list, with self inner products `<Psi, Psi>`
/// computed once per bag.
pub(crate) struct BagTable<'a> {
    pub bags: Vec<&'a Bag>,
    pub self_inner: Vec<f64>,
    /// Index into `bags` for every input point.
    pub index: Vec<usize>,
}

impl<'a> BagTable<'a> {
    pub fn build(points: &[ExtendedPoint<'a>], spec: &KernelSpec) -> Self {
        let mut seen: HashMap<BagKey, usize> = HashMap::new();
        let mut bags = Vec::new();
        let mut index = Vec::with_capacity(points.len());
        for p in points {
            let key = bag_key(p.bag);
            let id = *seen.entry(key).or_insert_with(|| {
                bags.push(p.bag);
                bags.len() - 1
            });
            index.push(id);
        }
        let self_inner = self_inners(&bags, spec);
        BagTable {
            bags,
            self_inner,
            index,
        }
    }
}

pub(crate) fn self_inners(bags: &[&Bag], spec: &KernelSpec) -> Vec<f64> {
    if spec.is_pooling() {
        return vec![0.0; bags.len()];
    }
    let kxp = spec.kxp();
    bags.par_iter().map(|b| embedding_inner_unchecked(b, b, &kxp)).collect()
}

/// `kP` between every bag of `rows` and every bag of `cols`.
pub(crate) fn dist_kernel_matrix(
    rows: &[&Bag],
    row_self: &[f64],
    cols: &[&Bag],
    col_self: &[f64],
    spec: &KernelSpec,
) -> Array2<f64> {
    if spec.is_pooling() {
        return Array2::ones((rows.len(), cols.len()));
    }
    let kxp = spec.kxp();
    let flat: Vec<f64> = (0..rows.len() * cols.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / cols.len(), k % cols.len());
            let g = embedding_inner_unchecked(rows[i], cols[j], &kxp);
            spec.dist_from_inner(row_self[i], col_self[j], g)
        })
        .collect();
    Array2::from_shape_vec((rows.len(), cols.len()), flat).expect("shape")
}

fn validate_points(points: &[ExtendedPoint<'_>]) -> Result<usize> {
    let d = points
        .first()
        .map(|p| p.x.len())
        .ok_or_else(|| Error::invalid("gram matrix needs at least one point"))?;
    for p in points {
        check_dim(d, p.x.len())?;
        check_dim(d, p.bag.dim())?;
        check_finite(p.x, "extended point")?;
    }
    Ok(d)
}

/// Gram matrix of the product kernel over a list of extended points.
///
/// With `cache_embeddings` the distribution kernel is evaluated once per
/// distinct bag pair (bags are identified by task id and content); without
/// it every entry recomputes its embedding sums, which is only useful as a
/// reference.
pub fn gram_matrix(points: &[ExtendedPoint<'_>], spec: &KernelSpec, cache_embeddings: bool) -> Result<Array2<f64>> {
    spec.validate()?;
    validate_points(points)?;
    let m = points.len();
    let kx = spec.kx();

    let upper: Vec<Vec<f64>> = if cache_embeddings {
        let table = BagTable::build(points, spec);
        let kp = dist_kernel_matrix(&table.bags, &table.self_inner, &table.bags, &table.self_inner, spec);
        (0..m)
            .into_par_iter()
            .map(|i| {
                let bi = table.index[i];
                (i..m)
                    .map(|j| kp[[bi, table.index[j]]] * kx.eval(points[i].x, points[j].x))
                    .collect()
            })
            .collect()
    } else {
        (0..m)
            .into_par_iter()
            .map(|i| {
                (i..m)
                    .map(|j| {
                        let kp = distribution_kernel(points[i].bag, points[j].bag, spec).expect("validated");
                        kp * kx.eval(points[i].x, points[j].x)
                    })
                    .collect()
            })
            .collect()
    };

    let mut gram = Array2::zeros((m, m));
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            gram[[i, i + off]] = v;
            gram[[i + off, i]] = v;
        }
    }
    Ok(gram)
}

/// Kernel rows between `rows` and `cols` (e.g. test points against support
/// vectors or Nystrom landmarks).
pub fn cross_kernel(rows: &[ExtendedPoint<'_>], cols: &[ExtendedPoint<'_>], spec: &KernelSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let d = validate_points(rows)?;
    let dc = validate_points(cols)?;
    check_dim(d, dc)?;
    let rt = BagTable::build(rows, spec);
    let ct = BagTable::build(cols, spec);
    let kp = dist_kernel_matrix(&rt.bags, &rt.self_inner, &ct.bags, &ct.self_inner, spec);
    let kx = spec.kx();
    let n = cols.len();
    let flat: Vec<f64> = (0..rows.len() * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            kp[[rt.index[i], ct.index[j]]] * kx.eval(rows[i].x, cols[j].x)
        })
        .collect();
    Ok(Array2::from_shape_vec((rows.len(), n), flat).expect("shape"))
}

pub(crate) fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Array2<f64>) -> f64 {
    let eig = SymmetricEigen::new(to_nalgebra(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// PSD check with tolerance relative to the mean diagonal:
/// `min eigenvalue >= -rel_tol * trace / M`.
pub fn is_psd(m: &Array2<f64>, rel_tol: f64) -> bool {
    let n = m.nrows().max(1) as f64;
    let trace: f64 = m.diag().sum();
    min_eigenvalue(m) >= -rel_tol * (trace / n).abs().max(f64::MIN_POSITIVE)
}
