use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::kernels::KernelSpec;
use crate::solver::{DualOptions, LinearOptions, LinearSolution, Loss};

/// What was trained, as recorded in the model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactDual,
    RffLinear,
    NystromLinear,
    PoolingExact,
    PoolingLinear,
}

impl Method {
    pub fn is_pooling(self) -> bool {
        matches!(self, Method::PoolingExact | Method::PoolingLinear)
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactDual | Method::PoolingExact)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactDual => "exact_dual",
            Method::RffLinear => "rff_linear",
            Method::NystromLinear => "nystrom_linear",
            Method::PoolingExact => "pooling_exact",
            Method::PoolingLinear => "pooling_linear",
        }
    }
}

/// Marginal transfer (bag-aware) or the pooling baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Mtl,
    Pooling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    Exact,
    Rff,
    Nystrom,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Mtl => "mtl",
            Approach::Pooling => "pooling",
        }
    }
}

impl Trainer {
    pub fn as_str(self) -> &'static str {
        match self {
            Trainer::Exact => "exact",
            Trainer::Rff => "rff",
            Trainer::Nystrom => "nystrom",
        }
    }
}

pub fn method_for(approach: Approach, trainer: Trainer) -> Method {
    match (approach, trainer) {
        (Approach::Mtl, Trainer::Exact) => Method::ExactDual,
        (Approach::Mtl, Trainer::Rff) => Method::RffLinear,
        (Approach::Mtl, Trainer::Nystrom) => Method::NystromLinear,
        (Approach::Pooling, Trainer::Exact) => Method::PoolingExact,
        (Approach::Pooling, _) => Method::PoolingLinear,
    }
}

/// Example weighting of the pooling baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingWeights {
    /// `1/(N n_i)`, as in the bag-aware estimator.
    PerTask,
    /// `1/M`: one SVM on the concatenated data.
    Concatenate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub loss: Loss,
    pub approach: Approach,
    pub trainer: Trainer,
    /// Inner (embedding) random features `L`.
    pub rff_inner: usize,
    /// Outer random features `Q`; also the feature count of the pooled RFF map.
    pub rff_outer: usize,
    /// Nystrom landmarks (clamped to the number of training points).
    pub nystrom_m: usize,
    pub eps_eig: f64,
    pub pooling_weights: PoolingWeights,
    pub seed: u64,
    pub dual: DualOptions,
    pub linear: LinearOptions,
    /// Feature matrices with more entries than this are held in `f32`.
    pub compact_above: usize,
}

impl TrainConfig {
    pub fn new(spec: KernelSpec, lambda: f64) -> Self {
        TrainConfig {
            spec,
            lambda,
            loss: Loss::Hinge,
            approach: Approach::Mtl,
            trainer: Trainer::Rff,
            rff_inner: 2048,
            rff_outer: 2048,
            nystrom_m: 512,
            eps_eig: crate::features::DEFAULT_EPS_EIG,
            pooling_weights: PoolingWeights::PerTask,
            seed: 0,
            dual: DualOptions::default(),
            linear: LinearOptions::default(),
            compact_above: 1 << 26,
        }
    }

    pub fn method(&self) -> Method {
        method_for(self.approach, self.trainer)
    }
}

/// Support set of an exact model: the extended points with positive dual
/// coefficient and the bags they come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPayload {
    #[serde(with = "crate::learner::persist::bags")]
    pub(crate) bags: Vec<Bag>,
    /// `<Psi(P), Psi(P)>` for every stored bag.
    #[serde(with = "crate::learner::persist::vec_f64")]
    pub(crate) bag_self_inner: Vec<f64>,
    /// Bag of every support vector.
    pub(crate) support_bag: Vec<usize>,
    /// Index of every support vector in the training data.
    pub(crate) support_index: Vec<usize>,
    #[serde(with = "crate::learner::persist::array2")]
    pub(crate) support_points: Array2<f64>,
    #[serde(with = "crate::learner::persist::vec_f64")]
    pub(crate) alphas: Vec<f64>,
    #[serde(with = "crate::learner::persist::vec_f64")]
    pub(crate) labels: Vec<f64>,
    pub(crate) objective: f64,
    pub(crate) gap: f64,
    pub(crate) kkt_violation: f64,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
    pub(crate) jitter: f64,
}

impl DualPayload {
    pub fn num_support(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn support_index(&self) -> &[usize] {
        &self.support_index
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `alpha_i y_i` for every support vector.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alphas.iter().zip(&self.labels).map(|(a, y)| a * y).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPayload {
    pub(crate) map: FeatureMap,
    pub(crate) solution: LinearSolution,
}

impl LinearPayload {
    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn solution(&self) -> &LinearSolution {
        &self.solution
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Dual(DualPayload),
    Linear(LinearPayload),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub features: u64,
    pub solver: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub input_dim: usize,
    pub train_task_ids: Vec<String>,
    pub train_bag_sizes: Vec<usize>,
    pub pooling_weights: Option<PoolingWeights>,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set so
    /// that model files stay reproducible.
    pub created_unix: Option<u64>,
    pub crate_version: String,
}

/// A trained predictor. Immutable; shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub(crate) method: Method,
    pub(crate) spec: KernelSpec,
    pub(crate) lambda: f64,
    pub(crate) loss: Loss,
    pub(crate) payload: Payload,
    pub(crate) seeds: Seeds,
    pub(crate) meta: ModelMeta,
}

impl Model {
    pub fn method(&self) -> Method {
        self.method
    }

    /// The kernel spec as configured (before the pooling substitution).
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// The spec actually used by the predictor.
    pub fn effective_spec(&self) -> KernelSpec {
        if self.method.is_pooling() {
            self.spec.pooled()
        } else {
            self.spec
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn seeds(&self) -> Seeds {
        self.seeds
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn input_dim(&self) -> usize {
        self.meta.input_dim
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.loss.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        let d = self.meta.input_dim;
        if d == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        match (&self.payload, self.method) {
            (Payload::Dual(p), Method::ExactDual | Method::PoolingExact) => {
                if !self.loss.is_classification() {
                    return Err(Error::invalid("exact models use the hinge loss"));
                }
                let s = p.alphas.len();
                if p.labels.len() != s
                    || p.support_bag.len() != s
                    || p.support_index.len() != s
                    || p.support_points.nrows() != s
                    || p.support_points.ncols() != d
                    || p.bag_self_inner.len() != p.bags.len()
                    || p.support_bag.iter().any(|&b| b >= p.bags.len())
                    || p.bags.iter().any(|b| b.dim() != d)
                {
                    return Err(Error::invalid("inconsistent support set"));
                }
                if p.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
                    return Err(Error::invalid("support labels must be +1 or -1"));
                }
            }
            (Payload::Linear(p), m) => {
                let kind_ok = matches!(
                    (&p.map, m),
                    (FeatureMap::ProductRff { .. }, Method::RffLinear)
                        | (FeatureMap::Nystrom { .. }, Method::NystromLinear)
                        | (FeatureMap::PointRff { .. }, Method::PoolingLinear)
                        | (FeatureMap::Nystrom { .. }, Method::PoolingLinear)
                );
                if !kind_ok {
                    return Err(Error::invalid(format!(
                        "feature map does not match method {}",
                        m.as_str()
                    )));
                }
                if let FeatureMap::Nystrom { map } = &p.map {
                    map.validate()?;
                }
                if p.map.input_dim() != d || p.solution.weights.len() != p.map.output_dim() {
                    return Err(Error::invalid("weight vector does not match the feature map"));
                }
            }
            (_, m) => {
                return Err(Error::invalid(format!(
                    "payload kind does not match method {}",
                    m.as_str()
                )))
            }
        }
        Ok(())
    }
}
