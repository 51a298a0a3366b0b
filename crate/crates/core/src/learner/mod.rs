//! The marginal transfer estimator: training on extended data
//! `(empirical marginal, point)`, prediction on unlabelled test bags and
//! risk evaluation.

pub mod model;
pub mod persist;
pub mod predict;
pub mod train;

pub use model::{
    method_for, Approach, DualPayload, LinearPayload, Method, Model, ModelMeta, Payload, PoolingWeights, Seeds,
    TrainConfig, Trainer,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use predict::{evaluate, predict_bag, predict_points, sign_label, EvalReport};
pub use train::train;
