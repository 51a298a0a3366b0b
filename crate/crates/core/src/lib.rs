//! Marginal transfer learning for domain generalization.
//!
//! A predictor is learned on the extended input space of pairs
//! `(empirical marginal of a task, feature vector)` from several labelled
//! training tasks and applied to a new, unlabelled task using that task's
//! own sample as its marginal. Kernels on distributions are built from
//! kernel mean embeddings; training uses either an exact dual solver or
//! explicit random-feature / Nystrom maps with a linear solver.

pub mod bag;
pub mod data;
pub mod error;
pub mod experiment;
pub mod features;
pub mod kernels;
pub mod learner;
pub mod modelsel;
pub mod seed;
pub mod solver;

pub use bag::Bag;
pub use error::{Error, ModelFileError, ParseError, Result};
pub use kernels::{BaseKernel, DistKernel, KernelSpec};
pub use learner::{evaluate, load_model, predict_bag, save_model, train, EvalReport, Model, TrainConfig};
