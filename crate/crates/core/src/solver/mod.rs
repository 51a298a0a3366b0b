//! Training back-ends: an exact dual QP over a Gram matrix and a dual
//! coordinate-descent solver over explicit features.

pub mod dual;
pub mod linear;
pub mod loss;

pub use dual::{dual_objective, predict_dual, solve_dual_svm, DualOptions, DualSolution};
pub use linear::{
    box_costs, solve_linear, solve_linear_with_costs, CompactRows, DenseRows, FeatureRows, LinearOptions,
    LinearSolution, Weighting,
};
pub use loss::{loss_eval, Loss};
