use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{dist_kernel_matrix, self_inners};
use crate::learner::model::{DualPayload, Model, Payload};

/// Test bag id used when predicting from a bare matrix.
const TEST_BAG: &str = "__test__";

/// Real-valued predictions `f(P_T, x_j)` for every row of `points`, where
/// `P_T` is the empirical distribution of `points` itself.
pub fn predict_bag(model: &Model, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_dim(model.input_dim(), points.ncols())?;
    let bag = Bag::new(TEST_BAG, points.to_owned(), None)?;
    predict_points(model, &bag)
}

/// Predictions for the points of `bag`, using `bag` as the test marginal.
pub fn predict_points(model: &Model, bag: &Bag) -> Result<Vec<f64>> {
    check_dim(model.input_dim(), bag.dim())?;
    match &model.payload {
        Payload::Linear(p) => p.map.decision_values(bag, bag.points(), &p.solution.weights),
        Payload::Dual(p) => Ok(dual_decision(p, model, bag)),
    }
}

fn dual_decision(p: &DualPayload, model: &Model, bag: &Bag) -> Vec<f64> {
    let spec = model.effective_spec();
    let stored: Vec<&Bag> = p.bags.iter().collect();
    let test_self = self_inners(&[bag], &spec);
    let kp = dist_kernel_matrix(&[bag], &test_self, &stored, &p.bag_self_inner, &spec);
    let coef: Vec<f64> = p
        .alphas
        .iter()
        .zip(&p.labels)
        .zip(&p.support_bag)
        .map(|((a, y), &b)| a * y * kp[[0, b]])
        .collect();
    let kx = spec.kx();
    let d = bag.dim();
    let sv = p.support_points.as_slice().expect("standard layout");
    let rows: Vec<&[f64]> = bag.rows().collect();
    rows.par_iter()
        .map(|x| {
            coef.iter()
                .enumerate()
                .map(|(s, c)| c * kx.eval(x, &sv[s * d..(s + 1) * d]))
                .sum()
        })
        .collect()
}

/// `+1` for nonnegative margins, `-1` otherwise.
#[inline]
pub fn sign_label(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Average loss over each bag's points.
    pub per_bag_risk: BTreeMap<String, f64>,
    /// Unweighted mean of `per_bag_risk`.
    pub mean_risk: f64,
    /// Fraction of all test points whose sign disagrees with the label
    /// (classification only).
    pub error_rate: Option<f64>,
    /// Root mean squared error over all test points (regression only).
    pub rmse: Option<f64>,
    pub n_bags: usize,
    pub n_points: usize,
}

pub fn evaluate(model: &Model, bags: &[Bag]) -> Result<EvalReport> {
    if bags.is_empty() {
        return Err(Error::invalid("evaluation needs at least one bag"));
    }
    let loss = model.loss();
    let mut per_bag_risk = BTreeMap::new();
    let mut mistakes = 0usize;
    let mut sq_err = 0.0;
    let mut n_points = 0usize;
    for bag in bags {
        let labels = bag
            .labels()
            .ok_or_else(|| Error::MissingLabels(format!("test bag `{}` has no labels", bag.task_id())))?;
        loss.check_labels(labels)?;
        let preds = predict_points(model, bag)?;
        let risk = preds.iter().zip(labels).map(|(&t, &y)| loss.eval(t, y)).sum::<f64>() / bag.len() as f64;
        if per_bag_risk.insert(bag.task_id().to_owned(), risk).is_some() {
            return Err(Error::invalid(format!("duplicate test task id `{}`", bag.task_id())));
        }
        mistakes += preds.iter().zip(labels).filter(|(&t, &y)| sign_label(t) != y).count();
        sq_err += preds.iter().zip(labels).map(|(t, y)| (t - y) * (t - y)).sum::<f64>();
        n_points += bag.len();
    }
    let mean_risk = per_bag_risk.values().sum::<f64>() / per_bag_risk.len() as f64;
    let classification = loss.is_classification();
    Ok(EvalReport {
        per_bag_risk,
        mean_risk,
        error_rate: classification.then(|| mistakes as f64 / n_points as f64),
        rmse: (!classification).then(|| (sq_err / n_points as f64).sqrt()),
        n_bags: bags.len(),
        n_points,
    })
}
