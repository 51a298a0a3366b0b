use ndarray::Array2;

use crate::bag::Bag;
use crate::error::{check_dim, Error, Result};
use crate::features::{fit_nystrom, sample_product_rff, sample_rff, FeatureMap};
use crate::kernels::{gram_matrix, self_inners, BaseKernel, ExtendedPoint};
use crate::learner::model::{
    DualPayload, LinearPayload, Model, ModelMeta, Payload, PoolingWeights, Seeds, TrainConfig, Trainer,
};
use crate::seed::child_seed;
use crate::solver::{
    box_costs, solve_dual_svm, solve_linear, CompactRows, DenseRows, LinearOptions, LinearSolution, Loss, Weighting,
};

fn check_training_bags(bags: &[Bag], loss: &Loss) -> Result<usize> {
    let first = bags
        .first()
        .ok_or_else(|| Error::invalid("training needs at least one bag"))?;
    let d = first.dim();
    for b in bags {
        check_dim(d, b.dim())?;
        let labels = b
            .labels()
            .ok_or_else(|| Error::MissingLabels(format!("training bag `{}` has no labels", b.task_id())))?;
        loss.check_labels(labels)?;
    }
    Ok(d)
}

fn created_unix() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

/// Train a predictor on labelled bags.
pub fn train(bags: &[Bag], cfg: &TrainConfig) -> Result<Model> {
    cfg.spec.validate()?;
    cfg.loss.validate()?;
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    let d = check_training_bags(bags, &cfg.loss)?;
    let method = cfg.method();
    let pooling = method.is_pooling();
    let spec = if pooling { cfg.spec.pooled() } else { cfg.spec };
    let sizes: Vec<usize> = bags.iter().map(Bag::len).collect();
    let weighting = if pooling && cfg.pooling_weights == PoolingWeights::Concatenate {
        Weighting::Uniform
    } else {
        Weighting::PerTask(&sizes)
    };
    let labels: Vec<f64> = bags
        .iter()
        .flat_map(|b| b.labels().expect("checked").iter().copied())
        .collect();
    let m = labels.len();
    let seeds = Seeds {
        master: cfg.seed,
        features: child_seed(cfg.seed, "features", 0),
        solver: child_seed(cfg.seed, "solver", 0),
    };

    let payload = match cfg.trainer {
        Trainer::Exact => {
            if !cfg.loss.is_classification() {
                return Err(Error::incompatible(
                    "the exact trainer solves the hinge-loss dual only; use rff or nystrom for regression",
                ));
            }
            let points: Vec<ExtendedPoint<'_>> = bags.iter().flat_map(ExtendedPoint::of_bag).collect();
            if m > 20_000 {
                log::warn!("exact training on {m} points needs a {m}x{m} Gram matrix");
            }
            let gram = gram_matrix(&points, &spec, true)?;
            let costs = box_costs(weighting, m, cfg.lambda)?;
            let opts = crate::solver::DualOptions {
                seed: seeds.solver,
                ..cfg.dual.clone()
            };
            let sol = solve_dual_svm(&gram, &labels, &costs, &opts)?;
            dual_payload(bags, &points, &sol, &spec, d)
        }
        Trainer::Rff | Trainer::Nystrom => {
            let map = match (cfg.trainer, pooling) {
                (Trainer::Rff, false) => FeatureMap::ProductRff {
                    map: sample_product_rff(seeds.features, &spec, cfg.rff_inner, cfg.rff_outer, d)?,
                },
                (Trainer::Rff, true) => match spec.kx() {
                    BaseKernel::Gaussian { sigma } => FeatureMap::PointRff {
                        map: sample_rff(seeds.features, cfg.rff_outer, sigma, d)?,
                    },
                    BaseKernel::Linear => return Err(Error::incompatible("RFF path requires all-Gaussian kernels")),
                },
                _ => {
                    let points: Vec<ExtendedPoint<'_>> = bags.iter().flat_map(ExtendedPoint::of_bag).collect();
                    let landmarks = cfg.nystrom_m.min(m);
                    if landmarks < cfg.nystrom_m {
                        log::info!("using {landmarks} Nystrom landmarks (all training points)");
                    }
                    FeatureMap::Nystrom {
                        map: fit_nystrom(&points, &spec, landmarks, seeds.features, cfg.eps_eig)?,
                    }
                }
            };
            let opts = LinearOptions {
                seed: seeds.solver,
                ..cfg.linear.clone()
            };
            let solution = fit_linear(&map, bags, &labels, cfg, weighting, &opts)?;
            Payload::Linear(LinearPayload { map, solution })
        }
    };

    let model = Model {
        method,
        spec: cfg.spec,
        lambda: cfg.lambda,
        loss: cfg.loss,
        payload,
        seeds,
        meta: ModelMeta {
            input_dim: d,
            train_task_ids: bags.iter().map(|b| b.task_id().to_owned()).collect(),
            train_bag_sizes: sizes.clone(),
            pooling_weights: pooling.then_some(cfg.pooling_weights),
            created_unix: created_unix(),
            crate_version: env!("CARGO_PKG_VERSION").to_owned(),
        },
    };
    debug_assert!(model.validate().is_ok());
    Ok(model)
}

fn dual_payload(
    bags: &[Bag],
    points: &[ExtendedPoint<'_>],
    sol: &crate::solver::DualSolution,
    spec: &crate::kernels::KernelSpec,
    d: usize,
) -> Payload {
    // Training points grouped by bag; map each point to its bag index.
    let bag_of: Vec<usize> = bags
        .iter()
        .enumerate()
        .flat_map(|(i, b)| std::iter::repeat(i).take(b.len()))
        .collect();
    let support: Vec<usize> = (0..sol.alphas.len()).filter(|&i| sol.alphas[i] > 0.0).collect();
    let mut kept: Vec<usize> = support.iter().map(|&i| bag_of[i]).collect();
    kept.sort_unstable();
    kept.dedup();
    let stored: Vec<Bag> = kept.iter().map(|&i| bags[i].without_labels()).collect();
    let refs: Vec<&Bag> = stored.iter().collect();
    let bag_self_inner = self_inners(&refs, spec);
    let support_bag: Vec<usize> = support
        .iter()
        .map(|&i| kept.binary_search(&bag_of[i]).expect("kept bag"))
        .collect();
    let mut support_points = Array2::zeros((support.len(), d));
    for (r, &i) in support.iter().enumerate() {
        support_points
            .row_mut(r)
            .assign(&ndarray::ArrayView1::from(points[i].x));
    }
    Payload::Dual(DualPayload {
        bags: stored,
        bag_self_inner,
        support_bag,
        support_index: support.clone(),
        support_points,
        alphas: support.iter().map(|&i| sol.alphas[i]).collect(),
        labels: support.iter().map(|&i| sol.labels[i]).collect(),
        objective: sol.objective,
        gap: sol.gap,
        kkt_violation: sol.kkt_violation,
        iterations: sol.iterations,
        converged: sol.converged,
        jitter: sol.jitter,
    })
}

fn fit_linear(
    map: &FeatureMap,
    bags: &[Bag],
    labels: &[f64],
    cfg: &TrainConfig,
    weighting: Weighting<'_>,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    let m = labels.len();
    let dim = map.output_dim();
    if m.saturating_mul(dim) > cfg.compact_above {
        let mut rows = CompactRows::with_capacity(m, dim);
        for b in bags {
            rows.push_rows(&map.transform_bag(b)?)?;
        }
        solve_linear(&rows, labels, cfg.loss, weighting, cfg.lambda, opts)
    } else {
        let mut data = Vec::with_capacity(m * dim);
        for b in bags {
            let z = map.transform_bag(b)?;
            data.extend_from_slice(z.as_slice().expect("standard layout"));
        }
        let rows = DenseRows::from_vec(data, dim)?;
        solve_linear(&rows, labels, cfg.loss, weighting, cfg.lambda, opts)
    }
}
