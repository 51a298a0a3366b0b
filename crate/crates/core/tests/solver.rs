mod common;

use approx::assert_abs_diff_eq;
use common::{brute_force_dual, gaussian_gram};
use margokit::seed::rng;
use margokit::solver::{
    box_costs, predict_dual, solve_dual_svm, solve_linear, solve_linear_with_costs, DenseRows, DualOptions,
    LinearOptions, Loss, Weighting,
};
use ndarray::{array, Array2};
use rand::Rng;

#[test]
fn matches_brute_force_qp_on_small_instances() {
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let m = 2 + (seed as usize % 5);
        let x: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = (0..m).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = (0..m).map(|_| r.gen_range(0.05..3.0)).collect();
        let gram = gaussian_gram(&x, r.gen_range(0.3..2.0));

        let opts = DualOptions {
            tol: 1e-9,
            ..DualOptions::default()
        };
        let sol = solve_dual_svm(&gram, &y, &c, &opts).unwrap();
        let (_, oracle) = brute_force_dual(&gram, &y, &c);
        assert!(sol.converged, "seed {seed}");
        assert!(sol.kkt_violation < opts.tol, "seed {seed}");
        assert_abs_diff_eq!(sol.objective, oracle, epsilon = 1e-4);
        assert!(sol.alphas.iter().zip(&c).all(|(&a, &ci)| (0.0..=ci).contains(&a)));
    }
}

#[test]
fn kkt_margins_hold_at_exit() {
    let mut r = rng(77);
    let m = 60;
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| if p[0] + 0.3 * p[1] > 0.0 { 1.0 } else { -1.0 })
        .collect();
    let gram = gaussian_gram(&x, 0.5);
    let c = vec![2.0; m];
    let opts = DualOptions {
        tol: 1e-7,
        ..DualOptions::default()
    };
    let sol = solve_dual_svm(&gram, &y, &c, &opts).unwrap();
    assert!(sol.converged);
    let tol = 1e-6;
    for i in 0..m {
        let row: Vec<f64> = gram.row(i).to_vec();
        let margin = y[i] * predict_dual(&sol, &row).unwrap();
        if sol.alphas[i] < c[i] - tol {
            assert!(margin >= 1.0 - tol, "example {i}: margin {margin}");
        }
        if sol.alphas[i] > tol {
            assert!(margin <= 1.0 + tol, "example {i}: margin {margin}");
        }
    }
}

#[test]
fn worked_example_prediction() {
    let gram = array![[0.0, 0.0], [0.0, 4.0]];
    let sol = solve_dual_svm(&gram, &[1.0, -1.0], &[1.0, 1.0], &DualOptions::default()).unwrap();
    assert_abs_diff_eq!(sol.alphas[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(sol.alphas[1], 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(sol.objective, 1.125, epsilon = 1e-12);
    assert_abs_diff_eq!(predict_dual(&sol, &[0.0, 2.0]).unwrap(), -0.5, epsilon = 1e-12);
}

#[test]
fn linear_path_matches_worked_example() {
    // z(x) = x on x = 0, 2; uniform weights 1/2 and lambda = 1/4 give c_i = 1.
    let rows = DenseRows::new(&array![[0.0], [2.0]]);
    let opts = LinearOptions {
        tol: 1e-10,
        max_epochs: 100_000,
        seed: 0,
    };
    let sol = solve_linear(&rows, &[1.0, -1.0], Loss::Hinge, Weighting::Uniform, 0.25, &opts).unwrap();
    assert_abs_diff_eq!(sol.weights[0], -0.5, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.predict(&[1.0]).unwrap(), -0.5, epsilon = 1e-6);
}

#[test]
fn linear_and_kernel_paths_agree() {
    let mut r = rng(3);
    let (m, d) = (80, 6);
    let z = Array2::from_shape_fn((m, d), |_| r.gen_range(-1.0..1.0));
    let truth: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..m)
        .map(|i| {
            let s: f64 = (0..d).map(|j| z[[i, j]] * truth[j]).sum::<f64>() + 0.3 * r.gen_range(-1.0..1.0);
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let sizes = [30, 50];
    let lambda = 0.01;
    let costs = box_costs(Weighting::PerTask(&sizes), m, lambda).unwrap();

    let gram = z.dot(&z.t());
    let dual = solve_dual_svm(
        &gram,
        &y,
        &costs,
        &DualOptions {
            tol: 1e-9,
            ..DualOptions::default()
        },
    )
    .unwrap();
    let opts = LinearOptions {
        tol: 1e-9,
        max_epochs: 100_000,
        seed: 1,
    };
    let lin = solve_linear_with_costs(&DenseRows::new(&z), &y, Loss::Hinge, &costs, lambda, &opts).unwrap();
    assert!(lin.converged);

    let coef = dual.coefficients();
    let w: Vec<f64> = (0..d).map(|j| (0..m).map(|i| coef[i] * z[[i, j]]).sum()).collect();
    for (a, b) in w.iter().zip(&lin.weights) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-3);
    }
    // The linear objective is the regularized risk, i.e. 2 lambda times the dual scale.
    assert_abs_diff_eq!(
        lin.objective,
        2.0 * lambda * dual.objective,
        epsilon = 1e-3 * lin.objective
    );
}

#[test]
fn compact_and_dense_rows_reach_the_same_objective() {
    use margokit::solver::CompactRows;
    let mut r = rng(9);
    let z = Array2::from_shape_fn((200, 10), |_| r.gen_range(-1.0..1.0));
    let y: Vec<f64> = (0..200).map(|i| if z[[i, 0]] > 0.1 { 1.0 } else { -1.0 }).collect();
    let opts = LinearOptions {
        tol: 1e-8,
        max_epochs: 50_000,
        seed: 0,
    };
    let dense = solve_linear(&DenseRows::new(&z), &y, Loss::Hinge, Weighting::Uniform, 1e-3, &opts).unwrap();
    let mut compact = CompactRows::with_capacity(200, 10);
    compact.push_rows(&z).unwrap();
    let small = solve_linear(&compact, &y, Loss::Hinge, Weighting::Uniform, 1e-3, &opts).unwrap();
    assert_abs_diff_eq!(dense.objective, small.objective, epsilon = 1e-5);
}

#[test]
fn eps_insensitive_regression_fits_a_line() {
    let mut r = rng(21);
    let m = 300;
    let z = Array2::from_shape_fn((m, 2), |(_, j)| if j == 0 { r.gen_range(-1.0..1.0) } else { 1.0 });
    let y: Vec<f64> = (0..m).map(|i| 2.0 * z[[i, 0]] - 0.5).collect();
    let opts = LinearOptions {
        tol: 1e-9,
        max_epochs: 100_000,
        seed: 0,
    };
    let loss = Loss::eps_insensitive(0.01).unwrap();
    let sol = solve_linear(&DenseRows::new(&z), &y, loss, Weighting::Uniform, 1e-6, &opts).unwrap();
    assert_abs_diff_eq!(sol.weights[0], 2.0, epsilon = 0.05);
    assert_abs_diff_eq!(sol.weights[1], -0.5, epsilon = 0.05);
}
