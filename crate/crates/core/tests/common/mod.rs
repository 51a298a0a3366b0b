use margokit::solver::dual_objective;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

/// Exhaustive active-set search: every coordinate is pinned at 0, pinned at
/// its cost, or free; the free block solves its stationarity system. With a
/// positive definite Gram the optimum is the best feasible candidate.
pub fn brute_force_dual(gram: &Array2<f64>, y: &[f64], c: &[f64]) -> (Vec<f64>, f64) {
    let m = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[[i, j]];
    let mut best = (vec![0.0; m], f64::NEG_INFINITY);
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0u8; m];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let mut alpha: Vec<f64> = (0..m).map(|i| if state[i] == 1 { c[i] } else { 0.0 }).collect();
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        if !free.is_empty() {
            let qf = DMatrix::from_fn(free.len(), free.len(), |a, b| q(free[a], free[b]));
            let rhs = DVector::from_fn(free.len(), |a, _| {
                1.0 - (0..m)
                    .filter(|j| state[*j] != 2)
                    .map(|j| q(free[a], j) * alpha[j])
                    .sum::<f64>()
            });
            let Some(sol) = qf.lu().solve(&rhs) else { continue };
            if sol.iter().zip(&free).any(|(&v, &i)| v < -1e-12 || v > c[i] + 1e-12) {
                continue;
            }
            for (a, &i) in free.iter().enumerate() {
                alpha[i] = sol[a].clamp(0.0, c[i]);
            }
        }
        let obj = dual_objective(gram, y, &alpha);
        if obj > best.1 {
            best = (alpha, obj);
        }
    }
    best
}

pub fn gaussian_gram(x: &[Vec<f64>], sigma: f64) -> Array2<f64> {
    let m = x.len();
    Array2::from_shape_fn((m, m), |(i, j)| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}
