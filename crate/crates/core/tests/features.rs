use approx::assert_abs_diff_eq;
use margokit::features::{
    approx_error_stats, bound_terms, fit_nystrom, sample_product_rff, sample_rff, concentration_bound, ApproxConfig,
};
use margokit::kernels::{base_kernel, embedding_inner, gram_matrix, product_kernel, ExtendedPoint};
use margokit::seed::rng;
use margokit::{Bag, BaseKernel, KernelSpec};
use rand::Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_bag(id: &str, r: &mut impl Rng, n: usize, d: usize) -> Bag {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.gen_range(0.0..1.0)).collect())
        .collect();
    Bag::from_rows(id, &rows).unwrap()
}

#[test]
fn frequencies_have_inverse_bandwidth_variance() {
    let map = sample_rff(4, 100_000, 2.0, 1).unwrap();
    let w = map.frequencies();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert_abs_diff_eq!(var, 0.25, epsilon = 0.01);
}

#[test]
fn same_seed_same_map() {
    let a = sample_rff(9, 64, 1.0, 3).unwrap();
    let b = sample_rff(9, 64, 1.0, 3).unwrap();
    assert_eq!(a.frequencies(), b.frequencies());
}

#[test]
fn point_features_approximate_gaussian() {
    let map = sample_rff(1, 4096, 1.0, 3).unwrap();
    let g = BaseKernel::gaussian(1.0).unwrap();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let (zx, zy) = (map.transform(&x).unwrap(), map.transform(&y).unwrap());
        assert_abs_diff_eq!(dot(&zx, &zx), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot(&zx, &zy), dot(&zy, &zx), epsilon = 1e-12);
        worst = worst.max((dot(&zx, &zy) - base_kernel(&g, &x, &y).unwrap()).abs());
    }
    assert!(worst <= 0.08, "max error {worst}");
}

#[test]
fn bag_embedding_approximates_embedding_inner() {
    let a = Bag::from_rows("a", &[vec![0.0]]).unwrap();
    let b = Bag::from_rows("b", &[vec![0.0], vec![1.0]]).unwrap();
    let map = sample_rff(3, 8192, 1.0, 1).unwrap();
    let (za, zb) = (map.embed_bag(&a).unwrap(), map.embed_bag(&b).unwrap());
    assert_abs_diff_eq!(dot(&za, &za), 1.0, epsilon = 1e-12);
    let exact = embedding_inner(&a, &b, &BaseKernel::gaussian(1.0).unwrap()).unwrap();
    assert_abs_diff_eq!(dot(&za, &zb), exact, epsilon = 0.02);
}

#[test]
fn product_features_approximate_product_kernel() {
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 1.0).unwrap();
    let a = Bag::from_rows("a", &[vec![0.0]]).unwrap();
    let b = Bag::from_rows("b", &[vec![0.0], vec![1.0]]).unwrap();
    let map = sample_product_rff(5, &spec, 8192, 8192, 1).unwrap();
    let za = map.product_feature(&a, &[0.0]).unwrap();
    let zb = map.product_feature(&b, &[1.0]).unwrap();
    assert_abs_diff_eq!(dot(&zb, &zb), 1.0, epsilon = 1e-12);
    let exact = product_kernel(ExtendedPoint::new(&a, &[0.0]), ExtendedPoint::new(&b, &[1.0]), &spec).unwrap();
    assert_abs_diff_eq!(dot(&za, &zb), exact, epsilon = 0.03);
}

#[test]
fn huge_distribution_bandwidth_leaves_the_point_kernel() {
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 1e6).unwrap();
    let a = Bag::from_rows("a", &[vec![0.0], vec![0.4]]).unwrap();
    let b = Bag::from_rows("b", &[vec![2.0], vec![-1.0]]).unwrap();
    let map = sample_product_rff(6, &spec, 2048, 8192, 1).unwrap();
    let za = map.product_feature(&a, &[0.0]).unwrap();
    let zb = map.product_feature(&b, &[0.5]).unwrap();
    assert_abs_diff_eq!(dot(&za, &zb), (-0.125f64).exp(), epsilon = 0.03);
}

#[test]
fn transform_points_matches_single_point_features() {
    let spec = KernelSpec::all_gaussian(0.7, 0.5, 1.0).unwrap();
    let mut r = rng(8);
    let bag = random_bag("t", &mut r, 5, 2);
    let map = sample_product_rff(1, &spec, 64, 128, 2).unwrap();
    let all = map.transform_points(&bag, bag.points()).unwrap();
    for (i, x) in bag.rows().enumerate() {
        let one = map.product_feature(&bag, x).unwrap();
        for (a, b) in all.row(i).iter().zip(&one) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn nystrom_with_every_point_is_exact() {
    let spec = KernelSpec::all_gaussian(0.6, 0.8, 0.5).unwrap();
    for seed in 0..5u64 {
        let mut r = rng(seed);
        let bags: Vec<Bag> = (0..3).map(|i| random_bag(&format!("t{i}"), &mut r, 4, 2)).collect();
        let pts: Vec<ExtendedPoint<'_>> = bags.iter().flat_map(ExtendedPoint::of_bag).collect();
        let exact = gram_matrix(&pts, &spec, true).unwrap();
        let map = fit_nystrom(&pts, &spec, pts.len(), seed, 0.0).unwrap();
        assert_eq!(map.output_dim(), pts.len());
        let feats: Vec<Vec<f64>> = pts.iter().map(|p| map.transform(p.bag, p.x).unwrap()).collect();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_abs_diff_eq!(dot(&feats[i], &feats[j]), exact[[i, j]], epsilon = 1e-6);
            }
        }
    }
}

#[test]
fn bound_formula() {
    let (outer, _) = bound_terms(1, 200, 0.5, 0.2, 1.0, 10, 10);
    assert_abs_diff_eq!(outer, 2.0 * (-4.0f64).exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(outer, 0.036631, epsilon = 1e-6);

    let (l, q, el, eq, sp, n) = (2048usize, 2048usize, 0.5, 0.1, 1.0, 10usize);
    let eps = sp * sp / 2.0 * (1.0f64 + el).ln();
    let want = 2.0 * (-(q as f64) * eq * eq / 2.0).exp() + 6.0 * (n * n) as f64 * (-(l as f64) * eps * eps / 2.0).exp();
    assert_abs_diff_eq!(concentration_bound(l, q, el, eq, sp, n, n), want, epsilon = 1e-12);
}

#[test]
fn approximation_error_shrinks_with_more_features() {
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 1.0).unwrap();
    let base = ApproxConfig {
        l: 512,
        q: 512,
        n_pairs: 10,
        n_repeats: 20,
        ..ApproxConfig::default()
    };
    let small = approx_error_stats(&spec, &base).unwrap();
    let big = approx_error_stats(
        &spec,
        &ApproxConfig {
            l: 1024,
            q: 1024,
            ..base.clone()
        },
    )
    .unwrap();
    assert!(big.median_mean_error <= small.median_mean_error);
    assert!(big.median_max_error <= small.median_max_error);
}
