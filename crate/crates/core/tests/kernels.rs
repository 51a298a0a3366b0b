use approx::assert_abs_diff_eq;
use margokit::kernels::{
    base_kernel, distribution_kernel, embedding_inner, gram_matrix, is_psd, min_eigenvalue, product_kernel,
    ExtendedPoint,
};
use margokit::seed::rng;
use margokit::{Bag, BaseKernel, DistKernel, KernelSpec};
use rand::Rng;

fn bag(rows: &[&[f64]]) -> Bag {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Bag::from_rows("b", &rows).unwrap()
}

fn random_bag(id: &str, r: &mut impl Rng, n: usize, d: usize) -> Bag {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    Bag::from_rows(id, &rows).unwrap()
}

#[test]
fn base_kernel_matches_closed_form() {
    let g = BaseKernel::gaussian(1.0).unwrap();
    assert_abs_diff_eq!(
        base_kernel(&g, &[0.0], &[1.0]).unwrap(),
        (-0.5f64).exp(),
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(base_kernel(&g, &[0.0], &[1.0]).unwrap(), 0.606531, epsilon = 1e-6);
    assert_eq!(
        base_kernel(&BaseKernel::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
        11.0
    );
}

#[test]
fn embedding_inner_is_the_double_average() {
    let g = BaseKernel::gaussian(1.0).unwrap();
    let a = bag(&[&[0.0]]);
    let b = bag(&[&[0.0], &[1.0]]);
    assert_eq!(embedding_inner(&a, &a, &g).unwrap(), 1.0);
    let v = embedding_inner(&a, &b, &g).unwrap();
    assert_abs_diff_eq!(v, (1.0 + (-0.5f64).exp()) / 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(v, 0.803265, epsilon = 1e-6);
}

#[test]
fn linear_embedding_is_squared_mean() {
    let mut r = rng(5);
    let b = random_bag("b", &mut r, 7, 3);
    let mean: Vec<f64> = (0..3).map(|j| b.rows().map(|x| x[j]).sum::<f64>() / 7.0).collect();
    let want: f64 = mean.iter().map(|m| m * m).sum();
    assert_abs_diff_eq!(
        embedding_inner(&b, &b, &BaseKernel::Linear).unwrap(),
        want,
        epsilon = 1e-12
    );
}

#[test]
fn distribution_kernel_worked_values() {
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 1.0).unwrap();
    let a = bag(&[&[0.0]]);
    let b = bag(&[&[0.0], &[1.0]]);
    assert_eq!(distribution_kernel(&b, &b, &spec).unwrap(), 1.0);
    assert_eq!(distribution_kernel(&a, &b, &spec.pooled()).unwrap(), 1.0);

    // |Psi(a) - Psi(b)|^2 = <a,a> + <b,b> - 2<a,b> with <b,b> = (2 + 2 e^-0.5) / 4
    let e = (-0.5f64).exp();
    let (aa, bb, ab) = (1.0, (2.0 + 2.0 * e) / 4.0, (1.0 + e) / 2.0);
    let want = (-(aa + bb - 2.0 * ab) / 2.0).exp();
    let got = distribution_kernel(&a, &b, &spec).unwrap();
    assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    assert_abs_diff_eq!(got, 0.906316, epsilon = 1e-6);
}

#[test]
fn other_distribution_kinds() {
    let g = BaseKernel::gaussian(1.0).unwrap();
    let a = bag(&[&[0.0]]);
    let b = bag(&[&[0.0], &[1.0]]);
    let ab = embedding_inner(&a, &b, &g).unwrap();
    let bb = embedding_inner(&b, &b, &g).unwrap();

    let lin = KernelSpec::new(g, g, DistKernel::LinearInner).unwrap();
    assert_abs_diff_eq!(distribution_kernel(&a, &b, &lin).unwrap(), ab, epsilon = 1e-15);
    let lin_n = lin.with_normalized_kp().unwrap();
    assert_abs_diff_eq!(
        distribution_kernel(&a, &b, &lin_n).unwrap(),
        ab / bb.sqrt(),
        epsilon = 1e-14
    );

    let exp = KernelSpec::new(g, g, DistKernel::ExponentialInner { kappa: 2.0 }).unwrap();
    assert_abs_diff_eq!(
        distribution_kernel(&a, &b, &exp).unwrap(),
        (2.0 * ab).exp(),
        epsilon = 1e-13
    );
}

#[test]
fn product_kernel_worked_value() {
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 1.0).unwrap();
    let a = bag(&[&[0.0]]);
    let b = bag(&[&[0.0], &[1.0]]);
    let v = product_kernel(ExtendedPoint::new(&a, &[0.0]), ExtendedPoint::new(&b, &[1.0]), &spec).unwrap();
    let e = (-0.5f64).exp();
    let kp = (-(1.0 + (2.0 + 2.0 * e) / 4.0 - (1.0 + e)) / 2.0).exp();
    assert_abs_diff_eq!(v, kp * e, epsilon = 1e-14);
    assert_abs_diff_eq!(v, 0.549708, epsilon = 1e-6);
    let same = product_kernel(ExtendedPoint::new(&b, &[1.0]), ExtendedPoint::new(&b, &[1.0]), &spec).unwrap();
    assert_eq!(same, 1.0);
    let pooled = product_kernel(
        ExtendedPoint::new(&a, &[0.0]),
        ExtendedPoint::new(&b, &[1.0]),
        &spec.pooled(),
    );
    assert_abs_diff_eq!(pooled.unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
}

#[test]
fn gram_of_small_sets() {
    let spec = KernelSpec::all_gaussian(0.7, 1.3, 0.4).unwrap();
    let b = bag(&[&[0.2, 0.1], &[-1.0, 0.5]]);
    let p = ExtendedPoint::new(&b, b.point(1));
    let one = gram_matrix(&[p], &spec, true).unwrap();
    assert_eq!(one.dim(), (1, 1));
    let v = product_kernel(p, p, &spec).unwrap();
    assert_eq!(one[[0, 0]], v);
    let two = gram_matrix(&[p, p], &spec, true).unwrap();
    assert!(two.iter().all(|&x| x == v));
}

#[test]
fn gram_matches_pairwise_product_kernel() {
    let spec = KernelSpec::all_gaussian(0.5, 0.8, 0.3).unwrap();
    let mut r = rng(11);
    let bags: Vec<Bag> = (0..4).map(|i| random_bag(&format!("t{i}"), &mut r, 3 + i, 2)).collect();
    let pts: Vec<ExtendedPoint<'_>> = bags.iter().flat_map(ExtendedPoint::of_bag).collect();
    let g = gram_matrix(&pts, &spec, true).unwrap();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let want = product_kernel(pts[i], pts[j], &spec).unwrap();
            assert_abs_diff_eq!(g[[i, j]], want, epsilon = 1e-12);
        }
    }
}

#[test]
fn gram_is_psd_on_seeded_sets() {
    let specs = [
        KernelSpec::all_gaussian(0.5, 0.5, 1.0).unwrap(),
        KernelSpec::all_gaussian(2.0, 0.3, 0.1).unwrap(),
        KernelSpec::new(
            BaseKernel::gaussian(1.0).unwrap(),
            BaseKernel::gaussian(1.0).unwrap(),
            DistKernel::ExponentialInner { kappa: 1.0 },
        )
        .unwrap(),
    ];
    for seed in 0..20u64 {
        let mut r = rng(seed);
        // 50 extended points over 5 bags of 10
        let bags: Vec<Bag> = (0..5).map(|i| random_bag(&format!("t{i}"), &mut r, 10, 3)).collect();
        let pts: Vec<ExtendedPoint<'_>> = bags.iter().flat_map(ExtendedPoint::of_bag).collect();
        for spec in &specs {
            let g = gram_matrix(&pts, spec, true).unwrap();
            assert!(min_eigenvalue(&g) >= -1e-8, "seed {seed}");
            assert!(is_psd(&g, 1e-10));
        }
    }
}

#[test]
fn bag_identity_is_by_content() {
    // Two bags with the same id but different points must not share a cache slot.
    let spec = KernelSpec::all_gaussian(1.0, 1.0, 0.5).unwrap();
    let a = Bag::from_rows("same", &[vec![0.0], vec![0.1]]).unwrap();
    let b = Bag::from_rows("same", &[vec![3.0], vec![2.0]]).unwrap();
    let pts = [ExtendedPoint::new(&a, &[0.0]), ExtendedPoint::new(&b, &[0.0])];
    let cached = gram_matrix(&pts, &spec, true).unwrap();
    let plain = gram_matrix(&pts, &spec, false).unwrap();
    assert_abs_diff_eq!(cached[[0, 1]], plain[[0, 1]], epsilon = 1e-15);
    assert!(cached[[0, 1]] < 0.5);
}
