use margokit::data::{read_bags_from, write_bags_to, BagCollection, Provenance};
use margokit::kernels::{distribution_kernel, product_kernel, ExtendedPoint};
use margokit::solver::{box_costs, Weighting};
use margokit::{Bag, KernelSpec};
use proptest::prelude::*;

fn bag_strategy(id: String, d: usize) -> impl Strategy<Value = Bag> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), 1..6)
        .prop_map(move |rows| Bag::from_rows(id.clone(), &rows).unwrap())
}

fn spec_strategy() -> impl Strategy<Value = KernelSpec> {
    (0.1f64..3.0, 0.1f64..3.0, 0.05f64..3.0).prop_map(|(a, b, c)| KernelSpec::all_gaussian(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_kernel_is_symmetric_and_bounded(
        a in bag_strategy("a".into(), 2),
        b in bag_strategy("b".into(), 2),
        i in 0usize..6,
        j in 0usize..6,
        spec in spec_strategy(),
    ) {
        let pa = ExtendedPoint::new(&a, a.point(i % a.len()));
        let pb = ExtendedPoint::new(&b, b.point(j % b.len()));
        let ab = product_kernel(pa, pb, &spec).unwrap();
        let ba = product_kernel(pb, pa, &spec).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((product_kernel(pa, pa, &spec).unwrap() - 1.0).abs() < 1e-12);
        let kp = distribution_kernel(&a, &b, &spec).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&kp));
    }

    #[test]
    fn bag_csv_round_trips(
        sizes in prop::collection::vec(1usize..5, 1..5),
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 40),
        labelled in any::<bool>(),
    ) {
        let mut k = 0;
        let bags: Vec<Bag> = sizes
            .iter()
            .enumerate()
            .map(|(t, &n)| {
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        k += 2;
                        vec![values[(k - 2) % 40], values[(k - 1) % 40]]
                    })
                    .collect();
                let bag = Bag::from_rows(format!("task{t}"), &rows).unwrap();
                if labelled {
                    bag.with_labels((0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()).unwrap()
                } else {
                    bag
                }
            })
            .collect();
        let coll = BagCollection::new(bags, Provenance { source: "prop".into(), seed: None }).unwrap();
        let mut out = Vec::new();
        write_bags_to(&coll, &mut out).unwrap();
        let back = read_bags_from(out.as_slice(), "prop").unwrap();
        prop_assert_eq!(back.bags(), coll.bags());
    }

    #[test]
    fn per_task_costs_sum_to_the_inverse_regularizer(
        sizes in prop::collection::vec(1usize..30, 1..8),
        lambda in 1e-6f64..10.0,
    ) {
        let total: usize = sizes.iter().sum();
        let costs = box_costs(Weighting::PerTask(&sizes), total, lambda).unwrap();
        let sum: f64 = costs.iter().sum();
        prop_assert!((sum * 2.0 * lambda - 1.0).abs() < 1e-9);
        let uniform = box_costs(Weighting::Uniform, total, lambda).unwrap();
        prop_assert!(uniform.iter().all(|&c| (c - uniform[0]).abs() == 0.0));
    }
}
