use std::f64::consts::FRAC_PI_4;

use approx::assert_abs_diff_eq;
use margokit::data::{
    ellipse_label, gen_collection, gen_ellipse_task, gen_regression_collection, read_bags, read_bags_from,
    split_collection, task_params, write_bags, write_bags_to, EllipseTaskParams,
};
use margokit::learner::{
    load_model, model_from_json, model_to_json, predict_points, save_model, train, TrainConfig, Trainer,
};
use margokit::{Error, KernelSpec, ModelFileError, ParseError};

#[test]
fn ellipse_generator_properties() {
    let coll = gen_collection(6, 2000, 42).unwrap();
    for (i, bag) in coll.bags().iter().enumerate() {
        let p = task_params(42, i as u64, 2000, 1.0, 0.5);
        assert!((FRAC_PI_4..=3.0 * FRAC_PI_4).contains(&p.alpha));
        for (x, &y) in bag.rows().zip(bag.labels().unwrap()) {
            assert_eq!(ellipse_label([x[0], x[1]], p.alpha), y);
        }
    }
    let big = gen_ellipse_task("big", &EllipseTaskParams::new(1.3, 100_000, 5)).unwrap();
    for j in 0..2 {
        let m = big.rows().map(|x| x[j]).sum::<f64>() / 100_000.0;
        assert!(m.abs() < 0.02, "coordinate {j} mean {m}");
    }
    let pos = big.labels().unwrap().iter().filter(|&&y| y > 0.0).count() as f64 / 100_000.0;
    assert_abs_diff_eq!(pos, 0.5, epsilon = 0.03);
}

#[test]
fn generators_are_deterministic() {
    let a = gen_collection(3, 7, 9).unwrap();
    let b = gen_collection(3, 7, 9).unwrap();
    assert_eq!(a.bags(), b.bags());
    let one = gen_collection(1, 7, 9).unwrap();
    let direct = gen_ellipse_task("task0000", &task_params(9, 0, 7, 1.0, 0.5)).unwrap();
    assert_eq!(one.bags()[0], direct);
    assert_eq!(
        gen_regression_collection(2, 5, 1).unwrap().bags(),
        gen_regression_collection(2, 5, 1).unwrap().bags()
    );
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for coll in [
        gen_collection(3, 9, 2).unwrap(),
        gen_regression_collection(2, 4, 5).unwrap(),
    ] {
        let path = dir.path().join("bags.csv");
        write_bags(&coll, &path).unwrap();
        let back = read_bags(&path).unwrap();
        assert_eq!(back.bags(), coll.bags());
    }
}

#[test]
fn csv_without_labels_is_unlabelled() {
    let text = "task_id,f1,f2\na,1,2\nb,3,4\nc,5,6\na,0.5,0.5\n";
    let coll = read_bags_from(text.as_bytes(), "inline").unwrap();
    assert_eq!(coll.len(), 3);
    assert!(!coll.is_labeled());
    assert_eq!(coll.get("a").unwrap().len(), 2);
    let mut out = Vec::new();
    write_bags_to(&coll, &mut out).unwrap();
    assert_eq!(read_bags_from(out.as_slice(), "again").unwrap().bags(), coll.bags());
}

#[test]
fn csv_errors_cite_the_line() {
    let mut text = String::from("task_id,y,f1,f2\n");
    for i in 0..15 {
        text.push_str(&format!("t,1,{i},0\n"));
    }
    text.push_str("t,1,3\n");
    match read_bags_from(text.as_bytes(), "inline") {
        Err(Error::Parse(e @ ParseError::RaggedRow { .. })) => assert_eq!(e.line(), 17),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        read_bags_from("t,1,2\n".as_bytes(), "x"),
        Err(Error::Parse(ParseError::MissingHeader { .. }))
    ));
    assert!(matches!(
        read_bags_from("task_id,y,f1\nt,1,abc\n".as_bytes(), "x"),
        Err(Error::Parse(ParseError::NonNumeric { line: 2, .. }))
    ));
    assert!(matches!(
        read_bags_from("task_id,y,f1\nt,1,inf\n".as_bytes(), "x"),
        Err(Error::Parse(ParseError::NonFinite { line: 2, .. }))
    ));
}

#[test]
fn split_is_disjoint_and_stable() {
    let coll = gen_collection(10, 20, 3).unwrap();
    let (train0, test0) = split_collection(&coll, 0, None, 1).unwrap();
    assert!(test0.is_empty());
    assert_eq!(train0.bags(), coll.bags());

    let (tr, te) = split_collection(&coll, 3, Some(5), 1).unwrap();
    assert_eq!(te.len(), 3);
    assert_eq!(tr.len(), 7);
    for b in te.bags() {
        assert!(tr.get(b.task_id()).is_none());
    }
    assert!(tr.bags().iter().chain(te.bags()).all(|b| b.len() == 5));
    let (tr2, te2) = split_collection(&coll, 3, Some(5), 1).unwrap();
    assert_eq!(tr.bags(), tr2.bags());
    assert_eq!(te.bags(), te2.bags());
}

#[test]
fn models_round_trip_and_predict_identically() {
    let data = gen_collection(4, 12, 7).unwrap();
    let probe = gen_collection(2, 250, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spec = KernelSpec::all_gaussian(0.5, 0.5, 1.0).unwrap();
    for trainer in [Trainer::Exact, Trainer::Rff, Trainer::Nystrom] {
        let cfg = TrainConfig {
            trainer,
            rff_inner: 128,
            rff_outer: 256,
            nystrom_m: 24,
            ..TrainConfig::new(spec, 1e-3)
        };
        let model = train(data.bags(), &cfg).unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        for bag in probe.bags() {
            let a = predict_points(&model, bag).unwrap();
            let b = predict_points(&back, bag).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(model_to_json(&back).unwrap(), model_to_json(&model).unwrap());
    }
}

#[test]
fn damaged_model_files() {
    let data = gen_collection(2, 6, 7).unwrap();
    let model = train(
        data.bags(),
        &TrainConfig {
            rff_inner: 16,
            rff_outer: 16,
            ..TrainConfig::new(KernelSpec::all_gaussian(1.0, 1.0, 1.0).unwrap(), 1e-2)
        },
    )
    .unwrap();
    let text = model_to_json(&model).unwrap();
    assert!(matches!(
        model_from_json(&text[..text.len() / 2]),
        Err(Error::ModelFile(ModelFileError::Corrupt(_)))
    ));
    let future = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
    assert!(matches!(
        model_from_json(&future),
        Err(Error::ModelFile(ModelFileError::Version { found: 2, supported: 1 }))
    ));
    let wrong_method = text.replacen("\"rff_linear\"", "\"nystrom_linear\"", 1);
    assert!(matches!(
        model_from_json(&wrong_method),
        Err(Error::ModelFile(ModelFileError::Schema(_)))
    ));
}
