use std::ffi::{CStr, CString};
use std::mem::MaybeUninit;
use std::path::Path;
use std::process::Command;
use std::ptr;

use margokit_ffi::*;

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = mk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config() -> MkTrainConfig {
    let mut cfg = MaybeUninit::uninit();
    assert_eq!(unsafe { mk_train_config_default(cfg.as_mut_ptr()) }, MkStatus::Ok);
    let mut cfg = unsafe { cfg.assume_init() };
    cfg.rff_inner = 64;
    cfg.rff_outer = 128;
    cfg.lambda = 1e-3;
    cfg
}

fn synth(tasks: usize, points: usize, seed: u64) -> *mut MkCollection {
    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { mk_collection_synth(tasks, points, seed, &mut c) },
        MkStatus::Ok
    );
    assert!(!c.is_null());
    c
}

#[test]
fn train_predict_save_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(4, 20, 1);
    unsafe {
        assert_eq!(mk_collection_len(data), 4);
        assert_eq!(mk_collection_dim(data), 2);

        let csv = cpath(&dir.path().join("d.csv"));
        assert_eq!(mk_collection_write(data, csv.as_ptr()), MkStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(mk_collection_read(csv.as_ptr(), &mut again), MkStatus::Ok);
        assert_eq!(mk_collection_len(again), 4);

        for trainer in [MkTrainer::Exact, MkTrainer::Rff, MkTrainer::Nystrom] {
            let cfg = MkTrainConfig {
                trainer,
                nystrom_m: 40,
                ..config()
            };
            let mut model = ptr::null_mut();
            assert_eq!(mk_train(again, &cfg, &mut model), MkStatus::Ok);
            assert_eq!(mk_model_input_dim(model), 2);

            let (mut risk, mut err) = (0.0, 0.0);
            assert_eq!(mk_model_evaluate(model, data, &mut risk, &mut err), MkStatus::Ok);
            assert!((0.0..=0.5).contains(&err), "{trainer:?} training error {err}");
            assert!(risk.is_finite());

            let pts = [0.1, 0.2, -0.5, 0.3, 1.0, -1.0];
            let mut a = [0.0; 3];
            assert_eq!(
                mk_model_predict(model, pts.as_ptr(), 3, 2, a.as_mut_ptr()),
                MkStatus::Ok
            );

            let file = cpath(&dir.path().join("m.json"));
            assert_eq!(mk_model_save(model, file.as_ptr()), MkStatus::Ok);
            let mut back = ptr::null_mut();
            assert_eq!(mk_model_load(file.as_ptr(), &mut back), MkStatus::Ok);
            let mut b = [0.0; 3];
            assert_eq!(mk_model_predict(back, pts.as_ptr(), 3, 2, b.as_mut_ptr()), MkStatus::Ok);
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));

            mk_model_free(back);
            mk_model_free(model);
        }
        mk_collection_free(again);
        mk_collection_free(data);
    }
}

#[test]
fn null_pointers_are_reported() {
    let cfg = config();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(mk_train(ptr::null(), &cfg, &mut model), MkStatus::NullPointer);
        assert!(last_error().contains("collection"));
        assert!(model.is_null());
        assert_eq!(
            mk_collection_read(ptr::null(), &mut ptr::null_mut()),
            MkStatus::NullPointer
        );
        assert_eq!(mk_collection_synth(2, 2, 0, ptr::null_mut()), MkStatus::NullPointer);
        assert_eq!(mk_train_config_default(ptr::null_mut()), MkStatus::NullPointer);
        assert_eq!(
            mk_model_predict(ptr::null(), ptr::null(), 0, 0, ptr::null_mut()),
            MkStatus::NullPointer
        );
        assert_eq!(mk_collection_len(ptr::null()), 0);
        assert_eq!(mk_model_input_dim(ptr::null()), 0);
        mk_collection_free(ptr::null_mut());
        mk_model_free(ptr::null_mut());
    }
}

#[test]
fn library_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(3, 6, 2);
    unsafe {
        let mut model = ptr::null_mut();
        let bad = MkTrainConfig {
            lambda: -1.0,
            ..config()
        };
        assert_eq!(mk_train(data, &bad, &mut model), MkStatus::InvalidArgument);

        let eps_exact = MkTrainConfig {
            trainer: MkTrainer::Exact,
            loss: MkLoss::EpsInsensitive,
            epsilon: 0.1,
            ..config()
        };
        assert_eq!(mk_train(data, &eps_exact, &mut model), MkStatus::Incompatible);

        assert_eq!(mk_train(data, &config(), &mut model), MkStatus::Ok);
        let pts = [0.0; 6];
        let mut out = [0.0; 2];
        assert_eq!(
            mk_model_predict(model, pts.as_ptr(), 2, 3, out.as_mut_ptr()),
            MkStatus::DimensionMismatch
        );
        assert!(!last_error().is_empty());

        let missing = cpath(&dir.path().join("none.csv"));
        assert_eq!(mk_collection_read(missing.as_ptr(), &mut ptr::null_mut()), MkStatus::Io);
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "task_id,y,f1,f2\nt,1,2\n").unwrap();
        assert_eq!(
            mk_collection_read(cpath(&ragged).as_ptr(), &mut ptr::null_mut()),
            MkStatus::Parse
        );
        let junk = dir.path().join("junk.json");
        std::fs::write(&junk, "{\"format_version\":").unwrap();
        assert_eq!(
            mk_model_load(cpath(&junk).as_ptr(), &mut ptr::null_mut()),
            MkStatus::ModelFile
        );

        let unlabeled = dir.path().join("u.csv");
        std::fs::write(&unlabeled, "task_id,f1,f2\na,1,2\n").unwrap();
        let mut u = ptr::null_mut();
        assert_eq!(mk_collection_read(cpath(&unlabeled).as_ptr(), &mut u), MkStatus::Ok);
        assert_eq!(mk_train(u, &config(), &mut ptr::null_mut()), MkStatus::MissingLabels);

        mk_collection_free(u);
        mk_model_free(model);
        mk_collection_free(data);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/margokit.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "mk_last_error",
        "mk_train_config_default",
        "mk_collection_read",
        "mk_collection_synth",
        "mk_collection_write",
        "mk_collection_len",
        "mk_collection_dim",
        "mk_collection_free",
        "mk_train",
        "mk_model_load",
        "mk_model_save",
        "mk_model_input_dim",
        "mk_model_predict",
        "mk_model_evaluate",
        "mk_model_free",
        "typedef struct MkModel MkModel",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"margokit.h\"\nint main(void) { MkTrainConfig c; return mk_train_config_default(&c) != MK_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(e) => eprintln!("no C compiler, skipping syntax check: {e}"),
    }
}
