//! C ABI for margokit.
//!
//! Collections and models are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`MkStatus`]; on
//! failure a message for the calling thread is available from
//! [`mk_last_error`] until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use margokit::data::{gen_collection, read_bags, write_bags, BagCollection};
use margokit::experiment::default_template;
use margokit::learner::{evaluate, load_model, predict_bag, save_model, train, Approach, PoolingWeights, Trainer};
use margokit::solver::Loss;
use margokit::{Error, KernelSpec, Model};
use ndarray::ArrayView2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Incompatible = 3,
    DimensionMismatch = 4,
    MissingLabels = 5,
    Parse = 6,
    ModelFile = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkMethod {
    Mtl = 0,
    Pooling = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkTrainer {
    Exact = 0,
    Rff = 1,
    Nystrom = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkLoss {
    Hinge = 0,
    EpsInsensitive = 1,
}

/// Training options; fill with [`mk_train_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MkTrainConfig {
    pub method: MkMethod,
    pub trainer: MkTrainer,
    pub loss: MkLoss,
    /// Tube half-width for `EpsInsensitive`; ignored for `Hinge`.
    pub epsilon: f64,
    pub lambda: f64,
    pub sigma_x: f64,
    pub sigma_xp: f64,
    pub sigma_p: f64,
    pub rff_inner: usize,
    pub rff_outer: usize,
    pub nystrom_m: usize,
    pub seed: u64,
    /// Nonzero: pooled examples weighted 1/M instead of 1/(N n_i).
    pub concatenate: i32,
}

/// Opaque bag collection.
pub struct MkCollection(BagCollection);

/// Opaque trained model.
pub struct MkModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MkStatus {
    match e {
        Error::InvalidParameter(_) | Error::EmptyBag(_) | Error::NonFinite(_) => MkStatus::InvalidArgument,
        Error::Incompatible(_) => MkStatus::Incompatible,
        Error::DimensionMismatch { .. } => MkStatus::DimensionMismatch,
        Error::MissingLabels(_) => MkStatus::MissingLabels,
        Error::Parse(_) => MkStatus::Parse,
        Error::ModelFile(_) => MkStatus::ModelFile,
        Error::Numerical(_) => MkStatus::Numerical,
        Error::Io(_) => MkStatus::Io,
    }
}

enum Failure {
    Status(MkStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(MkStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MkStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MkStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(MkStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults used by the command-line tool.
///
/// # Safety
/// `out` must point to writable memory for one `MkTrainConfig`.
#[no_mangle]
pub unsafe extern "C" fn mk_train_config_default(out: *mut MkTrainConfig) -> MkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let t = default_template();
        let (sx, sxp, sp) = t.spec.gaussian_bandwidths().expect("gaussian defaults");
        *out = MkTrainConfig {
            method: MkMethod::Mtl,
            trainer: MkTrainer::Rff,
            loss: MkLoss::Hinge,
            epsilon: 0.0,
            lambda: t.lambda,
            sigma_x: sx,
            sigma_xp: sxp,
            sigma_p: sp,
            rff_inner: t.rff_inner,
            rff_outer: t.rff_outer,
            nystrom_m: t.nystrom_m,
            seed: 0,
            concatenate: 0,
        };
        Ok(())
    })
}

/// Read a bag CSV.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_read(path: *const c_char, out: *mut *mut MkCollection) -> MkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let coll = read_bags(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MkCollection(coll)));
        Ok(())
    })
}

/// Generate the synthetic ellipse collection.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_synth(
    tasks: usize,
    points: usize,
    seed: u64,
    out: *mut *mut MkCollection,
) -> MkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = Box::into_raw(Box::new(MkCollection(gen_collection(tasks, points, seed)?)));
        Ok(())
    })
}

/// Write a collection as bag CSV.
///
/// # Safety
/// `coll` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_write(coll: *const MkCollection, path: *const c_char) -> MkStatus {
    guard(|| {
        let coll = coll.as_ref().ok_or_else(|| null("collection"))?;
        write_bags(&coll.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Number of bags, or 0 for a null handle.
///
/// # Safety
/// `coll` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_len(coll: *const MkCollection) -> usize {
    coll.as_ref().map_or(0, |c| c.0.len())
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `coll` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_dim(coll: *const MkCollection) -> usize {
    coll.as_ref().map_or(0, |c| c.0.dim())
}

/// # Safety
/// `coll` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mk_collection_free(coll: *mut MkCollection) {
    if !coll.is_null() {
        drop(Box::from_raw(coll));
    }
}

/// Train on a labelled collection.
///
/// # Safety
/// `coll` and `cfg` must be valid pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_train(
    coll: *const MkCollection,
    cfg: *const MkTrainConfig,
    out: *mut *mut MkModel,
) -> MkStatus {
    guard(|| {
        let coll = coll.as_ref().ok_or_else(|| null("collection"))?;
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mut t = default_template();
        t.spec = KernelSpec::all_gaussian(c.sigma_x, c.sigma_xp, c.sigma_p)?;
        t.lambda = c.lambda;
        t.loss = match c.loss {
            MkLoss::Hinge => Loss::Hinge,
            MkLoss::EpsInsensitive => Loss::eps_insensitive(c.epsilon)?,
        };
        t.approach = match c.method {
            MkMethod::Mtl => Approach::Mtl,
            MkMethod::Pooling => Approach::Pooling,
        };
        t.trainer = match c.trainer {
            MkTrainer::Exact => Trainer::Exact,
            MkTrainer::Rff => Trainer::Rff,
            MkTrainer::Nystrom => Trainer::Nystrom,
        };
        t.rff_inner = c.rff_inner;
        t.rff_outer = c.rff_outer;
        t.nystrom_m = c.nystrom_m;
        t.seed = c.seed;
        if c.concatenate != 0 {
            t.pooling_weights = PoolingWeights::Concatenate;
        }
        let model = train(coll.0.bags(), &t)?;
        *out = Box::into_raw(Box::new(MkModel(model)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_model_load(path: *const c_char, out: *mut *mut MkModel) -> MkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let model = load_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MkModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mk_model_save(model: *const MkModel, path: *const c_char) -> MkStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        save_model(&model.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Input dimension of a model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_model_input_dim(model: *const MkModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Margins for one test bag given as a row-major `n x d` matrix; the bag
/// itself serves as the test marginal. Writes `n` values to `out`.
///
/// # Safety
/// `points` must hold `n * d` doubles and `out` room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_model_predict(
    model: *const MkModel,
    points: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> MkStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if points.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Failure::Status(MkStatus::InvalidArgument, "n * d overflows".into()))?;
        let data = std::slice::from_raw_parts(points, len);
        let view = ArrayView2::from_shape((n, d), data)
            .map_err(|e| Failure::Status(MkStatus::InvalidArgument, e.to_string()))?;
        let preds = predict_bag(&model.0, view)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&preds);
        Ok(())
    })
}

/// Mean per-bag risk and, for classification models, the error rate
/// (`error_rate` is set to NaN for regression).
///
/// # Safety
/// Handles must be live; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_model_evaluate(
    model: *const MkModel,
    coll: *const MkCollection,
    mean_risk: *mut f64,
    error_rate: *mut f64,
) -> MkStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let coll = coll.as_ref().ok_or_else(|| null("collection"))?;
        let mean_risk = mean_risk.as_mut().ok_or_else(|| null("mean_risk"))?;
        let error_rate = error_rate.as_mut().ok_or_else(|| null("error_rate"))?;
        let report = evaluate(&model.0, coll.0.bags())?;
        *mean_risk = report.mean_risk;
        *error_rate = report.error_rate.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mk_model_free(model: *mut MkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
