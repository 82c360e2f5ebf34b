//! C ABI over the netprice regression toolkit.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns an
//! `NpStatus`; on failure `np_last_error()` describes the most recent error
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use netprice::eval;
use netprice::models::ModelDocument;
use netprice::{Dataset, Error, EstimatorKind, ParamMap};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Param = 3,
    Fit = 4,
    Shape = 5,
    Io = 6,
    Json = 7,
    DegenerateVariance = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpEstimator {
    RandomForest = 0,
    GradientBoosted = 1,
    DecisionTree = 2,
    Linear = 3,
}

impl From<NpEstimator> for EstimatorKind {
    fn from(e: NpEstimator) -> Self {
        match e {
            NpEstimator::RandomForest => EstimatorKind::RandomForest,
            NpEstimator::GradientBoosted => EstimatorKind::GradientBoosted,
            NpEstimator::DecisionTree => EstimatorKind::DecisionTree,
            NpEstimator::Linear => EstimatorKind::Linear,
        }
    }
}

/// Row-major feature matrix with labels.
pub struct NpDataset(Dataset);

/// A fitted model with its estimator, parameters and feature names.
pub struct NpModel(ModelDocument);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> NpStatus {
    match err {
        Error::Param(_) | Error::Grid(_) | Error::Config(_) => NpStatus::Param,
        Error::Fit(_) => NpStatus::Fit,
        Error::Shape(_) | Error::Schema(_) => NpStatus::Shape,
        Error::Io { .. } | Error::Csv { .. } | Error::RaggedRow { .. } => NpStatus::Io,
        Error::Json { .. } => NpStatus::Json,
        Error::DegenerateVariance => NpStatus::DegenerateVariance,
        _ => NpStatus::InvalidArgument,
    }
}

struct Fail(NpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NpStatus::Panic
        }
    }
}

unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(NpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn checked_len(rows: usize, cols: usize) -> Result<usize, Fail> {
    rows.checked_mul(cols)
        .ok_or_else(|| Fail(NpStatus::InvalidArgument, "matrix size overflows".into()))
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn np_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn np_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies an `n_rows × n_features` row-major matrix and `n_rows` labels
/// into a new dataset.
///
/// # Safety
/// `x` must point to `n_rows * n_features` doubles, `y` to `n_rows`
/// doubles, and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn np_dataset_new(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    out: *mut *mut NpDataset,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = doubles(x, checked_len(n_rows, n_features)?, "x")?;
        let y = doubles(y, n_rows, "y")?;
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        let data = Dataset::new(x.to_vec(), y.to_vec(), names)?;
        *out = Box::into_raw(Box::new(NpDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from `np_dataset_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn np_dataset_free(data: *mut NpDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn np_dataset_n_rows(data: *const NpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn np_dataset_n_features(data: *const NpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_features())
}

/// Fits an estimator. `params_json` is a JSON object of hyperparameters,
/// e.g. `{"max_depth": 4}`; null means defaults.
///
/// # Safety
/// `data` must be a live dataset handle, `params_json` null or a
/// NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn np_model_fit(
    kind: NpEstimator,
    data: *const NpDataset,
    params_json: *const c_char,
    out: *mut *mut NpModel,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = &data.as_ref().ok_or_else(|| null("data"))?.0;
        let params: ParamMap = if params_json.is_null() {
            ParamMap::new()
        } else {
            serde_json::from_str(text(params_json, "params_json")?)
                .map_err(|e| Fail(NpStatus::Json, format!("params: {e}")))?
        };
        let kind = EstimatorKind::from(kind);
        let model = kind.fit(data, &params)?;
        let doc = ModelDocument::new(kind, params, data.feature_names().to_vec(), model);
        *out = Box::into_raw(Box::new(NpModel(doc)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn np_model_free(model: *mut NpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn np_model_n_features(model: *const NpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.model.n_features())
}

/// Predicts `n_rows` rows of a row-major matrix into `out`.
///
/// # Safety
/// `x` must point to `n_rows * n_features` doubles and `out` to `n_rows`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn np_model_predict(
    model: *const NpModel,
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> NpStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0.model;
        if n_features != model.n_features() {
            return Err(Fail(
                NpStatus::Shape,
                format!("model expects {} features, got {n_features}", model.n_features()),
            ));
        }
        let x = doubles(x, checked_len(n_rows, n_features)?, "x")?;
        if n_rows > 0 && out.is_null() {
            return Err(null("out"));
        }
        for (i, row) in x.chunks_exact(n_features.max(1)).take(n_rows).enumerate() {
            *out.add(i) = model.predict(row)?;
        }
        Ok(())
    })
}

/// Serializes the model document to a newly allocated JSON string; release
/// it with `np_string_free`.
///
/// # Safety
/// `model` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn np_model_to_json(model: *const NpModel, out: *mut *mut c_char) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = &model.as_ref().ok_or_else(|| null("model"))?.0;
        *out = CString::new(doc.to_json())
            .map_err(|e| Fail(NpStatus::Json, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn np_model_from_json(json: *const c_char, out: *mut *mut NpModel) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = ModelDocument::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(NpModel(doc)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn np_model_save(model: *const NpModel, path: *const c_char) -> NpStatus {
    guard(|| {
        let doc = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let path = Path::new(text(path, "path")?);
        std::fs::write(path, doc.to_json() + "\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn np_model_load(path: *const c_char, out: *mut *mut NpModel) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = ModelDocument::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(NpModel(doc)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn np_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn metric(
    y: *const f64,
    yhat: *const f64,
    n: usize,
    out: *mut f64,
    f: fn(&[f64], &[f64]) -> netprice::Result<f64>,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(doubles(y, n, "y")?, doubles(yhat, n, "yhat")?)?;
        Ok(())
    })
}

/// # Safety
/// `y` and `yhat` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn np_rmse(y: *const f64, yhat: *const f64, n: usize, out: *mut f64) -> NpStatus {
    metric(y, yhat, n, out, eval::rmse)
}

/// Fails with `NP_STATUS_DEGENERATE_VARIANCE` when `y` is constant.
///
/// # Safety
/// `y` and `yhat` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn np_r2(y: *const f64, yhat: *const f64, n: usize, out: *mut f64) -> NpStatus {
    metric(y, yhat, n, out, eval::r2)
}

