//! C ABI over `multizeta`.
//!
//! Every fallible function returns an [`MzStatus`]; on failure the message is
//! available from [`mz_last_error_message`] on the same thread. Datasets and
//! models are opaque handles written through an out-pointer and released with
//! the matching `mz_*_free`. Matrices are passed row-major.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use multizeta::dataset::{load_csv, synth_potential};
use multizeta::diagnostics::gaussian_mass_within;
use multizeta::regression::{fit_rectangular, fit_square_gpr, predict};
use multizeta::{Dataset, Error, FitModel, KernelFamily, KernelSpec, Normalizer};
use nalgebra::{DMatrix, DVector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    DimensionMismatch = 4,
    NonFinite = 5,
    NotPositiveDefinite = 6,
    Io = 7,
    Parse = 8,
    InvalidData = 9,
    Serialization = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MzKernelFamily {
    SquaredExponential = 0,
    Exponential = 1,
    Matern32 = 2,
    Matern52 = 3,
}

impl From<MzKernelFamily> for KernelFamily {
    fn from(f: MzKernelFamily) -> Self {
        match f {
            MzKernelFamily::SquaredExponential => KernelFamily::SquaredExponential,
            MzKernelFamily::Exponential => KernelFamily::Exponential,
            MzKernelFamily::Matern32 => KernelFamily::Matern32,
            MzKernelFamily::Matern52 => KernelFamily::Matern52,
        }
    }
}

/// Opaque dataset handle.
pub struct MzDataset(Dataset);

/// Opaque fitted-model handle.
pub struct MzModel(FitModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MzStatus {
    match e {
        Error::DimensionMismatch { .. } => MzStatus::DimensionMismatch,
        Error::InvalidParameter(_) | Error::Config(_) => MzStatus::InvalidParameter,
        Error::NonFinite(_) => MzStatus::NonFinite,
        Error::NotPositiveDefinite => MzStatus::NotPositiveDefinite,
        Error::Io { .. } => MzStatus::Io,
        Error::Parse { .. } | Error::Csv(_) => MzStatus::Parse,
        Error::EmptyDataset(_) | Error::ZeroVariance { .. } | Error::InsufficientRows { .. } => MzStatus::InvalidData,
        Error::Json(_) => MzStatus::Serialization,
    }
}

struct Failure(MzStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MzStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MzStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MzStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MzStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MzStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next `mz_*` call on the same thread.
#[no_mangle]
pub extern "C" fn mz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a CSV dataset (header row, last column is the target).
#[no_mangle]
pub unsafe extern "C" fn mz_dataset_load_csv(path: *const c_char, out: *mut *mut MzDataset) -> MzStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        put(out, MzDataset(load_csv(Path::new(path))?))
    })
}

/// Builds a dataset from `n_rows x dimension` row-major inputs and `n_rows` targets.
#[no_mangle]
pub unsafe extern "C" fn mz_dataset_from_arrays(
    inputs: *const f64,
    targets: *const f64,
    n_rows: usize,
    dimension: usize,
    out: *mut *mut MzDataset,
) -> MzStatus {
    guard(|| {
        check_out(out)?;
        let x = slice_arg(inputs, n_rows * dimension, "inputs")?;
        let y = slice_arg(targets, n_rows, "targets")?;
        let inputs = DMatrix::from_row_slice(n_rows, dimension, x);
        put(out, MzDataset(Dataset::new(inputs, DVector::from_column_slice(y))?))
    })
}

/// Synthetic Morse-like surface sampled uniformly on `[-halfwidth, halfwidth]^dimension`.
#[no_mangle]
pub unsafe extern "C" fn mz_dataset_synthetic(
    dimension: usize,
    n_points: usize,
    seed: u64,
    halfwidth: f64,
    out: *mut *mut MzDataset,
) -> MzStatus {
    guard(|| {
        check_out(out)?;
        put(out, MzDataset(synth_potential(dimension, n_points, seed, halfwidth)?))
    })
}

/// Number of rows, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mz_dataset_len(dataset: *const MzDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Number of input columns, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mz_dataset_dimension(dataset: *const MzDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.dimension())
}

#[no_mangle]
pub unsafe extern "C" fn mz_dataset_free(dataset: *mut MzDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Rectangular multi-zeta fit on every row of `dataset`, using its first
/// `n_centers` rows as centers. Inputs are standardized with statistics of
/// the whole dataset. `lengths` must be positive and strictly increasing.
#[no_mangle]
pub unsafe extern "C" fn mz_fit_rectangular(
    dataset: *const MzDataset,
    n_centers: usize,
    family: MzKernelFamily,
    lengths: *const f64,
    n_lengths: usize,
    rcond: f64,
    out: *mut *mut MzModel,
) -> MzStatus {
    guard(|| {
        check_out(out)?;
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        let spec = KernelSpec::new(family.into(), slice_arg(lengths, n_lengths, "lengths")?.to_vec())?;
        if n_centers == 0 || n_centers > d.len() {
            return Err(Error::InsufficientRows { required: n_centers.max(1), available: d.len() }.into());
        }
        let norm = Normalizer::fit(&d.inputs)?;
        let x = norm.apply(&d.inputs)?;
        let centers = x.rows(0, n_centers).into_owned();
        put(out, MzModel(fit_rectangular(&norm, &x, &d.targets, &centers, &spec, rcond)?))
    })
}

/// Square GPR fit `c = (K + delta I)^{-1} f` over every row of `dataset`.
#[no_mangle]
pub unsafe extern "C" fn mz_fit_square_gpr(
    dataset: *const MzDataset,
    family: MzKernelFamily,
    length: f64,
    delta: f64,
    out: *mut *mut MzModel,
) -> MzStatus {
    guard(|| {
        check_out(out)?;
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        let norm = Normalizer::fit(&d.inputs)?;
        let x = norm.apply(&d.inputs)?;
        put(out, MzModel(fit_square_gpr(&norm, &x, &d.targets, family.into(), length, delta)?))
    })
}

/// Predicts `n_rows` raw (unstandardized) row-major inputs into `predictions`.
#[no_mangle]
pub unsafe extern "C" fn mz_model_predict(
    model: *const MzModel,
    inputs: *const f64,
    n_rows: usize,
    dimension: usize,
    predictions: *mut f64,
) -> MzStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let x = slice_arg(inputs, n_rows * dimension, "inputs")?;
        if n_rows > 0 && predictions.is_null() {
            return Err(null("predictions"));
        }
        let p = predict(m, &DMatrix::from_row_slice(n_rows, dimension, x))?;
        if n_rows > 0 {
            std::slice::from_raw_parts_mut(predictions, n_rows).copy_from_slice(p.as_slice());
        }
        Ok(())
    })
}

/// Input dimension of the model, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mz_model_dimension(model: *const MzModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dimension())
}

/// Number of coefficients (centers times zeta count), 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mz_model_coefficient_count(model: *const MzModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.coefficients.len())
}

/// Effective rank of the pseudoinverse solve; -1 for square GPR models or NULL.
#[no_mangle]
pub unsafe extern "C" fn mz_model_effective_rank(model: *const MzModel) -> i64 {
    model
        .as_ref()
        .and_then(|m| m.0.solve_report)
        .map_or(-1, |r| r.effective_rank as i64)
}

/// Serializes the model to JSON. Release the string with [`mz_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mz_model_to_json(model: *const MzModel, out: *mut *mut c_char) -> MzStatus {
    guard(|| {
        check_out(out)?;
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let s = CString::new(m.to_json()?).map_err(|_| Failure(MzStatus::Serialization, "interior NUL".into()))?;
        *out = s.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mz_model_from_json(json: *const c_char, out: *mut *mut MzModel) -> MzStatus {
    guard(|| {
        check_out(out)?;
        put(out, MzModel(FitModel::from_json(str_arg(json, "json")?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn mz_model_free(model: *mut MzModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Probability that a standard normal vector in `dimension` dimensions lies within radius `r`.
#[no_mangle]
pub unsafe extern "C" fn mz_gaussian_mass_within(dimension: usize, r: f64, out: *mut f64) -> MzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if dimension == 0 || !(r >= 0.0) {
            return Err(Failure(
                MzStatus::InvalidParameter,
                format!("need dimension >= 1 and r >= 0, got {dimension}, {r}"),
            ));
        }
        *out = gaussian_mass_within(dimension, r);
        Ok(())
    })
}
