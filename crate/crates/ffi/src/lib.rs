//! C interface. Objects cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns a `FewStatus`; on failure `few_last_error` describes the
//! problem until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use few::data::{load_csv, Dataset, Target};
use few::engine::{self, EngineConfig, FittedPipeline};
use few::{FewError, Matrix};

/// Result codes of the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FewStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was malformed (bad UTF-8, index out of range, bad JSON).
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// The input data could not be loaded or has the wrong shape.
    DataError = 4,
    RuntimeError = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

/// Loaded dataset: attributes plus encoded labels.
pub struct FewDataset {
    inner: Dataset,
}

/// Fitted feature pipeline.
pub struct FewPipeline {
    inner: FittedPipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &FewError) -> FewStatus {
    if e.is_data_error() {
        FewStatus::DataError
    } else if matches!(e, FewError::InvalidConfig(_)) {
        FewStatus::InvalidConfig
    } else {
        FewStatus::RuntimeError
    }
}

struct Fail(FewStatus, String);

impl From<FewError> for Fail {
    fn from(e: FewError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FewStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FewStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FewStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FewStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(FewStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul removed").into_raw()
}

unsafe fn matrix_arg(x: *const f64, n_rows: usize, n_cols: usize) -> Result<Matrix, Fail> {
    if x.is_null() && n_rows * n_cols > 0 {
        return Err(null("x"));
    }
    let data = if n_rows * n_cols == 0 { Vec::new() } else { std::slice::from_raw_parts(x, n_rows * n_cols).to_vec() };
    Ok(Matrix::from_vec(n_rows, n_cols, data))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn few_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn few_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a CSV file. `target` names the label column (or its index); null
/// selects the last column.
///
/// # Safety
/// `path` and a non-null `target` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn few_dataset_load_csv(path: *const c_char, target: *const c_char, out: *mut *mut FewDataset) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let target = if target.is_null() { Target::Last } else { Target::Name(str_arg(target, "target")?.to_string()) };
        let ds = load_csv(path, &target)?;
        *out = Box::into_raw(Box::new(FewDataset { inner: ds }));
        Ok(())
    })
}

/// Builds a dataset from a row-major `n_rows × n_cols` matrix and labels in
/// `0..n_classes`. Attributes are named x0, x1, ... and classes "0", "1", ...
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles and `y` `n_rows` labels; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn few_dataset_from_arrays(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const u32,
    n_classes: usize,
    out: *mut *mut FewDataset,
) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if y.is_null() && n_rows > 0 {
            return Err(null("y"));
        }
        let x = matrix_arg(x, n_rows, n_cols)?;
        let y: Vec<usize> =
            if n_rows == 0 { Vec::new() } else { std::slice::from_raw_parts(y, n_rows).iter().map(|&c| c as usize).collect() };
        let ds = Dataset::new(
            x,
            y,
            (0..n_cols).map(|j| format!("x{j}")).collect(),
            (0..n_classes).map(|c| c.to_string()).collect(),
        )?;
        *out = Box::into_raw(Box::new(FewDataset { inner: ds }));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn few_dataset_n_samples(ds: *const FewDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_samples())
}

/// Number of attributes, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn few_dataset_n_features(ds: *const FewDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_features())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn few_dataset_free(ds: *mut FewDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits a pipeline. `config_json` is an engine configuration object; keys
/// left out take their defaults and null means all defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `config_json` null or a
/// NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn few_fit(ds: *const FewDataset, config_json: *const c_char, out: *mut *mut FewPipeline) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        let config: EngineConfig = if config_json.is_null() {
            EngineConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| Fail(FewStatus::InvalidConfig, format!("invalid configuration: {e}")))?
        };
        let mut pipe = engine::few_fit(&ds.inner.x, &ds.inner.y, &config)?;
        pipe.class_names = ds.inner.class_names.clone();
        pipe.attribute_names = ds.inner.feature_names.clone();
        *out = Box::into_raw(Box::new(FewPipeline { inner: pipe }));
        Ok(())
    })
}

/// Serializes a pipeline. The string is released with `few_string_free`.
///
/// # Safety
/// `p` must be a live pipeline handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_to_json(p: *const FewPipeline, out: *mut *mut c_char) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        *out = to_c_string(p.inner.to_json()?);
        Ok(())
    })
}

/// Restores a pipeline written by `few_pipeline_to_json`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_from_json(json: *const c_char, out: *mut *mut FewPipeline) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let pipe = FittedPipeline::from_json(text).map_err(|e| Fail(FewStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(FewPipeline { inner: pipe }));
        Ok(())
    })
}

/// Predicts class indices for a row-major `n_rows × n_cols` matrix into
/// `labels`, which must have room for `n_rows` values.
///
/// # Safety
/// `p` must be a live pipeline handle, `x` must hold `n_rows * n_cols`
/// doubles and `labels` `n_rows` slots.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_predict(
    p: *const FewPipeline,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    labels: *mut u32,
) -> FewStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if labels.is_null() && n_rows > 0 {
            return Err(null("labels"));
        }
        let x = matrix_arg(x, n_rows, n_cols)?;
        let pred = p.inner.predict(&x)?;
        for (i, c) in pred.into_iter().enumerate() {
            *labels.add(i) = c as u32;
        }
        Ok(())
    })
}

/// Number of engineered features, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_n_features(p: *const FewPipeline) -> usize {
    p.as_ref().map_or(0, |p| p.inner.features.len())
}

/// Number of attributes the pipeline expects, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_n_inputs(p: *const FewPipeline) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n_inputs)
}

/// Validation accuracy of the archived feature set.
///
/// # Safety
/// `p` must be a live pipeline handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_best_score(p: *const FewPipeline, out: *mut f64) -> FewStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.inner.best_val_score;
        Ok(())
    })
}

/// S-expression of feature `index`. The string is released with
/// `few_string_free`.
///
/// # Safety
/// `p` must be a live pipeline handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_feature_text(p: *const FewPipeline, index: usize, out: *mut *mut c_char) -> FewStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let text = p.inner.features.get(index).ok_or_else(|| {
            Fail(FewStatus::InvalidArgument, format!("feature {index} out of range ({} features)", p.inner.features.len()))
        })?;
        *out = to_c_string(text.clone());
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn few_pipeline_free(p: *mut FewPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn few_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&FewError::InvalidConfig("x".into())), FewStatus::InvalidConfig);
        assert_eq!(status_of(&FewError::Shape { expected: 1, got: 2 }), FewStatus::DataError);
        assert_eq!(status_of(&FewError::Harness("x".into())), FewStatus::RuntimeError);
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, FewStatus::Panic);
        let msg = unsafe { CStr::from_ptr(few_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
        assert_eq!(guard(|| Ok(())), FewStatus::Ok);
        assert!(few_last_error().is_null());
    }
}
