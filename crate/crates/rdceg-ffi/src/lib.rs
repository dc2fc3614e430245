//! C ABI over the rdceg pipeline.
//!
//! Conventions:
//! - Every handle type is opaque; create/free pairs own the memory.
//! - Functions return `RDCEG_OK` (0) on success or a negative error code;
//!   the message behind the last error on the calling thread is available
//!   via [`rdceg_last_error`].
//! - Strings returned by the library are UTF-8, NUL-terminated, and must be
//!   released with [`rdceg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use rdceg::config::TauSpec;
use rdceg::diagnostics::{error_report, LambdaStarMode};
use rdceg::graph::dot::rdceg_dot;
use rdceg::search::{select_model, FitBundle, FittedModel};
use rdceg::sim::{
    builtin, load_dataset, save_dataset, simulate_population, Dataset, DatasetFormat,
    GroundTruthModel,
};
use rdceg::smp::{compound_cdf, compound_density, compound_moments, Moment};

pub const RDCEG_OK: c_int = 0;
pub const RDCEG_ERR_NULL_ARGUMENT: c_int = -1;
pub const RDCEG_ERR_INVALID_UTF8: c_int = -2;
pub const RDCEG_ERR_UNKNOWN_MODEL: c_int = -3;
pub const RDCEG_ERR_RUNTIME: c_int = -4;
pub const RDCEG_ERR_INVALID_PARAMETER: c_int = -5;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring =
        CString::new(message.replace('\0', " ")).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// An opaque generating model (builtin or loaded from a config file).
pub struct RdcegModel {
    inner: GroundTruthModel,
}

/// An opaque dataset of path observations.
pub struct RdcegDataset {
    inner: Dataset,
}

/// An opaque fitted model (MAP staging/clustering with posteriors).
pub struct RdcegFit {
    fitted: FittedModel,
    bundle: FitBundle,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(RDCEG_ERR_NULL_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        RDCEG_ERR_INVALID_UTF8
    })
}

fn string_out(s: String, out: *mut *mut c_char) -> c_int {
    let cstring = match CString::new(s) {
        Ok(c) => c,
        Err(_) => {
            set_error("output contained an interior NUL byte".into());
            return RDCEG_ERR_RUNTIME;
        }
    };
    unsafe { *out = cstring.into_raw() };
    RDCEG_OK
}

/// Message for the most recent error on this thread, or NULL when the last
/// call succeeded. The string must be freed with `rdceg_string_free`.
#[no_mangle]
pub extern "C" fn rdceg_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by an rdceg function and not
/// yet freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rdceg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version string (static storage; do not free).
#[no_mangle]
pub extern "C" fn rdceg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Models.

/// Loads a builtin generating model by name
/// (falls | epilepsy-like | smoking-a | smoking-b).
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_model_builtin(
    name: *const c_char,
    out: *mut *mut RdcegModel,
) -> c_int {
    clear_error();
    if out.is_null() {
        set_error("null output pointer".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let name = match cstr_arg(name) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match builtin::by_name(name) {
        None => {
            set_error(format!("unknown builtin model '{name}'"));
            RDCEG_ERR_UNKNOWN_MODEL
        }
        Some(Err(e)) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
        Some(Ok(model)) => {
            *out = Box::into_raw(Box::new(RdcegModel { inner: model }));
            RDCEG_OK
        }
    }
}

/// # Safety
/// `model` must come from `rdceg_model_builtin` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rdceg_model_free(model: *mut RdcegModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of non-sink positions of the model's graph (the entry state
/// included).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdceg_model_n_positions(model: *const RdcegModel) -> c_int {
    if model.is_null() {
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    (*model).inner.rdceg().non_sink_positions().count() as c_int
}

/// DOT rendering of the model's graph.
///
/// # Safety
/// `model` must be a live handle; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_model_dot(model: *const RdcegModel, out: *mut *mut c_char) -> c_int {
    clear_error();
    if model.is_null() || out.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let m = &(*model).inner;
    let sizes: Vec<usize> = m.staging.cells().iter().map(|c| c.len()).collect();
    let csizes: Vec<usize> = m.clustering.cells().iter().map(|c| c.len()).collect();
    string_out(rdceg_dot(m.rdceg(), Some(&sizes), Some(&csizes)), out)
}

// ---------------------------------------------------------------------------
// Datasets.

/// Simulates an open population.
///
/// # Safety
/// `model` must be a live handle; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_simulate(
    model: *const RdcegModel,
    n: u64,
    seed: u64,
    out: *mut *mut RdcegDataset,
) -> c_int {
    clear_error();
    if model.is_null() || out.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    match simulate_population(&(*model).inner, n as usize, seed) {
        Ok(dataset) => {
            *out = Box::into_raw(Box::new(RdcegDataset { inner: dataset }));
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_INVALID_PARAMETER
        }
    }
}

/// Loads a dataset from a JSONL (`.jsonl`) or CSV (`.csv`) file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_dataset_load(
    path: *const c_char,
    out: *mut *mut RdcegDataset,
) -> c_int {
    clear_error();
    if out.is_null() {
        set_error("null output pointer".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let path = match cstr_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(code) => return code,
    };
    let format = DatasetFormat::from_path(&path);
    match load_dataset(&path, format) {
        Ok(dataset) => {
            *out = Box::into_raw(Box::new(RdcegDataset { inner: dataset }));
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
    }
}

/// Writes a dataset to a JSONL or CSV file (format by extension).
///
/// # Safety
/// `dataset` must be a live handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn rdceg_dataset_save(
    dataset: *const RdcegDataset,
    path: *const c_char,
) -> c_int {
    clear_error();
    if dataset.is_null() {
        set_error("null dataset".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let path = match cstr_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(code) => return code,
    };
    let format = DatasetFormat::from_path(&path);
    match save_dataset(&(*dataset).inner, &path, format) {
        Ok(()) => RDCEG_OK,
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
    }
}

/// Number of observations in the dataset.
///
/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdceg_dataset_len(dataset: *const RdcegDataset) -> i64 {
    if dataset.is_null() {
        return -1;
    }
    (*dataset).inner.observations.len() as i64
}

/// # Safety
/// `dataset` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rdceg_dataset_free(dataset: *mut RdcegDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ---------------------------------------------------------------------------
// Fitting.

/// Fits the MAP staging and clustering to a dataset under the model's
/// search configuration. `alpha_total <= 0` keeps the configured prior;
/// `tau_scale <= 0` keeps the configured phantom holding time.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit(
    model: *const RdcegModel,
    dataset: *const RdcegDataset,
    alpha_total: c_double,
    tau_scale: c_double,
    out: *mut *mut RdcegFit,
) -> c_int {
    clear_error();
    if model.is_null() || dataset.is_null() || out.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let mut spec = (*model).inner.spec.clone();
    if alpha_total > 0.0 {
        spec.search.prior.alpha_total = Some(alpha_total);
    }
    if tau_scale > 0.0 {
        spec.search.prior.tau = TauSpec::EmpiricalMedian { scale: tau_scale };
    }
    match select_model(&(*dataset).inner.observations, &spec) {
        Ok(fitted) => {
            let bundle = FitBundle::from_fitted(&spec, &fitted);
            *out = Box::into_raw(Box::new(RdcegFit { fitted, bundle }));
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
    }
}

/// # Safety
/// `fit` must come from `rdceg_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_free(fit: *mut RdcegFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Log marginal likelihood of the fitted model.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_log_score(fit: *const RdcegFit) -> c_double {
    if fit.is_null() {
        return f64::NAN;
    }
    (*fit).fitted.result.log_marginal_likelihood
}

/// Numbers of stages and clusters in the MAP partitions.
///
/// # Safety
/// `fit` must be a live handle; out pointers may be NULL to skip.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_shape(
    fit: *const RdcegFit,
    n_stages: *mut c_int,
    n_clusters: *mut c_int,
    n_positions: *mut c_int,
) -> c_int {
    if fit.is_null() {
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let f = &(*fit).fitted;
    if !n_stages.is_null() {
        *n_stages = f.result.staging.n_cells() as c_int;
    }
    if !n_clusters.is_null() {
        *n_clusters = f.result.clustering.n_cells() as c_int;
    }
    if !n_positions.is_null() {
        *n_positions = f.rdceg.positions().len() as c_int;
    }
    RDCEG_OK
}

/// Self-contained JSON bundle of the fitted model.
///
/// # Safety
/// `fit` must be a live handle; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_to_json(fit: *const RdcegFit, out: *mut *mut c_char) -> c_int {
    clear_error();
    if fit.is_null() || out.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    match serde_json::to_string_pretty(&(*fit).bundle) {
        Ok(json) => string_out(json, out),
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
    }
}

/// DOT rendering of the fitted MAP graph.
///
/// # Safety
/// `fit` must be a live handle; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_dot(fit: *const RdcegFit, out: *mut *mut c_char) -> c_int {
    clear_error();
    if fit.is_null() || out.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    let f = &(*fit).fitted;
    let sizes: Vec<usize> = f.result.staging.cells().iter().map(|c| c.len()).collect();
    let csizes: Vec<usize> = f
        .result
        .clustering
        .cells()
        .iter()
        .map(|c| c.len())
        .collect();
    string_out(rdceg_dot(&f.rdceg, Some(&sizes), Some(&csizes)), out)
}

/// Total situational and cluster errors of a fit against its generating
/// model.
///
/// # Safety
/// `model` and `fit` must be live handles over the same template; out
/// pointers may be NULL to skip either value.
#[no_mangle]
pub unsafe extern "C" fn rdceg_fit_errors(
    model: *const RdcegModel,
    fit: *const RdcegFit,
    situational: *mut c_double,
    cluster: *mut c_double,
) -> c_int {
    clear_error();
    if model.is_null() || fit.is_null() {
        set_error("null argument".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    match error_report(
        &(*model).inner,
        &(*fit).fitted,
        LambdaStarMode::PosteriorMeanTheta,
    ) {
        Ok(report) => {
            if !situational.is_null() {
                *situational = report.total_situational_error;
            }
            if !cluster.is_null() {
                *cluster = report.total_cluster_error;
            }
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_RUNTIME
        }
    }
}

// ---------------------------------------------------------------------------
// Compound holding law, exposed directly for binding-level checks.

/// Density of the compound Weibull-Inverse-Gamma holding law.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rdceg_compound_density(
    zeta: c_double,
    beta: c_double,
    kappa: c_double,
    t: c_double,
    out: *mut c_double,
) -> c_int {
    clear_error();
    if out.is_null() {
        set_error("null output pointer".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    match compound_density(zeta, beta, kappa, t) {
        Ok(v) => {
            unsafe { *out = v };
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_INVALID_PARAMETER
        }
    }
}

/// Cumulative distribution of the compound holding law.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rdceg_compound_cdf(
    zeta: c_double,
    beta: c_double,
    kappa: c_double,
    t: c_double,
    out: *mut c_double,
) -> c_int {
    clear_error();
    if out.is_null() {
        set_error("null output pointer".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    match compound_cdf(zeta, beta, kappa, t) {
        Ok(v) => {
            unsafe { *out = v };
            RDCEG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RDCEG_ERR_INVALID_PARAMETER
        }
    }
}

/// Mean of the compound holding law; infinite moments are reported through
/// the `finite` flag with the value left untouched.
///
/// # Safety
/// `out` and `finite` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn rdceg_compound_mean(
    zeta: c_double,
    beta: c_double,
    kappa: c_double,
    out: *mut c_double,
    finite: *mut c_int,
) -> c_int {
    clear_error();
    if out.is_null() || finite.is_null() {
        set_error("null output pointer".into());
        return RDCEG_ERR_NULL_ARGUMENT;
    }
    if !(zeta > 0.0 && beta > 0.0 && kappa > 0.0) {
        set_error("compound law parameters must be positive".into());
        return RDCEG_ERR_INVALID_PARAMETER;
    }
    let (mean, _) = compound_moments(zeta, beta, kappa);
    match mean {
        Moment::Finite(v) => {
            unsafe {
                *out = v;
                *finite = 1;
            }
            RDCEG_OK
        }
        Moment::Infinite => {
            unsafe { *finite = 0 };
            RDCEG_OK
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    unsafe fn take_string(ptr: *mut c_char) -> String {
        let s = CStr::from_ptr(ptr).to_str().unwrap().to_string();
        rdceg_string_free(ptr);
        s
    }

    #[test]
    fn builtin_roundtrip_through_the_abi() {
        unsafe {
            let name = CString::new("smoking-a").unwrap();
            let mut model: *mut RdcegModel = ptr::null_mut();
            assert_eq!(rdceg_model_builtin(name.as_ptr(), &mut model), RDCEG_OK);
            assert_eq!(rdceg_model_n_positions(model), 3);

            let mut dataset: *mut RdcegDataset = ptr::null_mut();
            assert_eq!(rdceg_simulate(model, 800, 42, &mut dataset), RDCEG_OK);
            assert_eq!(rdceg_dataset_len(dataset), 800);

            let mut fit: *mut RdcegFit = ptr::null_mut();
            assert_eq!(rdceg_fit(model, dataset, 0.0, 0.0, &mut fit), RDCEG_OK);
            assert!(rdceg_fit_log_score(fit).is_finite());
            let mut stages = 0;
            let mut clusters = 0;
            let mut positions = 0;
            assert_eq!(
                rdceg_fit_shape(fit, &mut stages, &mut clusters, &mut positions),
                RDCEG_OK
            );
            assert!(stages >= 2 && clusters >= 1 && positions >= 3);

            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(rdceg_fit_to_json(fit, &mut json), RDCEG_OK);
            let text = take_string(json);
            assert!(text.contains("rdceg.fit/1"));

            let mut eu = 0.0;
            let mut ec = 0.0;
            assert_eq!(rdceg_fit_errors(model, fit, &mut eu, &mut ec), RDCEG_OK);
            assert!(eu >= 0.0 && ec >= 0.0);

            let mut dot: *mut c_char = ptr::null_mut();
            assert_eq!(rdceg_model_dot(model, &mut dot), RDCEG_OK);
            let dot_text = take_string(dot);
            assert!(dot_text.starts_with("digraph"));

            rdceg_fit_free(fit);
            rdceg_dataset_free(dataset);
            rdceg_model_free(model);
        }
    }

    #[test]
    fn unknown_model_sets_error() {
        unsafe {
            let name = CString::new("not-a-model").unwrap();
            let mut model: *mut RdcegModel = ptr::null_mut();
            assert_eq!(
                rdceg_model_builtin(name.as_ptr(), &mut model),
                RDCEG_ERR_UNKNOWN_MODEL
            );
            let err = rdceg_last_error();
            assert!(!err.is_null());
            let msg = take_string(err);
            assert!(msg.contains("not-a-model"));
        }
    }

    #[test]
    fn compound_law_exports() {
        unsafe {
            compound_law_exports_inner();
        }
    }

    unsafe fn compound_law_exports_inner() {
        let mut v = 0.0;
        assert_eq!(rdceg_compound_density(1.0, 1.0, 1.0, 0.0, &mut v), RDCEG_OK);
        assert_eq!(v, 1.0);
        assert_eq!(
            rdceg_compound_density(0.0, 1.0, 1.0, 0.0, &mut v),
            RDCEG_ERR_INVALID_PARAMETER
        );
        let mut finite = -1;
        assert_eq!(
            rdceg_compound_mean(3.0, 2.0, 1.0, &mut v, &mut finite),
            RDCEG_OK
        );
        assert_eq!(finite, 1);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(
            rdceg_compound_mean(0.5, 2.0, 1.0, &mut v, &mut finite),
            RDCEG_OK
        );
        assert_eq!(finite, 0);
        let mut c = 0.0;
        assert_eq!(rdceg_compound_cdf(2.0, 5.0, 1.5, 3.0, &mut c), RDCEG_OK);
        assert!(c > 0.0 && c < 1.0);
    }
}
