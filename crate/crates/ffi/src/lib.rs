//! C ABI over the hypograph library.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Strings returned through `out` parameters
//! are freed with [`hg_string_free`]. Every fallible call returns an
//! [`HgStatus`]; the message for the most recent failure on the calling
//! thread is available from [`hg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hypograph::boost::{fit_ensemble, BoostConfig, BoostedEnsemble};
use hypograph::fingerprint::featurize;
use hypograph::ingest::{n_qubits, parse_graph_jsonl, read_graph_jsonl, read_molecule_file, Dataset, SchmidtRanks};
use hypograph::pipeline::{featurize_stage, hypotheses_stage, Features, RunConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Data = 4,
    Internal = 5,
}

/// Parsed dataset.
pub struct HgDataset {
    inner: Dataset,
}

/// Fingerprints of one dataset.
pub struct HgFeatures {
    inner: Features,
    radius: u32,
}

/// Trained ensemble together with the fingerprint radius it expects.
pub struct HgModel {
    inner: BoostedEnsemble,
    radius: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgTrainConfig {
    pub stages: u32,
    pub shrinkage: f64,
    pub max_depth: u32,
    pub min_leaf: u32,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Outcome = Result<(), (HgStatus, String)>;

fn guard(f: impl FnOnce() -> Outcome) -> HgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HgStatus::Internal
        }
    }
}

fn null(what: &str) -> (HgStatus, String) {
    (HgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (HgStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HgStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, (HgStatus, String)> {
    CString::new(s).map(CString::into_raw).map_err(|_| (HgStatus::Internal, "output contains NUL".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn hg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn hg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Entanglement size `log2(d1 d2 d3)` from three Schmidt ranks.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_n_qubits(d1: u32, d2: u32, d3: u32, out: *mut f64) -> HgStatus {
    guard(|| {
        let r = SchmidtRanks::new(d1, d2, d3).map_err(|e| (HgStatus::Data, format!("{e:?}")))?;
        put(out, n_qubits(&r), "out")
    })
}

/// Parses JSON-lines graph records.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_dataset_from_jsonl(jsonl: *const c_char, out: *mut *mut HgDataset) -> HgStatus {
    guard(|| {
        let t = text(jsonl, "jsonl")?;
        let ds = read_graph_jsonl(t, "ffi").map_err(|e| (HgStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(HgDataset { inner: ds })), "out")
    })
}

/// Parses a molecule file: one line-notation string and target per line.
///
/// # Safety
/// `text_in` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_dataset_from_molecules(text_in: *const c_char, out: *mut *mut HgDataset) -> HgStatus {
    guard(|| {
        let t = text(text_in, "text")?;
        let ds = read_molecule_file(t, "ffi").map_err(|e| (HgStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(HgDataset { inner: ds })), "out")
    })
}

/// Number of samples; 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn hg_dataset_len(ds: *const HgDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be null or a dataset handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_dataset_free(ds: *mut HgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fingerprints every graph up to `radius` hops.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_featurize(ds: *const HgDataset, radius: u32, out: *mut *mut HgFeatures) -> HgStatus {
    guard(|| {
        let d = handle(ds, "dataset")?;
        let config = RunConfig { radius, ..RunConfig::default() };
        let f = featurize_stage(&d.inner, &config).map_err(|e| (HgStatus::Data, e.to_string()))?;
        put(out, Box::into_raw(Box::new(HgFeatures { inner: f, radius })), "out")
    })
}

/// Distinct feature ids before alias collapse; 0 for null.
///
/// # Safety
/// `f` must be null or a live features handle.
#[no_mangle]
pub unsafe extern "C" fn hg_features_count(f: *const HgFeatures) -> usize {
    f.as_ref().map_or(0, |f| f.inner.raw.n_features())
}

/// # Safety
/// `f` must be null or a features handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_features_free(f: *mut HgFeatures) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub extern "C" fn hg_train_config_default() -> HgTrainConfig {
    let b = BoostConfig::default();
    HgTrainConfig {
        stages: b.stages as u32,
        shrinkage: b.shrinkage,
        max_depth: b.max_depth as u32,
        min_leaf: b.min_leaf as u32,
        seed: b.seed,
    }
}

/// Fits the ensemble on all samples. A null `config` means defaults.
///
/// # Safety
/// Handles must be live and built from the same dataset; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_train(
    ds: *const HgDataset,
    features: *const HgFeatures,
    config: *const HgTrainConfig,
    out: *mut *mut HgModel,
) -> HgStatus {
    guard(|| {
        let d = handle(ds, "dataset")?;
        let f = handle(features, "features")?;
        let c = config.as_ref().copied().unwrap_or_else(|| hg_train_config_default());
        let bc = BoostConfig {
            stages: c.stages as usize,
            shrinkage: c.shrinkage,
            max_depth: c.max_depth as usize,
            min_leaf: c.min_leaf as usize,
            seed: c.seed,
            ..BoostConfig::default()
        };
        if f.inner.x.n_samples() != d.inner.len() {
            return Err((HgStatus::Data, "features do not belong to this dataset".into()));
        }
        let model = fit_ensemble(&f.inner.x, &d.inner.targets(), &bc).map_err(|e| (HgStatus::Data, e.to_string()))?;
        put(out, Box::into_raw(Box::new(HgModel { inner: model, radius: f.radius })), "out")
    })
}

/// Predicts the target of one graph given as a JSON record.
///
/// # Safety
/// `model` must be live; `graph_json` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_model_predict(model: *const HgModel, graph_json: *const c_char, out: *mut f64) -> HgStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let (g, _) =
            parse_graph_jsonl(text(graph_json, "graph_json")?).map_err(|e| (HgStatus::Parse, e.to_string()))?;
        let fp = featurize(&g, m.radius).map_err(|e| (HgStatus::Data, e.to_string()))?;
        put(out, m.inner.predict(&fp.ids), "out")
    })
}

/// Serialized model; free with [`hg_string_free`].
///
/// # Safety
/// `model` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_model_to_json(model: *const HgModel, out: *mut *mut c_char) -> HgStatus {
    guard(|| {
        let m = handle(model, "model")?;
        put(out, owned_string(m.inner.to_json())?, "out")
    })
}

/// # Safety
/// `model` must be null or a model handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_model_free(model: *mut HgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Ranked hypotheses as a JSON array; free with [`hg_string_free`].
///
/// # Safety
/// Handles must be live and consistent; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hg_hypotheses_json(
    ds: *const HgDataset,
    features: *const HgFeatures,
    model: *const HgModel,
    top_k: u32,
    d_min: f64,
    out: *mut *mut c_char,
) -> HgStatus {
    guard(|| {
        let d = handle(ds, "dataset")?;
        let f = handle(features, "features")?;
        let m = handle(model, "model")?;
        if f.inner.x.n_samples() != d.inner.len() {
            return Err((HgStatus::Data, "features do not belong to this dataset".into()));
        }
        let config = RunConfig { top_k: top_k as usize, d_min, ..RunConfig::default() };
        let hyps =
            hypotheses_stage(&d.inner, &f.inner, &m.inner, &config).map_err(|e| (HgStatus::Data, e.to_string()))?;
        let json = serde_json::to_string(&hyps).map_err(|e| (HgStatus::Internal, e.to_string()))?;
        put(out, owned_string(json)?, "out")
    })
}
