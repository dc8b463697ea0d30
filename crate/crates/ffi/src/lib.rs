//! C ABI for the constraintmatch library.
//!
//! Objects cross the boundary as opaque handles. Every handle returned
//! through an out-pointer is owned by the caller and must be released with
//! the matching `cm_*_free`. Fallible functions return a [`CmStatus`]; on
//! failure [`cm_last_error`] describes the problem for the calling thread.
//! Panics never unwind into C: they are caught and reported as
//! `CM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use constraintmatch::dataspace::{self, ConstraintPair, Dataset, Split};
use constraintmatch::nethead::{load_checkpoint, save_checkpoint, ClusterHead};
use constraintmatch::pseudo::SelectionMode;
use constraintmatch::{evaluate, train, Error, Regime, TrainConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Parse = 5,
    NonFinite = 6,
    Unlabeled = 7,
    Panic = 8,
    Other = 9,
}

pub const CM_REGIME_CONSTRAINTMATCH: u32 = 0;
pub const CM_REGIME_CONSTRAINED: u32 = 1;
pub const CM_REGIME_NAIVE_PL: u32 = 2;
pub const CM_REGIME_FULLY_CONSTRAINED: u32 = 3;

pub const CM_SELECTION_ENTROPY: u32 = 0;
pub const CM_SELECTION_CONFIDENCE: u32 = 1;

/// Training options. Obtain defaults from [`cm_train_options_default`] and
/// change fields as needed. `n_out == 0` means one cluster per class.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CmTrainOptions {
    pub regime: u32,
    pub selection: u32,
    pub tau: f64,
    pub lambda: f64,
    pub soft: bool,
    pub mu: f64,
    pub eta: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub batch_c: usize,
    pub batch_u: usize,
    pub n_out: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CmEvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

/// Opaque dataset handle.
pub struct CmDataset(Dataset);

/// Opaque list of pairwise constraints.
pub struct CmConstraints(Vec<ConstraintPair>);

/// Opaque trained model.
pub struct CmModel(ClusterHead);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CmStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::TooManyConstraints { .. }
        | Error::UndefinedEntropy
        | Error::Empty(_)
        | Error::Config(_)
        | Error::UnknownPreset(_)
        | Error::UnknownSuite(_)
        | Error::StepAfterCompletion { .. } => CmStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => CmStatus::DimensionMismatch,
        Error::Io { .. } => CmStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::CheckpointVersion(_) => CmStatus::Parse,
        Error::NonFinite(_) | Error::NonFiniteLoss { .. } => CmStatus::NonFinite,
        Error::UnlabeledDataset => CmStatus::Unlabeled,
        #[allow(unreachable_patterns)]
        _ => CmStatus::Other,
    }
}

struct Fail(CmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(CmStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn matrix(features: *const f64, n: usize, d: usize) -> Result<ndarray::Array2<f64>, Fail> {
    if features.is_null() {
        return Err(null("features"));
    }
    let len = n.checked_mul(d).ok_or_else(|| Fail(CmStatus::InvalidArgument, "n * d overflows".into()))?;
    let data = std::slice::from_raw_parts(features, len).to_vec();
    Ok(ndarray::Array2::from_shape_vec((n, d), data).expect("length checked"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Generates the Gaussian blobs benchmark: `k` classes of `per_class`
/// points in `d` dimensions.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_make_blobs(
    k: usize,
    per_class: usize,
    d: usize,
    spread: f64,
    seed: u64,
    out: *mut *mut CmDataset,
) -> CmStatus {
    guard(|| put(out, CmDataset(dataspace::make_blobs(k, per_class, d, spread, seed)?)))
}

/// Builds a dataset from a row-major `n x d` feature matrix. `labels` may be
/// NULL for unlabeled data; otherwise it must hold `n` entries.
///
/// # Safety
/// `features` must point to `n * d` doubles, `labels` (if non-NULL) to `n`
/// values and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_from_rows(
    features: *const f64,
    n: usize,
    d: usize,
    labels: *const usize,
    out: *mut *mut CmDataset,
) -> CmStatus {
    guard(|| {
        let x = matrix(features, n, d)?;
        let y = (!labels.is_null()).then(|| std::slice::from_raw_parts(labels, n).to_vec());
        put(out, CmDataset(Dataset::new(x, y, Split::Train)?))
    })
}

/// Reads a dataset CSV (feature columns, optional trailing `label`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_load_csv(path: *const c_char, out: *mut *mut CmDataset) -> CmStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, CmDataset(dataspace::load_dataset(path, Split::Train)?))
    })
}

/// Number of samples; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_len(ds: *const CmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Feature dimension; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_dim(ds: *const CmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// Number of classes; 0 for NULL or unlabeled data.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_num_classes(ds: *const CmDataset) -> usize {
    ds.as_ref().map_or(0, |d| if d.0.labels().is_some() { d.0.num_classes() } else { 0 })
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cm_dataset_free(ds: *mut CmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Samples `n_c` ground-truth constraints from a labeled dataset.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_constraints_sample(
    ds: *const CmDataset,
    n_c: usize,
    seed: u64,
    out: *mut *mut CmConstraints,
) -> CmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        put(out, CmConstraints(dataspace::sample_constraints(&ds.0, n_c, seed)?))
    })
}

/// Builds a constraint list from parallel arrays; `must_link[t]` nonzero
/// marks pair `t` as must-link.
///
/// # Safety
/// `i`, `j` and `must_link` must each point to `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_constraints_from_pairs(
    i: *const usize,
    j: *const usize,
    must_link: *const u8,
    n: usize,
    out: *mut *mut CmConstraints,
) -> CmStatus {
    guard(|| {
        if n > 0 && (i.is_null() || j.is_null() || must_link.is_null()) {
            return Err(null("pair array"));
        }
        let pairs = (0..n)
            .map(|t| ConstraintPair { i: *i.add(t), j: *j.add(t), c: u8::from(*must_link.add(t) != 0) })
            .collect();
        put(out, CmConstraints(pairs))
    })
}

/// Number of pairs; 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_constraints_len(c: *const CmConstraints) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// Reads pair `idx`.
///
/// # Safety
/// `c` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_constraints_get(
    c: *const CmConstraints,
    idx: usize,
    i: *mut usize,
    j: *mut usize,
    must_link: *mut u8,
) -> CmStatus {
    guard(|| {
        let c = deref(c, "constraints")?;
        let p = c
            .0
            .get(idx)
            .ok_or_else(|| Fail(CmStatus::InvalidArgument, format!("index {idx} out of range {}", c.0.len())))?;
        if i.is_null() || j.is_null() || must_link.is_null() {
            return Err(null("output pointer"));
        }
        *i = p.i;
        *j = p.j;
        *must_link = p.c;
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cm_constraints_free(c: *mut CmConstraints) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Library defaults for the given regime (`CM_REGIME_*`). Naive
/// pseudo-labeling defaults to confidence selection.
#[no_mangle]
pub extern "C" fn cm_train_options_default(regime: u32) -> CmTrainOptions {
    let cfg = TrainConfig::default();
    let naive = regime == CM_REGIME_NAIVE_PL;
    CmTrainOptions {
        regime,
        selection: if naive { CM_SELECTION_CONFIDENCE } else { CM_SELECTION_ENTROPY },
        tau: if naive { 0.9 } else { cfg.selection.tau },
        lambda: cfg.lambda,
        soft: cfg.soft_pc,
        mu: cfg.mu,
        eta: cfg.eta,
        total_steps: cfg.total_steps,
        warmup_steps: cfg.warmup_steps,
        batch_c: cfg.batch_c,
        batch_u: cfg.batch_u,
        n_out: 0,
        seed: cfg.seed,
    }
}

fn config(o: &CmTrainOptions) -> Result<TrainConfig, Fail> {
    let bad = |m: String| Fail(CmStatus::InvalidArgument, m);
    let regime = match o.regime {
        CM_REGIME_CONSTRAINTMATCH => Regime::ConstraintMatch,
        CM_REGIME_CONSTRAINED => Regime::Constrained,
        CM_REGIME_NAIVE_PL => Regime::NaivePl,
        CM_REGIME_FULLY_CONSTRAINED => Regime::FullyConstrained,
        r => return Err(bad(format!("unknown regime {r}"))),
    };
    let mode = match o.selection {
        CM_SELECTION_ENTROPY => SelectionMode::Informativeness,
        CM_SELECTION_CONFIDENCE => SelectionMode::Confidence,
        s => return Err(bad(format!("unknown selection mode {s}"))),
    };
    let mut cfg = TrainConfig {
        regime,
        lambda: o.lambda,
        soft_pc: o.soft,
        mu: o.mu,
        eta: o.eta,
        total_steps: o.total_steps,
        warmup_steps: o.warmup_steps,
        batch_c: o.batch_c,
        batch_u: o.batch_u,
        n_out: (o.n_out > 0).then_some(o.n_out),
        seed: o.seed,
        ..TrainConfig::default()
    };
    cfg.selection.mode = mode;
    cfg.selection.tau = o.tau;
    Ok(cfg)
}

/// Trains a model. `constraints` may be NULL for the fully constrained
/// regime, which draws pairs from the labels.
///
/// # Safety
/// `ds` and `opts` must be valid, `constraints` NULL or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_train(
    ds: *const CmDataset,
    constraints: *const CmConstraints,
    opts: *const CmTrainOptions,
    out: *mut *mut CmModel,
) -> CmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let cfg = config(deref(opts, "options")?)?;
        let pairs = constraints.as_ref().map_or(&[][..], |c| &c.0[..]);
        let outcome = train(&ds.0, pairs, &cfg)?;
        put(out, CmModel(outcome.model))
    })
}

/// Number of output clusters; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_model_n_out(m: *const CmModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.n_out())
}

/// Expected feature dimension; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_model_input_dim(m: *const CmModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Writes the argmax cluster of each of the `n` rows into `out_labels`.
///
/// # Safety
/// `features` must hold `n * d` doubles and `out_labels` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn cm_model_predict(
    m: *const CmModel,
    features: *const f64,
    n: usize,
    d: usize,
    out_labels: *mut usize,
) -> CmStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let x = matrix(features, n, d)?;
        if out_labels.is_null() {
            return Err(null("output buffer"));
        }
        let preds = m.0.predict(x.view())?;
        std::slice::from_raw_parts_mut(out_labels, n).copy_from_slice(&preds);
        Ok(())
    })
}

/// Writes the row-major `n x n_out` cluster probabilities into `out_probs`.
///
/// # Safety
/// `features` must hold `n * d` doubles and `out_probs` room for
/// `n * n_out`.
#[no_mangle]
pub unsafe extern "C" fn cm_model_predict_proba(
    m: *const CmModel,
    features: *const f64,
    n: usize,
    d: usize,
    out_probs: *mut f64,
) -> CmStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let x = matrix(features, n, d)?;
        if out_probs.is_null() {
            return Err(null("output buffer"));
        }
        let probs = m.0.forward_batch(x.view())?;
        let out = std::slice::from_raw_parts_mut(out_probs, n * m.0.n_out());
        for (dst, src) in out.iter_mut().zip(probs.iter()) {
            *dst = *src;
        }
        Ok(())
    })
}

/// Scores the model on a labeled dataset.
///
/// # Safety
/// `m` and `ds` must be live handles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_model_evaluate(
    m: *const CmModel,
    ds: *const CmDataset,
    out: *mut CmEvalReport,
) -> CmStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let ds = deref(ds, "dataset")?;
        let labels = ds.0.labels().ok_or(Error::UnlabeledDataset)?;
        let preds = m.0.predict(ds.0.features())?;
        let r = evaluate(&preds, labels, ds.0.num_classes(), m.0.n_out(), ds.0.split())?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = CmEvalReport { acc: r.acc, nmi: r.nmi, ari: r.ari };
        Ok(())
    })
}

/// Scores raw cluster assignments against labels. Clusters beyond
/// `num_classes` that cannot be matched count as errors.
///
/// # Safety
/// `preds` and `labels` must each hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_evaluate(
    preds: *const usize,
    labels: *const usize,
    n: usize,
    num_classes: usize,
    n_out: usize,
    out: *mut CmEvalReport,
) -> CmStatus {
    guard(|| {
        if preds.is_null() || labels.is_null() {
            return Err(null("input array"));
        }
        let p = std::slice::from_raw_parts(preds, n);
        let l = std::slice::from_raw_parts(labels, n);
        let r = evaluate(p, l, num_classes, n_out, Split::Test)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = CmEvalReport { acc: r.acc, nmi: r.nmi, ari: r.ari };
        Ok(())
    })
}

/// Writes a JSON checkpoint.
///
/// # Safety
/// `m` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cm_model_save(m: *const CmModel, path: *const c_char) -> CmStatus {
    guard(|| {
        let m = deref(m, "model")?;
        save_checkpoint(path_arg(path)?, &m.0, None)?;
        Ok(())
    })
}

/// Reads a JSON checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_model_load(path: *const c_char, out: *mut *mut CmModel) -> CmStatus {
    guard(|| {
        let (model, _) = load_checkpoint(path_arg(path)?)?;
        put(out, CmModel(model))
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cm_model_free(m: *mut CmModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
