//! C interface to the `dgi` crate.
//!
//! Graphs and models are opaque heap handles released with their `_free`
//! functions. Every fallible call returns a [`DgiStatus`]; on failure the
//! message is available from [`dgi_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dgi::graph::{load_dataset, CorruptionConfig, CorruptionKind, Graph};
use dgi::model::{encode, load_checkpoint, save_checkpoint, train, DgiParams, EncoderSpec, EncoderVariant, TrainConfig};
use dgi::tensor::DenseMatrix;
use dgi::theory::{run_suite, Fault};
use dgi::DgiError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    Checkpoint = 7,
    Assertion = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgiEncoder {
    Gcn1 = 0,
    MeanpoolSkip3 = 1,
    MeanpoolDenseSkip3 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgiCorruption {
    FeatureShuffle = 0,
    EdgeXor = 1,
    Both = 2,
}

/// Training options; fill with [`dgi_train_options_default`] first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DgiTrainOptions {
    pub encoder: DgiEncoder,
    pub hidden_dim: usize,
    pub lr: f64,
    pub max_epochs: usize,
    /// 0 disables early stopping.
    pub patience: usize,
    pub corruption: DgiCorruption,
    pub rho: f64,
    pub seed: u64,
}

/// Opaque graph handle.
pub struct DgiGraph {
    inner: Graph,
}

/// Opaque model handle.
pub struct DgiModel {
    params: DgiParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &DgiError) -> DgiStatus {
    match err {
        DgiError::Parse { .. } => DgiStatus::Parse,
        DgiError::IndexOutOfRange { .. } | DgiError::InvalidArgument(_) | DgiError::Config { .. } => {
            DgiStatus::InvalidArgument
        }
        DgiError::DimensionMismatch { .. } => DgiStatus::DimensionMismatch,
        DgiError::NonFinite(_) => DgiStatus::NonFinite,
        DgiError::Checkpoint(_) => DgiStatus::Checkpoint,
        DgiError::Assertion(_) => DgiStatus::Assertion,
        DgiError::Io(_) => DgiStatus::Io,
    }
}

enum Failure {
    Status(DgiStatus, String),
    Dgi(DgiError),
}

impl From<DgiError> for Failure {
    fn from(e: DgiError) -> Self {
        Failure::Dgi(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DgiStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DgiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgiStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Dgi(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DgiStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure::Status(DgiStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dgi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn dgi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_load(path: *const c_char, out: *mut *mut DgiGraph) -> DgiStatus {
    guard(|| {
        let graph = load_dataset(path_arg(path)?)?;
        write_out(out, DgiGraph { inner: graph })
    })
}

/// Builds an unlabeled graph from row-major `n × f` features and `m`
/// undirected edges given as `2m` node indices.
///
/// # Safety
/// `features` must hold `n * f` doubles and `edges` `2 * m` indices (either
/// may be NULL when its length is zero); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_from_edges(
    n: usize,
    f: usize,
    features: *const f64,
    m: usize,
    edges: *const usize,
    out: *mut *mut DgiGraph,
) -> DgiStatus {
    guard(|| {
        let len = n.checked_mul(f).ok_or_else(|| Failure::Status(DgiStatus::InvalidArgument, "n * f overflows".into()))?;
        let data = match (len, features.is_null()) {
            (0, _) => Vec::new(),
            (_, true) => return Err(null("features")),
            (_, false) => std::slice::from_raw_parts(features, len).to_vec(),
        };
        let pairs = match (m, edges.is_null()) {
            (0, _) => Vec::new(),
            (_, true) => return Err(null("edges")),
            (_, false) => std::slice::from_raw_parts(edges, 2 * m)
                .chunks_exact(2)
                .map(|p| (p[0], p[1]))
                .collect(),
        };
        let graph = Graph::new(DenseMatrix::new(n, f, data)?, pairs)?;
        write_out(out, DgiGraph { inner: graph })
    })
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_node_count(graph: *const DgiGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// Feature dimension, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_feature_dim(graph: *const DgiGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.feature_dim())
}

/// Undirected edge count, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_edge_count(graph: *const DgiGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// Scales every feature row to sum to one (all-zero rows are kept).
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_row_normalize(graph: *mut DgiGraph) -> DgiStatus {
    guard(|| {
        let g = graph.as_mut().ok_or_else(|| null("graph"))?;
        let x = g.inner.row_normalized_features();
        g.inner = g.inner.clone().with_features(x)?;
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgi_graph_free(graph: *mut DgiGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

fn variant(e: DgiEncoder) -> EncoderVariant {
    match e {
        DgiEncoder::Gcn1 => EncoderVariant::Gcn1,
        DgiEncoder::MeanpoolSkip3 => EncoderVariant::MeanpoolSkip3,
        DgiEncoder::MeanpoolDenseSkip3 => EncoderVariant::MeanpoolDenseSkip3,
    }
}

/// Defaults: one GCN layer, width 512, lr 0.001, at most 10000 epochs,
/// patience 20, feature-shuffle negatives, seed 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_train_options_default(out: *mut DgiTrainOptions) -> DgiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("options"))?;
        *out = DgiTrainOptions {
            encoder: DgiEncoder::Gcn1,
            hidden_dim: 512,
            lr: 0.001,
            max_epochs: 10_000,
            patience: 20,
            corruption: DgiCorruption::FeatureShuffle,
            rho: 0.0,
            seed: 0,
        };
        Ok(())
    })
}

/// Freshly initialized (untrained) model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_init(
    encoder: DgiEncoder,
    input_dim: usize,
    hidden_dim: usize,
    seed: u64,
    out: *mut *mut DgiModel,
) -> DgiStatus {
    guard(|| {
        let spec = EncoderSpec::new(variant(encoder), input_dim, hidden_dim)?;
        let params = DgiParams::init(spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
        write_out(out, DgiModel { params })
    })
}

/// Trains on `graph` and returns the best model.
///
/// # Safety
/// `graph` and `options` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_train(
    graph: *const DgiGraph,
    options: *const DgiTrainOptions,
    out: *mut *mut DgiModel,
) -> DgiStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let kind = match o.corruption {
            DgiCorruption::FeatureShuffle => CorruptionKind::FeatureShuffle,
            DgiCorruption::EdgeXor => CorruptionKind::EdgeXor,
            DgiCorruption::Both => CorruptionKind::Both,
        };
        let cfg = TrainConfig {
            encoder: EncoderSpec::new(variant(o.encoder), g.inner.feature_dim(), o.hidden_dim)?,
            corruption: CorruptionConfig {
                kind,
                rho: o.rho,
                dropout_p: 0.0,
                seed: o.seed,
            },
            lr: o.lr,
            max_epochs: o.max_epochs,
            patience: (o.patience > 0).then_some(o.patience),
            seed: o.seed,
        };
        let report = train(&g.inner, &cfg)?;
        write_out(out, DgiModel { params: report.params })
    })
}

/// Embedding width, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_hidden_dim(model: *const DgiModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.spec().hidden_dim)
}

/// Expected feature dimension, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_input_dim(model: *const DgiModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.spec().input_dim)
}

/// Writes row-major `node_count × hidden_dim` embeddings into `out`.
///
/// # Safety
/// `model` and `graph` must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgi_encode(
    model: *const DgiModel,
    graph: *const DgiGraph,
    out: *mut f64,
    out_len: usize,
) -> DgiStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let h = encode(&g.inner, &m.params)?;
        if out_len != h.len() {
            return Err(Failure::Status(
                DgiStatus::DimensionMismatch,
                format!("output buffer holds {out_len} values, embeddings need {}", h.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(h.as_slice());
        Ok(())
    })
}

/// # Safety
/// `model` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_save(model: *const DgiModel, path: *const c_char, seed: u64) -> DgiStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        save_checkpoint(path_arg(path)?, &m.params, seed)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_load(path: *const c_char, out: *mut *mut DgiModel) -> DgiStatus {
    guard(|| {
        let ckpt = load_checkpoint(path_arg(path)?)?;
        write_out(out, DgiModel { params: ckpt.params })
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgi_model_free(model: *mut DgiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the exact theory suite; `failed` (optional) receives the number of
/// failing cases. A non-zero `halve_bound` deliberately corrupts the bound.
///
/// # Safety
/// `failed` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn dgi_theory_suite(halve_bound: i32, failed: *mut usize) -> DgiStatus {
    guard(|| {
        let report = run_suite(if halve_bound != 0 { Fault::HalveBound } else { Fault::None });
        let n = report.failures().count();
        if let Some(f) = failed.as_mut() {
            *f = n;
        }
        if n > 0 {
            return Err(Failure::Status(DgiStatus::Assertion, format!("{n} theory cases failed")));
        }
        Ok(())
    })
}
