//! C ABI over catalogs, scene graphs, checkpoints and one-step prediction.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Functions return an [`RdStatus`]; on failure
//! [`rd_last_error_message`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use routine_dynamics::checkpoint::Checkpoint;
use routine_dynamics::eval::Predictor;
use routine_dynamics::scene::{self, CatalogFile, NodeCatalog, NodeId, ProbGraph, RelocationSet, SceneGraph};
use routine_dynamics::Error;

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraph = 3,
    CatalogMismatch = 4,
    Checkpoint = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

pub struct RdCatalog(Arc<NodeCatalog>);
pub struct RdGraph(SceneGraph);
pub struct RdProbGraph(ProbGraph);
pub struct RdRelocations(Vec<[usize; 3]>);
pub struct RdModel(Checkpoint);

/// Parent index stored for the root.
pub const RD_NO_PARENT: i64 = -1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RdStatus {
    match e {
        Error::CatalogMismatch => RdStatus::CatalogMismatch,
        Error::InvalidGraph(_) | Error::InvalidCatalog(_) | Error::Cycle(_) | Error::OriginMismatch { .. } => {
            RdStatus::InvalidGraph
        }
        Error::Checkpoint(_) => RdStatus::Checkpoint,
        Error::Io { .. } => RdStatus::Io,
        Error::Config(_) | Error::Parse { .. } | Error::Json(_) | Error::TimestampMismatch { .. } => {
            RdStatus::InvalidArgument
        }
        _ => RdStatus::Internal,
    }
}

struct Fail(RdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RdStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RdStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn rd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a catalog file (`{"nodes": [...]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_catalog_from_json(json: *const c_char, out: *mut *mut RdCatalog) -> RdStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let file: CatalogFile = serde_json::from_str(text).map_err(Error::from)?;
        put(out, RdCatalog(Arc::new(NodeCatalog::new(file.nodes)?)))
    })
}

/// # Safety
/// `catalog` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_catalog_len(catalog: *const RdCatalog, out: *mut usize) -> RdStatus {
    guard(|| write(out, as_ref(catalog, "catalog")?.0.len()))
}

/// # Safety
/// `catalog` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_catalog_free(catalog: *mut RdCatalog) {
    free(catalog)
}

/// Builds a graph from one parent index per node; [`RD_NO_PARENT`] marks
/// the root. The graph is not required to be valid; see
/// [`rd_graph_validate`].
///
/// # Safety
/// `parents` must point to `n` readable values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_graph_new(
    catalog: *const RdCatalog,
    parents: *const i64,
    n: usize,
    minute: u32,
    out: *mut *mut RdGraph,
) -> RdStatus {
    guard(|| {
        let catalog = &as_ref(catalog, "catalog")?.0;
        if parents.is_null() {
            return Err(null("parents"));
        }
        let raw = std::slice::from_raw_parts(parents, n);
        let parents = raw
            .iter()
            .map(|&p| match p {
                RD_NO_PARENT => Ok(None),
                p if p >= 0 && (p as usize) < catalog.len() => Ok(Some(NodeId(p as usize))),
                p => Err(invalid(format!("parent index {p} out of range"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        put(out, RdGraph(SceneGraph::new(catalog.clone(), parents, minute)?))
    })
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_graph_free(graph: *mut RdGraph) {
    free(graph)
}

/// Writes whether the graph is a valid in-tree.
///
/// # Safety
/// `graph` must be a live handle and `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_graph_validate(graph: *const RdGraph, valid: *mut bool) -> RdStatus {
    guard(|| write(valid, as_ref(graph, "graph")?.0.validate().is_valid()))
}

/// Writes the parent of `node`, or [`RD_NO_PARENT`].
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_graph_parent(graph: *const RdGraph, node: usize, out: *mut i64) -> RdStatus {
    guard(|| {
        let g = &as_ref(graph, "graph")?.0;
        if node >= g.len() {
            return Err(invalid(format!("node {node} out of range")));
        }
        write(out, g.parent(NodeId(node)).map_or(RD_NO_PARENT, |p| p.index() as i64))
    })
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_graph_minute(graph: *const RdGraph, out: *mut u32) -> RdStatus {
    guard(|| write(out, as_ref(graph, "graph")?.0.minute()))
}

/// Relocations taking `from` to `to`.
///
/// # Safety
/// Both graphs must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_diff(from: *const RdGraph, to: *const RdGraph, out: *mut *mut RdRelocations) -> RdStatus {
    guard(|| {
        let set: RelocationSet = scene::diff(&as_ref(from, "from")?.0, &as_ref(to, "to")?.0)?;
        let triples = set
            .iter()
            .map(|r| [r.object.index(), r.origin.index(), r.destination.index()])
            .collect();
        put(out, RdRelocations(triples))
    })
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_relocations_len(set: *const RdRelocations, out: *mut usize) -> RdStatus {
    guard(|| write(out, as_ref(set, "set")?.0.len()))
}

/// Writes the `index`-th relocation as node indices.
///
/// # Safety
/// `set` must be a live handle and the three outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rd_relocations_get(
    set: *const RdRelocations,
    index: usize,
    object: *mut usize,
    origin: *mut usize,
    destination: *mut usize,
) -> RdStatus {
    guard(|| {
        let [o, a, b] = *as_ref(set, "set")?
            .0
            .get(index)
            .ok_or_else(|| invalid(format!("relocation {index} out of range")))?;
        write(object, o)?;
        write(origin, a)?;
        write(destination, b)
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_relocations_free(set: *mut RdRelocations) {
    free(set)
}

/// Loads a checkpoint of any predictor kind.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_model_load(path: *const c_char, out: *mut *mut RdModel) -> RdStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, RdModel(Checkpoint::load(Path::new(path))?))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_model_free(model: *mut RdModel) {
    free(model)
}

/// Parent distribution one step after `graph`, observed on `day`.
///
/// # Safety
/// `model` and `graph` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_model_predict_step(
    model: *const RdModel,
    graph: *const RdGraph,
    day: u32,
    out: *mut *mut RdProbGraph,
) -> RdStatus {
    guard(|| {
        let model = &as_ref(model, "model")?.0;
        let g = &as_ref(graph, "graph")?.0;
        if model.catalog_digest != g.catalog().digest() {
            return Err(Error::CatalogMismatch.into());
        }
        let p = model.model.forecast(g, day, 1)?.pop().expect("one step");
        put(out, RdProbGraph(p))
    })
}

/// Probability that `parent` holds `node`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_prob(p: *const RdProbGraph, node: usize, parent: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let p = &as_ref(p, "p")?.0;
        let n = p.catalog().len();
        if node >= n || parent >= n {
            return Err(invalid("node index out of range"));
        }
        write(out, p.prob(NodeId(node), NodeId(parent)))
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_prob_free(p: *mut RdProbGraph) {
    free(p)
}

/// Most likely valid in-tree under `p`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_posterior(p: *const RdProbGraph, out: *mut *mut RdGraph) -> RdStatus {
    guard(|| put(out, RdGraph(scene::posterior(&as_ref(p, "p")?.0))))
}
