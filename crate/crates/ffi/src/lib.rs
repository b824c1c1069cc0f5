//! C ABI over `conres`.
//!
//! Graphs live behind an opaque `ConresGraph` handle. Every fallible call
//! returns a `ConresStatus`; on failure a message describing the most recent
//! error on the calling thread is available from `conres_last_error`.
//! Vertex ids are 0-based and matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;

use conres::builders::{cycle, dumbbell, wheatstone, DumbbellLayout};
use conres::conductance::conductance_matrix;
use conres::decompose::{is_consistent, nullity};
use conres::io::{DocumentError, GraphDocument};
use conres::meanpath::{mc_mean_path, omega0, Provenance, Step, WalkConfig};
use conres::resistance::{
    chung_connection_resistance, classical_effective_resistance, resistance_matrix,
    scalar_connection_resistance,
};
use conres::{ConnectionGraph, Error, PairMatrix, Signature, WeightedGraph};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConresStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON or text that is not UTF-8.
    Parse = 2,
    /// Input violates a precondition (bad ids, non-orthogonal signature, ...).
    Validation = 3,
    /// A numerical routine failed on valid input.
    Computation = 4,
    /// The caller's output buffer is too small.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque connection graph.
pub struct ConresGraph {
    inner: ConnectionGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(ConresStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            ConresStatus::Validation
        } else {
            ConresStatus::Computation
        };
        Failure(status, e.to_string())
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Invalid(e) => e.into(),
            other => Failure(ConresStatus::Parse, other.to_string()),
        }
    }
}

fn null() -> Failure {
    Failure(ConresStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ConresStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConresStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ConresStatus::Panic
        }
    }
}

unsafe fn graph<'a>(g: *const ConresGraph) -> Result<&'a ConnectionGraph, Failure> {
    g.as_ref().map(|g| &g.inner).ok_or_else(null)
}

unsafe fn emit(out: *mut *mut ConresGraph, cg: ConnectionGraph) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(ConresGraph { inner: cg }));
    Ok(())
}

unsafe fn write_scalar<T>(out: *mut T, x: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = x;
    Ok(())
}

unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    let need = m.len();
    if len < need {
        return Err(Failure(
            ConresStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {need}"),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            dst[r * m.ncols() + c] = m[(r, c)];
        }
    }
    Ok(())
}

unsafe fn write_pair(m: &PairMatrix, out: *mut f64, len: usize) -> Result<(), Failure> {
    write_matrix(m.full(), out, len)
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn conres_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn conres_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a `conres/1` JSON document (1-based vertex ids) into a new handle.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_from_json(
    json: *const c_char,
    out: *mut *mut ConresGraph,
) -> ConresStatus {
    guard(|| {
        if json.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(ConresStatus::Parse, e.to_string()))?;
        let cg = GraphDocument::parse(text)?.to_graph()?;
        emit(out, cg)
    })
}

/// Build a graph from `m` edges `(us[k], vs[k])` with weights `ws[k]` and
/// `d x d` signatures stored consecutively in `sigmas` (row-major, oriented
/// `us[k] -> vs[k]`).
///
/// # Safety
/// `us`, `vs`, `ws` must hold `m` values and `sigmas` `m * d * d` values.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_from_arrays(
    n: usize,
    d: usize,
    m: usize,
    us: *const usize,
    vs: *const usize,
    ws: *const f64,
    sigmas: *const f64,
    out: *mut *mut ConresGraph,
) -> ConresStatus {
    guard(|| {
        if m > 0 && (us.is_null() || vs.is_null() || ws.is_null() || sigmas.is_null()) {
            return Err(null());
        }
        if d == 0 {
            return Err(Error::ZeroDimension.into());
        }
        let (us, vs, ws, sigmas) = if m == 0 {
            (&[][..], &[][..], &[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(us, m),
                std::slice::from_raw_parts(vs, m),
                std::slice::from_raw_parts(ws, m),
                std::slice::from_raw_parts(sigmas, m * d * d),
            )
        };
        let g = WeightedGraph::new(n, (0..m).map(|k| (us[k], vs[k], ws[k])))?;
        let sig = Signature::new(
            d,
            (0..m).map(|k| {
                (
                    us[k],
                    vs[k],
                    DMatrix::from_row_slice(d, d, &sigmas[k * d * d..(k + 1) * d * d]),
                )
            }),
        )?;
        emit(out, ConnectionGraph::new(g, sig)?)
    })
}

/// Cycle on `n` vertices with a planar rotation by `theta` on edge (0,1).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_cycle(
    n: usize,
    theta: f64,
    out: *mut *mut ConresGraph,
) -> ConresStatus {
    guard(|| emit(out, cycle(n, theta)?))
}

/// Wheatstone bridge with a 3D rotation by `theta` on edge (1,3).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_wheatstone(
    theta: f64,
    out: *mut *mut ConresGraph,
) -> ConresStatus {
    guard(|| emit(out, wheatstone(theta, None)?))
}

/// Two `K_m` cliques joined by the bridge 0-1-2 with rotations on (0,1) and (1,2).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_dumbbell(
    m: usize,
    theta12: f64,
    theta23: f64,
    out: *mut *mut ConresGraph,
) -> ConresStatus {
    guard(|| emit(out, dumbbell(m, theta12, theta23, DumbbellLayout::Bridge)?))
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `g` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_free(g: *mut ConresGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of vertices, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_n(g: *const ConresGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n())
}

/// Signature dimension, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_d(g: *const ConresGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.d())
}

/// Serialize to a `conres/1` JSON document; free the result with
/// `conres_string_free`.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_graph_to_json(
    g: *const ConresGraph,
    out: *mut *mut c_char,
) -> ConresStatus {
    guard(|| {
        let cg = graph(g)?;
        let text = CString::new(GraphDocument::from_graph(cg, None).to_json())
            .expect("json has no nul bytes");
        write_scalar(out, text.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn conres_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Classical effective resistance between `i` and `j` of the underlying graph.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_classical_resistance(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
) -> ConresStatus {
    guard(|| {
        write_scalar(
            out,
            classical_effective_resistance(graph(g)?.graph(), i, j)?,
        )
    })
}

/// Scalar connection resistance `(Tr C_ii^-1 + Tr C_jj^-1) / 2d`.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_scalar_resistance(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
) -> ConresStatus {
    guard(|| write_scalar(out, scalar_connection_resistance(graph(g)?, i, j)?))
}

/// Chung's connection resistance; defined for edges, or any pair when the
/// signature is consistent.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_chung_resistance(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
) -> ConresStatus {
    guard(|| write_scalar(out, chung_connection_resistance(graph(g)?, i, j)?))
}

/// `2d x 2d` conductance matrix of the pair, ordered `(i, j)`; `len >= 4 d^2`.
///
/// # Safety
/// `g` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn conres_conductance_matrix(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
    len: usize,
) -> ConresStatus {
    guard(|| write_pair(&conductance_matrix(graph(g)?, i, j)?, out, len))
}

/// `2d x 2d` resistance matrix of the pair, ordered `(i, j)`; `len >= 4 d^2`.
///
/// # Safety
/// `g` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn conres_resistance_matrix(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
    len: usize,
) -> ConresStatus {
    guard(|| write_pair(&resistance_matrix(graph(g)?, i, j)?, out, len))
}

/// Mean path signature of walks from `i` stopped at `j`; `len >= d^2`.
///
/// # Safety
/// `g` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn conres_omega0(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    out: *mut f64,
    len: usize,
) -> ConresStatus {
    guard(|| write_matrix(&omega0(graph(g)?, i, j)?.value, out, len))
}

/// Monte Carlo estimate of `conres_omega0` from `samples` walks. `stderr_out`
/// may be null; otherwise it receives the entrywise standard errors.
///
/// # Safety
/// `g` must be a live handle; `out` and a non-null `stderr_out` must hold
/// `len` values.
#[no_mangle]
pub unsafe extern "C" fn conres_omega0_monte_carlo(
    g: *const ConresGraph,
    i: usize,
    j: usize,
    samples: usize,
    seed: u64,
    out: *mut f64,
    stderr_out: *mut f64,
    len: usize,
) -> ConresStatus {
    guard(|| {
        let cg = graph(g)?;
        let cfg = WalkConfig::with_default_cap(cg.graph(), samples, seed)?;
        let est = mc_mean_path(cg, i, j, Step::Zero, None, &cfg)?;
        write_matrix(&est.value, out, len)?;
        if let (false, Provenance::MonteCarlo { stderr, .. }) =
            (stderr_out.is_null(), &est.provenance)
        {
            write_matrix(stderr, stderr_out, len)?;
        }
        Ok(())
    })
}

/// Dimension of the kernel of the connection Laplacian.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_nullity(g: *const ConresGraph, out: *mut usize) -> ConresStatus {
    guard(|| write_scalar(out, nullity(graph(g)?)))
}

/// Whether every cycle of the signature has identity holonomy.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conres_is_consistent(
    g: *const ConresGraph,
    out: *mut bool,
) -> ConresStatus {
    guard(|| write_scalar(out, is_consistent(graph(g)?)))
}
