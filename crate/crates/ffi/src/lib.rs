//! C ABI over the thinlayer toolkit.
//!
//! Every fallible call returns a [`TlStatus`]; on failure the message is kept per thread and
//! can be copied out with [`tl_last_error_message`]. Handles are opaque and released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use thinlayer::cell_static::{assemble_effective_tensors, solve_static_correctors, CellModel, EffectiveCoefficients, Normalization};
use thinlayer::harness::{emit_report, run_stages, Command, ReportFormat, RunConfig, RunReport};
use thinlayer::mesh::{CellMeshSpec, Hole};
use thinlayer::tensor::Material;
use thinlayer::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlHoleKind {
    None = 0,
    Ellipsoid = 1,
    Box = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlNormalization {
    VolumeNormalized = 0,
    Unnormalized = 1,
}

/// Which effective coefficient block to copy.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlTensor {
    /// In-plane membrane tensor A*.
    AStar = 0,
    APlate = 1,
    BPlate = 2,
    CPlate = 3,
}

/// Reference cell with its assembled operators.
pub struct TlCell {
    model: CellModel,
}

pub struct TlCoefficients {
    inner: EffectiveCoefficients,
}

pub struct TlReport {
    inner: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlStatus {
    match e {
        Error::Config { .. } => TlStatus::Config,
        Error::Io(_) => TlStatus::Io,
        Error::InvalidParameter(_) | Error::Geometry(_) | Error::DimensionMismatch { .. } | Error::Missing(_) | Error::GridMismatch(_) => {
            TlStatus::InvalidArgument
        }
        Error::Stage { source, .. } => status_of(source),
        Error::Singular(_) | Error::Solver(_) => TlStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TlStatus, String)>) -> TlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TlStatus::Panic
        }
    }
}

fn lift(e: Error) -> (TlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TlStatus, String) {
    (TlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error of this thread into `buf` (NUL-terminated) and returns its length
/// without the terminator; 0 when there is no error. With `cap` too small nothing is copied.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tl_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && cap >= bytes.len() {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
            }
            bytes.len() - 1
        }
    })
}

/// Builds a cell of dimension 2 or 3 with an isotropic material. `center` and `half` hold
/// `dimension` values each and may be null for `TL_HOLE_KIND_NONE`.
///
/// # Safety
/// `center` and `half` must be null or point to `dimension` readable doubles; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_cell_new(
    dimension: usize,
    resolution: usize,
    hole: TlHoleKind,
    center: *const f64,
    half: *const f64,
    lambda: f64,
    mu: f64,
    rho: f64,
    out: *mut *mut TlCell,
) -> TlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !(2..=3).contains(&dimension) {
            return Err((TlStatus::InvalidArgument, format!("dimension must be 2 or 3, got {dimension}")));
        }
        let read = |p: *const f64, what: &str| -> Result<Vec<f64>, (TlStatus, String)> {
            if p.is_null() {
                return Err(null(what));
            }
            Ok(std::slice::from_raw_parts(p, dimension).to_vec())
        };
        let hole = match hole {
            TlHoleKind::None => Hole::None,
            TlHoleKind::Ellipsoid => Hole::Ellipsoid { center: read(center, "center")?, half_axes: read(half, "half")? },
            TlHoleKind::Box => Hole::Box { center: read(center, "center")?, half_widths: read(half, "half")? },
        };
        let spec = CellMeshSpec::new(dimension, resolution, hole);
        let material = Material::isotropic(lambda, mu, rho, dimension).map_err(lift)?;
        let model = CellModel::new(&spec, &material).map_err(lift)?;
        *out = Box::into_raw(Box::new(TlCell { model }));
        Ok(())
    })
}

/// # Safety
/// `cell` must be null or a handle from [`tl_cell_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_cell_free(cell: *mut TlCell) {
    if !cell.is_null() {
        drop(Box::from_raw(cell));
    }
}

/// Number of removed voxels and the solid measure |Y₀|.
///
/// # Safety
/// `cell` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_cell_stats(cell: *const TlCell, removed: *mut usize, measure: *mut f64) -> TlStatus {
    guard(|| {
        let c = cell.as_ref().ok_or_else(|| null("cell"))?;
        if removed.is_null() || measure.is_null() {
            return Err(null("output"));
        }
        *removed = c.model.mesh.num_removed();
        *measure = c.model.mesh.measure();
        Ok(())
    })
}

/// Solves the static cell problems and assembles the effective coefficients.
///
/// # Safety
/// `cell` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_cell_coefficients(cell: *const TlCell, normalization: TlNormalization, out: *mut *mut TlCoefficients) -> TlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let c = cell.as_ref().ok_or_else(|| null("cell"))?;
        let norm = match normalization {
            TlNormalization::VolumeNormalized => Normalization::VolumeNormalized,
            TlNormalization::Unnormalized => Normalization::Unnormalized,
        };
        let set = solve_static_correctors(&c.model).map_err(lift)?;
        let inner = assemble_effective_tensors(&set, &c.model, norm).map_err(lift)?;
        *out = Box::into_raw(Box::new(TlCoefficients { inner }));
        Ok(())
    })
}

/// # Safety
/// `coeffs` must be null or a handle from [`tl_cell_coefficients`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_coefficients_free(coeffs: *mut TlCoefficients) {
    if !coeffs.is_null() {
        drop(Box::from_raw(coeffs));
    }
}

/// Copies a Voigt block row-major into `buf`. `rows` and `cols` always receive the shape;
/// returns `TL_STATUS_BUFFER_TOO_SMALL` when `cap < rows * cols`.
///
/// # Safety
/// `coeffs` must be a live handle; `buf` must point to `cap` writable doubles (or be null
/// with `cap = 0`); `rows` and `cols` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_coefficients_matrix(
    coeffs: *const TlCoefficients,
    which: TlTensor,
    buf: *mut f64,
    cap: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> TlStatus {
    guard(|| {
        let c = &coeffs.as_ref().ok_or_else(|| null("coeffs"))?.inner;
        if rows.is_null() || cols.is_null() {
            return Err(null("shape output"));
        }
        let m = match which {
            TlTensor::AStar => c.a_star.voigt(),
            TlTensor::APlate => c.a_plate.voigt(),
            TlTensor::BPlate => &c.b_plate,
            TlTensor::CPlate => c.c_plate.voigt(),
        };
        *rows = m.nrows();
        *cols = m.ncols();
        let n = m.nrows() * m.ncols();
        if cap < n || buf.is_null() {
            return Err((TlStatus::BufferTooSmall, format!("need {n} doubles, got {cap}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, n);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[i * m.ncols() + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Effective interface density ρ̄.
///
/// # Safety
/// `coeffs` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_coefficients_rho_bar(coeffs: *const TlCoefficients, out: *mut f64) -> TlStatus {
    guard(|| {
        let c = coeffs.as_ref().ok_or_else(|| null("coeffs"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.inner.rho_bar;
        Ok(())
    })
}

/// Runs every stage present in the JSON config at `path`. When `out_dir` is non-null the CSV
/// bundle and summary are written there.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_dir` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_run_config(path: *const c_char, out_dir: *const c_char, out: *mut *mut TlReport) -> TlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = cstr(path, "path")?;
        let cfg = RunConfig::from_path(Path::new(path)).map_err(lift)?;
        run_and_emit(&cfg, out_dir, out)
    })
}

/// Same as [`tl_run_config`] with the config given as a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out_dir` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_run_config_json(json: *const c_char, out_dir: *const c_char, out: *mut *mut TlReport) -> TlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = RunConfig::from_json(cstr(json, "json")?).map_err(lift)?;
        run_and_emit(&cfg, out_dir, out)
    })
}

unsafe fn run_and_emit(cfg: &RunConfig, out_dir: *const c_char, out: *mut *mut TlReport) -> Result<(), (TlStatus, String)> {
    let inner = run_stages(cfg, &Command::Report.stages(cfg)).map_err(lift)?;
    if !out_dir.is_null() {
        emit_report(&inner, ReportFormat::CsvBundle, Path::new(cstr(out_dir, "out_dir")?)).map_err(lift)?;
    }
    *out = Box::into_raw(Box::new(TlReport { inner }));
    Ok(())
}

/// # Safety
/// `report` must be null or a handle from a run function not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_report_free(report: *mut TlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Invariant ledger size and number of failed entries.
///
/// # Safety
/// `report` must be a live handle; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn tl_report_invariants(report: *const TlReport, total: *mut usize, failed: *mut usize) -> TlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if total.is_null() || failed.is_null() {
            return Err(null("output"));
        }
        *total = r.inner.invariants.len();
        *failed = r.inner.invariants.iter().filter(|c| !c.pass).count();
        Ok(())
    })
}

/// Number of ε-ladder rows; `bulk_l2` (capacity `cap`) receives the bulk errors in ladder order.
///
/// # Safety
/// `report` must be a live handle; `bulk_l2` null or `cap` writable doubles; `rows` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_report_ladder(report: *const TlReport, bulk_l2: *mut f64, cap: usize, rows: *mut usize) -> TlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if rows.is_null() {
            return Err(null("rows"));
        }
        let ladder = &r.inner.ladder;
        *rows = ladder.len();
        if ladder.is_empty() {
            return Ok(());
        }
        if bulk_l2.is_null() || cap < ladder.len() {
            return Err((TlStatus::BufferTooSmall, format!("need {} doubles, got {cap}", ladder.len())));
        }
        for (k, row) in ladder.iter().enumerate() {
            *bulk_l2.add(k) = row.bulk_l2;
        }
        Ok(())
    })
}
