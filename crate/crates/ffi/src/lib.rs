//! C ABI for `qcontrol`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`QcStatus`]; on failure [`qc_last_error`] holds a message for
//! the calling thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use qcontrol::field::{Field, SobolevIndex};
use qcontrol::geometry::build_cutoff;
use qcontrol::grid::Grid;
use qcontrol::hum::{hum_solve_with, HumOptions, HumProblem, HumSolution};
use qcontrol::propagate::free_flow;
use qcontrol::spectral::sobolev_norm;
use qcontrol::Error;

/// Status codes. The nonzero values match the CLI exit codes where the two
/// overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcStatus {
    Ok = 0,
    /// Null pointer or out-of-range argument.
    InvalidArgument = 1,
    /// Input violates a precondition of the library.
    InvalidInput = 2,
    NoConvergence = 3,
    Blowup = 4,
    Io = 5,
    /// The library panicked; the handle arguments are left untouched.
    Panic = 6,
}

/// Grid on the periodic box `[-L, L)^d`.
pub struct QcGrid(Grid);

/// Complex field sampled on a grid.
pub struct QcField(Field);

/// Result of a linear null-control solve.
pub struct QcHumSolution {
    inner: HumSolution,
    relative_terminal_residual: f64,
}

/// Summary numbers of a [`QcHumSolution`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QcHumStats {
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub smallest_ritz: f64,
    pub terminal_residual: f64,
    pub relative_terminal_residual: f64,
    pub control_frames: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QcStatus {
    match e.exit_code() {
        3 => QcStatus::NoConvergence,
        4 => QcStatus::Blowup,
        5 => QcStatus::Io,
        _ => QcStatus::InvalidInput,
    }
}

enum Fail {
    Arg(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcStatus::Ok,
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            QcStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            QcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Arg(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Arg("null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qc_grid_new(dim: usize, n: usize, half_side: f64, out: *mut *mut QcGrid) -> QcStatus {
    guard(|| store(out, QcGrid(Grid::new(dim, n, half_side)?)))
}

/// # Safety
/// `grid` must be null or a handle from [`qc_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qc_grid_free(grid: *mut QcGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points `n^d`; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qc_grid_len(grid: *const QcGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Builds a field from `len` real and imaginary parts in row-major order.
///
/// # Safety
/// `re` and `im` must point to `len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qc_field_from_values(
    grid: *const QcGrid,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut QcField,
) -> QcStatus {
    guard(|| {
        let g = deref(grid, "null grid")?;
        if re.is_null() || im.is_null() {
            return Err(Fail::Arg("null value buffer"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        store(out, QcField(Field::from_values(&g.0, values)?))
    })
}

/// Gaussian `amplitude * exp(-|x - center|² / (2 width²))`; `center` holds
/// `dim` coordinates.
///
/// # Safety
/// `center` must point to `dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_field_gaussian(
    grid: *const QcGrid,
    center: *const f64,
    width: f64,
    amplitude: f64,
    out: *mut *mut QcField,
) -> QcStatus {
    guard(|| {
        let g = deref(grid, "null grid")?;
        if center.is_null() {
            return Err(Fail::Arg("null center"));
        }
        if width.is_nan() || width <= 0.0 {
            return Err(Fail::Arg("width must be positive"));
        }
        let c = std::slice::from_raw_parts(center, g.0.dim());
        store(out, QcField(Field::gaussian(&g.0, c, width, amplitude)))
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qc_field_free(field: *mut QcField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Copies the samples into `re` and `im`, which must hold exactly the
/// field's length.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qc_field_values(field: *const QcField, re: *mut f64, im: *mut f64, len: usize) -> QcStatus {
    guard(|| {
        let f = deref(field, "null field")?;
        if re.is_null() || im.is_null() {
            return Err(Fail::Arg("null value buffer"));
        }
        if len != f.0.values().len() {
            return Err(Fail::Arg("buffer length does not match the field"));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for (i, v) in f.0.values().iter().enumerate() {
            re[i] = v.re;
            im[i] = v.im;
        }
        Ok(())
    })
}

/// `||f||_{H^s}` with weight `(1 + |k|²)^s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_field_sobolev_norm(field: *const QcField, s: f64, out: *mut f64) -> QcStatus {
    guard(|| {
        let f = deref(field, "null field")?;
        if out.is_null() {
            return Err(Fail::Arg("null output pointer"));
        }
        *out = sobolev_norm(&f.0, SobolevIndex::new(s)?);
        Ok(())
    })
}

/// Free Schrödinger flow `e^{itΔ} f` into a new handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_free_flow(field: *const QcField, t: f64, out: *mut *mut QcField) -> QcStatus {
    guard(|| {
        let f = deref(field, "null field")?;
        if !t.is_finite() {
            return Err(Fail::Arg("time must be finite"));
        }
        store(out, QcField(free_flow(&f.0, t)))
    })
}

/// Linear null control of `u0` with control radius `radius` over `[0, horizon]`
/// in `nt` steps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_hum_solve(
    u0: *const QcField,
    radius: f64,
    horizon: f64,
    nt: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut QcHumSolution,
) -> QcStatus {
    guard(|| {
        let u0 = deref(u0, "null field")?;
        let phi = build_cutoff(u0.0.grid(), radius)?;
        let problem = HumProblem::new(phi, horizon, nt, u0.0.clone())?;
        let opts = HumOptions {
            tol,
            max_iter,
            ..HumOptions::default()
        };
        let inner = hum_solve_with(&problem, &opts)?;
        let relative_terminal_residual = inner.relative_terminal_residual(&u0.0);
        store(
            out,
            QcHumSolution {
                inner,
                relative_terminal_residual,
            },
        )
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_hum_solution_stats(sol: *const QcHumSolution, out: *mut QcHumStats) -> QcStatus {
    guard(|| {
        let s = deref(sol, "null solution")?;
        if out.is_null() {
            return Err(Fail::Arg("null output pointer"));
        }
        *out = QcHumStats {
            cg_iterations: s.inner.cg_iterations,
            cg_residual: s.inner.cg_residual,
            smallest_ritz: s.inner.smallest_ritz,
            terminal_residual: s.inner.terminal_residual,
            relative_terminal_residual: s.relative_terminal_residual,
            control_frames: s.inner.control.frames().len(),
        };
        Ok(())
    })
}

/// Copies the minimizer (the adjoint datum) into a new field handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_hum_solution_minimizer(sol: *const QcHumSolution, out: *mut *mut QcField) -> QcStatus {
    guard(|| {
        let s = deref(sol, "null solution")?;
        store(out, QcField(s.inner.minimizer.clone()))
    })
}

/// Copies control frame `m` (0 ≤ m ≤ nt) into a new field handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_hum_solution_control_frame(
    sol: *const QcHumSolution,
    m: usize,
    out: *mut *mut QcField,
) -> QcStatus {
    guard(|| {
        let s = deref(sol, "null solution")?;
        let frame = s.inner.control.frames().get(m).ok_or(Fail::Arg("frame index out of range"))?;
        store(out, QcField(frame.clone()))
    })
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qc_hum_solution_free(sol: *mut QcHumSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
