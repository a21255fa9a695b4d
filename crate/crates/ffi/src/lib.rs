//! C ABI for the weakkam toolkit.
//!
//! Objects cross the boundary as opaque handles created by `wk_*_new`-style
//! constructors and released with the matching `wk_*_destroy`. Every fallible
//! call returns a [`WkStatus`]; the message of the last failure on the
//! calling thread is available from [`wk_last_error`].

use std::cell::RefCell;
use std::ffi::CString;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use weakkam::aubry::{aubry_points, default_epsilon, ensemble_subsolution_with, EnsembleOptions};
use weakkam::laxoleinik::{critical_value, evolve, subsolution_report};
use weakkam::regularize::lasry_lions;
use weakkam::{Direction, Error, GridFunction, Hamiltonian, Potential};

/// Opaque Hamiltonian.
pub struct WkHamiltonian(Hamiltonian);

/// Opaque periodic grid function.
pub struct WkGrid(GridFunction);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// An input violates a mathematical precondition (e.g. not a sub-solution).
    Precondition = 3,
    /// The grid cannot certify the result.
    Resolution = 4,
    /// Non-finite evaluation, Legendre search or integrator failure.
    Numerical = 5,
    /// Too few ensemble members survived.
    Ensemble = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WkSubSolutionReport {
    pub max_residual: f64,
    pub worst_node: usize,
    pub action_violation: f64,
    pub pass: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WkRegularization {
    pub k_plus: f64,
    pub k_minus: f64,
    pub sup_dist_to_input: f64,
    pub max_residual: f64,
    pub stable: bool,
    pub pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: Error) -> WkStatus {
    let status = match &e {
        Error::Config(_) => WkStatus::InvalidArgument,
        Error::Precondition(_) => WkStatus::Precondition,
        Error::Resolution(_) | Error::CorollaryScale(_) | Error::KTooSmall { .. } => WkStatus::Resolution,
        Error::Ensemble { .. } => WkStatus::Ensemble,
        Error::EvaluationDomain { .. }
        | Error::SuperlinearityRadius { .. }
        | Error::VelocityWindow { .. }
        | Error::Integrator { .. } => WkStatus::Numerical,
    };
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> Result<(), WkStatus>) -> WkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            WkStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, WkStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        WkStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, WkStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        WkStatus::NullPointer
    })
}

fn direction(d: i32) -> Result<Direction, WkStatus> {
    match d {
        0 => Ok(Direction::Forward),
        1 => Ok(Direction::Backward),
        _ => {
            set_error(format!("direction must be 0 (forward) or 1 (backward), got {d}"));
            Err(WkStatus::InvalidArgument)
        }
    }
}

/// Message of the last failure on this thread. Valid until the next call
/// into the library from the same thread.
#[no_mangle]
pub extern "C" fn wk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `½(p + shift)² − amplitude·sin²(πx)`.
#[no_mangle]
pub extern "C" fn wk_hamiltonian_pendulum(shift: f64, amplitude: f64) -> *mut WkHamiltonian {
    Box::into_raw(Box::new(WkHamiltonian(Hamiltonian::tilted_pendulum_with_amplitude(shift, amplitude))))
}

/// `½p² + V(x)` with `V` given as `mean, a1, b1, a2, b2, ...`.
///
/// # Safety
/// `coeffs` must point to `len` readable doubles, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn wk_hamiltonian_mechanical(coeffs: *const f64, len: usize) -> *mut WkHamiltonian {
    let c: &[f64] = if len == 0 || coeffs.is_null() { &[] } else { std::slice::from_raw_parts(coeffs, len) };
    Box::into_raw(Box::new(WkHamiltonian(Hamiltonian::mechanical(Potential::from_coefficients(c)))))
}

/// # Safety
/// `h` must come from a `wk_hamiltonian_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wk_hamiltonian_destroy(h: *mut WkHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_hamiltonian_eval(h: *const WkHamiltonian, x: f64, p: f64, value: *mut f64) -> WkStatus {
    guard(|| {
        let h = get(h)?;
        *out(value)? = h.0.eval(x, p).map_err(status_of)?;
        Ok(())
    })
}

/// `L(x, v)` and the maximizing momentum.
///
/// # Safety
/// `h` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_hamiltonian_legendre(
    h: *const WkHamiltonian,
    x: f64,
    v: f64,
    value: *mut f64,
    momentum: *mut f64,
) -> WkStatus {
    guard(|| {
        let h = get(h)?;
        let l = h.0.legendre(x, v).map_err(status_of)?;
        *out(value)? = l.value;
        *out(momentum)? = l.argmax_p;
        Ok(())
    })
}

/// Copies `n` values into a new grid function on `x_i = i/n`.
///
/// # Safety
/// `values` must point to `n` readable doubles; `grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_grid_new(values: *const f64, n: usize, grid: *mut *mut WkGrid) -> WkStatus {
    guard(|| {
        let v = get(values)?;
        let g = GridFunction::new(std::slice::from_raw_parts(v, n).to_vec()).map_err(status_of)?;
        *out(grid)? = Box::into_raw(Box::new(WkGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wk_grid_destroy(g: *mut WkGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of nodes, or zero for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wk_grid_len(g: *const WkGrid) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// Copies the node values into `values`, which holds `len` doubles.
///
/// # Safety
/// `g` must be a live handle and `values` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wk_grid_values(g: *const WkGrid, values: *mut f64, len: usize) -> WkStatus {
    guard(|| {
        let g = get(g)?;
        if len < g.0.n() {
            set_error(format!("buffer holds {len} values, grid has {}", g.0.n()));
            return Err(WkStatus::InvalidArgument);
        }
        let dst = out(values)?;
        std::slice::from_raw_parts_mut(dst, len)[..g.0.n()].copy_from_slice(g.0.values());
        Ok(())
    })
}

/// Critical value estimate; `iterate` (may be null) receives the last
/// iterate as a new handle.
///
/// # Safety
/// `h` must be a live handle; `alpha` must be writable; `iterate` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wk_critical_value(
    h: *const WkHamiltonian,
    n: usize,
    step: f64,
    iterations: usize,
    alpha: *mut f64,
    iterate: *mut *mut WkGrid,
) -> WkStatus {
    guard(|| {
        let h = get(h)?;
        let est = critical_value(&h.0, n, step, iterations).map_err(status_of)?;
        *out(alpha)? = est.alpha;
        if let Some(slot) = iterate.as_mut() {
            *slot = Box::into_raw(Box::new(WkGrid(est.iterate)));
        }
        Ok(())
    })
}

/// `T_t u` (direction 0) or `T̆_t u` (direction 1) at level `c`, `t` a
/// multiple of `step`.
///
/// # Safety
/// `h`, `u` must be live handles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_evolve(
    h: *const WkHamiltonian,
    u: *const WkGrid,
    t: f64,
    step: f64,
    c: f64,
    dir: i32,
    result: *mut *mut WkGrid,
) -> WkStatus {
    guard(|| {
        let (h, u) = (get(h)?, get(u)?);
        let v = evolve(&h.0, &u.0, t, step, c, direction(dir)?).map_err(status_of)?;
        *out(result)? = Box::into_raw(Box::new(WkGrid(v)));
        Ok(())
    })
}

/// # Safety
/// `h`, `u` must be live handles; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_subsolution_report(
    h: *const WkHamiltonian,
    u: *const WkGrid,
    c: f64,
    tolerance: f64,
    report: *mut WkSubSolutionReport,
) -> WkStatus {
    guard(|| {
        let (h, u) = (get(h)?, get(u)?);
        let r = subsolution_report(&h.0, &u.0, c, tolerance);
        *out(report)? = WkSubSolutionReport {
            max_residual: r.max_residual,
            worst_node: r.worst_node,
            action_violation: r.action_violation,
            pass: r.pass,
        };
        Ok(())
    })
}

/// `w = T_s T̆_t u` at level `c`.
///
/// # Safety
/// `h`, `u` must be live handles; `w` and `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_lasry_lions(
    h: *const WkHamiltonian,
    u: *const WkGrid,
    t: f64,
    s: f64,
    c: f64,
    w: *mut *mut WkGrid,
    summary: *mut WkRegularization,
) -> WkStatus {
    guard(|| {
        let (h, u) = (get(h)?, get(u)?);
        let (w_out, summary) = (out(w)?, out(summary)?);
        let r = lasry_lions(&h.0, &u.0, t, s, c).map_err(status_of)?;
        *summary = WkRegularization {
            k_plus: r.k_plus,
            k_minus: r.k_minus,
            sup_dist_to_input: r.sup_dist_to_input,
            max_residual: r.report.max_residual,
            stable: r.stable,
            pass: r.report.pass,
        };
        *w_out = Box::into_raw(Box::new(WkGrid(r.w)));
        Ok(())
    })
}

/// Flags the projected Aubry set at level `alpha` on an `n`-node grid:
/// `flags[i]` is 1 for flagged nodes. `epsilon <= 0` selects the default.
///
/// # Safety
/// `h` must be a live handle; `flags` must have room for `n` bytes and
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wk_aubry(
    h: *const WkHamiltonian,
    alpha: f64,
    n: usize,
    members: usize,
    seed: u64,
    epsilon: f64,
    flags: *mut u8,
    count: *mut usize,
) -> WkStatus {
    guard(|| {
        let h = get(h)?;
        let (flags, count) = (out(flags)?, out(count)?);
        let opts = EnsembleOptions { n, ..EnsembleOptions::default() };
        let w = ensemble_subsolution_with(&h.0, alpha, members, seed, &opts).map_err(status_of)?;
        let eps = if epsilon > 0.0 { epsilon } else { default_epsilon(alpha) };
        let est = aubry_points(&h.0, &w, alpha, eps).map_err(status_of)?;
        let flags = std::slice::from_raw_parts_mut(flags, n);
        flags.fill(0);
        for &i in &est.points {
            flags[i] = 1;
        }
        *count = est.points.len();
        Ok(())
    })
}
