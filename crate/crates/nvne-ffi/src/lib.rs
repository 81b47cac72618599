//! C interface to `nvne`.
//!
//! Objects cross the boundary as opaque handles created by `nvne_*_new*`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`NvneStatus`]; on failure the message is kept per thread and
//! can be read with [`nvne_last_error_message`]. Matrices are passed as
//! separate row-major real and imaginary arrays of `dim * dim` doubles.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use nvne::dynamics::{evolve, step, IntegratorConfig};
use nvne::scenario::{run_scenario, ScenarioConfig};
use nvne::{BlochParams, CMatrix, DeformationFunction, DensityMatrix, HermitianOperator, NvneError, Operator};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvneStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad size, non-finite input or invalid UTF-8.
    InvalidArgument = 2,
    /// The input is not a valid Hermitian operator or density matrix.
    InvalidMatrix = 3,
    /// A parameter lies outside the mathematical domain.
    Domain = 4,
    /// The numerics failed (eigen-solver, missing signal, ...).
    Numerical = 5,
    /// A scenario config could not be parsed or validated.
    Config = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Opaque density matrix.
pub struct NvneDensity(DensityMatrix);

/// Opaque Hermitian operator.
pub struct NvneHamiltonian(HermitianOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &NvneError) -> NvneStatus {
    match e {
        NvneError::NotSquare { .. }
        | NvneError::NotHermitian { .. }
        | NvneError::NotPositive { .. }
        | NvneError::ZeroTrace { .. } => NvneStatus::InvalidMatrix,
        NvneError::DimensionMismatch { .. } => NvneStatus::InvalidArgument,
        NvneError::Domain(_) | NvneError::OutOfDomain { .. } => NvneStatus::Domain,
        NvneError::NumericalFailure(_) | NvneError::GradientFailure(_) | NvneError::SignalTooWeak { .. } => {
            NvneStatus::Numerical
        }
        NvneError::Config { .. } | NvneError::Io(_) => NvneStatus::Config,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (NvneStatus, String)>) -> NvneStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NvneStatus::Ok,
        Ok(Err((status, msg))) => {
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
            NvneStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (NvneStatus, String)>;
}

impl<T> IntoFfi<T> for nvne::Result<T> {
    fn ffi(self) -> Result<T, (NvneStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (NvneStatus, String) {
    (NvneStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NvneStatus, String) {
    (NvneStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (NvneStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn matrix_from_parts(re: *const f64, im: *const f64, dim: usize) -> Result<CMatrix, (NvneStatus, String)> {
    if re.is_null() {
        return Err(null("re"));
    }
    if dim == 0 || dim > 4096 {
        return Err(invalid(format!("dimension {dim} out of range")));
    }
    let n = dim * dim;
    let re = std::slice::from_raw_parts(re, n);
    let im = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, n)) };
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let k = i * dim + j;
        Complex64::new(re[k], im.map_or(0.0, |v| v[k]))
    }))
}

unsafe fn write_matrix(m: &CMatrix, re: *mut f64, im: *mut f64) -> Result<(), (NvneStatus, String)> {
    if re.is_null() || im.is_null() {
        return Err(null("output buffer"));
    }
    let dim = m.nrows();
    for i in 0..dim {
        for j in 0..dim {
            *re.add(i * dim + j) = m[(i, j)].re;
            *im.add(i * dim + j) = m[(i, j)].im;
        }
    }
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (NvneStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn nvne_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nvne_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Validates a density matrix from row-major parts; `im` may be null.
#[no_mangle]
pub unsafe extern "C" fn nvne_density_new(
    re: *const f64,
    im: *const f64,
    dim: usize,
    out: *mut *mut NvneDensity,
) -> NvneStatus {
    guard(|| {
        let rho = DensityMatrix::new(matrix_from_parts(re, im, dim)?).ffi()?;
        put(out, Box::into_raw(Box::new(NvneDensity(rho))), "out")
    })
}

/// Two-level state with eigenvalues `lam`, `1 - lam` and Bloch angles.
#[no_mangle]
pub unsafe extern "C" fn nvne_density_new_bloch(lam: f64, phi: f64, psi: f64, out: *mut *mut NvneDensity) -> NvneStatus {
    guard(|| {
        let rho = nvne::hermitian::bloch_state(BlochParams::new(lam, phi, psi).ffi()?).ffi()?;
        put(out, Box::into_raw(Box::new(NvneDensity(rho))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn nvne_density_free(rho: *mut NvneDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Dimension of the state, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn nvne_density_dim(rho: *const NvneDensity) -> usize {
    rho.as_ref().map_or(0, |r| r.0.dim())
}

/// Writes `dim * dim` row-major entries into `re` and `im`.
#[no_mangle]
pub unsafe extern "C" fn nvne_density_entries(rho: *const NvneDensity, re: *mut f64, im: *mut f64) -> NvneStatus {
    guard(|| write_matrix(deref(rho, "rho")?.0.matrix(), re, im))
}

/// Writes the `dim` eigenvalues in ascending order.
#[no_mangle]
pub unsafe extern "C" fn nvne_density_eigenvalues(rho: *const NvneDensity, out: *mut f64, len: usize) -> NvneStatus {
    guard(|| {
        let rho = deref(rho, "rho")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ev = rho.0.eigenvalues().ffi()?;
        if len < ev.len() {
            return Err(invalid(format!("buffer holds {len} values, need {}", ev.len())));
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), out, ev.len());
        Ok(())
    })
}

/// `C_n = Tr ρ^n`.
#[no_mangle]
pub unsafe extern "C" fn nvne_casimir(rho: *const NvneDensity, n: u32, out: *mut f64) -> NvneStatus {
    guard(|| {
        let c = nvne::lie_poisson::casimir(&deref(rho, "rho")?.0, n).ffi()?;
        put(out, c, "out")
    })
}

/// Tsallis entropy `S_q`; von Neumann entropy at `q = 1`.
#[no_mangle]
pub unsafe extern "C" fn nvne_tsallis_entropy(rho: *const NvneDensity, q: f64, out: *mut f64) -> NvneStatus {
    guard(|| {
        let s = nvne::thermo::tsallis_entropy(&deref(rho, "rho")?.0, q).ffi()?;
        put(out, s, "out")
    })
}

/// Trace distance `½‖a - b‖₁`.
#[no_mangle]
pub unsafe extern "C" fn nvne_trace_distance(a: *const NvneDensity, b: *const NvneDensity, out: *mut f64) -> NvneStatus {
    guard(|| {
        let d = nvne::hermitian::trace_distance(&deref(a, "a")?.0, &deref(b, "b")?.0).ffi()?;
        put(out, d, "out")
    })
}

/// Validates a Hermitian operator from row-major parts; `im` may be null.
#[no_mangle]
pub unsafe extern "C" fn nvne_hamiltonian_new(
    re: *const f64,
    im: *const f64,
    dim: usize,
    out: *mut *mut NvneHamiltonian,
) -> NvneStatus {
    guard(|| {
        let h = HermitianOperator::new(matrix_from_parts(re, im, dim)?).ffi()?;
        put(out, Box::into_raw(Box::new(NvneHamiltonian(h))), "out")
    })
}

/// `H = -μ σz`.
#[no_mangle]
pub unsafe extern "C" fn nvne_hamiltonian_new_spin_z(mu: f64, out: *mut *mut NvneHamiltonian) -> NvneStatus {
    guard(|| {
        if !mu.is_finite() {
            return Err(invalid("mu must be finite"));
        }
        put(out, Box::into_raw(Box::new(NvneHamiltonian(HermitianOperator::spin_z(mu)))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn nvne_hamiltonian_free(h: *mut NvneHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// One midpoint step of `i dρ/dt = [H, ρ^q]`; the result is a new handle.
#[no_mangle]
pub unsafe extern "C" fn nvne_step(
    rho: *const NvneDensity,
    h: *const NvneHamiltonian,
    q: f64,
    dt: f64,
    out: *mut *mut NvneDensity,
) -> NvneStatus {
    guard(|| {
        let f = DeformationFunction::power(q).ffi()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {dt}")));
        }
        let next = step(&deref(rho, "rho")?.0, &deref(h, "h")?.0, &f, dt).ffi()?;
        put(out, Box::into_raw(Box::new(NvneDensity(next))), "out")
    })
}

/// Integrates to `t_final` and returns the final state. `energy_drift`, if
/// not null, receives the largest relative drift of `Tr ρ^q H`.
#[no_mangle]
pub unsafe extern "C" fn nvne_evolve(
    rho: *const NvneDensity,
    h: *const NvneHamiltonian,
    q: f64,
    dt: f64,
    t_final: f64,
    out: *mut *mut NvneDensity,
    energy_drift: *mut f64,
) -> NvneStatus {
    guard(|| {
        let f = DeformationFunction::power(q).ffi()?;
        let cfg = IntegratorConfig::new(dt, t_final).ffi()?.with_record_every(usize::MAX);
        let traj = evolve(&deref(rho, "rho")?.0, &deref(h, "h")?.0, &f, &cfg).ffi()?;
        if !energy_drift.is_null() {
            let e0 = traj.invariants[0].energy;
            let drift = traj
                .invariants
                .iter()
                .map(|s| nvne::dynamics::relative_drift(s.energy, e0))
                .fold(0.0, f64::max);
            energy_drift.write(drift);
        }
        let last = traj.last().expect("trajectory is never empty").clone();
        put(out, Box::into_raw(Box::new(NvneDensity(last))), "out")
    })
}

/// Precession frequency `2μ(f(λ) - f(1-λ))/(2λ - 1)` of a spin with
/// `f(x) = x^q`.
#[no_mangle]
pub unsafe extern "C" fn nvne_larmor_frequency(q: f64, mu: f64, lam: f64, out: *mut f64) -> NvneStatus {
    guard(|| {
        let f = DeformationFunction::power(q).ffi()?;
        put(out, nvne::dynamics::larmor_frequency(&f, mu, lam).ffi()?, "out")
    })
}

/// Spin equilibrium: larger eigenvalue and `∂²F/∂λ²` there.
#[no_mangle]
pub unsafe extern "C" fn nvne_spin_equilibrium(
    q: f64,
    beta: f64,
    mu: f64,
    lam: *mut f64,
    second_derivative: *mut f64,
) -> NvneStatus {
    guard(|| {
        let r = nvne::thermo::spin_equilibrium(&nvne::thermo::ThermoParams::new(q, beta, mu).ffi()?).ffi()?;
        put(lam, r.lam, "lam")?;
        if !second_derivative.is_null() {
            second_derivative.write(r.second_derivative);
        }
        Ok(())
    })
}

/// Runs a JSON scenario config. `passed` receives 1 if every check passed;
/// `report_json`, if not null, receives the report, to be released with
/// [`nvne_string_free`]. Nothing is written to disk.
#[no_mangle]
pub unsafe extern "C" fn nvne_run_scenario(
    config_json: *const c_char,
    passed: *mut i32,
    report_json: *mut *mut c_char,
) -> NvneStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| invalid(e.to_string()))?;
        let cfg = ScenarioConfig::from_json(text).ffi()?;
        let run = run_scenario(&cfg).ffi()?;
        put(passed, i32::from(run.report.passed), "passed")?;
        if !report_json.is_null() {
            let json = serde_json::to_string(&run.report).map_err(|e| invalid(e.to_string()))?;
            let c = CString::new(json).map_err(|e| invalid(e.to_string()))?;
            report_json.write(c.into_raw());
        }
        Ok(())
    })
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn nvne_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
