//! C ABI for `ddpulse`.
//!
//! Sequences and baths are opaque handles created by `dd_*_new`/`dd_*_parse`
//! functions and released with the matching `dd_*_free`. Every fallible call
//! returns a [`DdStatus`]; on failure the message is available from
//! [`dd_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ddpulse::bath::{Environment, Mode, SpectralDensity};
use ddpulse::decoherence::{Decoherence, DecoherencePoint, QuadratureConfig};
use ddpulse::filter::{derivative_residual, eval_y};
use ddpulse::general_bath::{verify_sequence_order, Arithmetic};
use ddpulse::optimizer::solve_order_conditions;
use ddpulse::sequences::{make_custom, parse_sequence, PulseSequence};
use ddpulse::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    NotConverged = 6,
    Panic = 7,
}

/// Opaque pulse sequence.
pub struct DdSequence {
    inner: PulseSequence,
}

/// Opaque bath: spectral density, temperature, mode and quadrature settings.
pub struct DdBath {
    sd: SpectralDensity,
    env: Environment,
    config: QuadratureConfig,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdComplex {
    pub re: f64,
    pub im: f64,
}

/// Signal at one instant; `deviation` is `1 - s`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdSignalPoint {
    pub t: f64,
    pub chi: f64,
    pub phi: f64,
    pub s: f64,
    pub deviation: f64,
}

impl From<DecoherencePoint> for DdSignalPoint {
    fn from(p: DecoherencePoint) -> Self {
        Self {
            t: p.t,
            chi: p.chi,
            phi: p.phi,
            s: p.s,
            deviation: p.deviation,
        }
    }
}

/// Summary of a general-bath vanishing check.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdOrderReport {
    pub passed: bool,
    pub exact_zeros: bool,
    /// Zero for rational arithmetic.
    pub digits: u32,
    pub odd_max: f64,
    pub even_max: f64,
    pub separation: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(DdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse { .. } => DdStatus::Parse,
            ref e if e.is_usage() => DdStatus::InvalidArgument,
            _ => DdStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DdStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> DdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_last_error(&message);
            DdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises `p` is null or points to a live `T`.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn out_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller promises `p` is null or points to writable storage.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller promises `p` addresses `len` initialized elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller promises `p` addresses `len` writable elements.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf`.
///
/// Returns the message length excluding the terminator; the copy is
/// truncated to `capacity - 1` bytes. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dd_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            // SAFETY: `buf` holds at least `capacity > n` bytes.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Parse a spec such as `udd:10`, `cdd:4` or `custom:0.2,0.7`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_sequence_parse(
    spec: *const c_char,
    out: *mut *mut DdSequence,
) -> DdStatus {
    guard(|| {
        let out = unsafe { out_mut(out, "out") }?;
        if spec.is_null() {
            return Err(null("spec"));
        }
        // SAFETY: checked non-null, caller guarantees termination.
        let text = unsafe { CStr::from_ptr(spec) }
            .to_str()
            .map_err(|e| Failure(DdStatus::Parse, format!("spec is not UTF-8: {e}")))?;
        let seq = parse_sequence(text)?;
        *out = Box::into_raw(Box::new(DdSequence { inner: seq }));
        Ok(())
    })
}

/// Build a sequence from `len` strictly increasing instants in `(0, 1)`.
///
/// # Safety
/// `deltas` must address `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_sequence_custom(
    deltas: *const f64,
    len: usize,
    out: *mut *mut DdSequence,
) -> DdStatus {
    guard(|| {
        let out = unsafe { out_mut(out, "out") }?;
        let values = unsafe { slice(deltas, len, "deltas") }?;
        let seq = make_custom(values)?;
        *out = Box::into_raw(Box::new(DdSequence { inner: seq }));
        Ok(())
    })
}

/// Release a sequence. Null is ignored.
///
/// # Safety
/// `seq` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dd_sequence_free(seq: *mut DdSequence) {
    if !seq.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(seq) });
    }
}

/// Number of pulses, 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_sequence_len(seq: *const DdSequence) -> usize {
    unsafe { seq.as_ref() }.map_or(0, |s| s.inner.len())
}

/// Copy the pulse instants into `out`, which must hold `dd_sequence_len` values.
///
/// # Safety
/// `seq` must be a live handle; `out` must address `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dd_sequence_deltas(
    seq: *const DdSequence,
    out: *mut f64,
    capacity: usize,
) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let deltas = seq.inner.deltas();
        if capacity < deltas.len() {
            return Err(Failure(
                DdStatus::BufferTooSmall,
                format!("need {} values, buffer holds {capacity}", deltas.len()),
            ));
        }
        let out = unsafe { slice_mut(out, deltas.len(), "out") }?;
        out.copy_from_slice(deltas);
        Ok(())
    })
}

/// Filter function `y(z)`.
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_filter_y(
    seq: *const DdSequence,
    z: f64,
    out: *mut DdComplex,
) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let out = unsafe { out_mut(out, "out") }?;
        let y = eval_y(&seq.inner, z);
        *out = DdComplex { re: y.re, im: y.im };
        Ok(())
    })
}

/// Order-`m` residual `(-1)^(n+1) + 2 sum_j (-1)^j d_j^m`.
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_residual(seq: *const DdSequence, m: u32, out: *mut f64) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let out = unsafe { out_mut(out, "out") }?;
        *out = derivative_residual(&seq.inner, m);
        Ok(())
    })
}

/// Create a bath. `gamma = INFINITY` selects a hard cutoff, `beta = INFINITY`
/// zero temperature.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_bath_new(
    alpha: f64,
    omega_d: f64,
    gamma: f64,
    beta: f64,
    classical: bool,
    out: *mut *mut DdBath,
) -> DdStatus {
    guard(|| {
        let out = unsafe { out_mut(out, "out") }?;
        let sd = if gamma == f64::INFINITY {
            SpectralDensity::hard_cutoff(alpha, omega_d)?
        } else {
            SpectralDensity::power_law(alpha, omega_d, gamma)?
        };
        let mode = if classical {
            Mode::Classical
        } else {
            Mode::Quantum
        };
        let env = Environment::new(beta, mode)?;
        *out = Box::into_raw(Box::new(DdBath {
            sd,
            env,
            config: QuadratureConfig::default(),
        }));
        Ok(())
    })
}

/// Override the quadrature tolerances of a bath.
///
/// # Safety
/// `bath` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_bath_set_tolerance(
    bath: *mut DdBath,
    abs_tol: f64,
    rel_tol: f64,
) -> DdStatus {
    guard(|| {
        let bath = unsafe { out_mut(bath, "bath") }?;
        let config = QuadratureConfig {
            abs_tol,
            rel_tol,
            ..bath.config
        };
        // construction validates the tolerances
        Decoherence::new(&PulseSequence::free(), &bath.sd, &bath.env, config)?;
        bath.config = config;
        Ok(())
    })
}

/// Release a bath. Null is ignored.
///
/// # Safety
/// `bath` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dd_bath_free(bath: *mut DdBath) {
    if !bath.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(bath) });
    }
}

/// Signal at time `t` (in units of `1 / omega_d` when `omega_d = 1`).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_signal(
    seq: *const DdSequence,
    bath: *const DdBath,
    t: f64,
    out: *mut DdSignalPoint,
) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let bath = unsafe { deref(bath, "bath") }?;
        let out = unsafe { out_mut(out, "out") }?;
        let model = Decoherence::new(&seq.inner, &bath.sd, &bath.env, bath.config)?;
        *out = model.signal(t)?.into();
        Ok(())
    })
}

/// Signal at each of `len` times, written to `out[0..len]`.
///
/// # Safety
/// Handles must be live; `times` and `out` must address `len` elements.
#[no_mangle]
pub unsafe extern "C" fn dd_curve(
    seq: *const DdSequence,
    bath: *const DdBath,
    times: *const f64,
    len: usize,
    out: *mut DdSignalPoint,
) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let bath = unsafe { deref(bath, "bath") }?;
        let times = unsafe { slice(times, len, "times") }?;
        let out = unsafe { slice_mut(out, len, "out") }?;
        let curve =
            ddpulse::decoherence::curve_with(&seq.inner, &bath.sd, &bath.env, times, bath.config)?;
        for (slot, p) in out.iter_mut().zip(curve.points) {
            *slot = p.into();
        }
        Ok(())
    })
}

/// Solve the order conditions for `n` pulses by Newton iteration.
///
/// `start` may be null for the default start. The solution is written to
/// `out[0..n]` even when the iteration does not converge, in which case
/// [`DdStatus::NotConverged`] is returned.
///
/// # Safety
/// `start` must be null or address `n` doubles; `out` must address `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dd_solve_order_conditions(
    n: usize,
    start: *const f64,
    ftol: f64,
    out: *mut f64,
    iterations: *mut usize,
) -> DdStatus {
    guard(|| {
        let start = if start.is_null() {
            None
        } else {
            Some(unsafe { slice(start, n, "start") }?)
        };
        let out = unsafe { slice_mut(out, n, "out") }?;
        let result = solve_order_conditions(n, start, ftol)?;
        out.copy_from_slice(&result.deltas);
        if let Some(it) = unsafe { iterations.as_mut() } {
            *it = result.iterations;
        }
        if result.converged {
            Ok(())
        } else {
            Err(Failure(
                DdStatus::NotConverged,
                format!(
                    "residual {:e} after {} iterations",
                    result.residual_norm, result.iterations
                ),
            ))
        }
    })
}

/// Check that odd-checksum general-bath coefficients up to `max_len` vanish.
///
/// `digits = 0` picks exact arithmetic when possible and a default precision
/// otherwise. A failed check still returns [`DdStatus::Ok`] with
/// `passed = false`.
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_verify_order(
    seq: *const DdSequence,
    max_len: usize,
    digits: u32,
    out: *mut DdOrderReport,
) -> DdStatus {
    guard(|| {
        let seq = unsafe { deref(seq, "seq") }?;
        let out = unsafe { out_mut(out, "out") }?;
        let arithmetic = if digits == 0 {
            Arithmetic::Auto
        } else {
            Arithmetic::HighPrecision { digits }
        };
        let r = verify_sequence_order(&seq.inner, max_len, arithmetic)?;
        *out = DdOrderReport {
            passed: r.passed,
            exact_zeros: r.exact_zeros,
            digits: r.digits.unwrap_or(0),
            odd_max: r.odd_max,
            even_max: r.even_max,
            separation: r.separation,
        };
        Ok(())
    })
}
