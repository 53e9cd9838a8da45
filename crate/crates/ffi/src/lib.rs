//! C ABI over the `wiretap-outage` solvers and key-buffer simulator.
//!
//! Every function returns a [`WoStatus`]. On failure a message is kept per
//! thread and can be read with [`wo_last_error_message`]. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wiretap_outage::channel::{FadingDistribution, RandomStream};
use wiretap_outage::error::Error;
use wiretap_outage::full_csi;
use wiretap_outage::main_csi;
use wiretap_outage::queue::{simulate, QueueConfig};
use wiretap_outage::sizing::buffer_bound;
use wiretap_outage::solution::CapacitySolution;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidDistribution = 4,
    InvalidArgument = 5,
    InfeasibleRate = 6,
    InfeasibleOutage = 7,
    NoConvergence = 8,
    DomainError = 9,
    SimulationInfeasible = 10,
    NonIntegrable = 11,
    Panic = 12,
}

/// Transmitter channel knowledge used by [`wo_solve_capacity`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WoCsi {
    Full = 0,
    Main = 1,
}

/// Opaque fading law.
pub struct WoDistribution {
    inner: FadingDistribution,
}

/// Opaque solved capacity.
pub struct WoSolution {
    inner: CapacitySolution,
}

/// Scalar summary of a [`WoSolution`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WoCapacitySummary {
    pub capacity: f64,
    pub lambda: f64,
    /// NaN when the solver has no such multiplier.
    pub k: f64,
    /// NaN when the solver has no such threshold.
    pub threshold_c: f64,
    pub r_max: f64,
    pub expected_rs: f64,
    pub expected_power: f64,
    pub channel_outage_prob: f64,
    pub var_rs: f64,
    pub eps: f64,
    pub p_avg: f64,
}

/// Statistics of one simulated key-buffer trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WoQueueStats {
    pub rate_r: f64,
    pub buffer_m: f64,
    pub loss_ratio: f64,
    pub eps_prime: f64,
    pub eps_prime_stderr: f64,
    pub key_outage_freq: f64,
    pub channel_outage_freq: f64,
    pub artificial_outage_freq: f64,
    pub final_q: f64,
    pub mean_rs: f64,
    pub identity_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WoStatus {
    match e {
        Error::InvalidDistribution(_) => WoStatus::InvalidDistribution,
        Error::NonIntegrable { .. } => WoStatus::NonIntegrable,
        Error::DegenerateGain { .. } | Error::InvalidArgument(_) => WoStatus::InvalidArgument,
        Error::InfeasibleOutage => WoStatus::InfeasibleOutage,
        Error::InfeasibleRate { .. } => WoStatus::InfeasibleRate,
        Error::NoConvergence { .. } => WoStatus::NoConvergence,
        Error::InvalidConfig(_) | Error::Unreachable { .. } => WoStatus::SimulationInfeasible,
        Error::DomainError { .. } => WoStatus::DomainError,
    }
}

struct Failure(WoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> WoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WoStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WoStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(WoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(WoStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn boxed_distribution(d: FadingDistribution) -> *mut WoDistribution {
    Box::into_raw(Box::new(WoDistribution { inner: d }))
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn wo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a fading law from its JSON descriptor, e.g.
/// `{"kind":"continuous","marginal_m":{"family":"exponential","mean":2},"marginal_e":{"family":"exponential","mean":1}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wo_distribution_from_json(json: *const c_char, out: *mut *mut WoDistribution) -> WoStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let d: FadingDistribution = serde_json::from_str(text).map_err(|e| {
            let status = if e.is_data() { WoStatus::InvalidDistribution } else { WoStatus::InvalidJson };
            Failure(status, e.to_string())
        })?;
        write_out(out, boxed_distribution(d), "out")
    })
}

/// Independent exponential gains with the given means.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wo_distribution_rayleigh(mean_m: f64, mean_e: f64, out: *mut *mut WoDistribution) -> WoStatus {
    guard(|| {
        let d = FadingDistribution::rayleigh(mean_m, mean_e)?;
        write_out(out, boxed_distribution(d), "out")
    })
}

/// Independent chi-square gains with `degrees` degrees of freedom and the given means.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wo_distribution_chi_square(
    degrees: f64,
    mean_m: f64,
    mean_e: f64,
    out: *mut *mut WoDistribution,
) -> WoStatus {
    guard(|| {
        let d = FadingDistribution::chi_square(degrees, mean_m, mean_e)?;
        write_out(out, boxed_distribution(d), "out")
    })
}

/// Discrete law from parallel arrays of `len` atoms.
///
/// # Safety
/// The three arrays must hold `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wo_distribution_discrete(
    h_m: *const f64,
    h_e: *const f64,
    prob: *const f64,
    len: usize,
    out: *mut *mut WoDistribution,
) -> WoStatus {
    guard(|| {
        if len > 0 && (h_m.is_null() || h_e.is_null() || prob.is_null()) {
            return Err(null("atom array"));
        }
        let atoms: Vec<serde_json::Value> = (0..len)
            .map(|i| serde_json::json!({"h_m": *h_m.add(i), "h_e": *h_e.add(i), "p": *prob.add(i)}))
            .collect();
        let d: FadingDistribution = serde_json::from_value(serde_json::json!({"kind": "discrete", "atoms": atoms}))
            .map_err(|e| Failure(WoStatus::InvalidDistribution, e.to_string()))?;
        write_out(out, boxed_distribution(d), "out")
    })
}

/// # Safety
/// `dist` must come from a `wo_distribution_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wo_distribution_free(dist: *mut WoDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Solves the ε-capacity under full or main-channel CSI.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wo_solve_capacity(
    dist: *const WoDistribution,
    p_avg: f64,
    eps: f64,
    csi: WoCsi,
    out: *mut *mut WoSolution,
) -> WoStatus {
    guard(|| {
        let d = &deref(dist, "dist")?.inner;
        let s = match csi {
            WoCsi::Full => full_csi::solve_capacity(d, p_avg, eps)?,
            WoCsi::Main => main_csi::solve_capacity_main(d, p_avg, eps)?,
        };
        write_out(out, Box::into_raw(Box::new(WoSolution { inner: s })), "out")
    })
}

/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wo_solution_summary(sol: *const WoSolution, out: *mut WoCapacitySummary) -> WoStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.inner;
        let summary = WoCapacitySummary {
            capacity: s.capacity,
            lambda: s.lambda,
            k: s.k.unwrap_or(f64::NAN),
            threshold_c: s.threshold_c.unwrap_or(f64::NAN),
            r_max: s.r_max,
            expected_rs: s.expected_rs,
            expected_power: s.expected_power,
            channel_outage_prob: s.channel_outage_prob,
            var_rs: s.var_rs,
            eps: s.eps,
            p_avg: s.p_avg,
        };
        write_out(out, summary, "out")
    })
}

/// JSON form of a solution; release it with [`wo_string_free`].
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wo_solution_to_json(sol: *const WoSolution, out: *mut *mut c_char) -> WoStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.inner;
        let c = CString::new(s.to_json()).map_err(|e| Failure(WoStatus::InvalidUtf8, e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `sol` must come from [`wo_solve_capacity`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wo_solution_free(sol: *mut WoSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Simulates one key-buffer trace at rate `rate_r` with the optimal full-CSI
/// policy for that rate.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wo_simulate(
    dist: *const WoDistribution,
    p_avg: f64,
    eps: f64,
    rate_r: f64,
    buffer_m: f64,
    horizon: u64,
    seed: u64,
    stream_id: u64,
    out: *mut WoQueueStats,
) -> WoStatus {
    guard(|| {
        let d = &deref(dist, "dist")?.inner;
        let policy = full_csi::solve_subproblem(d, p_avg, eps, rate_r)?;
        let config = QueueConfig::new(rate_r, buffer_m, eps, horizon, RandomStream::new(seed, stream_id));
        let s = simulate(&config, d, &policy)?;
        let stats = WoQueueStats {
            rate_r: s.rate_r,
            buffer_m: s.buffer_m,
            loss_ratio: s.loss_ratio,
            eps_prime: s.eps_prime,
            eps_prime_stderr: s.eps_prime_stderr,
            key_outage_freq: s.key_outage_freq,
            channel_outage_freq: s.channel_outage_freq,
            artificial_outage_freq: s.artificial_outage_freq,
            final_q: s.final_q,
            mean_rs: s.mean_rs,
            identity_residual: s.identity_residual,
        };
        write_out(out, stats, "out")
    })
}

/// Buffer size sufficient for outage `eps_prime` at capacity `capacity_c`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wo_buffer_bound(capacity_c: f64, eps: f64, eps_prime: f64, var_rs: f64, out: *mut f64) -> WoStatus {
    guard(|| {
        let b = buffer_bound(capacity_c, eps, eps_prime, var_rs)?;
        write_out(out, b.bound_m, "out")
    })
}
