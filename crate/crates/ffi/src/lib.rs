//! C ABI over `noma-core`.
//!
//! Every fallible call returns a [`NomaStatus`]. On failure a message is
//! stored per thread and can be fetched with [`noma_last_error_message`].
//! Simulations are opaque handles created by [`noma_simulation_new`] and
//! released with [`noma_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use noma_core::channel::{dbm_to_watts, ChannelRealization};
use noma_core::config::RunConfig;
use noma_core::dppa::{dppa_solve_with, EffectiveWeights, PowerProblem, Recursion};
use noma_core::oracle::kkt_enumerate_solve;
use noma_core::sim::Simulation;
use noma_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NomaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Panic = 5,
}

/// Scalar summary of a simulation so far.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NomaMetrics {
    pub slots: u64,
    pub avg_power_w: f64,
    pub max_slot_power_w: f64,
    pub utility: f64,
    pub overall_delay_ms: f64,
    pub max_z: f64,
    pub final_z: f64,
}

/// Opaque simulation handle.
pub struct NomaSimulation {
    sim: Simulation,
    horizon: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> NomaStatus {
    match err {
        Error::Solver(_) => NomaStatus::Solver,
        Error::Config(_) | Error::Io(_) | Error::Csv(_) => NomaStatus::Config,
        _ => NomaStatus::InvalidArgument,
    }
}

/// Runs `f`, mapping errors and panics to a status and the last-error slot.
fn guard(f: impl FnOnce() -> Result<(), (NomaStatus, String)>) -> NomaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NomaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NomaStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (NomaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (NomaStatus, String) {
    (NomaStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (NomaStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], (NomaStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Human-readable name of a status code. The string is static.
#[no_mangle]
pub extern "C" fn noma_status_str(status: NomaStatus) -> *const c_char {
    let s: &'static CStr = match status {
        NomaStatus::Ok => c"ok",
        NomaStatus::NullPointer => c"null pointer",
        NomaStatus::InvalidArgument => c"invalid argument",
        NomaStatus::Config => c"configuration error",
        NomaStatus::Solver => c"solver failure",
        NomaStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`). Returns the length the full message needs,
/// including the terminator; 0 when there is no message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn noma_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn noma_dbm_to_watts(dbm: f64) -> f64 {
    dbm_to_watts(dbm)
}

/// # Safety
/// `gains` and `weights` must point to `k` readable doubles.
unsafe fn problem_from_raw(
    k: usize,
    gains: *const f64,
    weights: *const f64,
    z: f64,
    eta: f64,
    p_max: f64,
) -> Result<PowerProblem, (NomaStatus, String)> {
    if k == 0 {
        return Err((NomaStatus::InvalidArgument, "`k` must be at least 1".into()));
    }
    let gains = input(gains, k, "gains")?;
    let weights = input(weights, k, "weights")?;
    let w = EffectiveWeights::new(weights.to_vec(), z).map_err(core_err)?;
    let chan = ChannelRealization::from_gains(gains.to_vec()).map_err(core_err)?;
    PowerProblem::from_channel(&w, &chan, eta, p_max).map_err(core_err)
}

/// Solves the per-slot power allocation exactly. Inputs and `powers_out`
/// are in the caller's user order. `objective_out` and `levels_out` (the
/// candidate-set size) may be null.
///
/// # Safety
/// `gains`, `weights` and `powers_out` must point to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn noma_dppa_solve(
    k: usize,
    gains: *const f64,
    weights: *const f64,
    z: f64,
    eta: f64,
    p_max: f64,
    powers_out: *mut f64,
    objective_out: *mut f64,
    levels_out: *mut usize,
) -> NomaStatus {
    guard(|| {
        let problem = problem_from_raw(k, gains, weights, z, eta, p_max)?;
        let out = output(powers_out, k, "powers_out")?;
        let sol = dppa_solve_with(&problem, Recursion::Bellman);
        out.copy_from_slice(&sol.allocation.powers);
        if !objective_out.is_null() {
            *objective_out = sol.allocation.objective;
        }
        if !levels_out.is_null() {
            *levels_out = sol.candidates.len();
        }
        Ok(())
    })
}

/// Same problem as [`noma_dppa_solve`], solved by enumerating KKT supports.
/// Refuses `k > 20`.
///
/// # Safety
/// `gains`, `weights` and `powers_out` must point to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn noma_kkt_solve(
    k: usize,
    gains: *const f64,
    weights: *const f64,
    z: f64,
    eta: f64,
    p_max: f64,
    powers_out: *mut f64,
    objective_out: *mut f64,
) -> NomaStatus {
    guard(|| {
        let problem = problem_from_raw(k, gains, weights, z, eta, p_max)?;
        let out = output(powers_out, k, "powers_out")?;
        let alloc = kkt_enumerate_solve(&problem).map_err(core_err)?;
        out.copy_from_slice(&alloc.powers);
        if !objective_out.is_null() {
            *objective_out = alloc.objective;
        }
        Ok(())
    })
}

/// Creates a simulation from a TOML run configuration (NUL-terminated
/// UTF-8). On success `*out` owns a handle for [`noma_simulation_free`].
///
/// # Safety
/// `config_toml` must be null or a valid C string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_new(config_toml: *const c_char, out: *mut *mut NomaSimulation) -> NomaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|e| (NomaStatus::Config, format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::from_toml(text)
            .and_then(|c| c.sim_config())
            .map_err(core_err)?;
        let horizon = cfg.horizon;
        let sim = Simulation::new(cfg).map_err(core_err)?;
        *out = Box::into_raw(Box::new(NomaSimulation { sim, horizon }));
        Ok(())
    })
}

/// Advances by up to `slots` slots, stopping at the configured horizon.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_step(sim: *mut NomaSimulation, slots: u64) -> NomaStatus {
    guard(|| {
        let h = sim.as_mut().ok_or_else(|| null("sim"))?;
        let left = h.horizon.saturating_sub(h.sim.state().t);
        for _ in 0..slots.min(left) {
            h.sim.step().map_err(core_err)?;
        }
        Ok(())
    })
}

/// Runs the remaining slots of the configured horizon.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_run(sim: *mut NomaSimulation) -> NomaStatus {
    noma_simulation_step(sim, u64::MAX)
}

/// Number of users, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_user_count(sim: *const NomaSimulation) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.config().user_count())
}

/// Slots simulated so far, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_slot(sim: *const NomaSimulation) -> u64 {
    sim.as_ref().map_or(0, |h| h.sim.state().t)
}

/// Current backlogs in bits; `len` must equal the user count.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_backlogs(sim: *const NomaSimulation, out: *mut u64, len: usize) -> NomaStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| null("sim"))?;
        let q = &h.sim.state().q;
        if len != q.len() {
            return Err(core_err(Error::DimensionMismatch {
                expected: q.len(),
                got: len,
            }));
        }
        output(out, len, "out")?.copy_from_slice(q);
        Ok(())
    })
}

/// Time-averaged metrics over the slots run so far. The per-user arrays
/// (rates in Mbit/s, delays in ms, backlogs in Mbit) may each be null;
/// non-null arrays must hold `len` = user count values.
///
/// # Safety
/// `sim` must be null or a live handle; pointers as described above.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_metrics(
    sim: *const NomaSimulation,
    out: *mut NomaMetrics,
    rate_mbps: *mut f64,
    delay_ms: *mut f64,
    backlog_mbit: *mut f64,
    len: usize,
) -> NomaStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| null("sim"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = h.sim.metrics();
        let k = m.user_count();
        let wants_arrays = !(rate_mbps.is_null() && delay_ms.is_null() && backlog_mbit.is_null());
        if wants_arrays && len != k {
            return Err(core_err(Error::DimensionMismatch { expected: k, got: len }));
        }
        for (p, f) in [
            (rate_mbps, &(|i| m.rate_mbps(i)) as &dyn Fn(usize) -> f64),
            (delay_ms, &|i| m.delay_ms(i)),
            (backlog_mbit, &|i| m.backlog_mbit(i)),
        ] {
            if !p.is_null() {
                for (i, v) in slice::from_raw_parts_mut(p, k).iter_mut().enumerate() {
                    *v = f(i);
                }
            }
        }
        *out = NomaMetrics {
            slots: m.slots,
            avg_power_w: m.avg_power_w,
            max_slot_power_w: m.max_slot_power_w,
            utility: m.utility,
            overall_delay_ms: m.overall_delay_ms(),
            max_z: m.max_z,
            final_z: m.final_z,
        };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn noma_simulation_free(sim: *mut NomaSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
