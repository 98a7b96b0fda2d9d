//! C ABI over `nonsmooth-adm`.
//!
//! Every function returns an [`NsaStatus`]. On failure a message is kept
//! per thread and can be read with [`nsa_last_error_message`]. Handles are
//! opaque; strings handed out by the library are released with
//! [`nsa_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nonsmooth_adm::admittance::Measurement;
use nonsmooth_adm::msta::{sta_scalar_implicit_step, MstaGains};
use nonsmooth_adm::setvalued::{project_box, prox_norm_quad, BoxConstraint, NormQuadWeights};
use nonsmooth_adm::sim::{compute_metrics, run_scenario, Scenario, ScenarioController};
use nonsmooth_adm::{Error, JointVector};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SolverFailure = 4,
    SimulationFailure = 5,
    Io = 6,
    Panic = 7,
}

/// Controller built from a scenario; create with [`nsa_controller_new`].
pub struct NsaController {
    inner: ScenarioController,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NsaStatus {
    match e {
        Error::DimensionMismatch { .. } => NsaStatus::DimensionMismatch,
        Error::SolverNonConvergence { .. } | Error::SingularMatrix(_) => NsaStatus::SolverFailure,
        Error::SimulationBlowUp { .. } | Error::StepFailure { .. } => NsaStatus::SimulationFailure,
        Error::Io(_) | Error::Csv(_) => NsaStatus::Io,
        _ => NsaStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (NsaStatus, String)>) -> NsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NsaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NsaStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NsaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NsaStatus, String) {
    (NsaStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `n` readable doubles.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (NsaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or point to `n` writable doubles.
unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], (NsaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, (NsaStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (NsaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// A preset name, a path to a scenario file, or inline JSON (leading `{`).
fn scenario_from(spec: &str) -> Result<Scenario, (NsaStatus, String)> {
    if spec.trim_start().starts_with('{') {
        let sc: Scenario = serde_json::from_str(spec).map_err(|e| (NsaStatus::InvalidArgument, e.to_string()))?;
        sc.validate().map_err(lib_err)?;
        Ok(sc)
    } else {
        Scenario::load(spec).map_err(lib_err)
    }
}

/// Message of the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nsa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nsa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the controller of a scenario (preset name, file path or inline
/// JSON). The proxy starts at rest on the scenario's `q0`.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_new(scenario: *const c_char, out: *mut *mut NsaController) -> NsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = scenario_from(string(scenario, "scenario")?)?;
        let inner = ScenarioController::new(&sc).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NsaController { inner }));
        Ok(())
    })
}

/// Releases a controller. Null is ignored.
///
/// # Safety
/// `ctrl` must be null or a handle from [`nsa_controller_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_free(ctrl: *mut NsaController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Number of joints.
///
/// # Safety
/// `ctrl` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_dof(ctrl: *const NsaController, out: *mut usize) -> NsaStatus {
    guard(|| {
        let ctrl = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ctrl.inner.dof();
        Ok(())
    })
}

/// Puts the proxy on `q` moving with `qd` and clears the integrator.
///
/// # Safety
/// `ctrl` must be a live handle; `q` and `qd` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_reset(
    ctrl: *mut NsaController,
    q: *const f64,
    qd: *const f64,
    n: usize,
) -> NsaStatus {
    guard(|| {
        let ctrl = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let q = JointVector::from_column_slice(slice(q, n, "q")?);
        let qd = JointVector::from_column_slice(slice(qd, n, "qd")?);
        ctrl.inner.reset(&q, &qd).map_err(lib_err)
    })
}

/// One controller sample. `q` is the measured joint position, `fc` the
/// joint-space contact torque and `fd` the desired joint torque; the
/// commanded torque is written to `tau_out`. `saturated_out` may be null;
/// otherwise it receives 1 for each clipped joint and 0 elsewhere. On
/// failure the controller state is unchanged.
///
/// # Safety
/// `ctrl` must be a live handle; the arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_step(
    ctrl: *mut NsaController,
    q: *const f64,
    fc: *const f64,
    fd: *const f64,
    n: usize,
    tau_out: *mut f64,
    saturated_out: *mut u8,
) -> NsaStatus {
    guard(|| {
        let ctrl = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let meas = Measurement {
            q: JointVector::from_column_slice(slice(q, n, "q")?),
            fc: JointVector::from_column_slice(slice(fc, n, "fc")?),
            fd: JointVector::from_column_slice(slice(fd, n, "fd")?),
        };
        let tau_out = slice_mut(tau_out, n, "tau_out")?;
        let (tau, diag) = ctrl.inner.step(&meas).map_err(lib_err)?;
        tau_out.copy_from_slice(tau.as_slice());
        if !saturated_out.is_null() {
            let flags = std::slice::from_raw_parts_mut(saturated_out, n);
            for (f, s) in flags.iter_mut().zip(&diag.saturated) {
                *f = u8::from(*s);
            }
        }
        Ok(())
    })
}

/// Current proxy position `q_x`.
///
/// # Safety
/// `ctrl` must be a live handle; `qx_out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsa_controller_proxy(ctrl: *const NsaController, qx_out: *mut f64, n: usize) -> NsaStatus {
    guard(|| {
        let ctrl = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let qx = &ctrl.inner.state().qx_prev;
        if qx.len() != n {
            return Err((NsaStatus::DimensionMismatch, format!("expected {} joints, got {n}", qx.len())));
        }
        slice_mut(qx_out, n, "qx_out")?.copy_from_slice(qx.as_slice());
        Ok(())
    })
}

/// Runs a whole scenario and returns its metrics as a JSON string, to be
/// released with [`nsa_string_free`].
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `metrics_json_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsa_run_scenario(scenario: *const c_char, metrics_json_out: *mut *mut c_char) -> NsaStatus {
    guard(|| {
        if metrics_json_out.is_null() {
            return Err(null("metrics_json_out"));
        }
        let sc = scenario_from(string(scenario, "scenario")?)?;
        let trace = run_scenario(&sc).map_err(lib_err)?;
        let json = serde_json::to_string(&compute_metrics(&trace, &sc)).map_err(|e| (NsaStatus::Io, e.to_string()))?;
        *metrics_json_out = CString::new(json).map_err(|e| (NsaStatus::Io, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Entrywise clamp of `y` to `[-limits_i, limits_i]`.
///
/// # Safety
/// `y`, `limits` and `out` must hold `n` doubles; `out` may alias `y`.
#[no_mangle]
pub unsafe extern "C" fn nsa_project_box(y: *const f64, limits: *const f64, n: usize, out: *mut f64) -> NsaStatus {
    guard(|| {
        let y = JointVector::from_column_slice(slice(y, n, "y")?);
        let b = BoxConstraint::new(slice(limits, n, "limits")?.to_vec()).map_err(lib_err)?;
        let p = project_box(&y, &b).map_err(lib_err)?;
        slice_mut(out, n, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// `argmin_x ||x - z||²/(2 index) + a||x|| + (b/2)||x||²`.
///
/// # Safety
/// `z` and `out` must hold `n` doubles; `out` may alias `z`.
#[no_mangle]
pub unsafe extern "C" fn nsa_prox_norm_quad(
    z: *const f64,
    n: usize,
    index: f64,
    a: f64,
    b: f64,
    out: *mut f64,
) -> NsaStatus {
    guard(|| {
        if !(index > 0.0 && index.is_finite()) {
            return Err((NsaStatus::InvalidArgument, format!("index must be > 0, got {index}")));
        }
        let w = NormQuadWeights::new(a, b).map_err(lib_err)?;
        let z = JointVector::from_column_slice(slice(z, n, "z")?);
        let p = prox_norm_quad(&z, index, w);
        slice_mut(out, n, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// One closed-form implicit STA sample for scalar `s`: writes `u_s` and
/// the next integrator value.
///
/// # Safety
/// `u_out` and `v_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsa_sta_scalar_step(
    s: f64,
    k2: f64,
    k3: f64,
    beta: f64,
    h: f64,
    v: f64,
    u_out: *mut f64,
    v_out: *mut f64,
) -> NsaStatus {
    guard(|| {
        if u_out.is_null() || v_out.is_null() {
            return Err(null("output"));
        }
        let g = MstaGains::new(k2, k3, 0.0).map_err(lib_err)?;
        if !(beta > 0.0 && h > 0.0 && s.is_finite() && v.is_finite()) {
            return Err((NsaStatus::InvalidArgument, "need beta > 0, h > 0 and finite s, v".into()));
        }
        let out = sta_scalar_implicit_step(s, &g, beta, h, v);
        *u_out = out.u_s;
        *v_out = out.v;
        Ok(())
    })
}
