//! C ABI over `mrwlab`.
//!
//! Models live behind an opaque [`MrwModel`] handle. Every fallible call
//! returns an [`MrwStatus`]; on failure the message is available from
//! [`mrw_last_error_message`] on the same thread. Strings returned by the
//! library must be released with [`mrw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mrwlab::cli::{RunConfig, Status};
use mrwlab::model::{model_zoo, stationary_distribution, stationary_drift, MrwSpec, StationaryDistribution};
use mrwlab::theory::{cross_validate, ExactPipeline, PipelineOptions};
use mrwlab::Error;

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrwStatus {
    Ok = 0,
    IdentityFailure = 1,
    ConfigError = 2,
    NonConvergence = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Validated model with its stationary law.
pub struct MrwModel {
    spec: MrwSpec,
    pi: StationaryDistribution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(e: &Error) -> MrwStatus {
    set_error(e.to_string());
    match Status::from_error(e) {
        Status::NonConvergence => MrwStatus::NonConvergence,
        _ => MrwStatus::ConfigError,
    }
}

fn guard(f: impl FnOnce() -> MrwStatus) -> MrwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            MrwStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, MrwStatus> {
    if s.is_null() {
        set_error(format!("{what} is null"));
        return Err(MrwStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        MrwStatus::ConfigError
    })
}

fn into_handle(spec: MrwSpec, out: *mut *mut MrwModel) -> MrwStatus {
    match stationary_distribution(&spec) {
        Ok(pi) => {
            unsafe { *out = Box::into_raw(Box::new(MrwModel { spec, pi })) };
            MrwStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

fn into_c_string(s: String, out: *mut *mut c_char) -> MrwStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            MrwStatus::Ok
        }
        Err(_) => {
            set_error("output contains a NUL byte");
            MrwStatus::Panic
        }
    }
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => {
                set_error(concat!($what, " is null"));
                return MrwStatus::NullPointer;
            }
        }
    };
}

macro_rules! check_out {
    ($p:expr) => {
        if $p.is_null() {
            set_error("output pointer is null");
            return MrwStatus::NullPointer;
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mrw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a model from its JSON description.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_from_json(json: *const c_char, out: *mut *mut MrwModel) -> MrwStatus {
    guard(|| {
        check_out!(out);
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match MrwSpec::from_json(text) {
            Ok(spec) => into_handle(spec, out),
            Err(e) => fail(&e),
        }
    })
}

/// Builds a named model. `params_json` may be null for defaults.
///
/// # Safety
/// `name` and a non-null `params_json` must be NUL-terminated; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_from_zoo(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut MrwModel,
) -> MrwStatus {
    guard(|| {
        check_out!(out);
        let name = match read_str(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let params = if params_json.is_null() {
            serde_json::json!({})
        } else {
            let text = match read_str(params_json, "params_json") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str(text) {
                Ok(v) => v,
                Err(e) => return fail(&Error::from(e)),
            }
        };
        match model_zoo(name, &params) {
            Ok(spec) => into_handle(spec, out),
            Err(e) => fail(&e),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from one of the constructors and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_free(model: *mut MrwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_num_states(model: *const MrwModel, out: *mut usize) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        check_out!(out);
        *out = m.spec.num_states();
        MrwStatus::Ok
    })
}

fn write_vec(values: &[f64], out: *mut f64, len: usize) -> MrwStatus {
    check_out!(out);
    if len < values.len() {
        set_error(format!("buffer holds {len} values, {} needed", values.len()));
        return MrwStatus::BufferTooSmall;
    }
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    MrwStatus::Ok
}

/// Copies `π` into `out[0..num_states]`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_stationary(model: *const MrwModel, out: *mut f64, len: usize) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        write_vec(&m.pi.pi, out, len)
    })
}

/// Stationary drift `μ` in units of the walk.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrw_model_drift(model: *const MrwModel, out: *mut f64) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        check_out!(out);
        *out = stationary_drift(&m.spec, &m.pi).mu;
        MrwStatus::Ok
    })
}

fn pipeline(m: &MrwModel) -> Result<ExactPipeline, MrwStatus> {
    ExactPipeline::run(&m.spec, &PipelineOptions::default()).map_err(|e| fail(&e))
}

/// Stationary law of the ladder chain and the escape constant `c`.
/// Refuses models without positive drift.
///
/// # Safety
/// `model` must be a live handle; `pi_ladder` must hold `len` doubles;
/// `c` may be null.
#[no_mangle]
pub unsafe extern "C" fn mrw_ladder_stationary(
    model: *const MrwModel,
    pi_ladder: *mut f64,
    len: usize,
    c: *mut f64,
) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        let ex = match pipeline(m) {
            Ok(ex) => ex,
            Err(s) => return s,
        };
        let s = write_vec(&ex.ladder.pi_ladder, pi_ladder, len);
        if s == MrwStatus::Ok && !c.is_null() {
            *c = ex.ladder.c;
        }
        s
    })
}

/// Largest entrywise total-variation residual of the Wiener-Hopf
/// factorization.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrw_factorization_residual(model: *const MrwModel, out: *mut f64) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        check_out!(out);
        match pipeline(m) {
            Ok(ex) => {
                *out = ex.factorization.max_residual;
                MrwStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Runs the exact identities and the Monte Carlo cross-checks and returns
/// the report as JSON in `*out_json`. `config_json` uses the command-line
/// config format without a model and may be null for defaults; `seed`
/// overrides any seed it contains. Returns `MRW_STATUS_IDENTITY_FAILURE`
/// with a complete report when a check fails.
///
/// # Safety
/// `model` must be a live handle; a non-null `config_json` must be
/// NUL-terminated; `out_json` must be writable. Free the result with
/// [`mrw_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mrw_verify_json(
    model: *const MrwModel,
    config_json: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> MrwStatus {
    guard(|| {
        let m = deref!(model, "model");
        check_out!(out_json);
        let cfg = if config_json.is_null() {
            RunConfig::from_json("{}")
        } else {
            match read_str(config_json, "config_json") {
                Ok(t) => RunConfig::from_json(t),
                Err(s) => return s,
            }
        };
        let cfg = match cfg {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        let exact = match ExactPipeline::run(&m.spec, &cfg.pipeline_options()) {
            Ok(ex) => ex,
            Err(e) => return fail(&e),
        };
        let report = match cross_validate(&m.spec, &exact, &cfg.tolerances, &cfg.mc, seed) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        let text = serde_json::to_string(&report).expect("report is serializable");
        match into_c_string(text, out_json) {
            MrwStatus::Ok if !report.pass => {
                set_error(format!("failed identities: {}", report.failures().join(", ")));
                MrwStatus::IdentityFailure
            }
            s => s,
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mrw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
