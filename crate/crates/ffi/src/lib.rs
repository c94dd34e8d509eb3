//! C ABI over `landing-core`.
//!
//! Every entry point returns an [`LndStatus`]. On failure the message is kept
//! per thread and can be read with [`lnd_last_error`] until the next failing
//! call on that thread. Panics never cross the boundary; they surface as
//! `LND_STATUS_PANIC`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Passing a freed handle is undefined.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use landing_core::bundle::QBundle;
use landing_core::cli::bundle_from_run;
use landing_core::curriculum::{train_curriculum, TrainingStatus};
use landing_core::discretization::map_to_discrete;
use landing_core::evaluation::{run_scenario, TrialConfig};
use landing_core::observation::NormalizedObs1D;
use landing_core::platform::{TrajectoryKind, TrajectorySpec};
use landing_core::{Config, Error, RunContext};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LndStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonConvergence = 4,
    Format = 5,
    GeometryMismatch = 6,
    Io = 7,
    Runtime = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LndTrajectory {
    Static = 0,
    Rpm = 1,
    EightShape = 2,
}

/// Platform motion for an evaluation run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LndScenario {
    pub kind: LndTrajectory,
    pub v_mp: f64,
    pub r_mp: f64,
}

/// Hyperparameters derived from a configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LndDerived {
    pub a_mp_max: f64,
    pub omega_mp: f64,
    pub theta_max: f64,
    pub f_ag: f64,
    pub dt_agent: f64,
    pub t_0: f64,
    pub n_cs: u32,
    pub n_theta: u32,
    pub delta_theta: f64,
    pub p_max: f64,
    pub v_max: f64,
    pub a_max: f64,
}

/// Aggregate results of one evaluation scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LndStats {
    pub n_trials: u32,
    pub successes: u32,
    pub misses: u32,
    pub flyzone_exits: u32,
    pub success_rate: f64,
    /// NaN when no trial touched down.
    pub mean_landing_time: f64,
    pub jitter_mean: f64,
    pub jitter_std: f64,
}

/// Validated configuration with its derived hyperparameters.
pub struct LndConfig {
    ctx: RunContext,
}

/// Trained Q-tables for all curriculum steps.
pub struct LndPolicy {
    bundle: QBundle,
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> LndStatus {
        match self {
            Failure::Null(_) => LndStatus::NullPointer,
            Failure::Arg(_) => LndStatus::InvalidArgument,
            Failure::Core(e) => match e {
                Error::Config(_) | Error::InvalidScenario(_) | Error::OutOfRange { .. } => LndStatus::Config,
                Error::NonConvergence { .. } => LndStatus::NonConvergence,
                Error::Format(_) => LndStatus::Format,
                Error::GeometryMismatch(_) => LndStatus::GeometryMismatch,
                Error::Io { .. } => LndStatus::Io,
                Error::NonFinite(_) => LndStatus::Runtime,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(what) => format!("null pointer passed for {what}"),
            Failure::Arg(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // interior NULs cannot appear in a C string
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LndStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LndStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(fail.message());
            fail.status()
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {what}"));
            LndStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lnd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clears the per-thread error message.
#[no_mangle]
pub extern "C" fn lnd_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn box_config(config: Config, out: &mut *mut LndConfig) -> Result<(), Failure> {
    let ctx = RunContext::new(config)?;
    *out = Box::into_raw(Box::new(LndConfig { ctx }));
    Ok(())
}

/// Creates a configuration from a named preset such as `"hardware-rpm-0.4"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_config_from_preset(name: *const c_char, out: *mut *mut LndConfig) -> LndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        box_config(Config::preset(name)?, out)
    })
}

/// Creates a configuration from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_config_from_toml(toml: *const c_char, out: *mut *mut LndConfig) -> LndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        box_config(Config::from_toml_str(text)?, out)
    })
}

/// # Safety
/// `config` must be NULL or a handle from `lnd_config_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lnd_config_free(config: *mut LndConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_config_derive(config: *const LndConfig, out: *mut LndDerived) -> LndStatus {
    guard(|| {
        let ctx = &ref_arg(config, "config")?.ctx;
        let out = out_arg(out, "out")?;
        let d = &ctx.derived;
        *out = LndDerived {
            a_mp_max: d.a_mp_max,
            omega_mp: d.omega_mp,
            theta_max: d.theta_max,
            f_ag: d.f_ag,
            dt_agent: d.dt_agent,
            t_0: d.t_0,
            n_cs: d.n_cs as u32,
            n_theta: ctx.n_theta(),
            delta_theta: d.delta_theta,
            p_max: d.p_max,
            v_max: d.v_max,
            a_max: d.a_max,
        };
        Ok(())
    })
}

/// Trains a policy with master seed `seed`. When a curriculum step fails to
/// converge, `*out` still receives the partial policy and the call returns
/// `LND_STATUS_NON_CONVERGENCE`.
///
/// # Safety
/// `config` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_train(config: *const LndConfig, seed: u64, out: *mut *mut LndPolicy) -> LndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ctx = &ref_arg(config, "config")?.ctx;
        let run = train_curriculum(ctx, seed)?;
        *out = Box::into_raw(Box::new(LndPolicy {
            bundle: bundle_from_run(&run, ctx),
        }));
        match run.status {
            TrainingStatus::Converged => Ok(()),
            TrainingStatus::NonConverged { step, episodes } => Err(Error::NonConvergence { step, episodes }.into()),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_policy_load(path: *const c_char, out: *mut *mut LndPolicy) -> LndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let bundle = QBundle::load(&path)?;
        *out = Box::into_raw(Box::new(LndPolicy { bundle }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lnd_policy_save(policy: *const LndPolicy, path: *const c_char) -> LndStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        policy.bundle.save(&path)?;
        Ok(())
    })
}

/// # Safety
/// `policy` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnd_policy_free(policy: *mut LndPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of curriculum steps stored in the policy.
///
/// # Safety
/// `policy` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_policy_num_steps(policy: *const LndPolicy, out: *mut u32) -> LndStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        *out_arg(out, "out")? = policy.bundle.tables.len() as u32;
        Ok(())
    })
}

/// Greedy action for one axis. `p`, `v`, `a` are normalized relative
/// position, velocity and acceleration; `i_theta` is the current pitch index
/// in `[0, 2 n_theta]`. Writes the action (0 increase, 1 decrease, 2 hold)
/// and the curriculum step whose table was used. Ties go to the lowest
/// action index.
///
/// # Safety
/// `policy` must be a live handle; `action` and `step` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn lnd_policy_act(
    policy: *const LndPolicy,
    p: f64,
    v: f64,
    a: f64,
    i_theta: u32,
    action: *mut u32,
    step: *mut u32,
) -> LndStatus {
    guard(|| {
        let b = &ref_arg(policy, "policy")?.bundle;
        let action = out_arg(action, "action")?;
        let step = out_arg(step, "step")?;
        if i_theta > 2 * b.n_theta {
            return Err(Failure::Arg(format!("i_theta {i_theta} exceeds {}", 2 * b.n_theta)));
        }
        if ![p, v, a].iter().all(|x| x.is_finite()) {
            return Err(Failure::Arg("observation must be finite".into()));
        }
        let obs = NormalizedObs1D {
            p: p.clamp(-1.0, 1.0),
            v: v.clamp(-1.0, 1.0),
            a: a.clamp(-1.0, 1.0),
        };
        let ds = map_to_discrete(&obs, &b.geometry, i_theta as usize);
        *action = b.tables[ds.step].greedy_first(ds.flat_index(b.n_theta)).index() as u32;
        *step = ds.step as u32;
        Ok(())
    })
}

/// Runs `n_trials` landing trials (0 uses the configured count) against one
/// platform motion.
///
/// # Safety
/// `config` and `policy` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lnd_evaluate(
    config: *const LndConfig,
    policy: *const LndPolicy,
    scenario: LndScenario,
    n_trials: u32,
    noisy: bool,
    seed: u64,
    out: *mut LndStats,
) -> LndStatus {
    guard(|| {
        let ctx = &ref_arg(config, "config")?.ctx;
        let bundle = &ref_arg(policy, "policy")?.bundle;
        let out = out_arg(out, "out")?;
        let kind = match scenario.kind {
            LndTrajectory::Static => TrajectoryKind::Static,
            LndTrajectory::Rpm => TrajectoryKind::Rpm,
            LndTrajectory::EightShape => TrajectoryKind::EightShape,
        };
        let spec = TrajectorySpec {
            kind,
            v_mp: scenario.v_mp,
            r_mp: scenario.r_mp,
        };
        spec.validate()?;
        let pol = bundle.policy()?;
        pol.check_compatible(ctx)?;
        let mut cfg = TrialConfig::from_context(ctx, spec, noisy, seed);
        if n_trials > 0 {
            cfg.n_trials = n_trials as usize;
        }
        let s = run_scenario(ctx, &pol, &cfg);
        *out = LndStats {
            n_trials: s.n_trials as u32,
            successes: s.successes as u32,
            misses: s.misses as u32,
            flyzone_exits: s.flyzone_exits as u32,
            success_rate: s.success_rate,
            mean_landing_time: s.mean_landing_time,
            jitter_mean: s.jitter_mean,
            jitter_std: s.jitter_std,
        };
        Ok(())
    })
}
