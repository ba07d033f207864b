//! C ABI for wayforge.
//!
//! Every fallible function returns a [`WfStatus`]; on failure a message is
//! available from [`wf_last_error`] on the same thread. Objects are opaque
//! handles created by `wf_*_new`/`wf_*_parse`-style functions and released
//! with the matching `wf_*_free`. Free functions accept NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wayforge::config::RunConfig;
use wayforge::dynamics::{integrate, Pose, VelocityCommand};
use wayforge::fuzzy::{FuzzyController, FuzzySettings};
use wayforge::planner::{plan_scenario, reported_length, EnergyBreakdown, PathPlan};
use wayforge::simloop::{run_tracking, summarize, Tracker};
use wayforge::world::Scenario;

/// Result codes. Values 2 to 5 match the `wayforge` CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Scenario = 3,
    Mismatch = 4,
    Internal = 5,
    InvalidArgument = 6,
    Panic = 7,
}

pub struct WfScenario(Scenario);

pub struct WfConfig(RunConfig);

pub struct WfPlan {
    plan: PathPlan,
    energy: EnergyBreakdown,
}

pub struct WfFuzzy(FuzzyController);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WfPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WfEnergy {
    pub f_l: f64,
    pub f_z: f64,
    pub f: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WfTrackingSummary {
    /// -1 when the deviations never settle inside the band.
    pub convergence_step: i64,
    pub max_center_mm: f64,
    pub max_angle_deg: f64,
    pub realized_length_m: f64,
    pub off_track_events: u64,
    pub reached_goal: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (WfStatus, String);

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WfStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            WfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (WfStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (WfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Last error message on this thread, or NULL. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses scenario-file text.
///
/// # Safety
/// `text_ptr` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_parse(text_ptr: *const c_char, out: *mut *mut WfScenario) -> WfStatus {
    guard(|| {
        let s = Scenario::parse(text(text_ptr, "text")?).map_err(|e| (WfStatus::Scenario, e.to_string()))?;
        store(out, WfScenario(s))
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_free(scenario: *mut WfScenario) {
    release(scenario)
}

/// Number of obstacles, or 0 for NULL.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_obstacle_count(scenario: *const WfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.obstacles.len())
}

/// Default run configuration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wf_config_default(out: *mut *mut WfConfig) -> WfStatus {
    guard(|| store(out, WfConfig(RunConfig::default())))
}

/// Parses TOML config text. Relative scenario paths resolve against
/// `base_dir`, which may be NULL for the working directory.
///
/// # Safety
/// `toml` and non-NULL `base_dir` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_config_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut WfConfig,
) -> WfStatus {
    guard(|| {
        let body = text(toml, "toml")?;
        let base = if base_dir.is_null() { "" } else { text(base_dir, "base_dir")? };
        let cfg = RunConfig::from_toml(body, Path::new(base), Path::new("<ffi>"))
            .map_err(|e| (WfStatus::Config, e.to_string()))?;
        store(out, WfConfig(cfg))
    })
}

/// # Safety
/// `config` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wf_config_free(config: *mut WfConfig) {
    release(config)
}

/// Loads the scenario file the config refers to.
///
/// # Safety
/// `config` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_config_load_scenario(config: *const WfConfig, out: *mut *mut WfScenario) -> WfStatus {
    guard(|| {
        let cfg = borrow(config, "config")?;
        let s = cfg.0.load_scenario().map_err(|e| (WfStatus::Scenario, e.to_string()))?;
        store(out, WfScenario(s))
    })
}

/// Plans a path for `scenario` with the config's planner section and `seed`.
///
/// # Safety
/// `scenario` and `config` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_plan(
    scenario: *const WfScenario,
    config: *const WfConfig,
    seed: u64,
    out: *mut *mut WfPlan,
) -> WfStatus {
    guard(|| {
        let s = borrow(scenario, "scenario")?;
        let cfg = borrow(config, "config")?;
        let outcome = plan_scenario(&s.0, &cfg.0.planner, seed)
            .map_err(|e| (WfStatus::Internal, format!("planning failed: {e}")))?;
        store(out, WfPlan { plan: outcome.plan, energy: outcome.energy })
    })
}

/// # Safety
/// `plan` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wf_plan_free(plan: *mut WfPlan) {
    release(plan)
}

/// Number of waypoints, or 0 for NULL.
///
/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wf_plan_len(plan: *const WfPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.plan.len())
}

/// Copies waypoints as interleaved `x, y` pairs into `xy`, which must hold
/// `2 * wf_plan_len(plan)` doubles; `capacity` is its length in doubles.
///
/// # Safety
/// `plan` must be a live handle; `xy` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn wf_plan_waypoints(plan: *const WfPlan, xy: *mut f64, capacity: usize) -> WfStatus {
    guard(|| {
        let p = borrow(plan, "plan")?;
        if xy.is_null() {
            return Err(null("xy"));
        }
        let needed = 2 * p.plan.len();
        if capacity < needed {
            return Err((WfStatus::InvalidArgument, format!("xy holds {capacity} doubles, need {needed}")));
        }
        let dst = std::slice::from_raw_parts_mut(xy, needed);
        for (pair, w) in dst.chunks_exact_mut(2).zip(p.plan.waypoints()) {
            pair[0] = w.x;
            pair[1] = w.y;
        }
        Ok(())
    })
}

/// Sum of segment lengths in meters, or NaN for NULL.
///
/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wf_plan_length(plan: *const WfPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| reported_length(&p.plan))
}

/// # Safety
/// `plan` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_plan_energy(plan: *const WfPlan, out: *mut WfEnergy) -> WfStatus {
    guard(|| {
        let p = borrow(plan, "plan")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = WfEnergy { f_l: p.energy.f_l, f_z: p.energy.f_z, f: p.energy.f };
        Ok(())
    })
}

/// Tracks `plan` in closed loop with the config's robot, behavior, fuzzy
/// and sim sections; noise is seeded from the config.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_track(
    scenario: *const WfScenario,
    plan: *const WfPlan,
    config: *const WfConfig,
    out: *mut WfTrackingSummary,
) -> WfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.0;
        let plan = &borrow(plan, "plan")?.plan;
        let cfg = &borrow(config, "config")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        plan.validate_for(s).map_err(|e| (WfStatus::Mismatch, e.to_string()))?;
        let fuzzy = cfg.fuzzy_controller();
        let tracker = Tracker { behavior: &cfg.behavior, fuzzy: &fuzzy, geometry: &cfg.robot, settings: &cfg.sim };
        let internal = |e: wayforge::simloop::SimError| (WfStatus::Internal, e.to_string());
        let log = run_tracking(s, plan, &tracker, &cfg.sim.noise(cfg.seed), cfg.sim.start_pose(s, plan))
            .map_err(internal)?;
        let summary = summarize(&log).map_err(internal)?;
        *out = WfTrackingSummary {
            convergence_step: summary.convergence_step.map_or(-1, |s| s as i64),
            max_center_mm: summary.max_center_mm,
            max_angle_deg: summary.max_angle_deg,
            realized_length_m: summary.realized_length_m,
            off_track_events: summary.off_track_events as u64,
            reached_goal: summary.reached_goal,
        };
        Ok(())
    })
}

/// Fuzzy controller from the config's fuzzy section, or the defaults when
/// `config` is NULL.
///
/// # Safety
/// `config` must be NULL or a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_fuzzy_new(config: *const WfConfig, out: *mut *mut WfFuzzy) -> WfStatus {
    guard(|| {
        let settings = config.as_ref().map_or_else(FuzzySettings::default, |c| c.0.fuzzy);
        let ctrl = FuzzyController::from_settings(&settings).map_err(|e| (WfStatus::Config, e.to_string()))?;
        store(out, WfFuzzy(ctrl))
    })
}

/// Speed difference for an angle deviation (degrees) and center deviation
/// (millimeters).
///
/// # Safety
/// `fuzzy` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wf_fuzzy_eval(fuzzy: *const WfFuzzy, angle_deg: f64, center_mm: f64, out: *mut f64) -> WfStatus {
    guard(|| {
        let f = borrow(fuzzy, "fuzzy")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = f.0.controller_step(angle_deg, center_mm);
        Ok(())
    })
}

/// # Safety
/// `fuzzy` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wf_fuzzy_free(fuzzy: *mut WfFuzzy) {
    release(fuzzy)
}

/// One forward-Euler step of the unicycle model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wf_integrate(pose: WfPose, v: f64, omega: f64, dt: f64, out: *mut WfPose) -> WfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let next = integrate(Pose::new(pose.x, pose.y, pose.theta), VelocityCommand::new(v, omega), dt)
            .map_err(|e| (WfStatus::InvalidArgument, e.to_string()))?;
        *out = WfPose { x: next.x, y: next.y, theta: next.theta };
        Ok(())
    })
}
