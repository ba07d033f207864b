//! Closed-loop tracking of a planned polyline.
//!
//! Each control step: measure the deviation from the polyline, arbitrate a
//! nominal command toward a lookahead point, add command noise, convert to
//! wheel speeds, apply the fuzzy speed-difference correction, convert back
//! and integrate.
//!
//! Sign conventions: center deviation is positive to the left of the travel
//! direction, angle deviation is positive counter-clockwise of the path
//! tangent. The fuzzy output is read as a left-minus-right wheel difference,
//! so it enters [`apply_speed_difference`] negated.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::{arbitrate, BehaviorMode, BehaviorParams, SensorSnapshot};
use crate::dynamics::{
    apply_speed_difference, command_to_wheels, constraint_residual, integrate, wheels_to_command, wrap_angle,
    DynamicsError, Pose, RobotGeometry, VelocityCommand,
};
use crate::fuzzy::FuzzyController;
use crate::planner::PathPlan;
use crate::world::{Point, Scenario};

pub const OFF_TRACK_ANGLE_DEG: f64 = 10.0;
pub const OFF_TRACK_CENTER_MM: f64 = 100.0;
pub const CONVERGED_ANGLE_DEG: f64 = 2.0;
pub const CONVERGED_CENTER_MM: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation setting: {0}")]
    InvalidSetting(String),
    #[error("empty tracking log")]
    EmptyLog,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub const fn none() -> Self {
        Self { sigma_v: 0.0, sigma_omega: 0.0, seed: 0 }
    }
}

/// Angle deviation in degrees and center deviation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Deviation {
    pub angle_dev: f64,
    pub center_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    pub point: Point,
    /// Arc length from the first waypoint to `point`.
    pub arc_length: f64,
    pub heading: f64,
    /// Signed perpendicular offset in meters, positive to the left.
    pub offset: f64,
}

/// Closest point on the polyline; ties go to the earlier segment.
/// Zero-length segments are skipped unless every segment is degenerate.
pub fn project(p: Point, plan: &PathPlan) -> Projection {
    let wps = plan.waypoints();
    let mut best: Option<(f64, Projection)> = None;
    let mut arc = 0.0;
    for (i, w) in wps.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        let s = ((p.x - a.x) * ux + (p.y - a.y) * uy).clamp(0.0, len);
        let q = Point::new(a.x + s * ux, a.y + s * uy);
        let dist = p.distance(q);
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            let offset = ux * (p.y - a.y) - uy * (p.x - a.x);
            best = Some((
                dist,
                Projection { segment: i, point: q, arc_length: arc + s, heading: uy.atan2(ux), offset },
            ));
        }
        arc += len;
    }
    best.map(|(_, pr)| pr).unwrap_or(Projection {
        segment: 0,
        point: wps[0],
        arc_length: 0.0,
        heading: 0.0,
        offset: 0.0,
    })
}

/// Point at arc length `s` along the polyline, clamped to the ends.
pub fn point_at_arc_length(plan: &PathPlan, s: f64) -> Point {
    let mut remaining = s.max(0.0);
    for w in plan.waypoints().windows(2) {
        let len = w[0].distance(w[1]);
        if remaining <= len && len > 0.0 {
            let t = remaining / len;
            return Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
        }
        remaining -= len;
    }
    plan.last()
}

pub fn compute_deviation(pose: &Pose, plan: &PathPlan) -> Deviation {
    let pr = project(pose.position(), plan);
    Deviation {
        angle_dev: wrap_angle(pose.theta - pr.heading).to_degrees(),
        center_dev: pr.offset * 1000.0,
    }
}

pub fn off_track(dev: &Deviation) -> bool {
    dev.angle_dev.abs() > OFF_TRACK_ANGLE_DEG || dev.center_dev.abs() > OFF_TRACK_CENTER_MM
}

fn in_band(dev: &Deviation) -> bool {
    dev.angle_dev.abs() <= CONVERGED_ANGLE_DEG && dev.center_dev.abs() <= CONVERGED_CENTER_MM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub steps: usize,
    pub goal_radius: f64,
    /// Distance ahead of the projection used as the behavior target.
    pub lookahead: f64,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    /// Noise seed; the run-config seed is used when unset.
    pub noise_seed: Option<u64>,
    /// Initial lateral offset from the first path segment, mm (left positive).
    pub start_offset_mm: f64,
    /// Initial heading offset, degrees (counter-clockwise positive).
    pub start_heading_offset_deg: f64,
    /// Start aligned with the first path segment instead of the scenario heading.
    pub align_start: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            steps: 2000,
            goal_radius: 0.1,
            lookahead: 0.5,
            sigma_v: 0.0,
            sigma_omega: 0.0,
            noise_seed: None,
            start_offset_mm: 0.0,
            start_heading_offset_deg: 0.0,
            align_start: true,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSetting(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.steps < 1 {
            return bad("steps must be >= 1".into());
        }
        for (name, v) in [
            ("goal_radius", self.goal_radius),
            ("lookahead", self.lookahead),
            ("sigma_v", self.sigma_v),
            ("sigma_omega", self.sigma_omega),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.start_offset_mm.is_finite() && self.start_heading_offset_deg.is_finite()) {
            return bad("start offsets must be finite".into());
        }
        Ok(())
    }

    pub fn noise(&self, default_seed: u64) -> NoiseModel {
        NoiseModel {
            sigma_v: self.sigma_v,
            sigma_omega: self.sigma_omega,
            seed: self.noise_seed.unwrap_or(default_seed),
        }
    }

    /// Starting pose displaced from the scenario start by the configured offsets.
    pub fn start_pose(&self, scenario: &Scenario, plan: &PathPlan) -> Pose {
        let heading = project(plan.first(), plan).heading;
        let base = if self.align_start { heading } else { scenario.start.theta };
        let offset = self.start_offset_mm / 1000.0;
        let s = scenario.start.position();
        Pose::new(
            s.x - offset * heading.sin(),
            s.y + offset * heading.cos(),
            wrap_angle(base + self.start_heading_offset_deg.to_radians()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSample {
    pub step: usize,
    pub t: f64,
    pub pose: Pose,
    pub cmd: VelocityCommand,
    pub deviation: Deviation,
    pub fuzzy_out: f64,
    pub off_track: bool,
    pub mode: BehaviorMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingLog {
    pub samples: Vec<TrackingSample>,
    pub final_pose: Pose,
    pub realized_length: f64,
    pub off_track_events: usize,
    pub reached_goal: bool,
    pub collided: bool,
    /// Largest |lateral-slip residual| over all integration steps.
    pub max_constraint_residual: f64,
}

impl TrackingLog {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,t,x,y,theta,v_cmd,omega_cmd,angle_dev_deg,center_dev_mm,fuzzy_out,off_track\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                s.step,
                s.t,
                s.pose.x,
                s.pose.y,
                s.pose.theta,
                s.cmd.v,
                s.cmd.omega,
                s.deviation.angle_dev,
                s.deviation.center_dev,
                s.fuzzy_out,
                s.off_track as u8
            );
        }
        out
    }
}

/// Everything [`run_tracking`] needs besides the scenario and plan.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    pub behavior: &'a BehaviorParams,
    pub fuzzy: &'a FuzzyController,
    pub geometry: &'a RobotGeometry,
    pub settings: &'a SimSettings,
}

pub fn run_tracking(
    scenario: &Scenario,
    plan: &PathPlan,
    tracker: &Tracker<'_>,
    noise: &NoiseModel,
    start: Pose,
) -> Result<TrackingLog, SimError> {
    let settings = tracker.settings;
    settings.validate()?;
    tracker.geometry.validate()?;
    if !(noise.sigma_v >= 0.0 && noise.sigma_omega >= 0.0) {
        return Err(SimError::InvalidSetting("noise sigmas must be >= 0".into()));
    }
    let params = tracker.behavior;
    let dt = settings.dt;
    let goal = scenario.goal;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut log = TrackingLog { samples: Vec::with_capacity(settings.steps), ..Default::default() };
    let mut pose = start;
    let mut was_off = false;

    for step in 0..settings.steps {
        let here = pose.position();
        if here.distance(goal) <= settings.goal_radius {
            log.reached_goal = true;
            break;
        }
        let near = scenario.nearest_obstacle(here);
        if near.distance <= 0.0 {
            log.collided = true;
            break;
        }
        let deviation = compute_deviation(&pose, plan);
        let target = point_at_arc_length(plan, project(here, plan).arc_length + settings.lookahead);
        let snapshot = SensorSnapshot {
            phi_obstacle: if near.index.is_some() { wrap_angle(near.bearing - pose.theta) } else { 0.0 },
            d_obstacle: near.distance,
            phi_goal: wrap_angle((target.y - here.y).atan2(target.x - here.x) - pose.theta),
            d_goal: here.distance(goal),
        };
        let nominal = arbitrate(&snapshot, params);

        let mut cmd = nominal.cmd;
        if noise.sigma_v > 0.0 {
            cmd.v += noise.sigma_v * rng.sample::<f64, _>(StandardNormal);
        }
        if noise.sigma_omega > 0.0 {
            cmd.omega += noise.sigma_omega * rng.sample::<f64, _>(StandardNormal);
        }
        let fuzzy_out = tracker.fuzzy.controller_step(deviation.angle_dev, deviation.center_dev);
        let wheels = apply_speed_difference(command_to_wheels(cmd, tracker.geometry), -fuzzy_out);
        let applied = wheels_to_command(wheels, tracker.geometry).clamped(params.v_max, params.omega_max);

        let next = integrate(pose, applied, dt)?;
        log.max_constraint_residual = log.max_constraint_residual.max(constraint_residual(pose, next, dt).abs());

        let is_off = off_track(&deviation);
        if is_off && !was_off {
            log.off_track_events += 1;
        }
        was_off = is_off;
        log.samples.push(TrackingSample {
            step,
            t: step as f64 * dt,
            pose,
            cmd: applied,
            deviation,
            fuzzy_out,
            off_track: is_off,
            mode: nominal.mode,
        });
        log.realized_length += here.distance(next.position());
        pose = next;
    }
    if !log.reached_goal && !log.collided && pose.position().distance(goal) <= settings.goal_radius {
        log.reached_goal = true;
    }
    log.final_pose = pose;
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub convergence_step: Option<usize>,
    pub max_center_mm: f64,
    pub max_angle_deg: f64,
    pub realized_length_m: f64,
    pub off_track_events: usize,
    pub reached_goal: bool,
}

pub fn summarize(log: &TrackingLog) -> Result<TrackingSummary, SimError> {
    if log.samples.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let convergence_step = match log.samples.iter().rposition(|s| !in_band(&s.deviation)) {
        None => Some(0),
        Some(last_out) if last_out + 1 < log.samples.len() => Some(log.samples[last_out + 1].step),
        Some(_) => None,
    };
    let max_center_mm = log.samples.iter().map(|s| s.deviation.center_dev.abs()).fold(0.0, f64::max);
    let max_angle_deg = log.samples.iter().map(|s| s.deviation.angle_dev.abs()).fold(0.0, f64::max);
    Ok(TrackingSummary {
        convergence_step,
        max_center_mm,
        max_angle_deg,
        realized_length_m: log.realized_length,
        off_track_events: log.off_track_events,
        reached_goal: log.reached_goal,
    })
}
