//! Waypoint-path energy model and the simulated-annealing solver that
//! minimizes it.
//!
//! The energy of a plan is `delta_l * F_l + (1 - delta_l) * F_z` where
//! `F_l` sums *squared* segment lengths and `F_z` sums a quadratic hinge
//! penalty on how deep each waypoint sits inside a margin-inflated obstacle.
//! Human-facing path length is [`reported_length`], in meters.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Bounds, Point, Scenario};

/// Number of perturbations sampled when auto-calibrating the start temperature.
pub const T0_CALIBRATION_SAMPLES: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("a plan needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("plan does not start at the scenario start")]
    StartMismatch,
    #[error("plan does not end at the scenario goal")]
    GoalMismatch,
    #[error("waypoint {0} lies outside the scenario bounds")]
    OutOfBounds(usize),
    #[error("waypoint {0} is not finite")]
    NonFinite(usize),
    #[error("invalid planner parameter: {0}")]
    InvalidParam(String),
    #[error("plan file, line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    waypoints: Vec<Point>,
}

impl PathPlan {
    pub fn new(waypoints: Vec<Point>) -> Result<Self, PlanError> {
        if waypoints.len() < 2 {
            return Err(PlanError::TooFewWaypoints(waypoints.len()));
        }
        if let Some(i) = waypoints.iter().position(|p| !p.is_finite()) {
            return Err(PlanError::NonFinite(i));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn first(&self) -> Point {
        self.waypoints[0]
    }

    pub fn last(&self) -> Point {
        self.waypoints[self.waypoints.len() - 1]
    }

    /// Endpoints pinned to start/goal, every waypoint inside bounds.
    pub fn validate_for(&self, scenario: &Scenario) -> Result<(), PlanError> {
        if self.first() != scenario.start.position() {
            return Err(PlanError::StartMismatch);
        }
        if self.last() != scenario.goal {
            return Err(PlanError::GoalMismatch);
        }
        if let Some(i) = self.waypoints.iter().position(|p| !scenario.bounds.contains(*p)) {
            return Err(PlanError::OutOfBounds(i));
        }
        Ok(())
    }

    /// Plan file body: `#` header lines followed by one `x y` pair per line.
    pub fn to_file_text(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        for p in &self.waypoints {
            let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
        }
        out
    }

    pub fn from_file_text(text: &str) -> Result<Self, PlanError> {
        let mut pts = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PlanError::Format { line: idx + 1, message };
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != 2 {
                return Err(err(format!("expected `x y`, found {} values", vals.len())));
            }
            pts.push(Point::new(vals[0], vals[1]));
        }
        Self::new(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub delta_l: f64,
    pub penalty_scale: f64,
    pub margin: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(0.0..=1.0).contains(&self.delta_l) {
            return Err(PlanError::InvalidParam(format!("delta_l must be in [0, 1], got {}", self.delta_l)));
        }
        if !(self.penalty_scale > 0.0 && self.penalty_scale.is_finite()) {
            return Err(PlanError::InvalidParam(format!(
                "penalty_scale must be > 0, got {}",
                self.penalty_scale
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(PlanError::InvalidParam(format!("margin must be >= 0, got {}", self.margin)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub f_l: f64,
    pub f_z: f64,
    pub f: f64,
}

/// Sum of squared segment lengths.
pub fn length_energy(waypoints: &[Point]) -> f64 {
    waypoints
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            dx * dx + dy * dy
        })
        .fold(0.0, |acc, x| acc + x)
}

/// Quadratic hinge penalty of a single waypoint against every obstacle.
// Sums fold from +0.0; an empty `Sum` of f64 yields -0.0.
pub fn waypoint_penalty(p: Point, scenario: &Scenario, params: &EnergyParams) -> f64 {
    scenario
        .obstacles
        .iter()
        .map(|o| {
            let depth = (o.radius + params.margin - p.distance(o.center())).max(0.0);
            params.penalty_scale * depth * depth
        })
        .fold(0.0, |acc, x| acc + x)
}

pub fn energy(plan: &PathPlan, scenario: &Scenario, params: &EnergyParams) -> EnergyBreakdown {
    let f_l = length_energy(&plan.waypoints);
    let f_z: f64 = plan.waypoints.iter().map(|&p| waypoint_penalty(p, scenario, params)).fold(0.0, |acc, x| acc + x);
    EnergyBreakdown { f_l, f_z, f: params.delta_l * f_l + (1.0 - params.delta_l) * f_z }
}

/// Sum of Euclidean segment lengths, meters.
pub fn reported_length(plan: &PathPlan) -> f64 {
    plan.waypoints.windows(2).map(|w| w[0].distance(w[1])).fold(0.0, |acc, x| acc + x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    StraightLine,
    #[default]
    Random,
}

pub fn init_plan(
    scenario: &Scenario,
    m: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<PathPlan, PlanError> {
    if m < 2 {
        return Err(PlanError::TooFewWaypoints(m));
    }
    let start = scenario.start.position();
    let goal = scenario.goal;
    let mut pts = Vec::with_capacity(m);
    pts.push(start);
    match strategy {
        InitStrategy::StraightLine => {
            let n = (m - 1) as f64;
            for i in 1..m - 1 {
                let t = i as f64 / n;
                pts.push(Point::new(start.x + t * (goal.x - start.x), start.y + t * (goal.y - start.y)));
            }
        }
        InitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = scenario.bounds;
            for _ in 1..m - 1 {
                pts.push(Point::new(rng.gen_range(b.min_x..=b.max_x), rng.gen_range(b.min_y..=b.max_y)));
            }
        }
    }
    pts.push(goal);
    PathPlan::new(pts)
}

/// Proposal distribution used by [`anneal_with`].
pub trait Neighborhood {
    fn propose<R: Rng>(&self, plan: &PathPlan, rng: &mut R) -> PathPlan;
}

/// Moves one uniformly chosen interior waypoint by an isotropic Gaussian
/// step, then clamps it to the bounds.
#[derive(Debug, Clone, Copy)]
pub struct GaussianStep {
    pub sigma: f64,
    pub bounds: Bounds,
}

impl Neighborhood for GaussianStep {
    fn propose<R: Rng>(&self, plan: &PathPlan, rng: &mut R) -> PathPlan {
        perturb(plan, self.sigma, &self.bounds, rng)
    }
}

pub fn perturb<R: Rng>(plan: &PathPlan, sigma: f64, bounds: &Bounds, rng: &mut R) -> PathPlan {
    let m = plan.len();
    if m <= 2 {
        return plan.clone();
    }
    let idx = rng.gen_range(1..m - 1);
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    let mut out = plan.clone();
    let p = out.waypoints[idx];
    out.waypoints[idx] = bounds.clamp(Point::new(p.x + sigma * dx, p.y + sigma * dy));
    out
}

pub fn metropolis_accept<R: Rng>(delta_f: f64, temperature: f64, rng: &mut R) -> bool {
    if delta_f <= 0.0 {
        return true;
    }
    if delta_f.is_nan() {
        return false;
    }
    let u: f64 = rng.gen();
    u < (-delta_f / temperature).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub perturb_sigma: f64,
    pub seed: u64,
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidParam(m));
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad(format!("t0 must be > 0, got {}", self.t0));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.perturb_sigma > 0.0 && self.perturb_sigma.is_finite()) {
            return bad(format!("perturb_sigma must be > 0, got {}", self.perturb_sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub temperature: f64,
    pub current_energy: f64,
    pub best_energy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnealTrace {
    pub records: Vec<TraceRecord>,
}

impl AnnealTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,temperature,current_energy,best_energy,accepted\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{}",
                r.iteration, r.temperature, r.current_energy, r.best_energy, r.accepted as u8
            );
        }
        out
    }
}

/// Start temperature as the population standard deviation of the energy of
/// independent perturbations of `init`. Falls back to 1 when that spread is
/// zero (e.g. a plan with no interior waypoints).
pub fn calibrate_t0(
    scenario: &Scenario,
    init: &PathPlan,
    sigma: f64,
    params: &EnergyParams,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let step = GaussianStep { sigma, bounds: scenario.bounds };
    let samples: Vec<f64> = (0..T0_CALIBRATION_SAMPLES)
        .map(|_| energy(&step.propose(init, &mut rng), scenario, params).f)
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        1.0
    }
}

/// Simulated annealing with the Gaussian single-waypoint neighborhood.
pub fn anneal(
    scenario: &Scenario,
    init: &PathPlan,
    schedule: &AnnealSchedule,
    params: &EnergyParams,
) -> Result<(PathPlan, AnnealTrace), PlanError> {
    let step = GaussianStep { sigma: schedule.perturb_sigma, bounds: scenario.bounds };
    anneal_with(scenario, init, schedule, params, &step)
}

/// Runs exactly `schedule.iterations` propose/compare/accept steps, cooling
/// `T <- alpha * T` after each, and returns the lowest-energy plan seen.
pub fn anneal_with<N: Neighborhood>(
    scenario: &Scenario,
    init: &PathPlan,
    schedule: &AnnealSchedule,
    params: &EnergyParams,
    neighborhood: &N,
) -> Result<(PathPlan, AnnealTrace), PlanError> {
    schedule.validate()?;
    params.validate()?;
    init.validate_for(scenario)?;

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut current = init.clone();
    let mut current_f = energy(&current, scenario, params).f;
    let mut best = current.clone();
    let mut best_f = current_f;
    let mut temperature = schedule.t0;
    let mut trace = AnnealTrace { records: Vec::with_capacity(schedule.iterations) };

    for iteration in 0..schedule.iterations {
        let candidate = neighborhood.propose(&current, &mut rng);
        let candidate_f = energy(&candidate, scenario, params).f;
        let accepted = metropolis_accept(candidate_f - current_f, temperature, &mut rng);
        if accepted {
            current = candidate;
            current_f = candidate_f;
            if current_f < best_f {
                best = current.clone();
                best_f = current_f;
            }
        }
        trace.records.push(TraceRecord {
            iteration,
            temperature,
            current_energy: current_f,
            best_energy: best_f,
            accepted,
        });
        temperature *= schedule.alpha;
    }
    Ok((best, trace))
}

/// Start temperature: a fixed value or calibrated from the initial plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialTemperature {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for InitialTemperature {
    fn default() -> Self {
        InitialTemperature::Auto(AutoTag::Auto)
    }
}

/// Everything needed to produce a plan for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub waypoints: usize,
    pub init: InitStrategy,
    pub delta_l: f64,
    pub penalty_scale: f64,
    /// Overrides the scenario margin in the penalty term when set.
    pub margin: Option<f64>,
    pub t0: InitialTemperature,
    pub alpha: f64,
    pub iterations: usize,
    pub perturb_sigma: f64,
    /// Independent chains on seeds `seed, seed + 1, ...`; lowest energy wins.
    pub chains: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            waypoints: 10,
            init: InitStrategy::Random,
            delta_l: 0.5,
            penalty_scale: 100.0,
            margin: None,
            t0: InitialTemperature::default(),
            alpha: 0.995,
            iterations: 500,
            perturb_sigma: 1.0,
            chains: 1,
        }
    }
}

impl PlannerSettings {
    pub fn energy_params(&self, scenario: &Scenario) -> EnergyParams {
        EnergyParams {
            delta_l: self.delta_l,
            penalty_scale: self.penalty_scale,
            margin: self.margin.unwrap_or(scenario.margin),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.waypoints < 2 {
            return Err(PlanError::TooFewWaypoints(self.waypoints));
        }
        if self.chains < 1 {
            return Err(PlanError::InvalidParam("chains must be >= 1".into()));
        }
        if let InitialTemperature::Fixed(t) = self.t0 {
            if !(t > 0.0 && t.is_finite()) {
                return Err(PlanError::InvalidParam(format!("t0 must be > 0, got {t}")));
            }
        }
        let probe = AnnealSchedule {
            t0: 1.0,
            alpha: self.alpha,
            iterations: self.iterations,
            perturb_sigma: self.perturb_sigma,
            seed: 0,
        };
        probe.validate()?;
        EnergyParams { delta_l: self.delta_l, penalty_scale: self.penalty_scale, margin: self.margin.unwrap_or(0.0) }
            .validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: PathPlan,
    pub trace: AnnealTrace,
    pub energy: EnergyBreakdown,
    pub chain_seed: u64,
    pub t0: f64,
}

fn run_chain(scenario: &Scenario, settings: &PlannerSettings, seed: u64) -> Result<PlanOutcome, PlanError> {
    let params = settings.energy_params(scenario);
    let init = init_plan(scenario, settings.waypoints, settings.init, seed)?;
    let t0 = match settings.t0 {
        InitialTemperature::Fixed(t) => t,
        InitialTemperature::Auto(_) => calibrate_t0(scenario, &init, settings.perturb_sigma, &params, seed),
    };
    let schedule = AnnealSchedule {
        t0,
        alpha: settings.alpha,
        iterations: settings.iterations,
        perturb_sigma: settings.perturb_sigma,
        seed,
    };
    let (plan, trace) = anneal(scenario, &init, &schedule, &params)?;
    let energy = energy(&plan, scenario, &params);
    Ok(PlanOutcome { plan, trace, energy, chain_seed: seed, t0 })
}

/// Plans with `settings.chains` independent chains (run in parallel) and
/// keeps the lowest final energy; ties go to the earliest chain.
pub fn plan_scenario(scenario: &Scenario, settings: &PlannerSettings, seed: u64) -> Result<PlanOutcome, PlanError> {
    settings.validate()?;
    let outcomes = (0..settings.chains as u64)
        .into_par_iter()
        .map(|k| run_chain(scenario, settings, seed.wrapping_add(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best: Option<PlanOutcome> = None;
    for o in outcomes {
        if best.as_ref().is_none_or(|b| o.energy.f < b.energy.f) {
            best = Some(o);
        }
    }
    Ok(best.expect("at least one chain"))
}
