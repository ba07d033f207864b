//! Acceptance suite. Runs every check, prints one PASS/FAIL line each and
//! exits non-zero if any check fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wayforge::cli;
use wayforge::config::RunConfig;
use wayforge::dynamics::Pose;
use wayforge::fuzzy::{FuzzyController, FuzzySettings, RuleVariant};
use wayforge::neuralnet::{Activation, MlpNetwork, TrainConfig};
use wayforge::planner::{
    anneal_with, energy, metropolis_accept, plan_scenario, AnnealSchedule, EnergyParams, Neighborhood, PathPlan,
};
use wayforge::simloop::{run_tracking, summarize, Tracker, TrackingLog};
use wayforge::world::{Bounds, CircleObstacle, Point, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&manifest_dir().join("configs").join(name)).expect("bundled config loads")
}

// ---------------------------------------------------------------- 1

fn sweep_trend() -> Outcome {
    let started = Instant::now();
    let cfg = load("sweep.toml");
    let report = cli::sweep(&cfg, &[100, 200, 300, 400, 500], &(1..=10).collect::<Vec<_>>(), None).unwrap();
    let elapsed = started.elapsed();
    let medians = report.medians();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let ratio = medians[4] / medians[0];
    outcome(
        monotone && ratio <= 0.95 && elapsed < Duration::from_secs(60),
        format!(
            "medians {:?}, median(500)/median(100) = {ratio:.3}, {:.2} s",
            medians.iter().map(|m| (m * 100.0).round() / 100.0).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Interior waypoints live on the integer lattice of the bounds; a move
/// shifts one of them by one cell along one axis.
struct LatticeStep {
    max: i32,
}

impl Neighborhood for LatticeStep {
    fn propose<R: Rng>(&self, plan: &PathPlan, rng: &mut R) -> PathPlan {
        let mut pts = plan.waypoints().to_vec();
        let idx = rng.gen_range(1..pts.len() - 1);
        let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.gen_range(0..4)];
        let p = pts[idx];
        pts[idx] = Point::new(
            (p.x as i32 + dx).clamp(0, self.max) as f64,
            (p.y as i32 + dy).clamp(0, self.max) as f64,
        );
        PathPlan::new(pts).unwrap()
    }
}

fn oracle_energy(pts: &[(f64, f64)], obstacle: (f64, f64, f64), margin: f64, delta_l: f64, scale: f64) -> f64 {
    let f_l: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sum();
    let f_z: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let d = ((x - obstacle.0).powi(2) + (y - obstacle.1).powi(2)).sqrt();
            let depth = obstacle.2 + margin - d;
            if depth > 0.0 {
                scale * depth * depth
            } else {
                0.0
            }
        })
        .sum();
    delta_l * f_l + (1.0 - delta_l) * f_z
}

fn annealing_optimality() -> Outcome {
    let started = Instant::now();
    let obstacle = (5.0, 5.0, 2.5);
    let scenario = Scenario {
        bounds: Bounds { min_x: 0.0, min_y: 0.0, max_x: 10.0, max_y: 10.0 },
        start: Pose::new(0.0, 5.0, 0.0),
        goal: Point::new(10.0, 5.0),
        obstacles: vec![CircleObstacle { cx: obstacle.0, cy: obstacle.1, radius: obstacle.2 }],
        margin: 0.2,
    };
    let params = EnergyParams { delta_l: 0.5, penalty_scale: 100.0, margin: scenario.margin };
    let ends = ((0.0, 5.0), (10.0, 5.0));

    let lattice: Vec<(f64, f64)> = (0..=10).flat_map(|x| (0..=10).map(move |y| (x as f64, y as f64))).collect();
    let mut optimum = f64::INFINITY;
    for &a in &lattice {
        for &b in &lattice {
            optimum = optimum.min(oracle_energy(&[ends.0, a, b, ends.1], obstacle, 0.2, 0.5, 100.0));
        }
    }

    let mut hits = 0;
    let mut worst_ratio = 0.0f64;
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let mut interior = || Point::new(rng.gen_range(0..=10) as f64, rng.gen_range(0..=10) as f64);
        let init = PathPlan::new(vec![Point::new(0.0, 5.0), interior(), interior(), Point::new(10.0, 5.0)]).unwrap();
        let schedule = AnnealSchedule { t0: 20.0, alpha: 0.995, iterations: 3000, perturb_sigma: 1.0, seed };
        let (best, _) = anneal_with(&scenario, &init, &schedule, &params, &LatticeStep { max: 10 }).unwrap();
        let pts: Vec<(f64, f64)> = best.waypoints().iter().map(|p| (p.x, p.y)).collect();
        let f = oracle_energy(&pts, obstacle, 0.2, 0.5, 100.0);
        assert!((f - energy(&best, &scenario, &params).f).abs() <= 1e-9 * f.max(1.0));
        worst_ratio = worst_ratio.max(f / optimum);
        if f <= 1.05 * optimum {
            hits += 1;
        }
    }
    let elapsed = started.elapsed();
    outcome(
        hits >= 9 && elapsed < Duration::from_secs(10),
        format!("{hits}/10 seeds within 5% of optimum {optimum:.4}, worst ratio {worst_ratio:.4}, {:.2} s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 3

fn metropolis_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let t = 1.7;
    let accepted = (0..n).filter(|_| metropolis_accept(t, t, &mut rng)).count();
    let rate = accepted as f64 / n as f64;
    let expected = (-1.0f64).exp();
    outcome((rate - expected).abs() <= 0.01, format!("rate {rate:.4} vs e^-1 = {expected:.4}"))
}

// ---------------------------------------------------------------- 4

fn energy_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cluttered = RunConfig::load(&manifest_dir().join("configs/plan.toml")).unwrap().load_scenario().unwrap();
    let mut worst = 0.0f64;
    let mut free_fz = 0.0f64;
    let mut free = cluttered.clone();
    free.obstacles.clear();
    for _ in 0..200 {
        let mut pts = vec![cluttered.start.position()];
        for _ in 0..8 {
            pts.push(Point::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)));
        }
        pts.push(cluttered.goal);
        let plan = PathPlan::new(pts).unwrap();
        for (delta_l, pick) in [(0.0, 0usize), (1.0, 1)] {
            let e = energy(&plan, &cluttered, &EnergyParams { delta_l, penalty_scale: 100.0, margin: 0.3 });
            let want = if pick == 0 { e.f_z } else { e.f_l };
            worst = worst.max((e.f - want).abs());
        }
        let e = energy(&plan, &free, &EnergyParams { delta_l: 0.5, penalty_scale: 100.0, margin: 0.3 });
        free_fz = free_fz.max(e.f_z.abs());
    }
    let stair = PathPlan::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)]).unwrap();
    let f_l = energy(&stair, &free, &EnergyParams { delta_l: 0.5, penalty_scale: 100.0, margin: 0.0 }).f_l;
    outcome(
        worst <= 1e-12 && free_fz == 0.0 && f_l == 2.0,
        format!("max |f - term| = {worst:e}, obstacle-free f_z = {free_fz}, staircase f_l = {f_l}"),
    )
}

// ---------------------------------------------------------------- 5

fn tri(x: f64, d: f64, c: f64, e: f64) -> f64 {
    if x < d || x > e {
        0.0
    } else if x <= c {
        if c == d {
            1.0
        } else {
            (x - d) / (c - d)
        }
    } else if e == c {
        1.0
    } else {
        (e - x) / (e - c)
    }
}

/// N/Z/P memberships over a symmetric universe of half-width `r`.
fn nzp(x: f64, r: f64) -> [f64; 3] {
    let x = x.clamp(-r, r);
    [tri(x, -r, -r, 0.0), tri(x, -r, 0.0, r), tri(x, 0.0, r, r)]
}

fn oracle_mamdani(angle: f64, center: f64) -> f64 {
    let a = nzp(angle, 10.0);
    let c = nzp(center, 100.0);
    let fired = [a[0].min(c[0]), a[1].min(c[1]), a[2].min(c[2])];
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=200 {
        let y = -10.0 + 0.1 * i as f64;
        let out = nzp(y, 10.0);
        let mu = (0..3).map(|k| fired[k].min(out[k])).fold(0.0, f64::max);
        num += mu * y;
        den += mu;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn fuzzy_oracle() -> Outcome {
    let ctrl = FuzzyController::from_settings(&FuzzySettings { rules: RuleVariant::Basic3, ..Default::default() }).unwrap();
    let mut worst = 0.0f64;
    let mut worst_odd = 0.0f64;
    for i in 0..21 {
        for j in 0..21 {
            let a = -10.0 + i as f64;
            let c = -100.0 + 10.0 * j as f64;
            worst = worst.max((ctrl.controller_step(a, c) - oracle_mamdani(a, c)).abs());
            worst_odd = worst_odd.max((ctrl.controller_step(a, c) + ctrl.controller_step(-a, -c)).abs());
        }
    }
    let origin = ctrl.controller_step(0.0, 0.0);
    outcome(
        worst <= 1e-6 && origin.abs() <= 1e-9 && worst_odd <= 1e-9,
        format!("max oracle error {worst:e}, output(0,0) = {origin:e}, max odd-symmetry error {worst_odd:e}"),
    )
}

// ---------------------------------------------------------------- 6 and 7

fn track(cfg: &RunConfig, seed: u64) -> TrackingLog {
    let scenario = cfg.load_scenario().unwrap();
    let plan = plan_scenario(&scenario, &cfg.planner, cfg.seed).unwrap().plan;
    let fuzzy = cfg.fuzzy_controller();
    let tracker = Tracker { behavior: &cfg.behavior, fuzzy: &fuzzy, geometry: &cfg.robot, settings: &cfg.sim };
    let start = cfg.sim.start_pose(&scenario, &plan);
    run_tracking(&scenario, &plan, &tracker, &cfg.sim.noise(seed), start).unwrap()
}

/// First step after which both deviations stay inside the band.
fn entered_and_stayed(log: &TrackingLog) -> Option<usize> {
    let inside = |s: &wayforge::simloop::TrackingSample| s.deviation.center_dev.abs() <= 50.0 && s.deviation.angle_dev.abs() <= 2.0;
    let mut first = None;
    for s in &log.samples {
        match (inside(s), first) {
            (true, None) => first = Some(s.step),
            (false, _) => first = None,
            _ => {}
        }
    }
    first
}

fn closed_loop(residuals: &mut Vec<f64>) -> Outcome {
    let offset = load("track_offset.toml");
    let log = track(&offset, offset.seed);
    residuals.push(log.max_constraint_residual);
    let step = entered_and_stayed(&log);
    let summary = summarize(&log).unwrap();
    let clean = step.is_some_and(|s| s <= 200) && summary.convergence_step == step;

    let noisy = load("track_noisy.toml");
    let mut quiet = 0;
    for seed in 1..=20 {
        let log = track(&noisy, seed);
        residuals.push(log.max_constraint_residual);
        if log.off_track_events == 0 && log.samples.len() == noisy.sim.steps {
            quiet += 1;
        }
    }
    outcome(
        clean && quiet >= 18,
        format!("noise-free convergence step {step:?} (limit 200), {quiet}/20 noisy seeds without off-track events"),
    )
}

fn nonholonomic(residuals: &[f64]) -> Outcome {
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max |residual| {worst:e} over {} runs", residuals.len()))
}

// ---------------------------------------------------------------- 8

fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

fn param_mut(net: &mut MlpNetwork, block: usize, k: usize) -> &mut f64 {
    match block {
        0 => &mut net.w1[k],
        1 => &mut net.b1[k],
        2 => &mut net.w2[k],
        _ => &mut net.b2[k],
    }
}

fn numeric_gradient(net: &MlpNetwork, x: &[f64], t: &[f64], eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut probe = net.clone();
    let lens = [net.w1.len(), net.b1.len(), net.w2.len(), net.b2.len()];
    for (block, &len) in lens.iter().enumerate() {
        for k in 0..len {
            let original = *param_mut(&mut probe, block, k);
            *param_mut(&mut probe, block, k) = original + eps;
            let plus = mse(&probe.forward(x).unwrap(), t);
            *param_mut(&mut probe, block, k) = original - eps;
            let minus = mse(&probe.forward(x).unwrap(), t);
            *param_mut(&mut probe, block, k) = original;
            out.push((plus - minus) / (2.0 * eps));
        }
    }
    out
}

fn gradients_and_training() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, h, o) = (rng.gen_range(1..=4), rng.gen_range(2..=8), rng.gen_range(1..=3));
        let net = MlpNetwork::random(i, h, o, Activation::Sigmoid, Activation::Sigmoid, seed);
        let x: Vec<f64> = (0..i).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..o).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, g) = net.backprop(&x, &t).unwrap();
        let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2).copied().collect();
        for (a, n) in analytic.iter().zip(numeric_gradient(&net, &x, &t, 1e-5)) {
            let scale = a.abs().max(n.abs()).max(1e-8);
            worst = worst.max((a - n).abs() / scale);
        }
    }

    let xs: Vec<Vec<f64>> = (0..=20).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
    let net = MlpNetwork::random(1, 8, 1, Activation::Sigmoid, Activation::Linear, 0);
    let (trained, history) = net.train(&xs, &xs, &TrainConfig::default()).unwrap();
    let final_mse = trained.dataset_loss(&xs, &xs).unwrap();
    let epochs_needed = history.iter().position(|&l| l < 1e-3).map(|e| e + 1);
    outcome(
        worst < 1e-4 && final_mse < 1e-3 && history.len() <= 500,
        format!("max relative gradient error {worst:e}; y = x mse {final_mse:e} (first below 1e-3 at epoch {epochs_needed:?})"),
    )
}

// ---------------------------------------------------------------- 9

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_wayforge"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_dir = manifest_dir().join("configs");
    let cfg = |name: &str| cfg_dir.join(name).to_string_lossy().into_owned();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for round in ["a", "b"] {
        let out = tmp.path().join(round);
        let o = |sub: &str| out.join(sub).to_string_lossy().into_owned();
        let ok = run_cli(&["plan", "-c", &cfg("plan.toml"), "-o", &o("plan")])
            && run_cli(&["plan", "-c", &cfg("track_noisy.toml"), "-o", &o("track")])
            && run_cli(&["track", "-c", &cfg("track_noisy.toml"), "--plan", &o("track/plan.txt"), "-o", &o("track")])
            && run_cli(&["sweep", "-c", &cfg("sweep.toml"), "-o", &o("sweep"), "--jobs", "3"]);
        if !ok {
            return outcome(false, format!("a command failed in round {round}"));
        }
    }
    for file in ["plan/plan.txt", "plan/trace.csv", "track/plan.txt", "track/log.csv", "track/summary.json", "sweep/sweep.csv"] {
        let a = body(&tmp.path().join("a").join(file));
        let b = body(&tmp.path().join("b").join(file));
        compared += 1;
        if a.is_empty() || a != b {
            mismatched.push(file);
        }
    }
    outcome(mismatched.is_empty(), format!("{compared} artifacts compared, mismatched: {mismatched:?}"))
}

fn main() {
    let mut residuals = Vec::new();
    let checks: Vec<(&str, Outcome)> = vec![
        ("1 sweep trend", sweep_trend()),
        ("2 annealing optimality", annealing_optimality()),
        ("3 metropolis calibration", metropolis_calibration()),
        ("4 energy identities", energy_identities()),
        ("5 fuzzy oracle", fuzzy_oracle()),
        ("6 closed-loop convergence", closed_loop(&mut residuals)),
        ("7 nonholonomic invariant", nonholonomic(&residuals)),
        ("8 gradient check and training", gradients_and_training()),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &checks {
        println!("acceptance {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
