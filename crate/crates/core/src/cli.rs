//! `wayforge` command-line front end.
//!
//! Exit codes: 0 success, 2 config error (including usage errors),
//! 3 scenario error, 4 plan/scenario mismatch, 5 internal error.
//!
//! Each command is also exposed as a function so it can be driven
//! without spawning a process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, LoadScenarioError, RunConfig};
use crate::fuzzy::{FuzzyController, FuzzyEvaluation, FuzzySettings};
use crate::planner::{plan_scenario, reported_length, PathPlan, PlanError, PlanOutcome};
use crate::simloop::{run_tracking, summarize, SimError, Tracker, TrackingLog, TrackingSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SCENARIO: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] LoadScenarioError),
    #[error("plan {path}: {source}")]
    Mismatch { path: PathBuf, source: PlanError },
    #[error("cannot read plan {path}: {source}")]
    PlanIo { path: PathBuf, source: std::io::Error },
    #[error("planning failed: {0}")]
    Plan(PlanError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Scenario(_) => EXIT_SCENARIO,
            CliError::Mismatch { .. } | CliError::PlanIo { .. } => EXIT_MISMATCH,
            CliError::Plan(_) | CliError::Sim(_) | CliError::Output { .. } => EXIT_INTERNAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wayforge", version, about = "Annealed path planning and fuzzy path tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan a path; writes plan.txt and trace.csv.
    Plan {
        #[command(flatten)]
        io: IoArgs,
        /// Overrides `planner.chains`.
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Track a plan in closed loop; writes log.csv and summary.json.
    Track {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Sweep annealing budgets over seeds; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        io: IoArgs,
        /// Worker threads (default: all cores).
        #[arg(long, env = "WAYFORGE_JOBS")]
        jobs: Option<usize>,
    },
    /// Fuzzy controller utilities.
    Fuzzy {
        #[command(subcommand)]
        command: FuzzyCommand,
    },
    /// Print configuration.
    Config {
        /// Print the full default config.
        #[arg(long, required = true)]
        defaults: bool,
    },
}

#[derive(Debug, Args)]
struct IoArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum FuzzyCommand {
    /// Evaluate the controller at one input pair.
    Eval {
        /// Angle deviation, degrees.
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
        /// Center deviation, millimeters.
        #[arg(long, allow_hyphen_values = true)]
        center: f64,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(stdout) => {
            print!("{stdout}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Plan { io, chains } => {
            let mut cfg = RunConfig::load(&io.config)?;
            if let Some(n) = chains {
                cfg.planner.chains = n;
                cfg.validate()?;
            }
            let outcome = cmd_plan(&cfg, &io.out)?;
            Ok(energy_line(&outcome))
        }
        Command::Track { io, plan } => {
            let cfg = RunConfig::load(&io.config)?;
            let (_, summary) = cmd_track(&cfg, &plan, &io.out)?;
            Ok(format!("{}\n", summary_json(&summary)))
        }
        Command::Sweep { io, jobs } => {
            let cfg = RunConfig::load(&io.config)?;
            let report = cmd_sweep(&cfg, &cfg.sweep.budgets, &cfg.sweep.seeds, jobs, &io.out)?;
            let mut out = String::new();
            for row in &report.rows {
                let _ = writeln!(out, "budget={} median={:?} best={:?}", row.budget, row.median, row.best);
            }
            Ok(out)
        }
        Command::Fuzzy { command: FuzzyCommand::Eval { angle, center, config } } => {
            let settings = match config {
                Some(path) => RunConfig::load(&path)?.fuzzy,
                None => FuzzySettings::default(),
            };
            let controller = FuzzyController::from_settings(&settings)
                .map_err(|e| ConfigError::Invalid { section: "fuzzy", message: e.to_string() })?;
            let eval = controller.evaluate(angle, center);
            Ok(format_fuzzy_eval(&controller, &eval))
        }
        Command::Config { .. } => Ok(RunConfig::defaults_toml()),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn energy_line(outcome: &PlanOutcome) -> String {
    let e = outcome.energy;
    format!(
        "energy f_l={:?} f_z={:?} f={:?} length_m={:?}\n",
        e.f_l,
        e.f_z,
        e.f,
        reported_length(&outcome.plan)
    )
}

/// Plans the config's scenario and writes `plan.txt` and `trace.csv`
/// into `out_dir`.
pub fn cmd_plan(cfg: &RunConfig, out_dir: &Path) -> Result<PlanOutcome, CliError> {
    let scenario = cfg.load_scenario()?;
    let outcome = plan_scenario(&scenario, &cfg.planner, cfg.seed).map_err(CliError::Plan)?;
    let header = vec![
        format!("scenario {}", cfg.scenario_id()),
        format!("seed {}", cfg.seed),
        format!("energy {:?}", outcome.energy.f),
        format!("t0 {:?}", outcome.t0),
        format!("created_unix_ms {}", unix_ms()),
    ];
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("plan.txt"), &outcome.plan.to_file_text(&header))?;
    write_file(&out_dir.join("trace.csv"), &outcome.trace.to_csv())?;
    Ok(outcome)
}

pub fn summary_json(summary: &TrackingSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

/// Tracks the plan at `plan_path`; writes `log.csv` and `summary.json`.
pub fn cmd_track(cfg: &RunConfig, plan_path: &Path, out_dir: &Path) -> Result<(TrackingLog, TrackingSummary), CliError> {
    let scenario = cfg.load_scenario()?;
    let text = std::fs::read_to_string(plan_path)
        .map_err(|source| CliError::PlanIo { path: plan_path.to_path_buf(), source })?;
    let mismatch = |source| CliError::Mismatch { path: plan_path.to_path_buf(), source };
    let plan = PathPlan::from_file_text(&text).map_err(mismatch)?;
    plan.validate_for(&scenario).map_err(mismatch)?;

    let fuzzy = cfg.fuzzy_controller();
    let tracker = Tracker { behavior: &cfg.behavior, fuzzy: &fuzzy, geometry: &cfg.robot, settings: &cfg.sim };
    let start = cfg.sim.start_pose(&scenario, &plan);
    let log = run_tracking(&scenario, &plan, &tracker, &cfg.sim.noise(cfg.seed), start)?;
    let summary = summarize(&log)?;

    ensure_dir(out_dir)?;
    write_file(&out_dir.join("log.csv"), &log.to_csv())?;
    write_file(&out_dir.join("summary.json"), &format!("{}\n", summary_json(&summary)))?;
    Ok((log, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub budget: usize,
    /// Reported length per seed, in the order of the seed list.
    pub lengths: Vec<f64>,
    pub median: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("budget,seed,length_m\n");
        for row in &self.rows {
            for (seed, len) in self.seeds.iter().zip(&row.lengths) {
                let _ = writeln!(out, "{},{},{:?}", row.budget, seed, len);
            }
            let _ = writeln!(out, "{},median,{:?}", row.budget, row.median);
        }
        out
    }

    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median).collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Plans once per (budget, seed) and tabulates reported lengths.
pub fn sweep(cfg: &RunConfig, budgets: &[usize], seeds: &[u64], jobs: Option<usize>) -> Result<SweepReport, CliError> {
    let check = crate::config::SweepSettings { budgets: budgets.to_vec(), seeds: seeds.to_vec() };
    check.validate()?;
    let scenario = cfg.load_scenario()?;
    let runs: Vec<(usize, u64)> =
        budgets.iter().flat_map(|&b| seeds.iter().map(move |&s| (b, s))).collect();
    let work = || {
        runs.par_iter()
            .map(|&(budget, seed)| {
                let mut settings = cfg.planner;
                settings.iterations = budget;
                plan_scenario(&scenario, &settings, seed).map(|o| reported_length(&o.plan))
            })
            .collect::<Result<Vec<f64>, PlanError>>()
    };
    let lengths = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ConfigError::Invalid { section: "sweep", message: format!("jobs: {e}") })?
            .install(work),
        None => work(),
    }
    .map_err(CliError::Plan)?;

    let rows = budgets
        .iter()
        .zip(lengths.chunks(seeds.len()))
        .map(|(&budget, chunk)| SweepRow {
            budget,
            lengths: chunk.to_vec(),
            median: median(chunk),
            best: chunk.iter().copied().fold(f64::INFINITY, f64::min),
        })
        .collect();
    Ok(SweepReport { seeds: seeds.to_vec(), rows })
}

/// [`sweep`], then writes `sweep.csv` into `out_dir`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    budgets: &[usize],
    seeds: &[u64],
    jobs: Option<usize>,
    out_dir: &Path,
) -> Result<SweepReport, CliError> {
    let report = sweep(cfg, budgets, seeds, jobs)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("sweep.csv"), &report.to_csv())?;
    Ok(report)
}

pub fn format_fuzzy_eval(controller: &FuzzyController, eval: &FuzzyEvaluation) -> String {
    let mut out = format!("output {:?}\n", eval.output);
    for (rule, act) in controller.rules.iter().zip(&eval.activations) {
        let _ = writeln!(out, "rule {} activation {:?}", controller.describe_rule(rule), act);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn sweep_csv_layout() {
        let report = SweepReport {
            seeds: vec![7],
            rows: vec![SweepRow { budget: 100, lengths: vec![12.5], median: 12.5, best: 12.5 }],
        };
        assert_eq!(report.to_csv(), "budget,seed,length_m\n100,7,12.5\n100,median,12.5\n");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["wayforge", "plan"]), EXIT_CONFIG);
        assert_eq!(run(["wayforge", "frobnicate"]), EXIT_CONFIG);
    }

    #[test]
    fn missing_config_exits_2() {
        assert_eq!(run(["wayforge", "plan", "-c", "/nonexistent/run.toml"]), EXIT_CONFIG);
    }
}
