//! Run-config files (TOML). One file describes a whole run: scenario,
//! planner, behaviors, fuzzy controller, simulation and sweep.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::BehaviorParams;
use crate::dynamics::RobotGeometry;
use crate::fuzzy::{FuzzyController, FuzzySettings};
use crate::planner::PlannerSettings;
use crate::simloop::SimSettings;
use crate::world::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{section}: {message}")]
    Invalid { section: &'static str, message: String },
}

#[derive(Debug, Error)]
pub enum LoadScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { budgets: vec![100, 200, 300, 400, 500], seeds: (1..=10).collect() }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |message: String| Err(ConfigError::Invalid { section: "sweep", message });
        if self.budgets.is_empty() {
            return invalid("budgets must not be empty".into());
        }
        if self.budgets.contains(&0) {
            return invalid("budgets must be >= 1".into());
        }
        if self.budgets.windows(2).any(|w| w[1] <= w[0]) {
            return invalid(format!("budgets must be strictly increasing, got {:?}", self.budgets));
        }
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario file, relative to the config file's directory.
    pub scenario: PathBuf,
    pub seed: u64,
    pub robot: RobotGeometry,
    pub planner: PlannerSettings,
    pub behavior: BehaviorParams,
    pub fuzzy: FuzzySettings,
    pub sim: SimSettings,
    pub sweep: SweepSettings,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: PathBuf::from("scenarios/cluttered.scn"),
            seed: 1,
            robot: RobotGeometry::default(),
            planner: PlannerSettings::default(),
            behavior: BehaviorParams::default(),
            fuzzy: FuzzySettings::default(),
            sim: SimSettings::default(),
            sweep: SweepSettings::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    /// Parses and validates config text. Relative scenario paths resolve
    /// against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Syntax { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario.as_os_str().is_empty() {
            return Err(ConfigError::Invalid { section: "scenario", message: "scenario path is required".into() });
        }
        fn invalid(section: &'static str, e: impl std::fmt::Display) -> ConfigError {
            ConfigError::Invalid { section, message: e.to_string() }
        }
        self.robot.validate().map_err(|e| invalid("robot", e))?;
        self.planner.validate().map_err(|e| invalid("planner", e))?;
        self.behavior.validate().map_err(|e| invalid("behavior", e))?;
        FuzzyController::from_settings(&self.fuzzy).map_err(|e| invalid("fuzzy", e))?;
        self.sim.validate().map_err(|e| invalid("sim", e))?;
        self.sweep.validate()
    }

    pub fn scenario_path(&self) -> PathBuf {
        if self.scenario.is_absolute() {
            self.scenario.clone()
        } else {
            self.base_dir.join(&self.scenario)
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario, LoadScenarioError> {
        let path = self.scenario_path();
        let text = std::fs::read_to_string(&path)
            .map_err(|source| LoadScenarioError::Io { path: path.clone(), source })?;
        Scenario::parse(&text).map_err(|source| LoadScenarioError::Scenario { path, source })
    }

    /// Scenario identifier used in output headers: the scenario file stem.
    pub fn scenario_id(&self) -> String {
        self.scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }

    pub fn fuzzy_controller(&self) -> FuzzyController {
        FuzzyController::from_settings(&self.fuzzy).expect("validated at load")
    }

    pub fn defaults_toml() -> String {
        toml::to_string_pretty(&RunConfig::default()).expect("default config serializes")
    }
}
