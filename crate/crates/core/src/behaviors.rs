//! Obstacle-avoidance, target-turning and target-approaching motion laws,
//! and the arbitration rule that picks one of them per control step.
//!
//! Bearings are relative to the robot heading, counter-clockwise positive.
//! The sign factor in the avoidance and turning laws is the sign of the
//! bearing the law acts on.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VelocityCommand;

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("in contact with obstacle (d_obstacle = {0})")]
    InContact(f64),
    #[error("invalid behavior parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TurnLaw {
    /// The turning law exactly as printed: `beta * rho_xi * (|phi| - phi)`.
    /// Produces no rotation for goals on the left.
    #[default]
    Literal,
    /// Proportional repair: `rho_xi * phi`, clamped to `omega_max`.
    Corrected,
}

/// How the obstacle speed term behaves when no obstacle exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoObstacleTerm {
    /// Drop the term from the speed minimum.
    #[default]
    Drop,
    /// Keep the limit value `epsilon_v`.
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    pub rho_xi: f64,
    pub rho_v: f64,
    pub rho_goal: f64,
    pub epsilon_xi: f64,
    pub epsilon_v: f64,
    pub m: f64,
    pub v_max: f64,
    pub v_tmax: f64,
    pub omega_max: f64,
    pub avoid_trigger_distance: f64,
    pub turn_deadband: f64,
    pub turn_law: TurnLaw,
    pub no_obstacle_term: NoObstacleTerm,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            rho_xi: 4.0,
            rho_v: 0.05,
            rho_goal: 1.0,
            epsilon_xi: 0.05,
            epsilon_v: 0.05,
            m: 2.0,
            v_max: 0.5,
            v_tmax: 0.3,
            omega_max: 2.0,
            avoid_trigger_distance: 0.5,
            turn_deadband: 0.05,
            turn_law: TurnLaw::Literal,
            no_obstacle_term: NoObstacleTerm::Drop,
        }
    }
}

impl BehaviorParams {
    pub fn validate(&self) -> Result<(), BehaviorError> {
        let fields = [
            ("rho_xi", self.rho_xi),
            ("rho_v", self.rho_v),
            ("rho_goal", self.rho_goal),
            ("epsilon_xi", self.epsilon_xi),
            ("epsilon_v", self.epsilon_v),
            ("v_max", self.v_max),
            ("v_tmax", self.v_tmax),
            ("omega_max", self.omega_max),
            ("avoid_trigger_distance", self.avoid_trigger_distance),
            ("turn_deadband", self.turn_deadband),
        ];
        for (name, value) in fields {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(BehaviorError::InvalidParam(format!("{name} must be finite and >= 0, got {value}")));
            }
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(BehaviorError::InvalidParam(format!("m must be >= 1, got {}", self.m)));
        }
        if self.v_tmax > self.v_max {
            return Err(BehaviorError::InvalidParam(format!(
                "v_tmax ({}) must not exceed v_max ({})",
                self.v_tmax, self.v_max
            )));
        }
        Ok(())
    }

    /// `rho_v / d^m + epsilon`, or `None` when the term drops out of a min.
    fn obstacle_speed_term(&self, d_obstacle: f64, epsilon: f64) -> Option<f64> {
        if d_obstacle.is_infinite() {
            match self.no_obstacle_term {
                NoObstacleTerm::Drop => None,
                NoObstacleTerm::Epsilon => Some(epsilon),
            }
        } else {
            Some(self.rho_v / d_obstacle.powf(self.m) + epsilon)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSnapshot {
    pub phi_obstacle: f64,
    /// Surface distance; `f64::INFINITY` when there is no obstacle.
    pub d_obstacle: f64,
    pub phi_goal: f64,
    pub d_goal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BehaviorMode {
    Avoid,
    Turn,
    Approach,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorOutput {
    pub mode: BehaviorMode,
    pub cmd: VelocityCommand,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Obstacle avoidance. `v` is clamped to `v_max`; `omega` is returned raw.
pub fn avoid(s: &SensorSnapshot, p: &BehaviorParams) -> Result<VelocityCommand, BehaviorError> {
    if s.d_obstacle.is_nan() || s.d_obstacle <= 0.0 {
        return Err(BehaviorError::InContact(s.d_obstacle));
    }
    let beta = sign(s.phi_obstacle);
    let omega = -beta * p.rho_xi * (s.phi_obstacle.abs() - FRAC_PI_2);
    let v = p.obstacle_speed_term(s.d_obstacle, p.epsilon_xi).unwrap_or(p.epsilon_xi);
    Ok(VelocityCommand::new(v.min(p.v_max), omega))
}

pub fn approach(s: &SensorSnapshot, p: &BehaviorParams) -> VelocityCommand {
    let mut v = (p.rho_goal * s.d_goal.max(0.0)).min(p.v_max);
    if let Some(term) = p.obstacle_speed_term(s.d_obstacle, p.epsilon_v) {
        v = v.min(term);
    }
    VelocityCommand::new(v, 0.0)
}

pub fn turn(s: &SensorSnapshot, p: &BehaviorParams) -> VelocityCommand {
    let omega = match p.turn_law {
        TurnLaw::Literal => sign(s.phi_goal) * p.rho_xi * (s.phi_goal.abs() - s.phi_goal),
        TurnLaw::Corrected => (p.rho_xi * s.phi_goal).clamp(-p.omega_max, p.omega_max),
    };
    let mut v = (p.rho_goal * s.d_goal.max(0.0)).min(p.v_tmax);
    if let Some(term) = p.obstacle_speed_term(s.d_obstacle, p.epsilon_v) {
        v = v.min(term);
    }
    VelocityCommand::new(v, omega)
}

/// Selects one behavior: avoid when the obstacle is inside the trigger
/// distance, else turn when the goal bearing exceeds the obstacle bearing
/// (only meaningful when an obstacle exists) or the deadband, else approach.
///
/// The returned command is clamped to `v_max` and `omega_max`. Contact
/// (`d_obstacle <= 0`) is treated as the smallest positive distance so the
/// function stays total.
pub fn arbitrate(s: &SensorSnapshot, p: &BehaviorParams) -> BehaviorOutput {
    let (mode, cmd) = if s.d_obstacle < p.avoid_trigger_distance {
        let mut snap = *s;
        snap.d_obstacle = snap.d_obstacle.max(f64::MIN_POSITIVE);
        let cmd = avoid(&snap, p).expect("distance clamped positive");
        (BehaviorMode::Avoid, cmd)
    } else if (s.d_obstacle.is_finite() && s.phi_goal.abs() > s.phi_obstacle.abs())
        || s.phi_goal.abs() > p.turn_deadband
    {
        (BehaviorMode::Turn, turn(s, p))
    } else {
        (BehaviorMode::Approach, approach(s, p))
    };
    BehaviorOutput { mode, cmd: cmd.clamped(p.v_max, p.omega_max) }
}
