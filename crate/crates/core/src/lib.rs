//! Global path planning for differential-drive robots by simulated annealing
//! over a waypoint energy, and closed-loop tracking of the planned path with
//! behavior arbitration plus a Mamdani fuzzy deviation corrector.
//!
//! Module map:
//!
//! - [`world`]: scenarios, scenario files, obstacle geometry
//! - [`dynamics`]: poses, unicycle integration, wheel-speed conversions
//! - [`behaviors`]: avoid / turn / approach laws and their arbitration
//! - [`neuralnet`]: a small from-scratch MLP with gradient checking
//! - [`planner`]: path energy and the annealing solver
//! - [`fuzzy`]: the deviation-correcting fuzzy controller
//! - [`simloop`]: tracking simulation and its metrics
//! - [`config`] and [`cli`]: run-config files and the `wayforge` front end

pub mod behaviors;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod fuzzy;
pub mod neuralnet;
pub mod planner;
pub mod simloop;
pub mod world;

pub use dynamics::{Pose, RobotGeometry, VelocityCommand};
pub use planner::PathPlan;
pub use world::{Point, Scenario};
