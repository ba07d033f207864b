//! Unicycle kinematics and differential-drive wheel conversions.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Point;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("non-finite input to integrate")]
    NonFinite,
    #[error("invalid robot geometry: wheel_radius={wheel_radius}, axle_length={axle_length}")]
    BadGeometry { wheel_radius: f64, axle_length: f64 },
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Robot configuration in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Linear velocity `v` (m/s) and angular velocity `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn clamped(self, v_max: f64, omega_max: f64) -> Self {
        Self { v: self.v.clamp(-v_max, v_max), omega: self.omega.clamp(-omega_max, omega_max) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotGeometry {
    pub wheel_radius: f64,
    pub axle_length: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self { wheel_radius: 0.1, axle_length: 0.2 }
    }
}

impl RobotGeometry {
    pub fn new(wheel_radius: f64, axle_length: f64) -> Result<Self, DynamicsError> {
        let g = Self { wheel_radius, axle_length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.wheel_radius > 0.0
            && self.axle_length > 0.0
            && self.wheel_radius.is_finite()
            && self.axle_length.is_finite()
        {
            Ok(())
        } else {
            Err(DynamicsError::BadGeometry {
                wheel_radius: self.wheel_radius,
                axle_length: self.axle_length,
            })
        }
    }
}

/// Wheel angular speeds in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelSpeeds {
    pub omega_left: f64,
    pub omega_right: f64,
}

/// One forward-Euler step of the unicycle model. Heading is wrapped after
/// the update.
pub fn integrate(pose: Pose, cmd: VelocityCommand, dt: f64) -> Result<Pose, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    if !pose.is_finite() || !cmd.v.is_finite() || !cmd.omega.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    let dx = cmd.v * pose.theta.cos() * dt;
    let dy = cmd.v * pose.theta.sin() * dt;
    let dtheta = cmd.omega * dt;
    Ok(Pose::new(pose.x + dx, pose.y + dy, wrap_angle(pose.theta + dtheta)))
}

pub fn command_to_wheels(cmd: VelocityCommand, geometry: &RobotGeometry) -> WheelSpeeds {
    let (r, l) = (geometry.wheel_radius, geometry.axle_length);
    WheelSpeeds {
        omega_left: (2.0 * cmd.v - cmd.omega * l) / (2.0 * r),
        omega_right: (2.0 * cmd.v + cmd.omega * l) / (2.0 * r),
    }
}

pub fn wheels_to_command(wheels: WheelSpeeds, geometry: &RobotGeometry) -> VelocityCommand {
    let (r, l) = (geometry.wheel_radius, geometry.axle_length);
    VelocityCommand {
        v: r * (wheels.omega_right + wheels.omega_left) / 2.0,
        omega: r * (wheels.omega_right - wheels.omega_left) / l,
    }
}

/// Splits a right-minus-left speed difference symmetrically across the two
/// wheels. Forward speed is unchanged; `omega` changes by `r * delta / l`.
pub fn apply_speed_difference(wheels: WheelSpeeds, delta: f64) -> WheelSpeeds {
    WheelSpeeds {
        omega_left: wheels.omega_left - delta / 2.0,
        omega_right: wheels.omega_right + delta / 2.0,
    }
}

/// Lateral-slip residual `xdot * sin(theta) - ydot * cos(theta)` of a step,
/// evaluated at the heading the step started from.
pub fn constraint_residual(before: Pose, after: Pose, dt: f64) -> f64 {
    let xdot = (after.x - before.x) / dt;
    let ydot = (after.y - before.y) / dt;
    xdot * before.theta.sin() - ydot * before.theta.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const GEOM: RobotGeometry = RobotGeometry { wheel_radius: 0.1, axle_length: 0.2 };

    #[test]
    fn integrate_examples() {
        let p = integrate(Pose::default(), VelocityCommand::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(p, Pose::new(1.0, 0.0, 0.0));

        let p = integrate(Pose::default(), VelocityCommand::new(0.0, FRAC_PI_2), 1.0).unwrap();
        assert_eq!(p, Pose::new(0.0, 0.0, FRAC_PI_2));

        let p = integrate(Pose::new(0.0, 0.0, FRAC_PI_2), VelocityCommand::new(2.0, 0.0), 0.5).unwrap();
        assert!(p.x.abs() < 1e-15);
        assert_eq!(p.y, 1.0);
        assert_eq!(p.theta, FRAC_PI_2);
    }

    #[test]
    fn integrate_rejects_bad_input() {
        let cmd = VelocityCommand::new(1.0, 0.0);
        assert_eq!(integrate(Pose::default(), cmd, 0.0), Err(DynamicsError::BadTimeStep(0.0)));
        assert_eq!(
            integrate(Pose::default(), VelocityCommand::new(f64::NAN, 0.0), 0.1),
            Err(DynamicsError::NonFinite)
        );
        assert_eq!(
            integrate(Pose::new(f64::INFINITY, 0.0, 0.0), cmd, 0.1),
            Err(DynamicsError::NonFinite)
        );
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn wheel_conversion_examples() {
        let w = command_to_wheels(VelocityCommand::new(1.0, 0.0), &GEOM);
        assert_eq!(w, WheelSpeeds { omega_left: 10.0, omega_right: 10.0 });
        let w = command_to_wheels(VelocityCommand::new(0.0, 1.0), &GEOM);
        assert!((w.omega_left + 1.0).abs() < 1e-12 && (w.omega_right - 1.0).abs() < 1e-12);

        let c = wheels_to_command(WheelSpeeds { omega_left: 10.0, omega_right: 10.0 }, &GEOM);
        assert!((c.v - 1.0).abs() < 1e-12 && c.omega == 0.0);
        let c = wheels_to_command(WheelSpeeds { omega_left: -1.0, omega_right: 1.0 }, &GEOM);
        assert!(c.v == 0.0 && (c.omega - 1.0).abs() < 1e-12);
        assert_eq!(wheels_to_command(WheelSpeeds::default(), &GEOM), VelocityCommand::default());
    }

    #[test]
    fn speed_difference_examples() {
        let w = WheelSpeeds { omega_left: 10.0, omega_right: 10.0 };
        let shifted = apply_speed_difference(w, 2.0);
        assert_eq!(shifted, WheelSpeeds { omega_left: 9.0, omega_right: 11.0 });
        assert_eq!(apply_speed_difference(shifted, -2.0), w);
        assert_eq!(apply_speed_difference(w, 0.0), w);
    }

    #[test]
    fn constraint_residual_examples() {
        assert_eq!(constraint_residual(Pose::default(), Pose::new(0.0, 1.0, 0.0), 1.0), -1.0);
        assert_eq!(
            constraint_residual(Pose::new(0.0, 0.0, FRAC_PI_2), Pose::new(1.0, 0.0, FRAC_PI_2), 1.0),
            1.0
        );
    }

    #[test]
    fn default_geometry() {
        assert_eq!(RobotGeometry::default(), RobotGeometry { wheel_radius: 0.1, axle_length: 0.2 });
    }

    #[test]
    fn geometry_validation() {
        assert!(RobotGeometry::new(0.1, 0.2).is_ok());
        assert!(RobotGeometry::new(0.0, 0.2).is_err());
        assert!(RobotGeometry::new(0.1, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn euler_step_never_slips(
            x in -20.0..20.0f64, y in -20.0..20.0f64, theta in -PI..PI,
            v in -5.0..5.0f64, omega in -5.0..5.0f64, dt in 0.01..1.0f64,
        ) {
            let before = Pose::new(x, y, theta);
            let after = integrate(before, VelocityCommand::new(v, omega), dt).unwrap();
            prop_assert!(constraint_residual(before, after, dt).abs() <= 1e-12);
            prop_assert!(after.theta > -PI && after.theta <= PI);
        }

        #[test]
        fn wheel_maps_are_inverse(v in -10.0..10.0f64, omega in -10.0..10.0f64,
                                  r in 0.01..1.0f64, l in 0.01..2.0f64) {
            let g = RobotGeometry { wheel_radius: r, axle_length: l };
            let back = wheels_to_command(command_to_wheels(VelocityCommand::new(v, omega), &g), &g);
            prop_assert!((back.v - v).abs() <= 1e-12);
            prop_assert!((back.omega - omega).abs() <= 1e-12);
        }

        #[test]
        fn speed_difference_preserves_linear_velocity(
            wl in -50.0..50.0f64, wr in -50.0..50.0f64, delta in -20.0..20.0f64,
        ) {
            let w = WheelSpeeds { omega_left: wl, omega_right: wr };
            let before = wheels_to_command(w, &GEOM);
            let after = wheels_to_command(apply_speed_difference(w, delta), &GEOM);
            prop_assert!((before.v - after.v).abs() <= 1e-12);
            let expected = GEOM.wheel_radius * delta / GEOM.axle_length;
            prop_assert!((after.omega - before.omega - expected).abs() <= 1e-9);
        }
    }
}
