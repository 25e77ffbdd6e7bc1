//! Direct and inverse kinematics of the planar revolute-revolute arm.
//!
//! The shoulder sits at the origin. `θ1` is the angle of link 1 from the
//! +x axis and `θ2` is the elbow angle of link 2 relative to link 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_delta, Angle, Configuration, Point2, Segment};

/// Slack used when deciding whether a point lies on the workspace annulus.
pub const REACH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("link lengths must be positive and finite (l1 = {l1}, l2 = {l2})")]
    InvalidArm { l1: f64, l2: f64 },
    #[error("point ({x}, {y}) lies outside the reachable annulus")]
    Unreachable { x: f64, y: f64 },
    #[error("point is not finite")]
    NonFinitePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
}

impl ArmGeometry {
    pub fn new(l1: f64, l2: f64) -> Result<Self, KinematicsError> {
        let arm = ArmGeometry { l1, l2 };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.l1) && ok(self.l2) {
            Ok(())
        } else {
            Err(KinematicsError::InvalidArm {
                l1: self.l1,
                l2: self.l2,
            })
        }
    }

    pub fn reach(&self) -> f64 {
        self.l1 + self.l2
    }

    pub fn inner_radius(&self) -> f64 {
        (self.l1 - self.l2).abs()
    }
}

/// Joint and endpoint positions for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub shoulder: Point2,
    pub elbow: Point2,
    pub endpoint: Point2,
}

impl ArmPose {
    pub fn link1(&self) -> Segment {
        Segment::new(self.shoulder, self.elbow)
    }

    pub fn link2(&self) -> Segment {
        Segment::new(self.elbow, self.endpoint)
    }
}

pub fn elbow_position(arm: &ArmGeometry, theta1: Angle) -> Point2 {
    let t1 = theta1.radians();
    Point2::new(arm.l1 * t1.cos(), arm.l1 * t1.sin())
}

pub fn forward(arm: &ArmGeometry, q: Configuration) -> ArmPose {
    let elbow = elbow_position(arm, q.theta1);
    let phi = q.theta1.radians() + q.theta2.radians();
    ArmPose {
        shoulder: Point2::ORIGIN,
        elbow,
        endpoint: Point2::new(elbow.x + arm.l2 * phi.cos(), elbow.y + arm.l2 * phi.sin()),
    }
}

pub fn reachable(arm: &ArmGeometry, p: Point2) -> bool {
    let r = p.norm();
    let tol = REACH_TOLERANCE * arm.reach();
    r >= arm.inner_radius() - tol && r <= arm.reach() + tol
}

/// Both elbow branches for an endpoint, non-negative `θ2` branch first.
/// Singular points (annulus boundary) yield a single solution.
pub fn inverse_solutions(
    arm: &ArmGeometry,
    p: Point2,
    hint: Configuration,
) -> Result<Vec<Configuration>, KinematicsError> {
    if !p.is_finite() {
        return Err(KinematicsError::NonFinitePoint);
    }
    if !reachable(arm, p) {
        return Err(KinematicsError::Unreachable { x: p.x, y: p.y });
    }
    let (l1, l2) = (arm.l1, arm.l2);
    let r2 = p.norm_squared();
    if p.norm() <= REACH_TOLERANCE * arm.reach() {
        // Only possible with l1 == l2: folded arm, shoulder angle is free.
        return Ok(vec![Configuration::wrapped(
            hint.theta1.radians(),
            std::f64::consts::PI,
        )]);
    }
    let denom = 2.0 * l1 * l2;
    // 1 - c and 1 + c as products of differences keeps precision near the rims.
    let one_minus = (((l1 + l2) * (l1 + l2) - r2) / denom).max(0.0);
    let one_plus = ((r2 - (l1 - l2) * (l1 - l2)) / denom).max(0.0);
    let c2 = (1.0 - one_minus).clamp(-1.0, 1.0);
    let s2 = (one_minus * one_plus).sqrt();
    let base = p.y.atan2(p.x);
    let solve = |s: f64| {
        let t2 = s.atan2(c2);
        let t1 = base - (l2 * s).atan2(l1 + l2 * c2);
        Configuration::wrapped(t1, t2)
    };
    if s2 == 0.0 {
        Ok(vec![solve(0.0)])
    } else {
        Ok(vec![solve(s2), solve(-s2)])
    }
}

/// Inverse kinematics choosing the branch nearest to `hint` (summed
/// absolute joint change). Ties go to the non-negative `θ2` branch.
pub fn inverse(
    arm: &ArmGeometry,
    p: Point2,
    hint: Configuration,
) -> Result<Configuration, KinematicsError> {
    let sols = inverse_solutions(arm, p, hint)?;
    let cost = |q: &Configuration| {
        angle_delta(hint.theta1, q.theta1).abs() + angle_delta(hint.theta2, q.theta2).abs()
    };
    let mut best = sols[0];
    let mut best_cost = cost(&best);
    for q in &sols[1..] {
        let c = cost(q);
        if c < best_cost {
            best = *q;
            best_cost = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit() -> ArmGeometry {
        ArmGeometry::new(1.0, 1.0).unwrap()
    }

    fn close(a: Point2, b: Point2) -> bool {
        a.distance(b) < 1e-12
    }

    fn same_q(a: Configuration, b: Configuration, tol: f64) -> bool {
        angle_delta(a.theta1, b.theta1).abs() < tol && angle_delta(a.theta2, b.theta2).abs() < tol
    }

    #[test]
    fn forward_examples() {
        let arm = unit();
        let q = |a, b| Configuration::new(a, b).unwrap();
        assert!(close(forward(&arm, q(0.0, 0.0)).endpoint, Point2::new(2.0, 0.0)));
        assert!(close(forward(&arm, q(FRAC_PI_2, 0.0)).endpoint, Point2::new(0.0, 2.0)));
        assert!(close(forward(&arm, q(0.0, PI)).endpoint, Point2::ORIGIN));
        assert!(close(forward(&arm, q(FRAC_PI_2, 0.0)).elbow, Point2::new(0.0, 1.0)));
    }

    #[test]
    fn inverse_examples() {
        let arm = unit();
        let q = |a, b| Configuration::new(a, b).unwrap();
        for hint in [q(0.0, 0.0), q(3.0, 4.0), q(1.0, 6.0)] {
            let s = inverse(&arm, Point2::new(2.0, 0.0), hint).unwrap();
            assert!(same_q(s, q(0.0, 0.0), 1e-12), "{s}");
        }
        let a = inverse(&arm, Point2::new(1.0, 1.0), q(0.1, 1.4)).unwrap();
        assert!(same_q(a, q(0.0, FRAC_PI_2), 1e-12), "{a}");
        let b = inverse(&arm, Point2::new(1.0, 1.0), q(1.5, 5.0)).unwrap();
        assert!(same_q(b, q(FRAC_PI_2, 1.5 * PI), 1e-12), "{b}");
        // substitution into the direct equations
        for s in [a, b] {
            assert!(close(forward(&arm, s).endpoint, Point2::new(1.0, 1.0)));
        }
        assert!(matches!(
            inverse(&arm, Point2::new(3.0, 0.0), q(0.0, 0.0)),
            Err(KinematicsError::Unreachable { .. })
        ));
    }

    #[test]
    fn origin_keeps_shoulder_from_hint() {
        let arm = unit();
        let hint = Configuration::new(2.5, 1.0).unwrap();
        let s = inverse(&arm, Point2::ORIGIN, hint).unwrap();
        assert_eq!(s.theta1, hint.theta1);
        assert!((s.theta2.radians() - PI).abs() < 1e-15);
    }

    #[test]
    fn equidistant_hint_prefers_positive_elbow() {
        let arm = unit();
        // θ2 = ±π/2 solutions; a hint halfway between them in both joints.
        let sols = inverse_solutions(&arm, Point2::new(1.0, 1.0), Configuration::default()).unwrap();
        let mid1 = sols[0].theta1.radians() + angle_delta(sols[0].theta1, sols[1].theta1) / 2.0;
        let hint = Configuration::new(mid1, 0.0).unwrap();
        let s = inverse(&arm, Point2::new(1.0, 1.0), hint).unwrap();
        assert!(s.theta2.radians() <= PI);
    }

    #[test]
    fn reachability() {
        let arm = unit();
        assert!(reachable(&arm, Point2::ORIGIN));
        assert!(reachable(&arm, Point2::new(2.0, 0.0)));
        assert!(!reachable(&arm, Point2::new(2.001, 0.0)));
        let uneven = ArmGeometry::new(2.0, 1.0).unwrap();
        assert!(!reachable(&uneven, Point2::new(0.5, 0.0)));
        assert!(reachable(&uneven, Point2::new(1.0, 0.0)));
    }

    #[test]
    fn invalid_arm_rejected() {
        assert!(ArmGeometry::new(0.0, 1.0).is_err());
        assert!(ArmGeometry::new(1.0, f64::NAN).is_err());
    }
}
