//! Operator pointer input to clamped, collision-gated arm steps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::config_collides;
use crate::geometry::{torus_geodesic, Configuration, Point2};
use crate::kinematics::{forward, inverse, ArmGeometry, KinematicsError};
use crate::scenario::Scenario;

pub const DEFAULT_MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("pointer coincides with the pivot of the selected joint")]
    DegeneratePointer,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("step limit must be positive and finite, got {0}")]
    InvalidStepLimit(f64),
    #[error("unknown control mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Joint {
    Shoulder,
    Elbow,
}

impl Joint {
    pub fn index(self) -> u8 {
        match self {
            Joint::Shoulder => 1,
            Joint::Elbow => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Joint> {
        match i {
            1 => Some(Joint::Shoulder),
            2 => Some(Joint::Elbow),
            _ => None,
        }
    }
}

/// How pointer input is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ControlMode {
    Joint(Joint),
    Tip,
    CSpace,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ControlMode::Joint(Joint::Shoulder) => "joint1",
            ControlMode::Joint(Joint::Elbow) => "joint2",
            ControlMode::Tip => "tip",
            ControlMode::CSpace => "cspace",
        };
        f.write_str(s)
    }
}

impl FromStr for ControlMode {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint1" => Ok(ControlMode::Joint(Joint::Shoulder)),
            "joint2" => Ok(ControlMode::Joint(Joint::Elbow)),
            "tip" => Ok(ControlMode::Tip),
            "cspace" => Ok(ControlMode::CSpace),
            other => Err(ControlError::UnknownMode(other.to_string())),
        }
    }
}

impl TryFrom<String> for ControlMode {
    type Error = ControlError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ControlMode> for String {
    fn from(m: ControlMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLimit {
    max_step: f64,
}

impl StepLimit {
    pub fn new(max_step: f64) -> Result<Self, ControlError> {
        if max_step.is_finite() && max_step > 0.0 {
            Ok(StepLimit { max_step })
        } else {
            Err(ControlError::InvalidStepLimit(max_step))
        }
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }
}

impl Default for StepLimit {
    fn default() -> Self {
        StepLimit {
            max_step: DEFAULT_MAX_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub accepted: bool,
    pub q_new: Configuration,
    pub rejected_q: Option<Configuration>,
}

/// Rotates the selected joint so its link points at `pointer`.
///
/// Joint 2 aligns link 2 with the ray from the elbow through the pointer.
pub fn joint_mode_target(
    arm: &ArmGeometry,
    q: Configuration,
    joint: Joint,
    pointer: Point2,
) -> Result<Configuration, ControlError> {
    const EPS: f64 = 1e-12;
    match joint {
        Joint::Shoulder => {
            if pointer.norm() < EPS {
                return Err(ControlError::DegeneratePointer);
            }
            Ok(Configuration::wrapped(
                pointer.y.atan2(pointer.x),
                q.theta2.radians(),
            ))
        }
        Joint::Elbow => {
            let elbow = forward(arm, q).elbow;
            let v = pointer - elbow;
            if v.norm() < EPS {
                return Err(ControlError::DegeneratePointer);
            }
            let phi = v.y.atan2(v.x);
            Ok(Configuration::wrapped(
                q.theta1.radians(),
                phi - q.theta1.radians(),
            ))
        }
    }
}

pub fn tip_mode_target(
    arm: &ArmGeometry,
    q: Configuration,
    pointer: Point2,
) -> Result<Configuration, ControlError> {
    Ok(inverse(arm, pointer, q)?)
}

/// Radial projection of a pointer onto the reachable annulus. A pointer at
/// the shoulder (with unequal links) projects along the current endpoint
/// direction.
pub fn project_onto_workspace(arm: &ArmGeometry, q: Configuration, pointer: Point2) -> Point2 {
    let r = pointer.norm();
    let outer = arm.reach();
    let inner = arm.inner_radius();
    if r > outer {
        pointer * (outer / r)
    } else if r < inner {
        let dir = if r > 0.0 {
            pointer * (1.0 / r)
        } else {
            let e = forward(arm, q).endpoint;
            e * (1.0 / e.norm())
        };
        dir * inner
    } else {
        pointer
    }
}

/// Tip-mode target for dragging: off-workspace pointers are projected
/// radially onto the annulus instead of failing.
pub fn tip_mode_target_projected(
    arm: &ArmGeometry,
    q: Configuration,
    pointer: Point2,
) -> Result<Configuration, ControlError> {
    if !pointer.is_finite() {
        return Err(KinematicsError::NonFinitePoint.into());
    }
    tip_mode_target(arm, q, project_onto_workspace(arm, q, pointer))
}

/// The C-point is the configuration.
pub fn cspace_mode_target(_q: Configuration, c_pointer: Configuration) -> Configuration {
    c_pointer
}

/// Limits a move to `max_step` (Euclidean norm of the torus geodesic).
pub fn clamp_step(q: Configuration, target: Configuration, limit: StepLimit) -> Configuration {
    let (d1, d2) = torus_geodesic(q, target);
    let norm = d1.hypot(d2);
    if norm <= limit.max_step {
        return target;
    }
    let k = limit.max_step / norm;
    q.offset(d1 * k, d2 * k)
}

/// Collision gate: the candidate is accepted only if the arm is free there.
pub fn apply_step(scenario: &Scenario, q: Configuration, candidate: Configuration) -> StepOutcome {
    apply_step_checked(scenario, q, candidate, 0)
}

/// Like [`apply_step`], additionally testing `substeps` evenly spaced
/// configurations strictly between `q` and `candidate`.
pub fn apply_step_checked(
    scenario: &Scenario,
    q: Configuration,
    candidate: Configuration,
    substeps: usize,
) -> StepOutcome {
    let collides = |c: Configuration| {
        config_collides(&scenario.arm, &scenario.links, &scenario.obstacles, c)
    };
    let (d1, d2) = torus_geodesic(q, candidate);
    let blocked = collides(candidate)
        || (1..=substeps).any(|k| {
            let t = k as f64 / (substeps + 1) as f64;
            collides(q.offset(d1 * t, d2 * t))
        });
    if blocked {
        StepOutcome {
            accepted: false,
            q_new: q,
            rejected_q: Some(candidate),
        }
    } else {
        StepOutcome {
            accepted: true,
            q_new: candidate,
            rejected_q: None,
        }
    }
}
