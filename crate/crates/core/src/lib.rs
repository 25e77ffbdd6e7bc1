//! Two-link planar arm teleoperation in configuration space.
//!
//! The arm's joint space is the flat two-torus. Obstacles in the plane map
//! to virtual obstacles on the torus; [`cspace`] rasterizes them,
//! [`navigator`] plans over the raster, [`control`] turns pointer input into
//! collision-gated joint steps and [`session`] keeps run metrics.
//! [`gateway`] exposes all of it over a framed JSON protocol.

pub mod collision;
pub mod control;
pub mod cspace;
pub mod gateway;
pub mod geometry;
pub mod kinematics;
pub mod navigator;
pub mod scenario;
pub mod session;

pub use collision::{config_collides, LinkModel};
pub use control::{ControlMode, Joint, StepLimit, StepOutcome};
pub use cspace::{build_raster, label_components, CSpaceRaster, Cell};
pub use geometry::{Angle, Configuration, Obstacle, Point2};
pub use kinematics::{forward, inverse, ArmGeometry, ArmPose};
pub use navigator::{bfs_shortest, bug1, PathResult, PathStatus};
pub use scenario::Scenario;
pub use session::{summarize, RunMetrics, SessionState};
