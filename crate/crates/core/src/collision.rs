//! Arm/obstacle contact predicates.
//!
//! Links are closed segments, optionally inflated into capsules of the
//! given total width. Link self-contact is not modelled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    segment_intersects_obstacle, segment_obstacle_distance, Angle, Configuration, Obstacle,
    Point2, Segment,
};
use crate::kinematics::{elbow_position, forward, ArmGeometry};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("link width must be finite and non-negative, got {0}")]
pub struct InvalidLinkWidth(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkModel {
    pub width: f64,
}

impl LinkModel {
    pub const SEGMENT: LinkModel = LinkModel { width: 0.0 };

    pub fn new(width: f64) -> Result<Self, InvalidLinkWidth> {
        if width.is_finite() && width >= 0.0 {
            Ok(LinkModel { width })
        } else {
            Err(InvalidLinkWidth(width))
        }
    }

    fn link_touches(&self, link: Segment, obstacle: &Obstacle) -> bool {
        if self.width == 0.0 {
            segment_intersects_obstacle(link, obstacle)
        } else {
            segment_obstacle_distance(link, obstacle) <= self.width / 2.0
        }
    }

    fn touches_any(&self, link: Segment, obstacles: &[Obstacle]) -> bool {
        obstacles.iter().any(|o| self.link_touches(link, o))
    }
}

/// Link 1 alone at shoulder angle `theta1`.
pub fn link1_collides(
    arm: &ArmGeometry,
    links: &LinkModel,
    obstacles: &[Obstacle],
    theta1: Angle,
) -> bool {
    let link = Segment::new(Point2::ORIGIN, elbow_position(arm, theta1));
    links.touches_any(link, obstacles)
}

/// Link 2 alone, positioned by the full configuration.
pub fn link2_collides(
    arm: &ArmGeometry,
    links: &LinkModel,
    obstacles: &[Obstacle],
    q: Configuration,
) -> bool {
    links.touches_any(forward(arm, q).link2(), obstacles)
}

pub fn config_collides(
    arm: &ArmGeometry,
    links: &LinkModel,
    obstacles: &[Obstacle],
    q: Configuration,
) -> bool {
    link1_collides(arm, links, obstacles, q.theta1) || link2_collides(arm, links, obstacles, q)
}
