//! Scenario definition, seeded random generation, and the versioned text
//! file format.
//!
//! Files are TOML:
//!
//! ```toml
//! format_version = 1
//! name = "example"
//!
//! [arm]
//! l1 = 1.0
//! l2 = 1.0
//! link_width = 0.0
//!
//! [start]
//! theta1 = 0.5
//! theta2 = 0.25
//!
//! [target]
//! theta1 = 3.0
//! theta2 = 1.0
//!
//! [[obstacles]]
//! kind = "circle"
//! center = [1.2, 0.4]
//! radius = 0.2
//!
//! [[obstacles]]
//! kind = "polygon"
//! vertices = [[-1.5, -0.2], [-1.1, -0.2], [-1.3, 0.5]]
//! ```
//!
//! Angles are radians; lengths share one arbitrary unit.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::collision::{config_collides, LinkModel};
use crate::geometry::{torus_l1, Configuration, Obstacle, Point2};
use crate::kinematics::ArmGeometry;

pub const FORMAT_VERSION: u32 = 1;

/// Replica of the four-obstacle demonstration layout. Approximate: only
/// its topology (a single virtual obstacle on the torus) is meaningful.
pub const FIG3_REPLICA_NAME: &str = "fig3-replica";
const FIG3_REPLICA: &str = include_str!("../scenarios/fig3-replica.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("no free start/target found after {0} attempts")]
    Infeasible(usize),
    #[error("unknown bundled scenario {0:?}")]
    UnknownBundled(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub arm: ArmGeometry,
    pub links: LinkModel,
    pub obstacles: Vec<Obstacle>,
    pub start: Configuration,
    pub target: Configuration,
}

impl Scenario {
    pub fn builder(name: &str) -> ScenarioBuilder {
        ScenarioBuilder {
            scenario: Scenario {
                name: name.to_string(),
                arm: ArmGeometry { l1: 1.0, l2: 1.0 },
                links: LinkModel::SEGMENT,
                obstacles: Vec::new(),
                start: Configuration::default(),
                target: Configuration::default(),
            },
        }
    }

    pub fn collides(&self, q: Configuration) -> bool {
        config_collides(&self.arm, &self.links, &self.obstacles, q)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_environment()?;
        if self.collides(self.start) {
            return Err(ScenarioError::Validation("start configuration is in collision".into()));
        }
        if self.collides(self.target) {
            return Err(ScenarioError::Validation("target configuration is in collision".into()));
        }
        Ok(())
    }

    /// Arm, links and obstacles only; start and target may collide.
    pub fn validate_environment(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        if self.arm.validate().is_err() {
            return bad(format!(
                "link lengths must be positive (l1 = {}, l2 = {})",
                self.arm.l1, self.arm.l2
            ));
        }
        if LinkModel::new(self.links.width).is_err() {
            return bad(format!(
                "link width must be non-negative, got {}",
                self.links.width
            ));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if let Err(e) = o.validate() {
                return bad(format!("obstacle {k}: {e}"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&ScenarioDoc::from(self)).expect("scenario document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let s = Scenario::parse_unchecked(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Like [`Scenario::from_toml`] but accepts colliding start and target,
    /// for tasks that only need the environment (raster export).
    pub fn environment_from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let s = Scenario::parse_unchecked(text)?;
        s.validate_environment()?;
        Ok(s)
    }

    fn parse_unchecked(text: &str) -> Result<Scenario, ScenarioError> {
        let doc: ScenarioDoc = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        doc.into_scenario()
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(&fs::read_to_string(path)?)
    }

    pub fn load_environment(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::environment_from_toml(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical file text, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn bundled(name: &str) -> Result<Scenario, ScenarioError> {
        match name {
            FIG3_REPLICA_NAME => Scenario::from_toml(FIG3_REPLICA),
            other => Err(ScenarioError::UnknownBundled(other.to_string())),
        }
    }

    pub fn bundled_names() -> &'static [&'static str] {
        &[FIG3_REPLICA_NAME]
    }
}

pub struct ScenarioBuilder {
    scenario: Scenario,
}

impl ScenarioBuilder {
    pub fn arm(mut self, arm: ArmGeometry) -> Self {
        self.scenario.arm = arm;
        self
    }

    pub fn links(mut self, links: LinkModel) -> Self {
        self.scenario.links = links;
        self
    }

    pub fn obstacle(mut self, o: Obstacle) -> Self {
        self.scenario.obstacles.push(o);
        self
    }

    pub fn obstacles(mut self, os: impl IntoIterator<Item = Obstacle>) -> Self {
        self.scenario.obstacles.extend(os);
        self
    }

    pub fn start(mut self, q: Configuration) -> Self {
        self.scenario.start = q;
        self
    }

    pub fn target(mut self, q: Configuration) -> Self {
        self.scenario.target = q;
        self
    }

    pub fn build(self) -> Result<Scenario, ScenarioError> {
        self.scenario.validate()?;
        Ok(self.scenario)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    format_version: u32,
    name: String,
    arm: ArmDoc,
    start: AnglesDoc,
    target: AnglesDoc,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmDoc {
    l1: f64,
    l2: f64,
    #[serde(default)]
    link_width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnglesDoc {
    theta1: f64,
    theta2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ObstacleDoc {
    Circle { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let angles = |q: Configuration| AnglesDoc {
            theta1: q.theta1.radians(),
            theta2: q.theta2.radians(),
        };
        ScenarioDoc {
            format_version: FORMAT_VERSION,
            name: s.name.clone(),
            arm: ArmDoc {
                l1: s.arm.l1,
                l2: s.arm.l2,
                link_width: s.links.width,
            },
            start: angles(s.start),
            target: angles(s.target),
            obstacles: s
                .obstacles
                .iter()
                .map(|o| match o {
                    Obstacle::Circle { center, radius } => ObstacleDoc::Circle {
                        center: [center.x, center.y],
                        radius: *radius,
                    },
                    Obstacle::Polygon { vertices } => ObstacleDoc::Polygon {
                        vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
                    },
                })
                .collect(),
        }
    }
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ScenarioError::UnsupportedVersion(self.format_version));
        }
        let angles = |a: AnglesDoc, what: &str| {
            Configuration::new(a.theta1, a.theta2)
                .map_err(|e| ScenarioError::Validation(format!("{what}: {e}")))
        };
        Ok(Scenario {
            name: self.name,
            arm: ArmGeometry {
                l1: self.arm.l1,
                l2: self.arm.l2,
            },
            links: LinkModel {
                width: self.arm.link_width,
            },
            start: angles(self.start, "start")?,
            target: angles(self.target, "target")?,
            obstacles: self
                .obstacles
                .into_iter()
                .map(|o| match o {
                    ObstacleDoc::Circle { center, radius } => Obstacle::Circle {
                        center: Point2::new(center[0], center[1]),
                        radius,
                    },
                    ObstacleDoc::Polygon { vertices } => Obstacle::Polygon {
                        vertices: vertices.iter().map(|v| Point2::new(v[0], v[1])).collect(),
                    },
                })
                .collect(),
        })
    }
}

/// Knobs for [`random_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    /// Inclusive range of obstacle counts.
    pub count: (usize, usize),
    /// Inclusive range of obstacle radii (circle radius, polygon circumradius).
    pub size: (f64, f64),
    /// Probability that an obstacle is a circle rather than a polygon.
    pub circle_fraction: f64,
    pub arm: ArmGeometry,
    pub links: LinkModel,
    /// Minimum joint-space L1 distance between start and target.
    pub min_separation: f64,
    /// Obstacle sets to try before giving up.
    pub max_retries: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            count: (2, 5),
            size: (0.1, 0.3),
            circle_fraction: 0.5,
            arm: ArmGeometry { l1: 1.0, l2: 1.0 },
            links: LinkModel::SEGMENT,
            min_separation: 1.0,
            max_retries: 20,
        }
    }
}

const CONFIG_DRAWS: usize = 500;

/// Seeded random environment. The generator is ChaCha8 seeded with
/// `seed_from_u64`, so scenes are identical across runs and platforms.
pub fn random_scenario(seed: u64, params: &RandomParams) -> Result<Scenario, ScenarioError> {
    let bad = |m: &str| Err(ScenarioError::Validation(m.to_string()));
    if params.count.0 > params.count.1 {
        return bad("count range is empty");
    }
    if !(params.size.0 > 0.0 && params.size.0 <= params.size.1 && params.size.1.is_finite()) {
        return bad("size range must be positive and ordered");
    }
    if !(0.0..=1.0).contains(&params.circle_fraction) {
        return bad("circle_fraction must lie in [0, 1]");
    }
    params
        .arm
        .validate()
        .map_err(|e| ScenarioError::Validation(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = params.arm.reach();
    for _ in 0..params.max_retries.max(1) {
        let count = rng.gen_range(params.count.0..=params.count.1);
        let mut obstacles = Vec::with_capacity(count);
        for _ in 0..count {
            let size = rng.gen_range(params.size.0..=params.size.1);
            // keep the shoulder clear, stay inside the reach
            let lo = size + 0.05;
            let dist = if lo < reach {
                rng.gen_range(lo..=reach)
            } else {
                lo
            };
            let bearing = rng.gen_range(0.0..TAU);
            let center = Point2::new(dist * bearing.cos(), dist * bearing.sin());
            let o = if rng.gen_bool(params.circle_fraction) {
                Obstacle::Circle {
                    center,
                    radius: size,
                }
            } else {
                random_polygon(&mut rng, center, size)
            };
            obstacles.push(o);
        }
        let mut s = Scenario {
            name: format!("random-{seed}"),
            arm: params.arm,
            links: params.links,
            obstacles,
            start: Configuration::default(),
            target: Configuration::default(),
        };
        let draw = |rng: &mut ChaCha8Rng| -> Option<Configuration> {
            (0..CONFIG_DRAWS).find_map(|_| {
                let q = Configuration::wrapped(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
                (!s.collides(q)).then_some(q)
            })
        };
        let Some(start) = draw(&mut rng) else { continue };
        let mut target = None;
        for _ in 0..CONFIG_DRAWS {
            match draw(&mut rng) {
                Some(t) if torus_l1(start, t) >= params.min_separation => {
                    target = Some(t);
                    break;
                }
                Some(_) => {}
                None => break,
            }
        }
        let Some(target) = target else { continue };
        s.start = start;
        s.target = target;
        if s.validate().is_ok() {
            return Ok(s);
        }
    }
    Err(ScenarioError::Infeasible(params.max_retries))
}

fn random_polygon(rng: &mut ChaCha8Rng, center: Point2, size: f64) -> Obstacle {
    let k = rng.gen_range(3..=7usize);
    let sector = TAU / k as f64;
    let vertices = (0..k)
        .map(|m| {
            // angles stay strictly increasing, so the polygon is star-shaped
            let a = sector * (m as f64 + rng.gen_range(-0.3..0.3));
            let r = size * rng.gen_range(0.5..=1.0);
            center + Point2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    Obstacle::Polygon { vertices }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_obstacles() {
        let p = RandomParams {
            count: (0, 0),
            ..RandomParams::default()
        };
        let s = random_scenario(7, &p).unwrap();
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn seed_determinism() {
        let p = RandomParams::default();
        assert_eq!(random_scenario(42, &p).unwrap(), random_scenario(42, &p).unwrap());
        assert_ne!(random_scenario(42, &p).unwrap(), random_scenario(43, &p).unwrap());
    }

    #[test]
    fn over_dense_scene_is_infeasible() {
        let p = RandomParams {
            count: (40, 40),
            size: (0.6, 0.8),
            max_retries: 3,
            ..RandomParams::default()
        };
        assert!(matches!(
            random_scenario(1, &p),
            Err(ScenarioError::Infeasible(3))
        ));
    }

    #[test]
    fn round_trip() {
        let s = random_scenario(3, &RandomParams::default()).unwrap();
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn two_vertex_polygon_fails_validation() {
        let text = r#"
format_version = 1
name = "bad"
[arm]
l1 = 1.0
l2 = 1.0
[start]
theta1 = 0.0
theta2 = 0.0
[target]
theta1 = 1.0
theta2 = 0.0
[[obstacles]]
kind = "polygon"
vertices = [[5.0, 5.0], [6.0, 5.0]]
"#;
        match Scenario::from_toml(text) {
            Err(ScenarioError::Validation(m)) => assert!(m.contains("at least 3 vertices"), "{m}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_has_location() {
        let text = "format_version = 1\nname = \"x\"\narm = { l1 = 1.0, l2 = oops }\n";
        match Scenario::from_toml(text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let s = Scenario::bundled(FIG3_REPLICA_NAME).unwrap();
        let text = s.to_toml().replace("format_version = 1", "format_version = 9");
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(ScenarioError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn start_in_collision_rejected() {
        let r = Scenario::builder("x")
            .obstacle(Obstacle::circle(Point2::new(1.5, 0.0), 0.2).unwrap())
            .start(Configuration::new(0.0, 0.0).unwrap())
            .target(Configuration::new(2.0, 0.0).unwrap())
            .build();
        match r {
            Err(ScenarioError::Validation(m)) => assert!(m.contains("start")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = Scenario::bundled(FIG3_REPLICA_NAME).unwrap();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.name.push('!');
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn environment_load_accepts_colliding_endpoints() {
        let text = Scenario::bundled(FIG3_REPLICA_NAME)
            .unwrap()
            .to_toml()
            .replace("theta1 = 3.87", "theta1 = 4.71238898038469");
        let s = Scenario::environment_from_toml(&text).unwrap();
        assert!(s.collides(s.start));
        assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Validation(_))));
    }
}
