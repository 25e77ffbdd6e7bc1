//! Per-connection session engine: applies commands in order, returns events.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::protocol::{
    decode_command, encode, raster_chunks, Command, ErrorCode, Event, PoseMsg, ProtocolError,
    BUTTON_PRIMARY, PROTOCOL_VERSION,
};
use crate::control::{
    apply_step_checked, clamp_step, cspace_mode_target, joint_mode_target,
    tip_mode_target_projected, ControlMode, StepLimit,
};
use crate::cspace::{build_raster, CSpaceRaster, MIN_RESOLUTION};
use crate::geometry::{Configuration, Point2};
use crate::kinematics::forward;
use crate::navigator::bfs_shortest;
use crate::scenario::{Scenario, ScenarioError};
use crate::session::{SessionError, SessionState, DEFAULT_GOAL_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub step: StepLimit,
    /// Pointer messages closer together than `1 / max_pointer_rate` seconds
    /// are dropped.
    pub max_pointer_rate: f64,
    /// Intermediate configurations collision-checked per step.
    pub substeps: usize,
    pub goal_tolerance: f64,
    pub max_raster_n: usize,
    /// Approximate payload size of one raster chunk, bytes.
    pub chunk_bytes: usize,
    /// Where `LoadScenario { name }` looks for `<name>.toml` after the
    /// bundled scenarios.
    pub scenario_dir: Option<PathBuf>,
    pub initial_mode: ControlMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            step: StepLimit::default(),
            max_pointer_rate: 60.0,
            substeps: 0,
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
            max_raster_n: 2048,
            chunk_bytes: 16 * 1024,
            scenario_dir: None,
            initial_mode: ControlMode::CSpace,
        }
    }
}

/// One received command with its arrival time, as kept in the command log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub t: f64,
    pub command: Command,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("command log line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
}

pub struct Engine {
    config: EngineConfig,
    greeted: bool,
    mode: ControlMode,
    session: Option<SessionState>,
    last_pointer: Option<f64>,
    raster_cache: Option<CSpaceRaster>,
    log: Vec<LoggedCommand>,
}

fn error(code: ErrorCode, message: impl Into<String>) -> Event {
    Event::Error {
        code,
        message: message.into(),
    }
}

fn safe_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Engine {
            mode: config.initial_mode,
            config,
            greeted: false,
            session: None,
            last_pointer: None,
            raster_cache: None,
            log: Vec::new(),
        }
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.session.as_ref()
    }

    pub fn command_log(&self) -> &[LoggedCommand] {
        &self.log
    }

    /// The command log as JSON lines, one `{"t":..,"command":{..}}` per line.
    pub fn command_log_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.log {
            let _ = writeln!(out, "{}", String::from_utf8(encode(entry)).expect("utf-8"));
        }
        out
    }

    /// Decodes and applies one frame payload. Undecodable payloads produce
    /// an `Error` event and leave the session untouched.
    pub fn apply_payload(&mut self, t: f64, payload: &[u8]) -> Vec<Event> {
        match decode_command(payload) {
            Ok(cmd) => self.apply(t, cmd),
            Err(e) => vec![error(ErrorCode::Malformed, e.to_string())],
        }
    }

    pub fn apply(&mut self, t: f64, cmd: Command) -> Vec<Event> {
        if !t.is_finite() {
            return vec![error(ErrorCode::BadRequest, "timestamp is not finite")];
        }
        self.log.push(LoggedCommand {
            t,
            command: cmd.clone(),
        });
        if !self.greeted {
            return match cmd {
                Command::Hello { version } if version == PROTOCOL_VERSION => {
                    self.greeted = true;
                    let mut scenarios: Vec<String> =
                        Scenario::bundled_names().iter().map(|s| s.to_string()).collect();
                    scenarios.extend(self.stored_scenarios());
                    vec![Event::Welcome {
                        version: PROTOCOL_VERSION,
                        scenarios,
                    }]
                }
                Command::Hello { version } => vec![error(
                    ErrorCode::UnsupportedVersion,
                    format!("protocol version {version} not supported, expected {PROTOCOL_VERSION}"),
                )],
                _ => vec![error(ErrorCode::NotGreeted, "send Hello first")],
            };
        }
        match cmd {
            Command::Hello { .. } => vec![error(ErrorCode::BadRequest, "already greeted")],
            Command::LoadScenario { name, inline } => self.load(t, name, inline),
            Command::SetMode { mode } => {
                self.mode = mode;
                let Some(s) = self.session.as_mut() else {
                    return vec![];
                };
                match s.switch_mode(mode, t) {
                    Ok(()) => vec![self.state_update(t, true)],
                    Err(e) => vec![session_error(e)],
                }
            }
            Command::PointerW { x, y, buttons } => {
                let p = Point2::new(x, y);
                if !p.is_finite() {
                    return vec![error(ErrorCode::BadRequest, "pointer is not finite")];
                }
                self.pointer(t, buttons, |s, mode| match mode {
                    ControlMode::Joint(j) => joint_mode_target(&s.scenario.arm, s.q, j, p)
                        .map_err(|e| e.to_string()),
                    ControlMode::Tip => {
                        tip_mode_target_projected(&s.scenario.arm, s.q, p).map_err(|e| e.to_string())
                    }
                    ControlMode::CSpace => {
                        Err("workspace pointer ignored in cspace mode".to_string())
                    }
                })
            }
            Command::PointerC {
                theta1,
                theta2,
                buttons,
            } => {
                let c = match Configuration::new(theta1, theta2) {
                    Ok(c) => c,
                    Err(e) => return vec![error(ErrorCode::BadRequest, e.to_string())],
                };
                self.pointer(t, buttons, |s, mode| match mode {
                    ControlMode::CSpace => Ok(cspace_mode_target(s.q, c)),
                    _ => Err(format!("configuration pointer ignored in {mode} mode")),
                })
            }
            Command::RequestRaster { n } => self.raster(n),
            Command::Reset => {
                let Some(s) = self.session.as_ref() else {
                    return vec![error(ErrorCode::NoScenario, "no scenario loaded")];
                };
                match SessionState::start(s.scenario.clone(), self.mode, t, self.config.goal_tolerance)
                {
                    Ok(s) => {
                        self.session = Some(s);
                        self.last_pointer = None;
                        vec![self.state_update(t, true)]
                    }
                    Err(e) => vec![session_error(e)],
                }
            }
            Command::EndRun => {
                let Some(s) = self.session.as_mut() else {
                    return vec![error(ErrorCode::NoScenario, "no scenario loaded")];
                };
                match s.end_run(t) {
                    Ok(()) => vec![Event::RunFinished {
                        metrics: s.metrics.clone(),
                    }],
                    Err(e) => vec![session_error(e)],
                }
            }
        }
    }

    fn stored_scenarios(&self) -> Vec<String> {
        let Some(dir) = &self.config.scenario_dir else {
            return Vec::new();
        };
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == "toml")
                    .then(|| p.file_stem()?.to_str().map(String::from))
                    .flatten()
            })
            .filter(|n| safe_name(n))
            .collect();
        names.sort();
        names
    }

    fn resolve(&self, name: &str) -> Result<Scenario, Event> {
        match Scenario::bundled(name) {
            Ok(s) => return Ok(s),
            Err(ScenarioError::UnknownBundled(_)) => {}
            Err(e) => return Err(error(ErrorCode::InvalidScenario, e.to_string())),
        }
        let unknown = || error(ErrorCode::UnknownScenario, format!("no scenario named {name:?}"));
        let Some(dir) = &self.config.scenario_dir else {
            return Err(unknown());
        };
        if !safe_name(name) {
            return Err(unknown());
        }
        let path = dir.join(format!("{name}.toml"));
        if !path.is_file() {
            return Err(unknown());
        }
        Scenario::load(&path).map_err(|e| error(ErrorCode::InvalidScenario, e.to_string()))
    }

    fn load(&mut self, t: f64, name: Option<String>, inline: Option<String>) -> Vec<Event> {
        let scenario = match (name, inline) {
            (Some(name), None) => self.resolve(&name),
            (None, Some(doc)) => {
                Scenario::from_toml(&doc).map_err(|e| error(ErrorCode::InvalidScenario, e.to_string()))
            }
            _ => Err(error(
                ErrorCode::BadRequest,
                "LoadScenario needs exactly one of name or inline",
            )),
        };
        let scenario = match scenario {
            Ok(s) => s,
            Err(ev) => return vec![ev],
        };
        match SessionState::start(scenario, self.mode, t, self.config.goal_tolerance) {
            Ok(s) => {
                self.session = Some(s);
                self.last_pointer = None;
                self.raster_cache = None;
                vec![self.state_update(t, true)]
            }
            Err(e) => vec![error(ErrorCode::InvalidScenario, e.to_string())],
        }
    }

    fn pointer(
        &mut self,
        t: f64,
        buttons: u32,
        target: impl FnOnce(&SessionState, ControlMode) -> Result<Configuration, String>,
    ) -> Vec<Event> {
        let mode = self.mode;
        let Some(s) = self.session.as_mut() else {
            return vec![error(ErrorCode::NoScenario, "no scenario loaded")];
        };
        if s.is_finished() {
            return vec![error(ErrorCode::RunFinished, "run already finished")];
        }
        if buttons & BUTTON_PRIMARY == 0 {
            return vec![];
        }
        if let Some(last) = self.last_pointer {
            if t - last < 1.0 / self.config.max_pointer_rate {
                return vec![];
            }
        }
        let target = match target(s, mode) {
            Ok(c) => c,
            Err(msg) => return vec![error(ErrorCode::BadRequest, msg)],
        };
        self.last_pointer = Some(t);
        let candidate = clamp_step(s.q, target, self.config.step);
        let outcome = apply_step_checked(&s.scenario, s.q, candidate, self.config.substeps);
        s.record_step(&outcome, t);
        let mut events = vec![self.state_update(t, outcome.accepted)];
        let s = self.session.as_ref().expect("session present");
        if s.is_finished() {
            events.push(Event::RunFinished {
                metrics: s.metrics.clone(),
            });
        }
        events
    }

    fn raster(&mut self, n: usize) -> Vec<Event> {
        let Some(s) = self.session.as_ref() else {
            return vec![error(ErrorCode::NoScenario, "no scenario loaded")];
        };
        if n < MIN_RESOLUTION || n > self.config.max_raster_n {
            return vec![error(
                ErrorCode::BadRequest,
                format!(
                    "raster size must be in {MIN_RESOLUTION}..={}",
                    self.config.max_raster_n
                ),
            )];
        }
        let sc = &s.scenario;
        let raster = match self.raster_cache.take() {
            Some(r) if r.n() == n => r,
            _ => build_raster(&sc.arm, &sc.links, &sc.obstacles, n).expect("n validated"),
        };
        let mut events = raster_chunks(&raster, self.config.chunk_bytes);
        let reachable = bfs_shortest(&raster, s.q, sc.target)
            .map(|p| p.reached())
            .unwrap_or(false);
        events.push(Event::PathExistence { reachable });
        self.raster_cache = Some(raster);
        events
    }

    fn state_update(&self, t: f64, accepted: bool) -> Event {
        let s = self.session.as_ref().expect("session present");
        let pose = forward(&s.scenario.arm, s.q);
        Event::StateUpdate {
            t,
            q: s.q.as_array(),
            pose: PoseMsg {
                elbow: [pose.elbow.x, pose.elbow.y],
                endpoint: [pose.endpoint.x, pose.endpoint.y],
            },
            accepted,
            mode: s.mode,
            metrics: s.metrics.clone(),
        }
    }
}

fn session_error(e: SessionError) -> Event {
    let code = match e {
        SessionError::RunFinished => ErrorCode::RunFinished,
        _ => ErrorCode::BadRequest,
    };
    error(code, e.to_string())
}

/// Parses a JSON-lines command log.
pub fn parse_command_log(text: &str) -> Result<Vec<LoggedCommand>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|source| ReplayError::BadLine { line: k + 1, source }))
        .collect()
}

/// Runs a command log through a fresh engine; returns it with every event
/// it produced, in order.
pub fn replay(config: EngineConfig, log: &[LoggedCommand]) -> (Engine, Vec<Event>) {
    let mut engine = Engine::new(config);
    let mut events = Vec::new();
    for entry in log {
        events.extend(engine.apply(entry.t, entry.command.clone()));
    }
    (engine, events)
}

/// Events as JSON lines, the byte-level export used for replay checks.
pub fn events_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for ev in events {
        let _ = writeln!(out, "{}", String::from_utf8(encode(ev)).expect("utf-8"));
    }
    out
}

impl From<ProtocolError> for Event {
    fn from(e: ProtocolError) -> Self {
        let code = match e {
            ProtocolError::FrameTooLarge(_) => ErrorCode::FrameTooLarge,
            _ => ErrorCode::Malformed,
        };
        error(code, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn greeted() -> Engine {
        let mut e = Engine::new(EngineConfig::default());
        let ev = e.apply(0.0, Command::Hello { version: PROTOCOL_VERSION });
        assert!(matches!(ev[0], Event::Welcome { .. }));
        e
    }

    fn load(e: &mut Engine) {
        let ev = e.apply(
            0.0,
            Command::LoadScenario {
                name: Some("fig3-replica".into()),
                inline: None,
            },
        );
        assert!(matches!(ev[0], Event::StateUpdate { accepted: true, .. }), "{ev:?}");
    }

    #[test]
    fn requires_hello() {
        let mut e = Engine::new(EngineConfig::default());
        let ev = e.apply(0.0, Command::Reset);
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::NotGreeted, .. }));
        let ev = e.apply(0.0, Command::Hello { version: 99 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::UnsupportedVersion, .. }));
        let ev = e.apply(0.0, Command::Hello { version: PROTOCOL_VERSION });
        match &ev[0] {
            Event::Welcome { scenarios, .. } => assert!(scenarios.contains(&"fig3-replica".into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_keeps_session() {
        let mut e = greeted();
        load(&mut e);
        let q = e.session().unwrap().q;
        let ev = e.apply_payload(1.0, b"{not json");
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::Malformed, .. }));
        assert_eq!(e.session().unwrap().q, q);
    }

    #[test]
    fn unknown_and_bad_scenarios() {
        let mut e = greeted();
        let ev = e.apply(0.0, Command::LoadScenario { name: Some("nope".into()), inline: None });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::UnknownScenario, .. }));
        let ev = e.apply(0.0, Command::LoadScenario { name: None, inline: Some("x = ".into()) });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::InvalidScenario, .. }));
        let ev = e.apply(0.0, Command::LoadScenario { name: None, inline: None });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::BadRequest, .. }));
    }

    #[test]
    fn pointer_rate_limit_and_buttons() {
        let mut e = greeted();
        load(&mut e);
        let q0 = e.session().unwrap().q;
        let c = |t1: f64| Command::PointerC { theta1: t1, theta2: q0.theta2.radians(), buttons: 1 };
        assert!(e.apply(1.0, Command::PointerC { theta1: 0.0, theta2: 0.0, buttons: 0 }).is_empty());
        assert_eq!(e.apply(1.0, c(q0.theta1.radians() + 0.01)).len(), 1);
        assert!(e.apply(1.001, c(q0.theta1.radians() + 0.02)).is_empty());
        assert_eq!(e.apply(1.1, c(q0.theta1.radians() + 0.02)).len(), 1);
    }

    #[test]
    fn pointer_kind_must_match_mode() {
        let mut e = greeted();
        load(&mut e);
        let ev = e.apply(1.0, Command::PointerW { x: 1.0, y: 0.0, buttons: 1 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::BadRequest, .. }));
        e.apply(1.0, Command::SetMode { mode: ControlMode::Tip });
        let ev = e.apply(2.0, Command::PointerC { theta1: 0.0, theta2: 0.0, buttons: 1 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::BadRequest, .. }));
    }

    #[test]
    fn raster_request() {
        let mut e = greeted();
        let ev = e.apply(0.0, Command::RequestRaster { n: 64 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::NoScenario, .. }));
        load(&mut e);
        let ev = e.apply(0.0, Command::RequestRaster { n: 64 });
        assert!(matches!(ev.last(), Some(Event::PathExistence { reachable: true })));
        let raster = super::super::protocol::assemble_raster(&ev).unwrap();
        let sc = Scenario::bundled("fig3-replica").unwrap();
        assert_eq!(raster, build_raster(&sc.arm, &sc.links, &sc.obstacles, 64).unwrap());
        let ev = e.apply(0.0, Command::RequestRaster { n: 3 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::BadRequest, .. }));
    }

    #[test]
    fn end_run_then_pointer() {
        let mut e = greeted();
        load(&mut e);
        let ev = e.apply(5.0, Command::EndRun);
        assert!(matches!(ev[0], Event::RunFinished { .. }));
        let ev = e.apply(6.0, Command::PointerC { theta1: 0.0, theta2: 0.0, buttons: 1 });
        assert!(matches!(ev[0], Event::Error { code: ErrorCode::RunFinished, .. }));
        let ev = e.apply(7.0, Command::Reset);
        assert!(matches!(ev[0], Event::StateUpdate { .. }));
    }

    #[test]
    fn log_round_trip() {
        let mut e = greeted();
        load(&mut e);
        e.apply(1.0, Command::PointerC { theta1: 4.0, theta2: 0.7, buttons: 1 });
        let text = e.command_log_jsonl();
        let parsed = parse_command_log(&text).unwrap();
        assert_eq!(parsed, e.command_log());
        assert!(parse_command_log("{\"t\":1}\n").is_err());
    }
}
