//! Run lifecycle and bookkeeping: path length, elapsed time, mode history.
//!
//! Path length accumulates `|Δθ1| + |Δθ2|` over accepted steps only.
//! Timestamps come from the caller, so runs replay deterministically.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlMode, StepOutcome};
use crate::cspace::DEFAULT_RESOLUTION;
use crate::geometry::{angle_delta, torus_linf, Configuration};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("run already finished")]
    RunFinished,
    #[error("no runs to summarize")]
    EmptyInput,
    #[error("run log line {line}: {message}")]
    LogParse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    InProgress,
    TargetReached,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Radians, L1 over both joints.
    pub path_length: f64,
    /// Seconds since the run started.
    pub elapsed: f64,
    /// Accepted steps.
    pub steps: u64,
    /// Steps refused by the collision gate.
    pub rejected: u64,
    pub mode_history: Vec<(ControlMode, f64)>,
    pub outcome: RunOutcome,
}

impl RunMetrics {
    fn new(mode: ControlMode, t0: f64) -> Self {
        RunMetrics {
            path_length: 0.0,
            elapsed: 0.0,
            steps: 0,
            rejected: 0,
            mode_history: vec![(mode, t0)],
            outcome: RunOutcome::InProgress,
        }
    }
}

/// Default goal tolerance: one cell of the default raster (L∞ on the torus).
pub const DEFAULT_GOAL_TOLERANCE: f64 = TAU / DEFAULT_RESOLUTION as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub scenario: Scenario,
    pub q: Configuration,
    pub mode: ControlMode,
    pub metrics: RunMetrics,
    pub trace: Vec<Configuration>,
    pub goal_tolerance: f64,
    log: RunLog,
    started_at: f64,
    last_t: f64,
}

pub fn start_run(scenario: Scenario, mode: ControlMode, t0: f64) -> Result<SessionState, SessionError> {
    SessionState::start(scenario, mode, t0, DEFAULT_GOAL_TOLERANCE)
}

impl SessionState {
    pub fn start(
        scenario: Scenario,
        mode: ControlMode,
        t0: f64,
        goal_tolerance: f64,
    ) -> Result<Self, SessionError> {
        if scenario.collides(scenario.start) {
            return Err(SessionError::InvalidScenario(
                "start configuration is in collision".into(),
            ));
        }
        if scenario.collides(scenario.target) {
            return Err(SessionError::InvalidScenario(
                "target configuration is in collision".into(),
            ));
        }
        let q = scenario.start;
        let mut log = RunLog {
            scenario: scenario.name.clone(),
            records: Vec::new(),
        };
        log.records.push(LogRecord {
            timestamp: t0,
            mode,
            q,
            flag: LogFlag::Start,
        });
        Ok(SessionState {
            q,
            mode,
            metrics: RunMetrics::new(mode, t0),
            trace: vec![q],
            goal_tolerance,
            log,
            started_at: t0,
            last_t: t0,
            scenario,
        })
    }

    /// Starts over with the same scenario, mode and tolerance.
    pub fn restart(&self, t0: f64) -> Result<Self, SessionError> {
        SessionState::start(self.scenario.clone(), self.mode, t0, self.goal_tolerance)
    }

    pub fn is_finished(&self) -> bool {
        self.metrics.outcome != RunOutcome::InProgress
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    fn advance_clock(&mut self, t: f64) {
        if t > self.last_t {
            self.last_t = t;
        }
        self.metrics.elapsed = self.last_t - self.started_at;
    }

    /// Books one gated step. No effect once the run has finished.
    pub fn record_step(&mut self, outcome: &StepOutcome, t: f64) {
        if self.is_finished() {
            return;
        }
        self.advance_clock(t);
        if outcome.accepted {
            let q_new = outcome.q_new;
            self.metrics.path_length += angle_delta(self.q.theta1, q_new.theta1).abs()
                + angle_delta(self.q.theta2, q_new.theta2).abs();
            self.metrics.steps += 1;
            self.q = q_new;
            self.trace.push(q_new);
            self.log.push(self.last_t, self.mode, q_new, LogFlag::Accepted);
            if torus_linf(self.q, self.scenario.target) <= self.goal_tolerance {
                self.metrics.outcome = RunOutcome::TargetReached;
                self.log.push(self.last_t, self.mode, self.q, LogFlag::Goal);
            }
        } else {
            self.metrics.rejected += 1;
            let q = outcome.rejected_q.unwrap_or(self.q);
            self.log.push(self.last_t, self.mode, q, LogFlag::Rejected);
        }
    }

    pub fn switch_mode(&mut self, mode: ControlMode, t: f64) -> Result<(), SessionError> {
        if self.is_finished() {
            return Err(SessionError::RunFinished);
        }
        self.advance_clock(t);
        self.mode = mode;
        self.metrics.mode_history.push((mode, self.last_t));
        self.log.push(self.last_t, mode, self.q, LogFlag::ModeSwitch);
        Ok(())
    }

    pub fn end_run(&mut self, t: f64) -> Result<(), SessionError> {
        if self.is_finished() {
            return Err(SessionError::RunFinished);
        }
        self.advance_clock(t);
        self.metrics.outcome = RunOutcome::Abandoned;
        self.log.push(self.last_t, self.mode, self.q, LogFlag::End);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFlag {
    Start,
    Accepted,
    Rejected,
    ModeSwitch,
    Goal,
    End,
}

impl LogFlag {
    fn code(self) -> char {
        match self {
            LogFlag::Start => 'S',
            LogFlag::Accepted => 'A',
            LogFlag::Rejected => 'R',
            LogFlag::ModeSwitch => 'M',
            LogFlag::Goal => 'G',
            LogFlag::End => 'E',
        }
    }

    fn from_code(s: &str) -> Option<Self> {
        Some(match s {
            "S" => LogFlag::Start,
            "A" => LogFlag::Accepted,
            "R" => LogFlag::Rejected,
            "M" => LogFlag::ModeSwitch,
            "G" => LogFlag::Goal,
            "E" => LogFlag::End,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub timestamp: f64,
    pub mode: ControlMode,
    pub q: Configuration,
    pub flag: LogFlag,
}

/// Line-delimited run log.
///
/// ```text
/// # armspace run log v1
/// # scenario=<name>
/// timestamp<TAB>mode<TAB>theta1<TAB>theta2<TAB>flag
/// ```
///
/// followed by one tab-separated record per event. `flag` is `S` (start),
/// `A` (accepted step, new configuration), `R` (rejected step, refused
/// configuration), `M` (mode switch), `G` (target reached) or `E` (run
/// abandoned). Numbers use the shortest representation that round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub scenario: String,
    pub records: Vec<LogRecord>,
}

const LOG_MAGIC: &str = "# armspace run log v1";
const LOG_COLUMNS: &str = "timestamp\tmode\ttheta1\ttheta2\tflag";

impl RunLog {
    fn push(&mut self, timestamp: f64, mode: ControlMode, q: Configuration, flag: LogFlag) {
        self.records.push(LogRecord {
            timestamp,
            mode,
            q,
            flag,
        });
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{LOG_MAGIC}");
        let _ = writeln!(out, "# scenario={}", self.scenario.replace('\n', " "));
        let _ = writeln!(out, "{LOG_COLUMNS}");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.timestamp,
                r.mode,
                r.q.theta1,
                r.q.theta2,
                r.flag.code()
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<RunLog, SessionError> {
        let err = |line: usize, message: &str| SessionError::LogParse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == LOG_MAGIC => {}
            _ => return Err(err(1, "missing run log header")),
        }
        let mut log = RunLog {
            scenario: String::new(),
            records: Vec::new(),
        };
        for (k, raw) in lines {
            let line_no = k + 1;
            let line = raw.trim_end_matches('\r');
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(name) = meta.trim().strip_prefix("scenario=") {
                    log.scenario = name.to_string();
                }
                continue;
            }
            if line.is_empty() || line == LOG_COLUMNS {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(err(line_no, "expected 5 tab-separated fields"));
            }
            let num = |s: &str, what: &str| -> Result<f64, SessionError> {
                let v: f64 = s.parse().map_err(|_| err(line_no, &format!("bad {what}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(line_no, &format!("{what} is not finite")))
                }
            };
            let timestamp = num(fields[0], "timestamp")?;
            let mode: ControlMode = fields[1]
                .parse()
                .map_err(|_| err(line_no, "bad mode"))?;
            let q = Configuration::new(num(fields[2], "theta1")?, num(fields[3], "theta2")?)
                .map_err(|_| err(line_no, "bad configuration"))?;
            let flag = LogFlag::from_code(fields[4]).ok_or_else(|| err(line_no, "bad flag"))?;
            if log.records.is_empty() && flag != LogFlag::Start {
                return Err(err(line_no, "first record must be the start record"));
            }
            if !log.records.is_empty() && flag == LogFlag::Start {
                return Err(err(line_no, "duplicate start record"));
            }
            log.records.push(LogRecord {
                timestamp,
                mode,
                q,
                flag,
            });
        }
        if log.records.is_empty() {
            return Err(err(1, "run log has no records"));
        }
        Ok(log)
    }

    /// Recomputes run metrics from the records alone.
    pub fn metrics(&self) -> RunMetrics {
        let first = &self.records[0];
        let mut m = RunMetrics::new(first.mode, first.timestamp);
        let mut q = first.q;
        let mut last_t = first.timestamp;
        for r in &self.records[1..] {
            last_t = last_t.max(r.timestamp);
            match r.flag {
                LogFlag::Accepted => {
                    m.path_length += angle_delta(q.theta1, r.q.theta1).abs()
                        + angle_delta(q.theta2, r.q.theta2).abs();
                    m.steps += 1;
                    q = r.q;
                }
                LogFlag::Rejected => m.rejected += 1,
                LogFlag::ModeSwitch => m.mode_history.push((r.mode, r.timestamp)),
                LogFlag::Goal => m.outcome = RunOutcome::TargetReached,
                LogFlag::End => m.outcome = RunOutcome::Abandoned,
                LogFlag::Start => {}
            }
        }
        m.elapsed = last_t - first.timestamp;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub variable: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std_dev: f64,
}

impl StatRow {
    /// Population statistics of `values` (must be non-empty).
    pub fn from_values(variable: &str, values: &[f64]) -> StatRow {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        StatRow {
            variable: variable.to_string(),
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std_dev: var.sqrt(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.2},{:.2},{:.2},{:.2}",
            self.variable, self.mean, self.min, self.max, self.std_dev
        )
    }
}

/// Descriptive statistics over runs: one row for path length, one for time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub rows: Vec<StatRow>,
}

pub const SUMMARY_HEADER: [&str; 5] = ["Variable", "Mean", "Minimum", "Maximum", "Stand. Dev"];

impl Summary {
    pub fn from_rows(runs: usize, rows: Vec<StatRow>) -> Self {
        Summary { runs, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = SUMMARY_HEADER.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    /// Boxed plain-text table.
    pub fn to_table(&self) -> String {
        let cells: Vec<[String; 5]> = std::iter::once(SUMMARY_HEADER.map(String::from))
            .chain(self.rows.iter().map(|r| {
                [
                    r.variable.clone(),
                    format!("{:.2}", r.mean),
                    format!("{:.2}", r.min),
                    format!("{:.2}", r.max),
                    format!("{:.2}", r.std_dev),
                ]
            }))
            .collect();
        let widths: Vec<usize> = (0..5)
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let rule: String = {
            let mut s = String::from("+");
            for w in &widths {
                s.push_str(&"-".repeat(w + 2));
                s.push('+');
            }
            s
        };
        let mut out = String::new();
        out.push_str(&rule);
        out.push('\n');
        for (k, row) in cells.iter().enumerate() {
            out.push('|');
            for (c, text) in row.iter().enumerate() {
                let _ = write!(out, " {:^w$} |", text, w = widths[c]);
            }
            out.push('\n');
            if k == 0 {
                out.push_str(&rule.replace('-', "="));
                out.push('\n');
            }
        }
        out.push_str(&rule);
        out.push('\n');
        out
    }
}

pub fn summarize(runs: &[RunMetrics]) -> Result<Summary, SessionError> {
    if runs.is_empty() {
        return Err(SessionError::EmptyInput);
    }
    let lengths: Vec<f64> = runs.iter().map(|r| r.path_length).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.elapsed).collect();
    Ok(Summary {
        runs: runs.len(),
        rows: vec![
            StatRow::from_values("path length", &lengths),
            StatRow::from_values("time", &times),
        ],
    })
}

/// Per-run listing: one column per run, path length to two decimals and
/// time in whole seconds.
pub fn render_runs(runs: &[RunMetrics]) -> String {
    let mut out = String::from("Variable");
    for k in 1..=runs.len() {
        let _ = write!(out, ",Run {k}");
    }
    out.push_str("\npath length");
    for r in runs {
        let _ = write!(out, ",{:.2}", r.path_length);
    }
    out.push_str("\ntime");
    for r in runs {
        let _ = write!(out, ",{:.0}", r.elapsed);
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Joint;
    use crate::geometry::{Obstacle, Point2};

    fn scenario() -> Scenario {
        Scenario::builder("s")
            .obstacle(Obstacle::circle(Point2::new(0.0, -1.5), 0.2).unwrap())
            .start(Configuration::new(0.0, 0.0).unwrap())
            .target(Configuration::new(2.0, 1.0).unwrap())
            .build()
            .unwrap()
    }

    fn accept(q: Configuration) -> StepOutcome {
        StepOutcome {
            accepted: true,
            q_new: q,
            rejected_q: None,
        }
    }

    #[test]
    fn start_zeroes_metrics() {
        let s = start_run(scenario(), ControlMode::CSpace, 10.0).unwrap();
        assert_eq!(s.metrics.path_length, 0.0);
        assert_eq!(s.metrics.elapsed, 0.0);
        assert_eq!(s.metrics.outcome, RunOutcome::InProgress);
        assert_eq!(s.trace, vec![s.scenario.start]);
    }

    #[test]
    fn start_inside_obstacle_rejected() {
        let mut sc = scenario();
        sc.start = Configuration::new(1.5 * std::f64::consts::PI, 0.0).unwrap();
        assert!(matches!(
            start_run(sc, ControlMode::CSpace, 0.0),
            Err(SessionError::InvalidScenario(_))
        ));
    }

    #[test]
    fn restart_resets_trace() {
        let mut s = start_run(scenario(), ControlMode::CSpace, 0.0).unwrap();
        s.record_step(&accept(Configuration::new(0.05, 0.0).unwrap()), 1.0);
        assert_eq!(s.trace.len(), 2);
        let s = s.restart(2.0).unwrap();
        assert_eq!(s.trace.len(), 1);
        assert_eq!(s.metrics.path_length, 0.0);
    }

    #[test]
    fn increments() {
        let mut s = start_run(scenario(), ControlMode::CSpace, 0.0).unwrap();
        s.record_step(&accept(Configuration::new(0.1, -0.1).unwrap()), 0.5);
        assert!((s.metrics.path_length - 0.2).abs() < 1e-12);

        let mut sc = scenario();
        sc.start = Configuration::new(6.2, 0.0).unwrap();
        let mut s = start_run(sc, ControlMode::CSpace, 0.0).unwrap();
        s.record_step(&accept(Configuration::new(0.05, 0.0).unwrap()), 0.5);
        assert!((s.metrics.path_length - 0.1332).abs() < 1e-4);
    }

    #[test]
    fn rejected_steps_only_advance_time() {
        let mut s = start_run(scenario(), ControlMode::CSpace, 0.0).unwrap();
        let q0 = s.q;
        s.record_step(
            &StepOutcome {
                accepted: false,
                q_new: q0,
                rejected_q: Some(Configuration::new(1.0, 1.0).unwrap()),
            },
            3.0,
        );
        assert_eq!(s.q, q0);
        assert_eq!(s.metrics.path_length, 0.0);
        assert_eq!(s.metrics.elapsed, 3.0);
        assert_eq!(s.metrics.rejected, 1);
    }

    #[test]
    fn target_reached_is_absorbing() {
        let mut s = start_run(scenario(), ControlMode::CSpace, 0.0).unwrap();
        let t = s.scenario.target;
        s.record_step(&accept(t), 1.0);
        assert_eq!(s.metrics.outcome, RunOutcome::TargetReached);
        let before = s.metrics.clone();
        s.record_step(&accept(Configuration::new(0.0, 0.0).unwrap()), 2.0);
        assert_eq!(s.metrics, before);
        assert_eq!(s.switch_mode(ControlMode::Tip, 3.0), Err(SessionError::RunFinished));
    }

    #[test]
    fn mode_switches_keep_metrics() {
        let mut s = start_run(scenario(), ControlMode::Tip, 0.0).unwrap();
        s.record_step(&accept(Configuration::new(0.05, 0.0).unwrap()), 1.0);
        let len = s.metrics.path_length;
        let el = s.metrics.elapsed;
        s.switch_mode(ControlMode::CSpace, 1.0).unwrap();
        assert_eq!(s.metrics.path_length, len);
        assert_eq!(s.metrics.elapsed, el);
        let q = s.q;
        for k in 0..100 {
            let m = if k % 2 == 0 {
                ControlMode::Joint(Joint::Elbow)
            } else {
                ControlMode::CSpace
            };
            s.switch_mode(m, 1.0 + k as f64).unwrap();
        }
        assert_eq!(s.q, q);
        assert_eq!(s.metrics.mode_history.len(), 102);
    }

    #[test]
    fn log_round_trip_and_metrics() {
        let mut s = start_run(scenario(), ControlMode::CSpace, 0.25).unwrap();
        s.record_step(&accept(Configuration::new(0.05, 0.01).unwrap()), 0.5);
        s.switch_mode(ControlMode::Tip, 0.75).unwrap();
        s.record_step(&accept(Configuration::new(0.1, 0.03).unwrap()), 1.0);
        s.end_run(1.5).unwrap();
        let text = s.log().to_text();
        let parsed = RunLog::parse(&text).unwrap();
        assert_eq!(&parsed, s.log());
        assert_eq!(parsed.to_text(), text);
        assert_eq!(parsed.metrics(), s.metrics);
    }

    #[test]
    fn log_parse_errors() {
        assert!(RunLog::parse("").is_err());
        assert!(RunLog::parse("# armspace run log v1\n").is_err());
        let bad = "# armspace run log v1\n0\tcspace\t0\t0\tA\n";
        assert!(matches!(RunLog::parse(bad), Err(SessionError::LogParse { line: 2, .. })));
        let bad = "# armspace run log v1\n0\twarp\t0\t0\tS\n";
        assert!(RunLog::parse(bad).is_err());
        let bad = "# armspace run log v1\n0\tcspace\tNaN\t0\tS\n";
        assert!(RunLog::parse(bad).is_err());
    }

    #[test]
    fn summary_basics() {
        assert_eq!(summarize(&[]), Err(SessionError::EmptyInput));
        let run = RunMetrics {
            path_length: 3.0,
            elapsed: 9.0,
            ..RunMetrics::new(ControlMode::CSpace, 0.0)
        };
        let s = summarize(&[run]).unwrap();
        assert_eq!(s.rows[0].std_dev, 0.0);
        assert_eq!(s.rows[1].std_dev, 0.0);
        assert!(s.to_csv().starts_with("Variable,Mean,Minimum,Maximum,Stand. Dev\n"));
    }

    #[test]
    fn fixed_row_renders_two_decimals() {
        let row = StatRow {
            variable: "path length".into(),
            mean: 129.04,
            min: 15.13,
            max: 393.90,
            std_dev: 107.99,
        };
        assert_eq!(row.csv_line(), "path length,129.04,15.13,393.90,107.99");
        let table = Summary::from_rows(12, vec![row]).to_table();
        assert!(table.contains("Stand. Dev"));
        assert!(table.contains("393.90"));
    }
}
