//! `armspace` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use armspace::collision::LinkModel;
use armspace::control::{ControlMode, StepLimit};
use armspace::cspace::{build_raster_with, label_components, RasterMetadata, RasterOptions};
use armspace::gateway::server::{bind, serve, ClockKind, ServerConfig};
use armspace::gateway::EngineConfig;
use armspace::kinematics::ArmGeometry;
use armspace::navigator::{bfs_shortest, bug1, PathResult};
use armspace::scenario::{random_scenario, RandomParams, Scenario, ScenarioError};
use armspace::session::{render_runs, summarize, RunLog};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "armspace", version, about = "Configuration-space tools for a planar two-link arm")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the C-space raster and write it as a PGM with a `.meta` sidecar.
    BuildCspace {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(short, long, default_value_t = 256)]
        n: usize,
        /// Output graymap; the sidecar goes to `<out>.meta`.
        #[arg(short, long)]
        out: PathBuf,
        /// Grow obstacles by this many cells.
        #[arg(long, default_value_t = 0)]
        dilation: usize,
    },
    /// Run bug1 and the breadth-first oracle between the scenario's start and target.
    Plan {
        scenario: String,
        #[arg(short, long, default_value_t = 256)]
        n: usize,
        /// Print the waypoints too.
        #[arg(long)]
        waypoints: bool,
    },
    /// Write a seeded random scenario.
    GenScenario {
        #[arg(long)]
        seed: u64,
        /// Obstacle count range, `min..max` (inclusive) or a single number.
        #[arg(long, default_value = "2..5")]
        count: String,
        #[arg(long, default_value_t = 0.1)]
        min_size: f64,
        #[arg(long, default_value_t = 0.3)]
        max_size: f64,
        #[arg(long, default_value_t = 1.0)]
        l1: f64,
        #[arg(long, default_value_t = 1.0)]
        l2: f64,
        #[arg(long, default_value_t = 0.0)]
        link_width: f64,
        #[arg(long)]
        name: Option<String>,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Descriptive statistics over run logs.
    Summarize {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Comma-separated output instead of a boxed table.
        #[arg(long)]
        csv: bool,
        /// Also list each run.
        #[arg(long)]
        runs: bool,
    },
    /// Host operator sessions over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: SocketAddr,
        /// Largest joint-space move per pointer message, radians.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Collision checks between consecutive steps.
        #[arg(long, default_value_t = 0)]
        substeps: usize,
        /// Directory searched for `<name>.toml` scenarios.
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
        /// Directory for per-connection command logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Stamp frame k at k * DT seconds instead of wall-clock time.
        #[arg(long, value_name = "DT")]
        logical_clock: Option<f64>,
        /// Initial control mode: joint1, joint2, tip or cspace.
        #[arg(long, default_value = "cspace")]
        mode: ControlMode,
    },
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

fn invalid(e: impl ToString) -> Failure {
    Failure::Invalid(e.to_string())
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(e) => Failure::Io(e.to_string()),
            other => invalid(other),
        }
    }
}

/// A scenario file path, or a bundled scenario name when no such file
/// exists. `environment_only` skips the start/target collision checks.
fn load_scenario_with(arg: &str, environment_only: bool) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(s) = Scenario::bundled(arg) {
            return Ok(s);
        }
    }
    let loaded = if environment_only {
        Scenario::load_environment(path)
    } else {
        Scenario::load(path)
    };
    loaded.map_err(|e| match e {
        ScenarioError::Io(e) => io_err(path, e),
        other => invalid(format!("{}: {other}", path.display())),
    })
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    load_scenario_with(arg, false)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn build_cspace(scenario: &str, n: usize, out: &Path, dilation: usize) -> Result<(), Failure> {
    let sc = load_scenario_with(scenario, true)?;
    let raster =
        build_raster_with(&sc.arm, &sc.links, &sc.obstacles, RasterOptions { n, dilation })
            .map_err(invalid)?;
    let components = label_components(&raster).count;
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = BufWriter::new(file);
    raster
        .write_pgm(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(out, e))?;
    let meta = RasterMetadata {
        n,
        l1: sc.arm.l1,
        l2: sc.arm.l2,
        link_width: sc.links.width,
        dilation,
        scenario_hash: sc.content_hash(),
        components,
    };
    let side = sidecar_path(out);
    fs::write(&side, meta.to_text()).map_err(|e| io_err(&side, e))?;
    println!("wrote {} and {}", out.display(), side.display());
    println!(
        "occupied cells: {} of {}",
        raster.occupied_count(),
        n * n
    );
    println!("virtual obstacles: {components}");
    Ok(())
}

fn print_path(label: &str, p: &PathResult, waypoints: bool) {
    println!("{label}: {:?}, length {:.6}, {} waypoints", p.status, p.length, p.waypoints.len());
    if waypoints {
        for q in &p.waypoints {
            println!("  {:.6} {:.6}", q.theta1.radians(), q.theta2.radians());
        }
    }
}

fn plan(scenario: &str, n: usize, waypoints: bool) -> Result<(), Failure> {
    let sc = load_scenario(scenario)?;
    let raster = build_raster_with(&sc.arm, &sc.links, &sc.obstacles, RasterOptions { n, dilation: 0 })
        .map_err(invalid)?;
    let (b, trace) = bug1(&raster, sc.start, sc.target).map_err(invalid)?;
    let o = bfs_shortest(&raster, sc.start, sc.target).map_err(invalid)?;
    println!("scenario: {} (n = {n})", sc.name);
    print_path("bug1", &b, waypoints);
    println!(
        "  {} boundary walk(s), {} hit point(s)",
        trace.circumnavigations.len(),
        trace.hit_points.len()
    );
    print_path("bfs", &o, waypoints);
    println!(
        "reachability: {}",
        if b.status == o.status { "agree" } else { "DISAGREE" }
    );
    Ok(())
}

fn parse_count(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || invalid(format!("count must be N or MIN..MAX, got {s:?}"));
    match s.split_once("..") {
        Some((a, b)) => Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => {
            let k = s.trim().parse().map_err(|_| bad())?;
            Ok((k, k))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_scenario(
    seed: u64,
    count: &str,
    size: (f64, f64),
    l1: f64,
    l2: f64,
    link_width: f64,
    name: Option<String>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let params = RandomParams {
        count: parse_count(count)?,
        size,
        arm: ArmGeometry::new(l1, l2).map_err(invalid)?,
        links: LinkModel::new(link_width).map_err(invalid)?,
        ..RandomParams::default()
    };
    let mut sc = random_scenario(seed, &params)?;
    if let Some(name) = name {
        sc.name = name;
    }
    let text = sc.to_toml();
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| io_err(path, e))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn summarize_logs(logs: &[PathBuf], csv: bool, runs: bool) -> Result<(), Failure> {
    let mut metrics = Vec::with_capacity(logs.len());
    for path in logs {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let log = RunLog::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        metrics.push(log.metrics());
    }
    let summary = summarize(&metrics).map_err(invalid)?;
    if runs {
        print!("{}", render_runs(&metrics));
        println!();
    }
    if csv {
        print!("{}", summary.to_csv());
    } else {
        println!("Descriptive statistics over {} run(s)", summary.runs);
        print!("{}", summary.to_table());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn serve_cmd(
    addr: SocketAddr,
    step: f64,
    substeps: usize,
    scenario_dir: Option<PathBuf>,
    log_dir: Option<PathBuf>,
    logical: Option<f64>,
    mode: ControlMode,
) -> Result<(), Failure> {
    let step = StepLimit::new(step).map_err(invalid)?;
    let clock = match logical {
        Some(dt) if dt.is_finite() && dt > 0.0 => ClockKind::Logical { dt },
        Some(dt) => return Err(invalid(format!("logical clock step must be positive, got {dt}"))),
        None => ClockKind::System,
    };
    if let Some(dir) = &log_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let config = ServerConfig {
        engine: EngineConfig {
            step,
            substeps,
            scenario_dir,
            initial_mode: mode,
            ..EngineConfig::default()
        },
        clock,
        log_dir,
    };
    let listener = bind(addr).map_err(|e| Failure::Io(format!("bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?;
    eprintln!("listening on {local}");
    serve(listener, config).map_err(|e| Failure::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::BuildCspace {
            scenario,
            n,
            out,
            dilation,
        } => build_cspace(&scenario, n, &out, dilation),
        Cmd::Plan {
            scenario,
            n,
            waypoints,
        } => plan(&scenario, n, waypoints),
        Cmd::GenScenario {
            seed,
            count,
            min_size,
            max_size,
            l1,
            l2,
            link_width,
            name,
            out,
        } => gen_scenario(
            seed,
            &count,
            (min_size, max_size),
            l1,
            l2,
            link_width,
            name,
            out.as_deref(),
        ),
        Cmd::Summarize { logs, csv, runs } => summarize_logs(&logs, csv, runs),
        Cmd::Serve {
            bind,
            step,
            substeps,
            scenario_dir,
            log_dir,
            logical_clock,
            mode,
        } => serve_cmd(bind, step, substeps, scenario_dir, log_dir, logical_clock, mode),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Invalid(m) | Failure::Io(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
