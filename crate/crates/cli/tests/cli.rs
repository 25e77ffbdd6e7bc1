use std::f64::consts::TAU;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use armspace::gateway::protocol::{Command as Msg, Event, PROTOCOL_VERSION};
use armspace::gateway::server::Client;

fn armspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armspace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Pixels of a binary PGM written by `build-cspace`.
fn pgm_pixels(path: &Path) -> (usize, Vec<u8>) {
    let bytes = fs::read(path).unwrap();
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(2)
        .unwrap()
        .0;
    let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
    let mut it = header.split_whitespace();
    assert_eq!(it.next(), Some("P5"));
    let n: usize = it.next().unwrap().parse().unwrap();
    (n, bytes[header_end + 1..].to_vec())
}

const EMPTY: &str = r#"format_version = 1
name = "empty"

[arm]
l1 = 1.0
l2 = 1.0
link_width = 0.0

[start]
theta1 = 0.5
theta2 = 0.5

[target]
theta1 = 4.0
theta2 = 2.0
"#;

/// Two disks next to the shoulder block link 1 around θ1 = 0 and θ1 = π,
/// cutting the torus into two bands.
const WALLED: &str = r#"format_version = 1
name = "walled"

[arm]
l1 = 1.0
l2 = 1.0
link_width = 0.0

[start]
theta1 = 1.5707963
theta2 = 1.0

[target]
theta1 = 4.712389
theta2 = 1.0

[[obstacles]]
kind = "circle"
center = [0.5, 0.0]
radius = 0.2

[[obstacles]]
kind = "circle"
center = [-0.5, 0.0]
radius = 0.2
"#;

const SHOULDER_DISK: &str = r#"format_version = 1
name = "buried"

[arm]
l1 = 1.0
l2 = 1.0
link_width = 0.0

[start]
theta1 = 0.0
theta2 = 0.0

[target]
theta1 = 1.0
theta2 = 1.0

[[obstacles]]
kind = "circle"
center = [0.0, 0.0]
radius = 0.3
"#;

#[test]
fn empty_scene_raster_is_white() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("empty.toml");
    fs::write(&sc, EMPTY).unwrap();
    let out = dir.path().join("empty.pgm");
    let o = armspace(&["build-cspace", sc.to_str().unwrap(), "-n", "64", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (n, px) = pgm_pixels(&out);
    assert_eq!(n, 64);
    assert_eq!(px.len(), 64 * 64);
    assert!(px.iter().all(|&p| p == 255));
    let meta = fs::read_to_string(dir.path().join("empty.pgm.meta")).unwrap();
    assert!(meta.contains("n=64\n"));
    assert!(meta.contains("components=0\n"));
}

#[test]
fn shoulder_disk_raster_is_black() {
    // every configuration collides, so only the environment is loaded
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("buried.toml");
    fs::write(&path, SHOULDER_DISK).unwrap();
    let out = dir.path().join("buried.pgm");
    let o = armspace(&["build-cspace", path.to_str().unwrap(), "-n", "32", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (n, px) = pgm_pixels(&out);
    assert_eq!(n, 32);
    assert!(px.iter().all(|&p| p == 0));
    assert!(stdout(&o).contains("virtual obstacles: 1\n"));
    // planning needs a free start
    assert_eq!(armspace(&["plan", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn fig3_replica_reports_one_virtual_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.pgm");
    let o = armspace(&["build-cspace", "fig3-replica", "-n", "128", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("virtual obstacles: 1\n"), "{}", stdout(&o));
    let meta = fs::read_to_string(dir.path().join("fig3.pgm.meta")).unwrap();
    assert!(meta.contains("components=1\n"));
}

#[test]
fn plan_on_empty_and_walled_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, EMPTY).unwrap();
    let o = armspace(&["plan", empty.to_str().unwrap(), "-n", "64"]);
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("bug1: Reached"), "{text}");
    assert!(text.contains("bfs: Reached"), "{text}");

    let walled = dir.path().join("walled.toml");
    fs::write(&walled, WALLED).unwrap();
    let o = armspace(&["plan", walled.to_str().unwrap(), "-n", "64"]);
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("bug1: Unreachable"), "{text}");
    assert!(text.contains("bfs: Unreachable"), "{text}");
    assert!(text.contains("reachability: agree"));
}

#[test]
fn plan_agrees_on_generated_scenes() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..50 {
        let path = dir.path().join(format!("s{seed}.toml"));
        let o = armspace(&["gen-scenario", "--seed", &seed.to_string(), "-o", path.to_str().unwrap()]);
        assert!(o.status.success());
        let o = armspace(&["plan", path.to_str().unwrap(), "-n", "64"]);
        let text = stdout(&o);
        // start may fall in an occupied cell at this resolution
        if o.status.code() == Some(1) {
            assert!(String::from_utf8_lossy(&o.stderr).contains("occupied cell"));
            continue;
        }
        assert!(text.contains("reachability: agree"), "seed {seed}: {text}");
    }
}

#[test]
fn gen_scenario_is_reproducible() {
    let a = armspace(&["gen-scenario", "--seed", "42", "--count", "3", "--name", "demo"]);
    let b = armspace(&["gen-scenario", "--seed", "42", "--count", "3", "--name", "demo"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let sc = armspace::scenario::Scenario::from_toml(&stdout(&a)).unwrap();
    assert_eq!(sc.name, "demo");
    assert_eq!(sc.obstacles.len(), 3);
}

/// A run log whose accepted steps add up to `length` and whose last record
/// is at `seconds`.
fn run_log(length: f64, seconds: f64) -> String {
    let mut text = String::from("# armspace run log v1\n# scenario=table2\ntimestamp\tmode\ttheta1\ttheta2\tflag\n");
    text.push_str("0\tcspace\t0\t0\tS\n");
    let (mut walked, mut t1) = (0.0, 0.0f64);
    let mut k = 0;
    while walked < length {
        let d = (length - walked).min(0.5);
        walked += d;
        t1 = (t1 + d).rem_euclid(TAU);
        k += 1;
        text.push_str(&format!("{}\tcspace\t{t1}\t0\tA\n", k as f64 * 0.1));
    }
    text.push_str(&format!("{seconds}\tcspace\t{t1}\t0\tG\n"));
    text
}

#[test]
fn summarize_table2_runs() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [(12.67, 56.0), (12.39, 54.0), (12.24, 53.0), (12.27, 53.0), (12.28, 54.0)];
    let mut paths = Vec::new();
    for (k, (p, s)) in runs.iter().enumerate() {
        let path = dir.path().join(format!("run{k}.log"));
        fs::write(&path, run_log(*p, *s)).unwrap();
        paths.push(path.to_str().unwrap().to_string());
    }
    let mut args = vec!["summarize", "--csv", "--runs"];
    args.extend(paths.iter().map(String::as_str));
    let o = armspace(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("path length,12.67,12.39,12.24,12.27,12.28\n"), "{text}");
    assert!(text.contains("time,56,54,53,53,54\n"), "{text}");
    assert!(text.contains("Variable,Mean,Minimum,Maximum,Stand. Dev\n"));
    assert!(text.contains("path length,12.37,12.24,12.67,0.16\n"), "{text}");
    assert!(text.contains("time,54.00,53.00,56.00,1.10\n"), "{text}");

    let mut args = vec!["summarize"];
    args.extend(paths.iter().map(String::as_str));
    let table = stdout(&armspace(&args));
    assert!(table.contains("Stand. Dev"));
    assert!(table.contains("12.37"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // missing file: I/O
    let missing = dir.path().join("nope.toml");
    assert_eq!(armspace(&["plan", missing.to_str().unwrap()]).status.code(), Some(2));
    // malformed scenario: validation
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "format_version = 1\nname = \n").unwrap();
    assert_eq!(armspace(&["plan", bad.to_str().unwrap()]).status.code(), Some(1));
    // bad run log: validation
    let log = dir.path().join("run.log");
    fs::write(&log, "not a run log\n").unwrap();
    assert_eq!(armspace(&["summarize", log.to_str().unwrap()]).status.code(), Some(1));
    // bad arguments: validation
    assert_eq!(armspace(&["plan"]).status.code(), Some(1));
    assert_eq!(armspace(&["build-cspace", "fig3-replica", "-n", "4", "-o", "x.pgm"]).status.code(), Some(1));
    // unwritable output: I/O
    let out = dir.path().join("no/such/dir/x.pgm");
    assert_eq!(
        armspace(&["build-cspace", "fig3-replica", "-n", "16", "-o", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(armspace(&["--help"]).status.code(), Some(0));
}

#[test]
fn serve_accepts_a_session() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_armspace"))
        .args(["serve", "--bind", "127.0.0.1:0", "--logical-clock", "0.02", "--log-dir"])
        .arg(dir.path())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();

    let mut c = Client::connect(addr.as_str()).unwrap();
    c.send(&Msg::Hello {
        version: PROTOCOL_VERSION,
    })
    .unwrap();
    assert!(matches!(c.recv().unwrap().unwrap(), Event::Welcome { .. }));
    c.send(&Msg::LoadScenario {
        name: Some("fig3-replica".into()),
        inline: None,
    })
    .unwrap();
    match c.recv().unwrap().unwrap() {
        Event::StateUpdate { t, accepted, .. } => {
            assert!(accepted);
            assert_eq!(t, 0.02);
        }
        other => panic!("unexpected {other:?}"),
    }
    drop(c);
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn serve_reports_bad_flags() {
    let o = armspace(&["serve", "--bind", "127.0.0.1:0", "--step", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}
