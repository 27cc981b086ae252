use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const WORLD: &str = "\
# 6 x 4 room with one box
0 0 6 0
6 0 6 4
6 4 0 4
0 4 0 0
2.5 1.5 3.5 1.5
3.5 1.5 3.5 2.2
3.5 2.2 2.5 2.2
2.5 2.2 2.5 1.5
";

// one lap around the box, back to the start
const TRAJ: &str = "\
scan_rate 10
route 0.4 1.0 0
1 0.8
5 0.8
5 3.2
1 3.2
1 0.8
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bioslam"))
}

fn fixtures() -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let world = dir.path().join("room.world");
    let traj = dir.path().join("lap.traj");
    fs::write(&world, WORLD).unwrap();
    fs::write(&traj, TRAJ).unwrap();
    (dir, world, traj)
}

fn simulate(world: &Path, traj: &Path, out: &Path, seed: u64) -> Output {
    bin()
        .args(["simulate", "--world"])
        .arg(world)
        .arg("--trajectory")
        .arg(traj)
        .arg("--out")
        .arg(out)
        .args(["--seed", &seed.to_string()])
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

/// The single error line, checked for the prefix.
fn error_line(o: &Output) -> String {
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr).trim_end().to_string();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn simulate_writes_every_output_and_is_repeatable() {
    let (dir, world, traj) = fixtures();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&simulate(&world, &traj, &a, 3));
    ok(&simulate(&world, &traj, &b, 3));
    for f in [
        "scans.txt",
        "truth.txt",
        "report.txt",
        "views.txt",
        "nodes.txt",
        "edges.txt",
        "summary.txt",
        "local_map.pgm",
        "pose_cells.txt",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
        assert_eq!(
            sha(&a.join(f)),
            sha(&b.join(f)),
            "{f} differs between identical runs"
        );
    }
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    let scans = fs::read_to_string(a.join("scans.txt")).unwrap();
    assert_eq!(report.lines().count(), scans.lines().count());

    let c = dir.path().join("c");
    ok(&simulate(&world, &traj, &c, 4));
    assert_ne!(sha(&a.join("scans.txt")), sha(&c.join("scans.txt")));
}

#[test]
fn missing_world_names_the_path() {
    let (dir, _, traj) = fixtures();
    let missing = dir.path().join("nowhere.world");
    let err = error_line(&simulate(&missing, &traj, &dir.path().join("out"), 0));
    assert!(err.contains("nowhere.world"), "{err}");
}

#[test]
fn bad_config_is_rejected() {
    let (dir, world, traj) = fixtures();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[pose_cells]\nno_such_key = 1\n").unwrap();
    let o = bin()
        .args(["simulate", "--world"])
        .arg(&world)
        .arg("--trajectory")
        .arg(&traj)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    let err = error_line(&o);
    assert!(err.contains("no_such_key"), "{err}");
}

#[test]
fn replay_reproduces_simulate() {
    let (dir, world, traj) = fixtures();
    let sim = dir.path().join("sim");
    ok(&simulate(&world, &traj, &sim, 0));
    let rep = dir.path().join("rep");
    let o = bin()
        .args(["replay", "--scanlog"])
        .arg(sim.join("scans.txt"))
        .arg("--truth")
        .arg(sim.join("truth.txt"))
        .arg("--out")
        .arg(&rep)
        .output()
        .unwrap();
    ok(&o);
    for f in [
        "report.txt",
        "views.txt",
        "nodes.txt",
        "edges.txt",
        "summary.txt",
    ] {
        assert_eq!(sha(&sim.join(f)), sha(&rep.join(f)), "{f} differs");
    }
}

#[test]
fn replay_without_truth_omits_errors() {
    let (dir, world, traj) = fixtures();
    let sim = dir.path().join("sim");
    ok(&simulate(&world, &traj, &sim, 0));
    let rep = dir.path().join("rep");
    ok(&bin()
        .args(["replay", "--scanlog"])
        .arg(sim.join("scans.txt"))
        .arg("--out")
        .arg(&rep)
        .output()
        .unwrap());
    let summary = fs::read_to_string(rep.join("summary.txt")).unwrap();
    let fields: Vec<&str> = summary.split_whitespace().collect();
    assert_eq!(&fields[..4], &["nan"; 4]);
    assert_eq!(fields.len(), 8);
    assert_eq!(sha(&sim.join("nodes.txt")), sha(&rep.join("nodes.txt")));
    let first = fs::read_to_string(rep.join("report.txt")).unwrap();
    assert!(first
        .lines()
        .all(|l| l.split_whitespace().nth(3) == Some("nan")));
}

#[test]
fn corrupt_scan_line_is_reported_by_number() {
    let (dir, world, traj) = fixtures();
    let sim = dir.path().join("sim");
    ok(&simulate(&world, &traj, &sim, 0));
    let text = fs::read_to_string(sim.join("scans.txt")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[6] = lines[6].replacen(' ', " bogus ", 3);
    let bad = dir.path().join("bad_scans.txt");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = bin()
        .args(["replay", "--scanlog"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("rep"))
        .output()
        .unwrap();
    let err = error_line(&o);
    assert!(err.contains("bad_scans.txt:7:"), "{err}");
}

#[test]
fn plot_writes_three_figures() {
    let (dir, world, traj) = fixtures();
    let sim = dir.path().join("sim");
    ok(&simulate(&world, &traj, &sim, 0));
    ok(&bin().arg("plot").arg("--out").arg(&sim).output().unwrap());
    for f in ["map.svg", "views.svg", "error.svg"] {
        let svg = fs::read_to_string(sim.join(f)).unwrap();
        assert!(
            svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"),
            "{f}"
        );
    }
    let nodes = fs::read_to_string(sim.join("nodes.txt"))
        .unwrap()
        .lines()
        .count();
    let map = fs::read_to_string(sim.join("map.svg")).unwrap();
    assert_eq!(map.matches("<circle").count(), nodes);
}

#[test]
fn one_node_map_has_one_marker() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("report.txt"), "0 nan nan nan 1 0 0 0\n").unwrap();
    fs::write(d.join("nodes.txt"), "0 0 0 0 0\n").unwrap();
    fs::write(d.join("edges.txt"), "").unwrap();
    ok(&bin().arg("plot").arg("--out").arg(d).output().unwrap());
    let map = fs::read_to_string(d.join("map.svg")).unwrap();
    assert_eq!(map.matches("<circle").count(), 1);
    assert!(fs::read_to_string(d.join("error.svg"))
        .unwrap()
        .contains("no ground truth"));
}

#[test]
fn plot_rejects_empty_or_missing_inputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let err = error_line(&bin().arg("plot").arg("--out").arg(d).output().unwrap());
    assert!(err.contains("report.txt"), "{err}");
    fs::write(d.join("report.txt"), "# nothing yet\n").unwrap();
    fs::write(d.join("nodes.txt"), "0 0 0 0 0\n").unwrap();
    fs::write(d.join("edges.txt"), "").unwrap();
    let err = error_line(&bin().arg("plot").arg("--out").arg(d).output().unwrap());
    assert!(err.contains("empty"), "{err}");
}
