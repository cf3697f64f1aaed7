//! End-to-end checks of the binary: exit codes, CSV headers, and output
//! files, run against temporary configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gma");

const SQUARE_H1: &str = r#"
[polygon]
vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]

[rhs]
expr = "1"
lower = 1.0
upper = 1.0
alpha = 0.5

[mesh]
levels = [4, 5]
grading = 0.9
"#;

const SQUARE_H2: &str = r#"
[polygon]
vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]

[rhs]
expr = "2"
lower = 2.0
upper = 2.0
alpha = 0.5
"#;

struct Workdir {
    dir: PathBuf,
}

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("gma-cli-test-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Workdir { dir }
    }

    fn config(&self, text: &str) -> PathBuf {
        let p = self.dir.join("config.toml");
        fs::write(&p, text).unwrap();
        p
    }

    fn out(&self) -> PathBuf {
        self.dir.join("out")
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn first_line(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap_or_default().to_string()
}

#[test]
fn solve_succeeds_with_expected_csv_header() {
    let w = Workdir::new("solve");
    let cfg = w.config(SQUARE_H1);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
        "--mesh-level",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&w.out().join("solve.csv")), "x1,x2,v,u,u11,u12,u22");
}

#[test]
fn boundary_writes_per_edge_traces() {
    let w = Workdir::new("boundary");
    let cfg = w.config(SQUARE_H1);
    let out = run(&[
        "boundary",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for i in 0..4 {
        let f = w.out().join(format!("boundary_edge{i}.csv"));
        assert_eq!(first_line(&f), "t,u,v,h", "file {f:?}");
    }
}

#[test]
fn diagnose_writes_decay_ladders_with_unicode_header() {
    let w = Workdir::new("diagnose");
    let cfg = w.config(SQUARE_H1);
    let out = run(&[
        "diagnose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
        "--mesh-level",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let header = first_line(&w.out().join("decay_edge0.csv"));
    assert_eq!(header, "k,s,D,s^{1\u{2212}\u{3b3}}D");
    assert!(w.out().join("diagnostics.toml").exists());
}

#[test]
fn keldysh_writes_residual_table() {
    let w = Workdir::new("keldysh");
    let cfg = w.config(SQUARE_H1);
    let out = run(&[
        "keldysh",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
        "--mesh-level",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&w.out().join("keldysh.csv")), "p,y,ustar,residual");
}

#[test]
fn incompatible_rhs_exits_2_and_reports_residuals() {
    let w = Workdir::new("incompat");
    let cfg = w.config(SQUARE_H2);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("residual 1.000"), "stderr: {stderr}");
}

#[test]
fn missing_config_exits_3() {
    let w = Workdir::new("missing");
    let out = run(&[
        "solve",
        "--config",
        "/nonexistent/nowhere.toml",
        "--out",
        w.out().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_config_exits_3() {
    let w = Workdir::new("badtoml");
    let cfg = w.config("this is not = [valid");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_mesh_level_flag_exits_3() {
    let w = Workdir::new("badlevel");
    let cfg = w.config(SQUARE_H1);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        w.out().to_str().unwrap(),
        "--mesh-level",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(3));
}
