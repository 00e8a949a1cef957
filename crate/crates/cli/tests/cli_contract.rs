//! Exit-status contract and file outputs of the binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mvfpke")
}

const BASE: &str = "
model.family = constant
model.gamma0 = 1.0
model.a = 1.0
model.c = 0.0
domain.x_min = -8
domain.x_max = 8
domain.n_cells = 256
fpke.t_end = 0.1
fpke.dt = 0.001
fpke.scheme = semi-implicit
initial.kind = gaussian
initial.mean = 0.0
initial.sd = 0.5
";

struct Run {
    status: i32,
    stdout: String,
    stderr: String,
    out_dir: PathBuf,
}

fn run(subcommand: &str, config_text: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, config_text).unwrap();
    let out_dir = dir.path().join("out");
    let output = Command::new(bin())
        .arg(subcommand)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .output()
        .unwrap();
    // keep the tempdir alive for the caller
    std::mem::forget(dir);
    Run {
        status: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        out_dir,
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn constant_family_audit_exits_zero() {
    let r = run("check-conditions", BASE, &[]);
    assert_eq!(r.status, 0, "stderr: {}", r.stderr);
    let csv = read(&r.out_dir, "conditions.csv");
    assert_eq!(csv.lines().count(), 6, "5 conditions + header");
    assert!(csv.contains("H1-monotone,true"));
}

#[test]
fn failing_family_exits_one_with_witness_row() {
    let cfg = "
model.family = porous-regularized
model.gamma0 = 0.15
model.a0 = 1.0
model.alpha = -1.0
model.kappa = 0.0
model.xdep = 0
domain.x_min = -8
domain.x_max = 8
domain.n_cells = 64
fpke.t_end = 0.5
fpke.dt = 0.001
initial.kind = gaussian
initial.sd = 0.5
audit.r_max = 2.0
";
    let r = run("check-conditions", cfg, &[]);
    assert_eq!(r.status, 1, "stdout: {}", r.stdout);
    let csv = read(&r.out_dir, "conditions.csv");
    let row = csv
        .lines()
        .find(|l| l.starts_with("H1-monotone"))
        .expect("monotonicity row");
    assert!(row.contains("false"));
    // witness columns are populated
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields.len(), 7);
    assert!(!fields[3].is_empty() && !fields[5].is_empty());
}

#[test]
fn missing_gamma0_is_a_configuration_error() {
    let cfg = BASE.replace("model.gamma0 = 1.0", "");
    let r = run("check-conditions", &cfg, &[]);
    assert_eq!(r.status, 2);
    assert!(r.stderr.contains("model.gamma0"), "stderr: {}", r.stderr);
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let cfg = format!("{BASE}\nsolver.mode = fast\n");
    let r = run("solve-fpke", &cfg, &[]);
    assert_eq!(r.status, 2);
    assert!(r.stderr.contains("solver.mode"), "stderr: {}", r.stderr);
}

#[test]
fn cfl_violation_exits_one_naming_the_rule() {
    let cfg = BASE.replace("fpke.scheme = semi-implicit", "fpke.scheme = explicit");
    let cfg = cfg.replace("fpke.dt = 0.001", "fpke.dt = 0.01");
    let r = run("solve-fpke", &cfg, &[]);
    assert_eq!(r.status, 1, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("stability rule"), "stderr: {}", r.stderr);
    assert!(r.stderr.contains("dx^2"), "stderr: {}", r.stderr);
}

#[test]
fn zero_horizon_emits_a_single_snapshot() {
    let cfg = BASE.replace("fpke.t_end = 0.1", "fpke.t_end = 0.0");
    let r = run("solve-fpke", &cfg, &[]);
    assert_eq!(r.status, 0, "stderr: {}", r.stderr);
    let csv = read(&r.out_dir, "densities.csv");
    assert_eq!(csv.lines().count(), 1 + 256, "header + one snapshot");
}

#[test]
fn report_lists_every_emitted_file() {
    // small ensemble: widen the tolerance, only the file contract matters
    let cfg = format!(
        "{BASE}\nsde.enabled = true\nsde.base_seed = 5\nsde.n_paths = 500\nsde.dt = 0.0125\nsde.times = 0.1\nsde.save_paths = 2\nsde.w1_tol = 0.2\n"
    );
    let r = run("simulate", &cfg, &[]);
    assert_eq!(r.status, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    let report = read(&r.out_dir, "report.txt");
    for name in [
        "report.txt",
        "fpke_summary.csv",
        "marginals_sde.csv",
        "gap_table.csv",
        "trajectories.csv",
    ] {
        assert!(report.contains(name), "report does not list {name}:\n{report}");
        if name != "report.txt" {
            assert!(r.out_dir.join(name).exists(), "{name} not written");
        }
    }
    // default gap study has 4 levels -> 4 data rows
    let gap = read(&r.out_dir, "gap_table.csv");
    assert_eq!(gap.lines().count(), 5);
}

#[test]
fn seed_override_rewires_the_randomness() {
    let cfg = format!(
        "{BASE}\nsde.enabled = true\nsde.base_seed = 5\nsde.n_paths = 300\nsde.dt = 0.0125\nsde.times = 0.1\nsde.save_paths = 1\nsde.w1_tol = 0.2\n"
    );
    let a = run("simulate", &cfg, &["--seed-override", "123", "--quiet"]);
    let b = run("simulate", &cfg, &["--seed-override", "123", "--quiet"]);
    let c = run("simulate", &cfg, &["--seed-override", "124", "--quiet"]);
    assert_eq!(a.status, 0);
    assert_eq!(
        read(&a.out_dir, "trajectories.csv"),
        read(&b.out_dir, "trajectories.csv"),
        "same override must reproduce"
    );
    assert_ne!(
        read(&a.out_dir, "trajectories.csv"),
        read(&c.out_dir, "trajectories.csv"),
        "different override must change paths"
    );
}

#[test]
fn initial_data_can_come_from_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    // triangular profile over 256 cells, unnormalized on purpose
    let csv_path = dir.path().join("u0.csv");
    let mut body = String::from("x,u\n");
    for i in 0..256 {
        let x = -8.0 + 16.0 * (i as f64 + 0.5) / 256.0;
        body.push_str(&format!("{x},{}\n", (4.0 - x.abs()).max(0.0)));
    }
    std::fs::write(&csv_path, body).unwrap();
    let cfg = BASE.replace(
        "initial.kind = gaussian\ninitial.mean = 0.0\ninitial.sd = 0.5",
        &format!("initial.kind = csv\ninitial.path = {}", csv_path.display()),
    );
    let r = run("solve-fpke", &cfg, &[]);
    assert_eq!(r.status, 0, "stderr: {}", r.stderr);
    let summary = read(&r.out_dir, "fpke_summary.csv");
    assert!(summary.lines().count() > 2);
}

#[test]
fn quiet_suppresses_check_lines() {
    let r = run("solve-fpke", BASE, &["--quiet"]);
    assert_eq!(r.status, 0);
    assert!(!r.stdout.contains("[PASS]"), "stdout: {}", r.stdout);
}
