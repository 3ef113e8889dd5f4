use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graded_mechanics::csvio::Table;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn gmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmech")).args(args).output().expect("gmech runs")
}

fn run_config(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    gmech(&args)
}

fn read(path: &Path) -> Table {
    Table::read(File::open(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().into_iter().map(|v| v.unwrap()).collect()
}

#[test]
fn check_on_tangent3_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("check", &configs().join("tangent3.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn corrupted_structure_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    // ρ = identity with a constant bracket violates anchor compatibility.
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"algebroid": {"kind": "explicit", "n": 2, "rank": 2, "anchor": [[1, 0], [0, 1]],
            "structure": [[1, 2, 1, 0.5]]}, "order": 1, "lagrangian": "y1_1^2 + y1_2^2"}"#,
    );
    let out = run_config("check", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn mismatched_rank_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rank.json",
        r#"{"algebroid": {"kind": "lie_algebra", "rank": 2, "structure": "so3"},
            "order": 2, "lagrangian": "0.5*y2_1^2"}"#,
    );
    let out = run_config("check", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("algebroid.structure"));
}

#[test]
fn type_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.json",
        r#"{"algebroid": {"kind": "tangent", "n": 1}, "order": 1, "lagrangian": "y1_1^2",
            "simulation": {"t_end": "long", "step": 0.1}}"#,
    );
    let out = run_config("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.t_end"));
}

#[test]
fn so3_simulation_conserves_the_casimir() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("simulate", &configs().join("so3_free.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read(&dir.path().join("so3_free.csv"));
    let norm2: Vec<f64> = (0..t.rows.len())
        .map(|i| (1..=3).map(|a| column(&t, &format!("pi_2_{a}"))[i].powi(2)).sum())
        .collect();
    let last = norm2.len() - 1;
    assert!((norm2[last] - norm2[0]).abs() < 1e-8);
    let monitor = column(&t, "norm2_pi_2");
    assert!((monitor[last] - monitor[0]).abs() < 1e-8);
    assert!((monitor[last] - norm2[last]).abs() < 1e-12);
}

#[test]
fn identical_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (cmd, file) in [("simulate", "hamel_so3.csv"), ("legendre", "legendre.csv")] {
        for dir in [&a, &b] {
            let out = run_config(cmd, &configs().join("hamel_so3.json"), dir.path(), &["--seed", "7"]);
            assert_eq!(out.status.code(), Some(0));
        }
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn residual_read_back_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["t2r_quadratic", "lp_constant"] {
        let cfg = configs().join(format!("{name}.json"));
        assert_eq!(run_config("simulate", &cfg, dir.path(), &[]).status.code(), Some(0));
        assert_eq!(run_config("residual", &cfg, dir.path(), &[]).status.code(), Some(0));
        let run = read(&dir.path().join(format!("{name}.csv"))).column("el_residual").unwrap();
        let back = read(&dir.path().join("residual.csv")).column("el_residual").unwrap();
        let mut compared = 0;
        for (r, b) in run.iter().zip(&back) {
            if let (Some(r), Some(b)) = (r, b) {
                assert!((r - b).abs() < 1e-6, "{name}: {r} vs {b}");
                compared += 1;
            }
        }
        assert!(compared > 900, "{name}: only {compared} nodes compared");
    }
}

#[test]
fn momenta_read_back_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("javelin.json");
    assert_eq!(run_config("simulate", &cfg, dir.path(), &[]).status.code(), Some(0));
    assert_eq!(run_config("momenta", &cfg, dir.path(), &[]).status.code(), Some(0));
    let run = read(&dir.path().join("javelin.csv"));
    let back = read(&dir.path().join("momenta.csv"));
    for name in back.header.iter().skip(1) {
        for (r, b) in run.column(name).unwrap().iter().zip(back.column(name).unwrap()) {
            if let (Some(r), Some(b)) = (r, b) {
                assert!((r - b).abs() < 1e-6, "{name}: {r} vs {b}");
            }
        }
    }
}

#[test]
fn degenerate_lagrangian_exits_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "deg.json",
        r#"{"algebroid": {"kind": "tangent", "n": 1}, "order": 2, "lagrangian": "y1_1*y2_1",
            "simulation": {"t_end": 1, "step": 0.01, "x": [0], "y": [[0.1], [0.2]]}}"#,
    );
    let out = run_config("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Hessian"));
    let t = read(&dir.path().join("trajectory.csv"));
    assert_eq!(t.rows.len(), 1);
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("numerical_failure"));
}

#[test]
fn hamiltonian_oscillator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ham.json",
        r#"{"algebroid": {"kind": "tangent", "n": 1}, "order": 1,
            "hamiltonian": "0.5*theta_1^2 + 0.5*x1^2",
            "simulation": {"t_end": 1, "step": 0.001, "x": [1], "theta": [0]}}"#,
    );
    let out = run_config("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read(&dir.path().join("trajectory.csv"));
    let x = column(&t, "x_1");
    assert!((x.last().unwrap() - 1f64.cos()).abs() < 1e-10);
}

#[test]
fn convention_override_describes_the_same_motion() {
    let plain = tempfile::tempdir().unwrap();
    let homog = tempfile::tempdir().unwrap();
    let cfg = configs().join("so3_free.json");
    assert_eq!(run_config("simulate", &cfg, plain.path(), &[]).status.code(), Some(0));
    let out = run_config("simulate", &cfg, homog.path(), &["--convention", "homogeneous"]);
    assert_eq!(out.status.code(), Some(0));
    let p = read(&plain.path().join("so3_free.csv"));
    let h = read(&homog.path().join("so3_free.csv"));
    for a in 1..=3 {
        let (y1p, y1h) = (column(&p, &format!("y_1_{a}")), column(&h, &format!("y_1_{a}")));
        let (y2p, y2h) = (column(&p, &format!("y_2_{a}")), column(&h, &format!("y_2_{a}")));
        for i in (0..y1p.len()).step_by(500) {
            assert!((y1p[i] - y1h[i]).abs() < 1e-10);
            assert!((y2p[i] - 2.0 * y2h[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn legendre_on_the_javelin() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("legendre", &configs().join("javelin.json"), dir.path(), &["--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let t = read(&dir.path().join("legendre.csv"));
    let h = column(&t, "H");
    for (i, value) in h.iter().enumerate() {
        let sum: f64 = (1..=3)
            .map(|a| column(&t, &format!("y_1_{a}"))[i].powi(2) + column(&t, &format!("theta_{a}"))[i].powi(2))
            .sum();
        assert!((value + 0.5 * sum).abs() < 1e-12);
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(gmech(&["simulate"]).status.code(), Some(1));
    assert_eq!(gmech(&["--help"]).status.code(), Some(0));
}
