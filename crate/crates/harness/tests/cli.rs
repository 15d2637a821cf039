use std::path::Path;
use std::process::{Command, Output};

use ctrlopt_harness::config::Format;
use ctrlopt_harness::export::read_trace;

fn ctrlopt(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrlopt"))
        .args(args)
        .env("CTRLOPT_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

#[test]
fn run_converges_and_prints_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctrlopt(
        &["run", "--problem", "diagonal_quadratic", "--algo", "cd", "--alpha", "0.2", "--x0", "1,1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("converged=true"), "{stdout}");
    let trace = read_trace(&dir.path().join("diagonal_quadratic_cd.csv"), Format::Csv).unwrap();
    assert!(trace.metadata.summary.converged);
    assert!(trace.metadata.summary.final_grad_inf < 1e-8);
}

#[test]
fn newton_flow_trace_has_zero_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.json");
    let out = ctrlopt(
        &[
            "run",
            "--problem",
            "diagonal_quadratic",
            "--algo",
            "flow_newton",
            "--format",
            "json",
            "--output",
            path.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let trace = read_trace(&path, Format::Json).unwrap();
    assert!(trace.records.len() > 100);
    for r in &trace.records {
        let lambda_norm = r.x.iter().map(|v| v * v).sum::<f64>().sqrt() * 64.0;
        let u_norm = r.u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r.hamiltonian.abs() <= 1e-12 * (1.0 + lambda_norm * u_norm));
    }
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(
        &file,
        "problem = \"diagonal_quadratic\"\nalgo = \"gradient\"\nx0 = [1.0, -1.0]\nformat = \"json\"\n",
    )
    .unwrap();
    let out = ctrlopt(&["run", "--config", file.to_str().unwrap(), "--algo", "newton"], dir.path());
    assert!(out.status.success());
    let trace = read_trace(&dir.path().join("diagonal_quadratic_newton.json"), Format::Json).unwrap();
    assert_eq!(trace.metadata.algorithm, "newton");
    assert_eq!(trace.metadata.summary.iterations, 1);
}

#[test]
fn invalid_configurations_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--algo", "cd"],
        vec!["run", "--problem", "no_such_problem"],
        vec!["run", "--problem", "rosenbrock", "--algo", "simplex"],
        vec!["run", "--problem", "rosenbrock", "--alpha", "-1"],
        vec!["run", "--problem", "rosenbrock", "--alpha", "abc"],
        vec!["run", "--problem", "rosenbrock", "--x0", "1,2", "--dim", "3"],
        vec!["sweep", "--format", "xml"],
    ] {
        let out = ctrlopt(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn degenerate_runs_exit_with_3_and_keep_their_trace() {
    let dir = tempfile::tempdir().unwrap();
    // Rosenbrock's Hessian is indefinite away from the valley, so the
    // Hessian-metric controller breaks down part-way.
    let out = ctrlopt(
        &["run", "--problem", "rosenbrock", "--dim", "8", "--algo", "flow_max_principle", "--clf", "max_squares"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    let path = dir.path().join("rosenbrock_flow_max_principle_max_squares.csv");
    let trace = read_trace(&path, Format::Csv).unwrap();
    assert!(!trace.records.is_empty());
    assert_eq!(trace.metadata.summary.stop, "degenerate");
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctrlopt(&["check", "--points", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
