use ctrlopt_harness::config::{Format, RunConfig};
use ctrlopt_harness::export::{read_trace, write_trace, TraceStats, SCALAR_COLUMNS};
use ctrlopt_harness::runner::execute;

fn config(problem: &str, algo: &str) -> RunConfig {
    RunConfig {
        problem: Some(problem.into()),
        algo: Some(algo.into()),
        dim: Some(4),
        max_iter: Some(200),
        ..Default::default()
    }
}

#[test]
fn csv_and_json_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for (problem, algo, clf) in [
        ("logistic_l2", "cd", None),
        ("random_spd_quadratic", "block_cd", None),
        ("diagonal_quadratic", "flow_max_principle", Some("inf_norm")),
        ("rosenbrock", "gradient", None),
    ] {
        let mut cfg = config(problem, algo);
        cfg.clf = clf.map(String::from);
        cfg.tf = Some(2.0);
        let outcome = execute(&cfg).unwrap();
        assert!(!outcome.trace.records.is_empty());
        for format in [Format::Csv, Format::Json] {
            let path = dir.path().join(format!("{problem}_{algo}.{}", format.extension()));
            write_trace(&path, format, &outcome.trace).unwrap();
            let back = read_trace(&path, format).unwrap();
            assert_eq!(back, outcome.trace, "{problem} {algo} {format:?}");
            let (a, b) = (TraceStats::of(&outcome.trace.records), TraceStats::of(&back.records));
            assert_eq!(a.max_abs_hamiltonian.to_bits(), b.max_abs_hamiltonian.to_bits());
            assert_eq!(a.total_dissipation.to_bits(), b.total_dissipation.to_bits());
            assert_eq!(a, b);
            assert_eq!(back.metadata.summary, outcome.trace.metadata.summary);
        }
    }
}

#[test]
fn run_from_the_minimizer_writes_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("diagonal_quadratic", "cd");
    cfg.x0 = Some(vec![0.0; 4]);
    let outcome = execute(&cfg).unwrap();
    assert!(outcome.trace.records.is_empty());
    assert_eq!(outcome.summary().iterations, 0);
    assert!(outcome.summary().converged);
    let path = dir.path().join("empty.csv");
    write_trace(&path, Format::Csv, &outcome.trace).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    let header: Vec<&str> = text.trim_end().split(',').collect();
    assert_eq!(header.len(), SCALAR_COLUMNS.len() + 8);
    assert!(dir.path().join("empty.csv.meta.json").exists());
    let back = read_trace(&path, Format::Csv).unwrap();
    assert_eq!(back, outcome.trace);
}

#[test]
fn every_record_carries_every_column() {
    let outcome = execute(&config("random_spd_quadratic", "sign_cd")).unwrap();
    let value = serde_json::to_value(&outcome.trace).unwrap();
    let records = value["records"].as_array().unwrap();
    assert!(!records.is_empty());
    for r in records {
        for key in SCALAR_COLUMNS.iter().chain(["x", "u"].iter()) {
            assert!(r.get(*key).is_some_and(|v| !v.is_null()), "{key}");
        }
    }
}

#[test]
fn metadata_reproduces_the_run() {
    let outcome = execute(&config("logistic_l2", "gradient")).unwrap();
    let again = execute(&outcome.trace.metadata.config).unwrap();
    assert_eq!(again.trace, outcome.trace);
}
