mod common;

use smoothot::harness::{
    run, run_rate_experiment, run_sandwich_experiment, run_tradeoff_experiment, write_outputs, ExperimentConfig,
    ExperimentOutput, SCHEMA_VERSION,
};
use smoothot::Error;

#[test]
fn smoke_outputs_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    common::run_smoke_suite(dir.path());
    for name in common::SMOKE {
        let root = dir.path().join(name);
        let mut csv = csv::Reader::from_path(root.join("results.csv")).unwrap();
        let width = csv.headers().unwrap().len();
        let rows: Vec<_> = csv.records().map(|r| r.unwrap()).collect();
        assert!(!rows.is_empty(), "{name}");
        assert!(rows.iter().all(|r| r.len() == width), "{name}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema_version"], SCHEMA_VERSION);
        for entry in std::fs::read_dir(root.join("plotdata")).unwrap() {
            let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap().split('\t').count(), 2);
            for line in lines {
                let cols: Vec<f64> = line.split('\t').map(|v| v.parse().unwrap()).collect();
                assert!(cols.len() == 2 && cols.iter().all(|v| v.is_finite()));
            }
        }
        assert!(root.join("timings.csv").exists());
    }
}

#[test]
fn every_mean_carries_a_standard_error() {
    let r = run_rate_experiment(&common::smoke_config("rate")).unwrap();
    assert!(r.rows.iter().all(|row| row.reps >= 3 && row.se.is_finite() && row.se > 0.0));
    assert_eq!(r.fits.len(), 3);
}

#[test]
fn tradeoff_trends() {
    let r = run_tradeoff_experiment(&common::smoke_config("tradeoff")).unwrap();
    // gamma = 1 keeps the empirical pipeline: M = n
    assert_eq!(r.rows[0].m, r.n);
    for w in r.rows.windows(2) {
        let slack = 2.0 * w[0].precision_se.hypot(w[1].precision_se);
        assert!(w[1].precision <= w[0].precision + slack, "{:?}", r.rows);
        assert!(w[1].m > w[0].m);
    }
    assert!(r.work_fit.as_ref().unwrap().slope >= 1.5, "{:?}", r.work_fit);
}

#[test]
fn sandwich_rows_are_certified() {
    let r = run_sandwich_experiment(&common::smoke_config("sandwich")).unwrap();
    for row in &r.rows {
        let rec = &row.record;
        assert!(rec.besov_inf <= rec.besov_one + 1e-12);
        assert!(rec.exact <= rec.dyadic_ub + 1e-9);
        if let Some(lb) = rec.separated_lb {
            assert!(lb <= rec.exact + 1e-9);
        }
    }
    assert!(r.max_ratio_inf.unwrap().is_finite() && r.max_ratio_one.unwrap().is_finite());
}

#[test]
fn resource_errors_name_the_sample_size() {
    let cfg = ExperimentConfig::from_json(
        r#"{"experiment": "rate", "d": 2,
            "truth": {"kind": "uniform", "d": 2, "R": 6},
            "n_grid": [4, 2000], "estimators": ["empirical"], "replications": 3,
            "method": {"method": "exact_grid"}}"#,
    )
    .unwrap();
    match run(&cfg) {
        Err(Error::Resource(msg)) => assert!(msg.contains("n = 2000"), "{msg}"),
        other => panic!("expected a resource error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn notnorm_excludes_lambda_zero() {
    let err = ExperimentConfig::from_json(r#"{"experiment": "notnorm", "lambdas": [0.0, 0.5], "p_list": [2]}"#);
    assert!(err.is_err());
}

#[test]
fn outputs_land_in_the_requested_directory() {
    let cfg = common::smoke_config("notnorm");
    let out = run(&cfg).unwrap();
    assert!(matches!(out, ExperimentOutput::Notnorm(_)));
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/run");
    write_outputs(&out, &cfg, &target).unwrap();
    assert!(target.join("plotdata/notnorm_p2.tsv").exists());
}
