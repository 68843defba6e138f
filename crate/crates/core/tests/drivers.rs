use std::path::Path;

use sparse_omm::experiments::{run_driver, Driver, ExperimentConfig, ProblemConfig, Report};
use sparse_omm::solvers::MuSchedule;

fn small(driver: Driver) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(driver);
    cfg.problem = ProblemConfig { n: 60, ..cfg.problem };
    cfg.solver.tol = cfg.solver.tol.max(1e-8);
    cfg.solver.max_iters = 20_000;
    cfg.trials = cfg.trials.min(4);
    cfg.l_supports = cfg.l_supports.iter().map(|l| (*l).min(3)).collect();
    if driver == Driver::MuSweep {
        cfg.alphas = vec![-100.0];
        cfg.mus = vec![2f64.powi(-6), 2f64.powi(-7)];
    }
    if driver == Driver::DynamicMu {
        cfg.mu_schedule = MuSchedule { pieces: vec![(0, 0.1), (20, 1.0), (60, 0.1)] };
    }
    cfg
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn every_driver_is_reproducible() {
    for driver in Driver::ALL {
        let cfg = small(driver);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let report = run_driver(driver, &cfg, a.path()).unwrap();
        run_driver(driver, &cfg, b.path()).unwrap();
        let stem = driver.stem();
        assert!(a.path().join(format!("{stem}.csv")).exists(), "{stem}");
        assert!(a.path().join(format!("{stem}.meta.json")).exists(), "{stem}");
        for f in &report.artifacts().files {
            assert!(f.exists(), "{}", f.display());
        }
        let (x, y) = (csv_bytes(a.path()), csv_bytes(b.path()));
        assert!(!x.is_empty());
        assert_eq!(x, y, "{stem} outputs differ between reruns");
    }
}

#[test]
fn ensemble_ignores_thread_count() {
    let mut cfg = small(Driver::LocalMinima);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cfg.threads = 1;
    run_driver(Driver::LocalMinima, &cfg, a.path()).unwrap();
    cfg.threads = 3;
    run_driver(Driver::LocalMinima, &cfg, b.path()).unwrap();
    assert_eq!(csv_bytes(a.path()), csv_bytes(b.path()));
}

#[test]
fn theory_suite_passes_on_a_small_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { trials: 5, ..ExperimentConfig::defaults(Driver::Theory) };
    let Report::Theory(report) = run_driver(Driver::Theory, &cfg, dir.path()).unwrap() else { unreachable!() };
    let failures: Vec<_> = report.failures().collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn meta_records_config_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Driver::IcDependence);
    run_driver(Driver::IcDependence, &cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("ic_dependence.meta.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(meta["experiment"], "ic-dependence");
    assert_eq!(meta["seeds"][0], 1);
    assert_eq!(meta["config"]["problem"]["n"], 60);
    assert!(meta["shifts"][0][1].as_f64().unwrap() > 0.0);
}
