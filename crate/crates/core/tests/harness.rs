use std::path::Path;
use std::process::Command;

use cdspec::harness::{self, ExperimentConfig, ExperimentKind, MatrixFamily};

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seed = 11;
    c.stability.radii = vec![16.0];
    c.stability.q = vec![0.5, 1.0, f64::INFINITY];
    c.stability.starts = 40;
    c.inverse.radii = vec![16.0, 24.0];
    c.gabor.step = 1.0 / 8.0;
    c.gabor.radius = 4.0;
    c.gabor.steps = vec![1.0 / 8.0];
    c.gabor.radii = vec![4.0];
    c.gabor.hermite = 3;
    c
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap()
}

#[test]
fn every_experiment_writes_its_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    for kind in [
        ExperimentKind::Stability,
        ExperimentKind::InvertMatrix,
        ExperimentKind::Gabor,
        ExperimentKind::Almostdiag,
        ExperimentKind::InvertWeyl,
        ExperimentKind::Framesymbol,
    ] {
        let dir = tmp.path().join(kind.name());
        let s = harness::run(kind, &cfg, &dir, 1).unwrap();
        assert_eq!(s.exit_code, 0, "{}: {:?}", kind.name(), s.failure);
        let m = manifest(&dir);
        assert_eq!(m["status"], "ok");
        assert_eq!(m["seed"], 11);
        let header = read(&dir.join("results.csv")).lines().next().unwrap().to_string();
        let cols: Vec<&str> = m["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
        assert_eq!(header, cols.join(","));
        assert!(read(&dir.join("results.csv")).lines().count() > 1, "{}", kind.name());
        let cert: serde_json::Value = serde_json::from_str(&read(&dir.join("certificate.json"))).unwrap();
        assert!(!cert["records"].as_array().unwrap().is_empty());
    }
    assert!(tmp.path().join("invert-weyl/symbol_b.csv").exists());
    assert!(tmp.path().join("gabor/dual_window.csv").exists());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    harness::run(ExperimentKind::Stability, &cfg, &a, 1).unwrap();
    rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| harness::run(ExperimentKind::Stability, &cfg, &b, 4).unwrap());
    assert_eq!(read(&a.join("results.csv")), read(&b.join("results.csv")));
}

#[test]
fn slowly_decaying_matrix_fails_the_epsilon_search() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.matrix.family = MatrixFamily::ToeplitzPower;
    cfg.matrix.coupling = 0.45;
    cfg.matrix.decay = 1.05;
    cfg.stability.radii = vec![64.0];
    cfg.stability.q = vec![1.0];
    cfg.tolerances.eps_floor = 1.0 / 64.0;
    let s = harness::run(ExperimentKind::Stability, &cfg, tmp.path(), 1).unwrap();
    assert_eq!(s.exit_code, 3);
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "failed");
    assert_eq!(m["failure"]["kind"], "epsilon_search_failed");
    assert!(m["failure"]["best_budget"].as_f64().unwrap() > 0.5);
    assert!(!m["failure"]["budget_trace"].as_array().unwrap().is_empty());
    // Header is still written.
    assert!(read(&tmp.path().join("results.csv")).starts_with("radius,"));
}

#[test]
fn mismatched_experiment_is_a_config_error() {
    let mut cfg = small();
    cfg.experiment = Some(ExperimentKind::Gabor);
    let tmp = tempfile::tempdir().unwrap();
    let e = harness::run(ExperimentKind::Stability, &cfg, tmp.path(), 1).unwrap_err();
    assert_eq!(harness::exit_code(&e), 2);
}

#[test]
fn cli_runs_from_a_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gabor.toml");
    std::fs::write(
        &cfg,
        "experiment = \"gabor\"\nseed = 3\n[gabor]\nstep = 0.125\nradius = 4.0\nhermite = 2\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let st = Command::new(env!("CARGO_BIN_EXE_cdspec"))
        .args(["gabor", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(manifest(&out)["threads"], 2);

    std::fs::write(&cfg, "nonsense = true\n").unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_cdspec")).args(["gabor", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
}
