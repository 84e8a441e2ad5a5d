use std::collections::BTreeSet;
use std::path::Path;

use ladderloc::experiment::{run, ExperimentConfig, RunManifest, RunOptions, Stage, StageStatus};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn files_on_disk(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != "manifest.json")
        .collect()
}

fn assert_manifest_complete(m: &RunManifest, dir: &Path) {
    let listed: Vec<&str> = m.artifacts().collect();
    let unique: BTreeSet<String> = listed.iter().map(|s| s.to_string()).collect();
    assert_eq!(unique.len(), listed.len(), "artifact listed twice: {listed:?}");
    assert_eq!(unique, files_on_disk(dir));
}

#[test]
fn minimal_free_stark_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("half_widths = [50]\n[kernel]\nfamily = \"nearest_neighbor\"\n[asymptotics]\n");
    let m = run(&cfg, &RunOptions::all(dir.path())).unwrap();
    assert_eq!(m.stage(Stage::Asymptotics).unwrap().status, StageStatus::Completed);
    assert_eq!(m.theorem_checks.len(), 1);
    assert!(m.theorem_checks[0].pass);
    assert_eq!(m.exit_code(), 0);
    assert_manifest_complete(&m, dir.path());
    assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
    let csv = std::fs::read_to_string(dir.path().join("asymptotics.csv")).unwrap();
    assert!(csv.starts_with("half_width,index,eigenvalue,deviation,bound\n"));
}

#[test]
fn single_box_ule_reports_no_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "half_widths = [60]\n[kernel]\nfamily = \"power_law\"\nexponent = 4.0\n[ule]\nalphas = [3.0]\n",
    );
    let m = run(&cfg, &RunOptions::all(dir.path())).unwrap();
    assert_eq!(m.stage(Stage::Ule).unwrap().status, StageStatus::Completed);
    assert!(matches!(m.stage(Stage::Study).unwrap().status, StageStatus::Skipped { .. }));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ule.json")).unwrap()).unwrap();
    assert_eq!(json[0]["doubling_drift"], "n/a");
}

#[test]
fn maryland_refuses_asymptotics_but_still_evolves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
        half_widths = [40]
        [kernel]
        family = "nearest_neighbor"
        [potential.field]
        kind = "maryland"
        coupling = 1.0
        frequency = 0.6180339887498949
        phase = 0.1
        [tolerances]
        window = 10
        [asymptotics]
        [dynamics]
        sources = [0]
        moments = [2.0]
        [dynamics.time_grid]
        step = 0.5
        horizon = 20.0
        long_time_samples = 5
        long_time_horizon = 1000.0
        "#,
    );
    let m = run(&cfg, &RunOptions::all(dir.path())).unwrap();
    match &m.stage(Stage::Asymptotics).unwrap().status {
        StageStatus::Failed { cause } => assert!(cause.contains("Maryland"), "{cause}"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(m.stage(Stage::Dynamics).unwrap().status, StageStatus::Completed);
    assert_eq!(m.exit_code(), 2);
    assert!(dir.path().join("moments_q2_k0.csv").exists());
    assert_manifest_complete(&m, dir.path());
}

const FULL: &str = r#"
    seed = 5
    half_widths = [30, 60]
    [kernel]
    family = "power_law"
    exponent = 4.0
    [potential.perturbation]
    kind = "uniform_random"
    amplitude = 0.5
    [tolerances]
    window = 8
    [asymptotics]
    [ule]
    alphas = [3.0]
    [bootstrap]
    [dynamics]
    sources = [0, 2]
    moments = [1.0, 2.5]
    [dynamics.time_grid]
    step = 0.25
    horizon = 50.0
    long_time_samples = 10
    long_time_horizon = 10000.0
"#;

#[test]
fn full_run_is_deterministic_and_resumable() {
    let cfg = config(FULL);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&cfg, &RunOptions::all(a.path())).unwrap();
    let mb = run(&cfg, &RunOptions::all(b.path())).unwrap();
    assert_manifest_complete(&ma, a.path());
    assert!(ma.stages.iter().all(|s| !matches!(s.status, StageStatus::Failed { .. })), "{:?}", ma.stages);
    for name in ma.artifacts().filter(|f| f.ends_with(".csv") || f.ends_with(".bin")) {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    assert_eq!(ma.config_hash, mb.config_hash);

    let again = run(&cfg, &RunOptions::all(a.path())).unwrap();
    assert_eq!(again.stage(Stage::Spectrum).unwrap().status, StageStatus::Resumed);
    assert_eq!(
        std::fs::read(a.path().join("ule.csv")).unwrap(),
        std::fs::read(b.path().join("ule.csv")).unwrap()
    );

    let mut other = cfg.clone();
    other.seed = 6;
    let fresh = run(&other, &RunOptions::all(a.path())).unwrap();
    assert_eq!(fresh.stage(Stage::Spectrum).unwrap().status, StageStatus::Completed);
}

#[test]
fn report_requires_dumps() {
    let cfg = config(FULL);
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { require_dumps: true, ..RunOptions::all(dir.path()) };
    let m = run(&cfg, &opts).unwrap();
    assert!(matches!(m.stage(Stage::Spectrum).unwrap().status, StageStatus::Failed { .. }));
    assert!(m
        .stages
        .iter()
        .filter(|s| s.stage != Stage::Spectrum)
        .all(|s| matches!(s.status, StageStatus::Skipped { .. })));
}

#[test]
fn stage_selection_limits_work() {
    let cfg = config(FULL);
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { stages: [Stage::Spectrum].into_iter().collect(), ..RunOptions::all(dir.path()) };
    let m = run(&cfg, &opts).unwrap();
    assert!(m.stages.iter().filter(|s| s.stage != Stage::Spectrum).all(|s| s.status == StageStatus::Disabled));
    assert_manifest_complete(&m, dir.path());
}
