use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use attractlab::experiment::{run_experiment, ExperimentConfig, RunStatus, MANIFEST_NAME};
use attractlab::io::list_files;

fn config(kind: &str, dir: &Path) -> ExperimentConfig {
    let text = format!(
        r#"
kind = "{kind}"
output_dir = "{}"
[system]
model = "wave"
k = 1.0
l = 2.0
f_coeffs = [0.0, -1.0, 0.0, 1.0]
h_coeffs = [5.0]
mode_count = 8
dt = 1e-2
[[system.kernel]]
weight = 0.1
g = [1.0]
[ensemble]
count = 10
seed = 21
holdout = 5
[absorb]
probe_count = 4
burn_in = 10.0
window = 10.0
[grids]
t_end = 20.0
t_step = 0.5
m_range = [1, 2]
orbit_horizon = 10.0
closeness = 10.0
"#,
        dir.display()
    );
    ExperimentConfig::from_toml_str(&text, Path::new("pipeline.toml")).unwrap()
}

#[test]
fn identical_runs_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    for kind in ["wave_attractor", "criteria_suite", "quasistability"] {
        let a = root.path().join(format!("{kind}_a"));
        let b = root.path().join(format!("{kind}_b"));
        let ma = run_experiment(&config(kind, &a)).unwrap();
        let mb = run_experiment(&config(kind, &b)).unwrap();
        assert_eq!(ma.files, mb.files, "{kind}");
        for f in &ma.files {
            assert_eq!(fs::read(a.join(&f.path)).unwrap(), fs::read(b.join(&f.path)).unwrap());
        }
    }
}

#[test]
fn manifest_lists_every_output_file() {
    let root = tempfile::tempdir().unwrap();
    for kind in ["wave_attractor", "criteria_suite", "quasistability", "oracle_decay"] {
        let dir = root.path().join(kind);
        let manifest = run_experiment(&config(kind, &dir)).unwrap();
        assert_eq!(manifest.status, RunStatus::Ok);
        let listed: BTreeSet<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
        let on_disk: BTreeSet<String> = list_files(&dir)
            .unwrap()
            .into_iter()
            .map(|p| p.to_string_lossy().into_owned())
            .filter(|p| p != MANIFEST_NAME)
            .collect();
        assert_eq!(listed, on_disk, "{kind}");
        assert!(dir.join(MANIFEST_NAME).exists());
    }
}

#[test]
fn sweep_kind_writes_one_row_per_value() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = config("oracle_decay", root.path());
    cfg.kind = attractlab::experiment::ExperimentKind::SweepL;
    cfg.grids.l_values = vec![1.0, 2.0];
    let manifest = run_experiment(&cfg).unwrap();
    let table = fs::read_to_string(root.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("l,beta_hat,energy_rate,contraction_rate,satisfied_fraction,error"));
    assert_eq!(lines.count(), 2);
    assert_eq!(manifest.headlines["rows"], 2.0);
}
