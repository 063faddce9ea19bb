use std::path::{Path, PathBuf};

use skilltune_core::pipeline::ExperimentConfig;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_experiment_config_equals_defaults() {
    let cfg = ExperimentConfig::load(&config_path("experiment.toml")).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn demo_config_has_one_nominal_and_five_perturbed_runs() {
    let cfg = ExperimentConfig::load(&config_path("demo.toml")).unwrap();
    assert_eq!(cfg.datasets.len(), 1);
    assert_eq!(cfg.datasets[0].groups.len(), 1);
    assert_eq!(cfg.datasets[0].groups[0].perturbations.len(), 5);
    assert_eq!(cfg.seeds, vec![0]);
}

#[test]
fn missing_config_error_names_the_path() {
    let path = config_path("does-not-exist.toml");
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("does-not-exist.toml"), "{err}");
}
