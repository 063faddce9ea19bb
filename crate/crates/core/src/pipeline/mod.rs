//! Dataset recording, training-pair extraction, the model comparison and
//! the closed-loop force-tracking evaluation.
//!
//! A dataset consists of groups. Each group fits one skill to a polishing
//! sweep, runs it in the nominal environment (the expected force), under
//! several perturbations (the force error) and under the same
//! perturbations with an iteratively corrected reference (the corrected
//! skill). Training pairs map the force error to the coupling term that
//! turns the nominal skill into the corrected one.

mod closed_loop;
mod compare;
mod config;
mod dataset;
mod pairs;
pub mod reference;
mod report;
pub mod svg;

pub use closed_loop::{evaluate_closed_loop, evaluate_experiment, Candidate, ClosedLoopReport, ForceTraces, TrackingResult};
pub use compare::{
    compare_models, curve_file_name, train_model, ComparisonReport, ComparisonRow, ReferenceHeader, TrainedModel,
    REPORT_FORMAT_VERSION,
};
pub use config::{
    CorrectionConfig, DatasetSpec, EnvironmentSpec, EvaluationSpec, ExperimentConfig, GroupSpec, PairConfig, EXPERIMENT_CLIP,
    RippleSpec, SkillSpec, SurfaceSpec,
};
pub use dataset::{
    correct_reference, nominal_run, record_dataset, record_group, Correction, DatasetManifest, DatasetRecording,
    EpisodeEntry, GroupEntry, GroupRecording, LoadedDataset, LoadedGroup, PerturbedEpisode, DATASET_FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use pairs::{build_training_pairs, coupling_targets, TrainingSet};
pub use report::{checkpoint_file_name, write_closed_loop, write_comparison};

use crate::error::Result;

/// A recorded dataset with both models trained on it for every seed.
#[derive(Debug, Clone)]
pub struct DatasetComparison {
    pub recording: DatasetRecording,
    pub set: TrainingSet,
    pub report: ComparisonReport,
    pub models: Vec<TrainedModel>,
}

/// Normalized training pairs of a recorded dataset.
pub fn training_set(cfg: &ExperimentConfig, recording: &DatasetRecording) -> Result<TrainingSet> {
    TrainingSet::new(&recording.pairs(&cfg.pairs, cfg.skill.alpha)?)
}

/// Records `dataset` and trains both models on it for every configured seed.
pub fn run_comparison(cfg: &ExperimentConfig, dataset: &DatasetSpec) -> Result<DatasetComparison> {
    cfg.validate()?;
    let recording = record_dataset(cfg, dataset)?;
    let set = training_set(cfg, &recording)?;
    let (report, models) = compare_models(&dataset.name, &set, &cfg.train, &cfg.seeds, cfg.control_period())?;
    Ok(DatasetComparison {
        recording,
        set,
        report,
        models,
    })
}

/// Label of a trained model in closed-loop reports.
pub fn model_label(model: &TrainedModel) -> String {
    format!("{} seed {}", model.kind(), model.seed())
}

/// Closed-loop evaluation of every model in `comparison`.
pub fn evaluate_models(cfg: &ExperimentConfig, models: &[TrainedModel]) -> Result<(ClosedLoopReport, ForceTraces)> {
    let labels: Vec<String> = models.iter().map(model_label).collect();
    let candidates: Vec<Candidate<'_>> = models
        .iter()
        .zip(&labels)
        .map(|(m, l)| Candidate {
            label: l,
            checkpoint: &m.checkpoint,
        })
        .collect();
    evaluate_experiment(cfg, &candidates)
}

/// Both comparisons and the closed-loop evaluation of the models trained
/// on the evaluation dataset.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub comparisons: Vec<DatasetComparison>,
    pub closed_loop: ClosedLoopReport,
    pub traces: ForceTraces,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let comparisons = cfg
        .datasets
        .iter()
        .map(|d| run_comparison(cfg, d))
        .collect::<Result<Vec<_>>>()?;
    let eval = comparisons
        .iter()
        .find(|c| c.report.dataset == cfg.evaluation.dataset)
        .expect("evaluation dataset checked by validate");
    let (closed_loop, traces) = evaluate_models(cfg, &eval.models)?;
    Ok(ExperimentOutcome {
        comparisons,
        closed_loop,
        traces,
    })
}
