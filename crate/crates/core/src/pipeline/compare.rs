use serde::{Deserialize, Serialize};

use super::pairs::TrainingSet;
use super::reference::{TrainingReference, FIXED_ENDPOINTS, VARIED_ENDPOINTS};
use crate::error::Result;
use crate::net::{Checkpoint, FeedbackModel, ModelKind, TrainConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// A trained checkpoint and the loss seen during each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub checkpoint: Checkpoint,
    pub loss_curve: Vec<f64>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.checkpoint.kind()
    }

    pub fn seed(&self) -> u64 {
        self.checkpoint.train_config.seed
    }
}

/// Trains one model on a normalized training set. `control_period` is the
/// spacing of the training samples, s.
pub fn train_model(kind: ModelKind, set: &TrainingSet, cfg: &TrainConfig, control_period: f64) -> Result<TrainedModel> {
    let outcome = FeedbackModel::init(kind, cfg)?.train(&set.sequences, cfg)?;
    let checkpoint = Checkpoint::new(
        outcome.params,
        set.input_norm.clone(),
        set.target_norm.clone(),
        cfg.clone(),
        control_period,
        outcome.final_ssr,
    )?;
    Ok(TrainedModel {
        checkpoint,
        loss_curve: outcome.loss_curve,
    })
}

/// Reference training errors shown in every comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceHeader {
    pub varied_endpoints: TrainingReference,
    pub fixed_endpoints: TrainingReference,
}

impl Default for ReferenceHeader {
    fn default() -> Self {
        ReferenceHeader {
            varied_endpoints: VARIED_ENDPOINTS,
            fixed_endpoints: FIXED_ENDPOINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: ModelKind,
    pub seed: u64,
    pub epochs: usize,
    /// Mean per-sequence SSR during the first epoch.
    pub initial_ssr: f64,
    /// Mean per-sequence SSR of the trained model on the normalized set.
    pub final_ssr: f64,
    /// Loss curve CSV, relative to the report.
    pub curve_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub version: u32,
    pub dataset: String,
    pub reference: ReferenceHeader,
    pub train: TrainConfig,
    pub sequences: usize,
    pub rows: Vec<ComparisonRow>,
    /// Seeds on which PMDRNN ends below PMNN.
    pub pmdrnn_better: usize,
    pub seeds: usize,
    /// Mean over seeds of `1 − SSR_pmdrnn / SSR_pmnn`.
    pub mean_reduction: f64,
}

impl ComparisonReport {
    pub fn final_ssr(&self, model: ModelKind, seed: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model && r.seed == seed).map(|r| r.final_ssr)
    }
}

pub fn curve_file_name(dataset: &str, model: ModelKind, seed: u64) -> String {
    format!("curves/{dataset}_{model}_seed{seed}.csv")
}

/// Trains PMDRNN and PMNN on the same data for every seed.
pub fn compare_models(
    dataset: &str,
    set: &TrainingSet,
    cfg: &TrainConfig,
    seeds: &[u64],
    control_period: f64,
) -> Result<(ComparisonReport, Vec<TrainedModel>)> {
    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut better = 0;
    let mut reduction = 0.0;
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..cfg.clone() };
        let mut finals = [0.0; 2];
        for (i, kind) in [ModelKind::Pmdrnn, ModelKind::Pmnn].into_iter().enumerate() {
            let m = train_model(kind, set, &cfg, control_period)?;
            log::info!("{dataset}: {kind} seed {seed} final SSR {:.4}", m.checkpoint.final_ssr);
            finals[i] = m.checkpoint.final_ssr;
            rows.push(ComparisonRow {
                model: kind,
                seed,
                epochs: cfg.epochs,
                initial_ssr: m.loss_curve.first().copied().unwrap_or(f64::NAN),
                final_ssr: m.checkpoint.final_ssr,
                curve_file: curve_file_name(dataset, kind, seed),
            });
            models.push(m);
        }
        if finals[0] < finals[1] {
            better += 1;
        }
        reduction += 1.0 - finals[0] / finals[1];
    }
    let report = ComparisonReport {
        version: REPORT_FORMAT_VERSION,
        dataset: dataset.to_owned(),
        reference: ReferenceHeader::default(),
        train: cfg.clone(),
        sequences: set.sequences.len(),
        rows,
        pmdrnn_better: better,
        seeds: seeds.len(),
        mean_reduction: reduction / seeds.len().max(1) as f64,
    };
    Ok((report, models))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PhaseState;
    use crate::net::Sequence;

    fn toy_set() -> TrainingSet {
        let phases = PhaseState::grid(crate::math::DEFAULT_ALPHA_S, 2.0, 0.2, 10).unwrap();
        let raw: Vec<Sequence> = (0..3)
            .map(|i| Sequence {
                inputs: (0..10).map(|k| [(k + i) as f64, 0.0, 1.0, 0.0, 0.0, 0.5]).collect(),
                phases: phases.clone(),
                targets: (0..10).map(|k| vec![0.0, 0.1 * k as f64, i as f64]).collect(),
            })
            .collect();
        TrainingSet::new(&raw).unwrap()
    }

    #[test]
    fn report_lists_both_models_per_seed() {
        let cfg = TrainConfig {
            epochs: 3,
            hidden: 4,
            phase_bases: 3,
            ..Default::default()
        };
        let (report, models) = compare_models("toy", &toy_set(), &cfg, &[1, 2], 0.2).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(models.len(), 4);
        assert_eq!(report.reference.varied_endpoints.pmdrnn, 0.025);
        assert_eq!(report.reference.fixed_endpoints.pmnn, 0.202);
        assert_eq!(report.rows[2].model, ModelKind::Pmdrnn);
        assert_eq!(report.rows[2].seed, 2);
        assert_eq!(report.rows[3].curve_file, "curves/toy_pmnn_seed2.csv");
        assert_eq!(models[3].seed(), 2);
        assert_eq!(models[3].loss_curve.len(), 3);
        assert_eq!(report.final_ssr(ModelKind::Pmnn, 2), Some(models[3].checkpoint.final_ssr));
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<ComparisonReport>(&json).unwrap(), report);
    }
}
