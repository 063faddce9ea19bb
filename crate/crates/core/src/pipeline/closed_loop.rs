use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::nominal_run;
use super::reference::{ClosedLoopReference, CLOSED_LOOP};
use crate::dmp::{CouplingProvider, NoCoupling, SkillModel};
use crate::error::{Error, Result};
use crate::net::{Checkpoint, FeedbackController, ModelKind, Wrench};
use crate::sim::{force_rmse, run_episode, EnvPerturbation, EpisodeInputs, EpisodeSettings, EpisodeTrace, Scenario};

/// Force-tracking errors of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub label: String,
    /// `None` for the run without feedback.
    pub model: Option<ModelKind>,
    pub seed: Option<u64>,
    /// Normal-force RMSE over the whole episode, N.
    pub rmse_full: f64,
    /// Normal-force RMSE over the prefix window, N.
    pub rmse_prefix: f64,
    /// `1 − rmse_full / baseline`; zero for the baseline itself.
    pub reduction_full: f64,
    pub reduction_prefix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopReport {
    pub version: u32,
    pub reference: ClosedLoopReference,
    pub perturbation: EnvPerturbation,
    pub prefix: f64,
    /// Range of the desired normal force while sweeping, N.
    pub desired_range: Option<[f64; 2]>,
    pub baseline: TrackingResult,
    pub runs: Vec<TrackingResult>,
}

impl ClosedLoopReport {
    pub fn run(&self, model: ModelKind, seed: u64) -> Option<&TrackingResult> {
        self.runs.iter().find(|r| r.model == Some(model) && r.seed == Some(seed))
    }
}

/// Noise-free normal force of every run, for plots and CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTraces {
    pub time: Vec<f64>,
    pub desired: Vec<f64>,
    /// Label and force per run, baseline first.
    pub runs: Vec<(String, Vec<f64>)>,
}

/// A trained model entered into the closed-loop comparison.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub label: &'a str,
    pub checkpoint: &'a Checkpoint,
}

/// Runs the skill in `scenario` without feedback and with each candidate
/// closing the loop. Candidates see the measured wrench minus `expected`;
/// tracking is scored on the noise-free normal force against `desired`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_closed_loop(
    skill: &SkillModel,
    candidates: &[Candidate<'_>],
    scenario: &Scenario,
    settings: &EpisodeSettings,
    duration: f64,
    expected: &[Wrench],
    desired: &[Wrench],
    prefix: f64,
) -> Result<(ClosedLoopReport, ForceTraces)> {
    if expected.len() != desired.len() {
        return Err(Error::LengthMismatch(expected.len(), desired.len()));
    }
    if !(prefix > 0.0) {
        return Err(Error::InvalidArgument(format!("prefix window must be positive, got {prefix}")));
    }
    let n = desired.len();
    let prefix_len = (((prefix / settings.dt).round() as usize) + 1).min(n);
    let inputs = EpisodeInputs {
        expected: Some(expected),
        reference_offset: None,
    };
    let run = |provider: &mut dyn CouplingProvider| run_episode(skill, provider, scenario, settings, duration, inputs);
    let score = |trace: &EpisodeTrace| -> Result<(f64, f64)> {
        Ok((force_rmse(&trace.clean, desired, 0..n)?, force_rmse(&trace.clean, desired, 0..prefix_len)?))
    };

    let base_trace = run(&mut NoCoupling)?;
    let (b_full, b_prefix) = score(&base_trace)?;
    let baseline = TrackingResult {
        label: "no feedback".into(),
        model: None,
        seed: None,
        rmse_full: b_full,
        rmse_prefix: b_prefix,
        reduction_full: 0.0,
        reduction_prefix: 0.0,
    };
    let fz = |t: &EpisodeTrace| t.clean.iter().map(|w| w[2]).collect::<Vec<_>>();
    let mut traces = ForceTraces {
        time: base_trace.record.times(),
        desired: desired.iter().map(|w| w[2]).collect(),
        runs: vec![(baseline.label.clone(), fz(&base_trace))],
    };
    let mut runs = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut controller = FeedbackController::new(c.checkpoint.clone(), settings.dt)?;
        let trace = run(&mut controller)?;
        let (full, pre) = score(&trace)?;
        traces.runs.push((c.label.to_owned(), fz(&trace)));
        runs.push(TrackingResult {
            label: c.label.to_owned(),
            model: Some(c.checkpoint.kind()),
            seed: Some(c.checkpoint.train_config.seed),
            rmse_full: full,
            rmse_prefix: pre,
            reduction_full: 1.0 - full / b_full,
            reduction_prefix: 1.0 - pre / b_prefix,
        });
    }
    let report = ClosedLoopReport {
        version: super::compare::REPORT_FORMAT_VERSION,
        reference: CLOSED_LOOP,
        perturbation: scenario.perturbation.clone(),
        prefix,
        desired_range: None,
        baseline,
        runs,
    };
    Ok((report, traces))
}

/// The configured evaluation: the evaluation group's skill, its nominal
/// run as the desired profile and the evaluation perturbation.
pub fn evaluate_experiment(cfg: &ExperimentConfig, candidates: &[Candidate<'_>]) -> Result<(ClosedLoopReport, ForceTraces)> {
    cfg.validate()?;
    let ev = &cfg.evaluation;
    let dataset = cfg.dataset(&ev.dataset)?;
    let index = dataset
        .groups
        .iter()
        .position(|g| g.name == ev.group)
        .ok_or_else(|| Error::Config(format!("no group {}", ev.group)))?;
    let group = &dataset.groups[index];
    let env = &cfg.environment;
    let (skill, nominal) = nominal_run(env, &cfg.skill, group, index)?;
    let scenario = env.scenario()?.with_perturbation(ev.perturbation.clone());
    let settings = EpisodeSettings {
        seed: ev.seed,
        ..env.settings.clone()
    };
    let (mut report, traces) = evaluate_closed_loop(
        &skill,
        candidates,
        &scenario,
        &settings,
        env.duration,
        &nominal.record.wrenches(),
        &nominal.clean,
        ev.prefix,
    )?;
    let sweep = &group.sweep;
    let window = traces
        .time
        .iter()
        .zip(&traces.desired)
        .filter(|(t, _)| **t >= sweep.approach_time && **t <= sweep.duration - sweep.end_hold)
        .map(|(_, f)| *f);
    report.desired_range = window.fold(None, |acc: Option<[f64; 2]>, f| match acc {
        None => Some([f, f]),
        Some([lo, hi]) => Some([lo.min(f), hi.max(f)]),
    });
    Ok((report, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{FeedbackModel, Normalizer, TrainConfig};

    fn zero_checkpoint(kind: ModelKind) -> Checkpoint {
        let cfg = TrainConfig {
            hidden: 3,
            phase_bases: 2,
            ..Default::default()
        };
        let mut model = FeedbackModel::init(kind, &cfg).unwrap();
        match &mut model {
            FeedbackModel::Pmdrnn(p) => p.w_c.data_mut().iter_mut().for_each(|v| *v = 0.0),
            FeedbackModel::Pmnn(p) => p.w_c.data_mut().iter_mut().for_each(|v| *v = 0.0),
        }
        Checkpoint::new(model, Normalizer::identity(6), Normalizer::identity(3), cfg, 0.2, 0.0).unwrap()
    }

    #[test]
    fn baseline_and_zero_output_models_match() {
        let mut cfg = ExperimentConfig::default();
        cfg.environment.duration = 8.0;
        for d in &mut cfg.datasets {
            for g in &mut d.groups {
                g.sweep.duration = 8.0;
            }
        }
        let ck = zero_checkpoint(ModelKind::Pmdrnn);
        let (report, traces) = evaluate_experiment(&cfg, &[Candidate { label: "zero", checkpoint: &ck }]).unwrap();
        assert!(report.baseline.rmse_full > 2.0, "{:?}", report.baseline);
        assert_eq!(report.runs[0].rmse_full, report.baseline.rmse_full);
        assert_eq!(report.runs[0].reduction_full, 0.0);
        assert_eq!(traces.runs.len(), 2);
        assert_eq!(traces.time.len(), 401);
        let [lo, hi] = report.desired_range.unwrap();
        assert!(lo > 15.0 && hi < 30.0, "{lo} {hi}");
        assert_eq!(report.reference.pmdrnn_full, 1.47);
        assert_eq!(report.run(ModelKind::Pmdrnn, 0).unwrap().label, "zero");
    }
}
