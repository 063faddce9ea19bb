//! Shared fixtures for the benchmarks.

use skilltune_core::net::{random_case, Dims, FeedbackModel, ModelKind, Sequence};
use skilltune_core::pipeline::{nominal_run, ExperimentConfig};
use skilltune_core::sim::EpisodeTrace;
use skilltune_core::SkillModel;

/// Steps of one decimated training sequence in the shipped experiment.
pub const SEQUENCE_STEPS: usize = 126;

/// A default-width model with small random weights and a full-length sequence.
pub fn network_case(kind: ModelKind) -> (FeedbackModel, Sequence) {
    random_case(kind, Dims::default(), SEQUENCE_STEPS, 0.1, 1).expect("valid fixture")
}

/// The experiment config, the skill of the shipped evaluation sweep and
/// its nominal episode.
pub fn evaluation_skill() -> (ExperimentConfig, SkillModel, EpisodeTrace) {
    let cfg = ExperimentConfig::default();
    let ds = cfg.dataset(&cfg.evaluation.dataset).expect("evaluation dataset");
    let (skill, nominal) = nominal_run(&cfg.environment, &cfg.skill, &ds.groups[0], 0).expect("nominal run");
    (cfg, skill, nominal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let (m, seq) = network_case(ModelKind::Pmdrnn);
        assert_eq!(seq.inputs.len(), SEQUENCE_STEPS);
        assert_eq!(m.kind(), ModelKind::Pmdrnn);
        let (cfg, skill, nominal) = evaluation_skill();
        assert_eq!(skill.tau(), cfg.environment.duration);
        assert_eq!(nominal.record.len(), 1251);
    }
}
