use serde::{Deserialize, Serialize};

use super::config::PairConfig;
use crate::dmp::PositionDmp;
use crate::error::{Error, Result};
use crate::math::{PhaseState, DEFAULT_ALPHA_S};
use crate::net::{Normalizer, Sequence, Wrench, INPUT_DIM};
use crate::record::{EpisodeRecord, SPACING_TOLERANCE};

fn check_aligned(a: &EpisodeRecord, b: &EpisodeRecord, what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Misaligned(format!("{what}: {} vs {} samples", a.len(), b.len())));
    }
    if let Some((k, (x, y))) = a
        .rows
        .iter()
        .zip(&b.rows)
        .enumerate()
        .find(|(_, (x, y))| (x.t - y.t).abs() > SPACING_TOLERANCE)
    {
        return Err(Error::Misaligned(format!("{what}: row {k} at t = {} vs {}", x.t, y.t)));
    }
    Ok(())
}

/// Coupling term that turns the DMP fitted to `nominal` into the one fitted
/// to `corrected`, sampled on the nominal phase grid: the forcing-term
/// difference plus the change of the goal attraction `αβ(g_c − g_n)`.
pub fn coupling_targets(
    nominal: &EpisodeRecord,
    corrected: &EpisodeRecord,
    basis_count: usize,
    alpha: f64,
) -> Result<(Vec<PhaseState>, Vec<[f64; 3]>)> {
    check_aligned(nominal, corrected, "nominal and corrected episodes")?;
    let times = nominal.times();
    let a = PositionDmp::fit(&times, &nominal.positions(), basis_count, alpha, DEFAULT_ALPHA_S)?;
    let b = PositionDmp::fit(&times, &corrected.positions(), basis_count, alpha, DEFAULT_ALPHA_S)?;
    let phases = PhaseState::along(DEFAULT_ALPHA_S, a.tau(), &times)?;
    let goal = (b.goal() - a.goal()) * (a.alpha() * a.beta());
    let targets = phases
        .iter()
        .map(|ph| {
            let c = b.forcing(ph.s) - a.forcing(ph.s) + goal;
            [c.x, c.y, c.z]
        })
        .collect();
    Ok((phases, targets))
}

/// One training sequence: wrench error `perturbed − nominal` as input and
/// the nominal-to-corrected coupling term as target, every
/// `cfg.decimation`-th sample.
pub fn build_training_pairs(
    nominal: &EpisodeRecord,
    perturbed: &EpisodeRecord,
    corrected: &EpisodeRecord,
    cfg: &PairConfig,
    alpha: f64,
) -> Result<Sequence> {
    cfg.validate()?;
    check_aligned(nominal, perturbed, "nominal and perturbed episodes")?;
    let (phases, targets) = coupling_targets(nominal, corrected, cfg.basis_count, alpha)?;
    let keep: Vec<usize> = (0..nominal.len()).step_by(cfg.decimation).collect();
    let error = |k: usize| -> Wrench {
        let (p, n) = (&perturbed.rows[k].f, &nominal.rows[k].f);
        std::array::from_fn(|j| p[j] - n[j])
    };
    let seq = Sequence {
        inputs: keep.iter().map(|&k| error(k)).collect(),
        phases: keep.iter().map(|&k| phases[k]).collect(),
        targets: keep.iter().map(|&k| targets[k].to_vec()).collect(),
    };
    seq.validate(3)?;
    Ok(seq)
}

/// Normalized sequences with the statistics needed to undo the scaling.
/// Inputs are z-scored per channel. Targets are divided by their per-channel
/// RMS without centering, so a zero network output stays a zero coupling
/// term and the phase gate keeps its meaning after de-normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub sequences: Vec<Sequence>,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
}

impl TrainingSet {
    pub fn new(raw: &[Sequence]) -> Result<Self> {
        let output = raw
            .first()
            .and_then(|s| s.targets.first())
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
        for s in raw {
            s.validate(output)?;
        }
        let input_norm = Normalizer::z_score(INPUT_DIM, raw.iter().flat_map(|s| s.inputs.iter().map(|x| x.as_slice())))?;
        let target_norm = Normalizer::rms(output, raw.iter().flat_map(|s| s.targets.iter().map(Vec::as_slice)))?;
        let sequences = raw
            .iter()
            .map(|s| Sequence {
                inputs: s
                    .inputs
                    .iter()
                    .map(|x| {
                        let v = input_norm.apply(x);
                        std::array::from_fn(|j| v[j])
                    })
                    .collect(),
                phases: s.phases.clone(),
                targets: s.targets.iter().map(|y| target_norm.apply(y)).collect(),
            })
            .collect();
        Ok(TrainingSet {
            sequences,
            input_norm,
            target_norm,
        })
    }
}
