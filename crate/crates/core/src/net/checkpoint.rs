use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    grad_check, train, Dims, FeedbackState, GradCheckReport, Network, Normalizer, PmdrnnParams, PmnnParams,
    Sequence, TrainConfig, TrainOutcome, Wrench, INPUT_DIM,
};
use crate::dmp::{CouplingProvider, CouplingTerm};
use crate::error::{Error, Result};
use crate::math::PhaseState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pmdrnn,
    Pmnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Pmdrnn, ModelKind::Pmnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pmdrnn => "pmdrnn",
            ModelKind::Pmnn => "pmnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pmdrnn" => Ok(ModelKind::Pmdrnn),
            "pmnn" => Ok(ModelKind::Pmnn),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}' (expected pmdrnn or pmnn)"))),
        }
    }
}

/// Either feedback architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum FeedbackModel {
    Pmdrnn(PmdrnnParams),
    Pmnn(PmnnParams),
}

impl FeedbackModel {
    /// Fresh weights drawn from the configured seed.
    pub fn init(kind: ModelKind, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(match kind {
            ModelKind::Pmdrnn => FeedbackModel::Pmdrnn(PmdrnnParams::init(cfg.dims(), cfg.diagonal_recurrence, &mut rng)?),
            ModelKind::Pmnn => FeedbackModel::Pmnn(PmnnParams::init(cfg.dims(), &mut rng)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FeedbackModel::Pmdrnn(_) => ModelKind::Pmdrnn,
            FeedbackModel::Pmnn(_) => ModelKind::Pmnn,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            FeedbackModel::Pmdrnn(p) => p.dims(),
            FeedbackModel::Pmnn(p) => p.dims(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeedbackModel::Pmdrnn(p) => p.validate(),
            FeedbackModel::Pmnn(p) => p.validate(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            FeedbackModel::Pmdrnn(p) => p.parameter_count(),
            FeedbackModel::Pmnn(p) => p.parameter_count(),
        }
    }

    pub fn predict(&self, seq: &Sequence) -> Result<Vec<Vec<f64>>> {
        match self {
            FeedbackModel::Pmdrnn(p) => p.predict(seq),
            FeedbackModel::Pmnn(p) => p.predict(seq),
        }
    }

    /// One evaluation. The feedforward model ignores and preserves `state`
    /// apart from the output history.
    pub fn step(&self, df: &Wrench, state: &mut FeedbackState, phase: &PhaseState) -> Result<Vec<f64>> {
        let c = match self {
            FeedbackModel::Pmdrnn(p) => {
                let (c, next) = p.forward(df, state, phase)?;
                *state = next;
                return Ok(c);
            }
            FeedbackModel::Pmnn(p) => p.forward(df, phase),
        };
        state.c_prev2 = std::mem::replace(&mut state.c_prev1, c.clone());
        Ok(c)
    }

    pub fn train(self, data: &[Sequence], cfg: &TrainConfig) -> Result<TrainOutcome<FeedbackModel>> {
        Ok(match self {
            FeedbackModel::Pmdrnn(p) => wrap(train(p, data, cfg)?, FeedbackModel::Pmdrnn),
            FeedbackModel::Pmnn(p) => wrap(train(p, data, cfg)?, FeedbackModel::Pmnn),
        })
    }

    pub fn grad_check(&self, seq: &Sequence, eps: f64) -> Result<GradCheckReport> {
        match self {
            FeedbackModel::Pmdrnn(p) => grad_check(p, seq, eps),
            FeedbackModel::Pmnn(p) => grad_check(p, seq, eps),
        }
    }
}

fn wrap<N>(o: TrainOutcome<N>, f: impl FnOnce(N) -> FeedbackModel) -> TrainOutcome<FeedbackModel> {
    TrainOutcome {
        params: f(o.params),
        loss_curve: o.loss_curve,
        final_ssr: o.final_ssr,
    }
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "skilltune.feedback";

/// A trained model with the statistics needed to run it on raw signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: FeedbackModel,
    /// Applied to raw wrench errors.
    pub input_norm: Normalizer,
    /// Inverted on network outputs to get the coupling term.
    pub target_norm: Normalizer,
    pub train_config: TrainConfig,
    /// Seconds between network evaluations; the output is held in between.
    pub control_period: f64,
    /// Mean per-sequence SSR on the normalized training set.
    pub final_ssr: f64,
}

impl Checkpoint {
    pub fn new(
        model: FeedbackModel,
        input_norm: Normalizer,
        target_norm: Normalizer,
        train_config: TrainConfig,
        control_period: f64,
        final_ssr: f64,
    ) -> Result<Self> {
        let c = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_FORMAT_VERSION,
            model,
            input_norm,
            target_norm,
            train_config,
            control_period,
            final_ssr,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("not a feedback checkpoint: {}", self.format)));
        }
        if self.version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        self.model.validate()?;
        self.input_norm.validate()?;
        self.target_norm.validate()?;
        let d = self.model.dims().output;
        if self.input_norm.dim() != INPUT_DIM || self.target_norm.dim() != d {
            return Err(Error::Shape("normalizer dimensions do not match the model".into()));
        }
        if d != 3 && d != 6 {
            return Err(Error::Shape(format!("output dimension must be 3 or 6, got {d}")));
        }
        if !(self.control_period > 0.0) || !self.control_period.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid control period {}", self.control_period)));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Writes `epoch,loss` rows, epochs counted from 1.
pub fn write_loss_csv<W: Write>(w: W, curve: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "loss"])?;
    for (i, l) in curve.iter().enumerate() {
        out.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Runs a checkpoint as a coupling provider: wrench errors are normalized,
/// the network is evaluated every `control_period` and its de-normalized
/// output is held in between.
#[derive(Debug, Clone)]
pub struct FeedbackController {
    checkpoint: Checkpoint,
    state: FeedbackState,
    hold: CouplingTerm,
    steps_per_update: usize,
    counter: usize,
}

impl FeedbackController {
    /// `dt` is the period at which [`CouplingProvider::coupling`] is called.
    pub fn new(checkpoint: Checkpoint, dt: f64) -> Result<Self> {
        checkpoint.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidStep(dt));
        }
        let ratio = checkpoint.control_period / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "control period {} is not a multiple of the step {dt}",
                checkpoint.control_period
            )));
        }
        let state = FeedbackState::zeros(checkpoint.model.dims());
        Ok(FeedbackController {
            checkpoint,
            state,
            hold: CouplingTerm::zero(),
            steps_per_update: steps as usize,
            counter: 0,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    /// Evaluates the network once on a raw wrench error.
    pub fn evaluate(&mut self, wrench_error: &Wrench, phase: &PhaseState) -> Result<CouplingTerm> {
        let x = self.checkpoint.input_norm.apply(wrench_error);
        let mut input = [0.0; INPUT_DIM];
        input.copy_from_slice(&x);
        let y = self.checkpoint.model.step(&input, &mut self.state, phase)?;
        CouplingTerm::from_slice(&self.checkpoint.target_norm.invert(&y))
    }
}

impl CouplingProvider for FeedbackController {
    fn coupling(&mut self, wrench_error: &Wrench, phase: &PhaseState) -> CouplingTerm {
        if self.counter % self.steps_per_update == 0 {
            // Shapes were checked when the controller was built.
            self.hold = self.evaluate(wrench_error, phase).unwrap_or_default();
        }
        self.counter += 1;
        self.hold
    }

    fn reset(&mut self) {
        self.state = FeedbackState::zeros(self.checkpoint.model.dims());
        self.hold = CouplingTerm::zero();
        self.counter = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkpoint(kind: ModelKind) -> Checkpoint {
        let cfg = TrainConfig {
            seed: 11,
            ..Default::default()
        };
        Checkpoint::new(
            FeedbackModel::init(kind, &cfg).unwrap(),
            Normalizer::identity(6),
            Normalizer::rms(3, [[2.0, 1.0, 0.5].as_slice()]).unwrap(),
            cfg,
            0.1,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        for kind in ModelKind::ALL {
            let c = checkpoint(kind);
            let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut c = checkpoint(ModelKind::Pmnn);
        c.version = 99;
        let text = serde_json::to_string(&c).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Version { found: 99, .. })));
    }

    #[test]
    fn controller_holds_between_updates() {
        let mut ctl = FeedbackController::new(checkpoint(ModelKind::Pmdrnn), 0.02).unwrap();
        let ph = PhaseState::initial(4.6, 5.0);
        let first = ctl.coupling(&[1.0; 6], &ph);
        assert_ne!(first, CouplingTerm::zero());
        for _ in 0..4 {
            assert_eq!(ctl.coupling(&[-5.0; 6], &ph), first);
        }
        assert_ne!(ctl.coupling(&[-5.0; 6], &ph), first);
        ctl.reset();
        assert_eq!(ctl.coupling(&[1.0; 6], &ph), first);
        assert!(FeedbackController::new(checkpoint(ModelKind::Pmnn), 0.03).is_err());
    }

    #[test]
    fn loss_csv_rows() {
        let mut buf = Vec::new();
        write_loss_csv(&mut buf, &[0.5, 0.25]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("PMDRNN".parse::<ModelKind>().unwrap(), ModelKind::Pmdrnn);
        assert!("lstm".parse::<ModelKind>().is_err());
    }
}
