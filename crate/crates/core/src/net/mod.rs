//! Phase-modulated feedback networks mapping wrench error to a DMP
//! coupling term.
//!
//! [`PmdrnnParams`] is the recurrent model: a tanh input layer fed with the
//! wrench error and the two previous outputs, a GRU layer, one sigmoid
//! hidden layer, a phase-modulated layer and a linear output layer.
//! [`PmnnParams`] is the feedforward baseline with three sigmoid hidden
//! layers. Both are trained on the sum of squared residuals with
//! hand-written backpropagation (through time for the recurrent model).

mod checkpoint;
mod gradcheck;
mod loss;
mod matrix;
mod norm;
mod pmdrnn;
mod pmnn;
mod train;

use serde::{Deserialize, Serialize};

pub use checkpoint::{write_loss_csv, Checkpoint, FeedbackController, FeedbackModel, ModelKind, CHECKPOINT_FORMAT_VERSION};
pub use gradcheck::{grad_check, random_case, GradCheckReport, GRADCHECK_FLOOR};
pub use loss::loss_ssr;
pub use matrix::Matrix;
pub use norm::Normalizer;
pub use pmdrnn::PmdrnnParams;
pub use pmnn::PmnnParams;
pub use train::{mean_ssr, train, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis};

/// Force (N) then torque (N·m).
pub type Wrench = [f64; 6];

pub const INPUT_DIM: usize = 6;
pub const DEFAULT_HIDDEN: usize = 20;
pub const DEFAULT_OUTPUT: usize = 3;
pub const DEFAULT_PHASE_BASES: usize = 25;

/// Layer widths shared by both architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub hidden: usize,
    pub output: usize,
    pub phase_bases: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            hidden: DEFAULT_HIDDEN,
            output: DEFAULT_OUTPUT,
            phase_bases: DEFAULT_PHASE_BASES,
        }
    }
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.output == 0 || self.phase_bases == 0 {
            return Err(Error::Shape(format!("layer widths must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Recurrent state carried between calls of the recurrent model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackState {
    pub h: Vec<f64>,
    /// `C_{t-1}`
    pub c_prev1: Vec<f64>,
    /// `C_{t-2}`
    pub c_prev2: Vec<f64>,
}

impl FeedbackState {
    pub fn zeros(dims: Dims) -> Self {
        FeedbackState {
            h: vec![0.0; dims.hidden],
            c_prev1: vec![0.0; dims.output],
            c_prev2: vec![0.0; dims.output],
        }
    }
}

/// One training sequence: inputs, phases and targets, aligned per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub inputs: Vec<Wrench>,
    pub phases: Vec<PhaseState>,
    pub targets: Vec<Vec<f64>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn validate(&self, output: usize) -> Result<()> {
        if self.phases.len() != self.inputs.len() {
            return Err(Error::LengthMismatch(self.inputs.len(), self.phases.len()));
        }
        if self.targets.len() != self.inputs.len() {
            return Err(Error::LengthMismatch(self.inputs.len(), self.targets.len()));
        }
        if let Some(t) = self.targets.iter().find(|t| t.len() != output) {
            return Err(Error::Shape(format!(
                "target dimension {} does not match output dimension {output}",
                t.len()
            )));
        }
        let finite = self.inputs.iter().flatten().all(|v| v.is_finite())
            && self.targets.iter().flatten().all(|v| v.is_finite())
            && self.phases.iter().all(|p| p.s.is_finite() && p.u.is_finite());
        if !finite {
            return Err(Error::NonFinite("training sequence"));
        }
        Ok(())
    }
}

/// Basis of the phase-modulated layer. A single function is constant 1
/// after normalization.
pub(crate) fn phase_basis(n: usize) -> Result<RbfBasis> {
    if n == 1 {
        RbfBasis::from_parts(vec![1.0], vec![1.0])
    } else {
        RbfBasis::new(n)
    }
}

/// Phase gate `G_i = ψ̃_i(s) · u`.
pub(crate) fn phase_gate(basis: &RbfBasis, phase: &PhaseState, out: &mut [f64]) {
    basis.eval_into(phase.s, out);
    for g in out.iter_mut() {
        *g *= phase.u;
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Common interface of the trainable feedback networks.
pub trait Network: Clone + Send + Sync {
    fn dims(&self) -> Dims;

    /// Outputs for a whole sequence starting from a zero state.
    fn predict(&self, seq: &Sequence) -> Result<Vec<Vec<f64>>>;

    /// Adds the gradient of the sequence SSR to `grad` and returns the SSR.
    fn accumulate_gradient(&self, seq: &Sequence, grad: &mut Self) -> Result<f64>;

    /// Same architecture with every parameter zero.
    fn zeros_like(&self) -> Self;

    /// Named flat views of every parameter tensor, in a fixed order.
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    /// Restricts an update direction to the admissible parameter set.
    fn project_gradient(&self, _grad: &mut Self) {}

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}
