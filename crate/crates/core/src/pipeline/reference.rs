//! Published results of the physical polishing experiments. They come from
//! a real robot and are kept as documentation; simulated runs are compared
//! against them only qualitatively.

use serde::{Deserialize, Serialize};

/// Final training errors of both models on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingReference {
    pub pmdrnn: f64,
    pub pmnn: f64,
    /// Reported relative error reduction of PMDRNN over PMNN.
    pub reduction: f64,
}

impl TrainingReference {
    /// `1 − pmdrnn / pmnn`.
    pub fn implied_reduction(&self) -> f64 {
        1.0 - self.pmdrnn / self.pmnn
    }
}

/// Dataset with varied start and end points.
pub const VARIED_ENDPOINTS: TrainingReference = TrainingReference {
    pmdrnn: 0.025,
    pmnn: 0.16,
    reduction: 0.84,
};

/// Dataset with fixed start and end points.
pub const FIXED_ENDPOINTS: TrainingReference = TrainingReference {
    pmdrnn: 0.042,
    pmnn: 0.202,
    reduction: 0.79,
};

/// Force-tracking RMSE of the corrected skills, N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopReference {
    pub pmdrnn_full: f64,
    pub pmnn_full: f64,
    pub pmdrnn_prefix: f64,
    pub pmnn_prefix: f64,
    /// Prefix window, s.
    pub prefix: f64,
    /// Reported improvements of PMDRNN over PMNN, fraction.
    pub improvement_full: f64,
    pub improvement_prefix: f64,
    /// Band of the desired normal force, N.
    pub desired_band: [f64; 2],
}

pub const CLOSED_LOOP: ClosedLoopReference = ClosedLoopReference {
    pmdrnn_full: 1.47,
    pmnn_full: 1.83,
    pmdrnn_prefix: 1.51,
    pmnn_prefix: 2.14,
    prefix: 12.5,
    improvement_full: 0.197,
    improvement_prefix: 0.294,
    desired_band: [20.0, 25.0],
};
