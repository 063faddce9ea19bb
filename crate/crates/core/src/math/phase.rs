use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay rate giving `s(τ) = 0.01` for the continuous system.
pub const DEFAULT_ALPHA_S: f64 = 2.0 * std::f64::consts::LN_10;

/// State of the first-order canonical system `τ ṡ = -α_s s`.
///
/// `u` always equals `ds/dt` for the stored `s` and `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    /// Phase in `(0, 1]`.
    pub s: f64,
    /// Phase velocity `ds/dt`, 1/s.
    pub u: f64,
    /// Temporal scaling, seconds.
    pub tau: f64,
}

impl PhaseState {
    /// Start of an episode: `s = 1`, `u = -α_s / τ`.
    pub fn initial(alpha_s: f64, tau: f64) -> Self {
        PhaseState {
            s: 1.0,
            u: -alpha_s / tau,
            tau,
        }
    }

    /// One explicit-Euler step of the canonical system.
    pub fn step(&self, alpha_s: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        let s = self.s * (1.0 - alpha_s * dt / self.tau);
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "canonical step dt = {dt} too large for alpha_s = {alpha_s}, tau = {}",
                self.tau
            )));
        }
        Ok(PhaseState {
            s,
            u: -alpha_s * s / self.tau,
            tau: self.tau,
        })
    }

    /// Phase samples at `t_k = k·dt`, `k = 0..n`.
    pub fn grid(alpha_s: f64, tau: f64, dt: f64, n: usize) -> Result<Vec<PhaseState>> {
        let mut out = Vec::with_capacity(n);
        let mut ph = PhaseState::initial(alpha_s, tau);
        for k in 0..n {
            if k > 0 {
                ph = ph.step(alpha_s, dt)?;
            }
            out.push(ph);
        }
        Ok(out)
    }

    /// Phase samples along arbitrary (strictly increasing) timestamps.
    pub fn along(alpha_s: f64, tau: f64, times: &[f64]) -> Result<Vec<PhaseState>> {
        let mut out = Vec::with_capacity(times.len());
        let mut ph = PhaseState::initial(alpha_s, tau);
        for (k, t) in times.iter().enumerate() {
            if k > 0 {
                ph = ph.step(alpha_s, t - times[k - 1])?;
            }
            out.push(ph);
        }
        Ok(out)
    }
}
