use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::fit::{check_demo_times, differentiate, regress_weights};
use super::Modulation;
use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis};

/// Cartesian position DMP:
///
/// ```text
/// τ ż = α (β (g - p) - z) + f(s) + C + η
/// τ ṗ = z
/// f(s) = Σ w_i Ψ_i(s) / Σ Ψ_i(s) · s
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionDmp {
    alpha: f64,
    beta: f64,
    goal: Vector3<f64>,
    start: Vector3<f64>,
    tau: f64,
    basis: RbfBasis,
    weights: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionState {
    /// Position, m.
    pub p: Vector3<f64>,
    /// Scaled velocity `τ ṗ`, m/s.
    pub z: Vector3<f64>,
}

impl PositionDmp {
    pub fn new(
        alpha: f64,
        goal: Vector3<f64>,
        start: Vector3<f64>,
        tau: f64,
        basis: RbfBasis,
        weights: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let dmp = PositionDmp {
            alpha,
            beta: alpha / 4.0,
            goal,
            start,
            tau,
            basis,
            weights,
        };
        dmp.validate()?;
        Ok(dmp)
    }

    /// A DMP that holds `p` for `tau` seconds.
    pub fn constant(p: Vector3<f64>, tau: f64, basis_count: usize, alpha: f64) -> Result<Self> {
        let basis = RbfBasis::new(basis_count)?;
        PositionDmp::new(alpha, p, p, tau, basis, vec![Vector3::zeros(); basis_count])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.beta != self.alpha / 4.0 {
            return Err(Error::InvalidArgument(format!(
                "position gains must satisfy alpha > 0, beta = alpha/4 (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.weights.len() != self.basis.len() {
            return Err(Error::LengthMismatch(self.basis.len(), self.weights.len()));
        }
        if self.goal.iter().chain(self.start.iter()).any(|v| !v.is_finite())
            || self.weights.iter().flat_map(|w| w.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("position DMP parameters"));
        }
        Ok(())
    }

    /// Fits a DMP to a demonstrated position trajectory. `τ` is the demo
    /// duration, start and goal are the first and last samples.
    pub fn fit(
        times: &[f64],
        positions: &[Vector3<f64>],
        basis_count: usize,
        alpha: f64,
        alpha_s: f64,
    ) -> Result<Self> {
        check_demo_times(times)?;
        if positions.len() != times.len() {
            return Err(Error::LengthMismatch(times.len(), positions.len()));
        }
        let basis = RbfBasis::new(basis_count)?;
        let tau = times[times.len() - 1] - times[0];
        let start = positions[0];
        let goal = positions[positions.len() - 1];
        let beta = alpha / 4.0;

        let vel = differentiate(times, positions);
        let acc = differentiate(times, &vel);
        let rel: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
        let phases = PhaseState::along(alpha_s, tau, &rel)?;
        let targets: Vec<Vector3<f64>> = positions
            .iter()
            .zip(&vel)
            .zip(&acc)
            .map(|((p, v), a)| tau * tau * a - alpha * (beta * (goal - p) - tau * v))
            .collect();
        let weights = regress_weights(&basis, &phases, &targets, &Vector3::repeat(1.0))?;
        PositionDmp::new(alpha, goal, start, tau, basis, weights)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn goal(&self) -> Vector3<f64> {
        self.goal
    }

    pub fn start(&self) -> Vector3<f64> {
        self.start
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn basis(&self) -> &RbfBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[Vector3<f64>] {
        &self.weights
    }

    pub fn with_goal(mut self, goal: Vector3<f64>) -> Self {
        self.goal = goal;
        self
    }

    pub fn with_start(mut self, start: Vector3<f64>) -> Self {
        self.start = start;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    /// `f(s)`.
    pub fn forcing(&self, s: f64) -> Vector3<f64> {
        self.forcing_with_offset(s, None)
    }

    /// `f(s)` evaluated with `w + offset` as weights.
    pub fn forcing_with_offset(&self, s: f64, offset: Option<&[Vector3<f64>]>) -> Vector3<f64> {
        let psi = self.basis.eval(s);
        let mut acc = Vector3::zeros();
        for (i, (p, w)) in psi.iter().zip(&self.weights).enumerate() {
            let w = match offset {
                Some(o) => w + o[i],
                None => *w,
            };
            acc += w * *p;
        }
        acc * s
    }

    pub fn initial_state(&self) -> PositionState {
        PositionState {
            p: self.start,
            z: Vector3::zeros(),
        }
    }

    /// One explicit-Euler step of the transformation system.
    pub fn step(
        &self,
        state: &PositionState,
        phase: &PhaseState,
        modulation: &Modulation,
        dt: f64,
    ) -> Result<PositionState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        if let Some(o) = &modulation.forcing_weight_offset {
            if o.len() != self.weights.len() {
                return Err(Error::LengthMismatch(self.weights.len(), o.len()));
            }
        }
        let f = self.forcing_with_offset(phase.s, modulation.forcing_weight_offset.as_deref());
        let zdot = (self.alpha * (self.beta * (self.goal - state.p) - state.z)
            + f
            + modulation.coupling.position
            + modulation.action_offset)
            / self.tau;
        let pdot = state.z / self.tau;
        let next = PositionState {
            p: state.p + dt * pdot,
            z: state.z + dt * zdot,
        };
        if next.p.iter().chain(next.z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("position DMP state"));
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmp::CouplingTerm;
    use crate::math::DEFAULT_ALPHA_S;
    use approx::assert_abs_diff_eq;

    fn dmp_with_weights(w: Vec<Vector3<f64>>) -> PositionDmp {
        let basis = RbfBasis::new(w.len()).unwrap();
        PositionDmp::new(25.0, Vector3::new(0.1, 0.0, 0.0), Vector3::zeros(), 1.0, basis, w).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_forcing() {
        let d = dmp_with_weights(vec![Vector3::zeros(); 25]);
        for i in 0..=10 {
            assert_eq!(d.forcing(i as f64 / 10.0), Vector3::zeros());
        }
    }

    #[test]
    fn forcing_vanishes_at_zero_phase() {
        let w = (0..25).map(|i| Vector3::new(i as f64, -3.0, 7.5)).collect();
        let d = dmp_with_weights(w);
        assert_eq!(d.forcing(0.0), Vector3::zeros());
    }

    #[test]
    fn constant_weights_give_k_times_s() {
        let k = 2.5;
        let d = dmp_with_weights(vec![Vector3::repeat(k); 25]);
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            let f = d.forcing(s);
            for a in 0..3 {
                assert_abs_diff_eq!(f[a], k * s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn beta_is_quarter_alpha() {
        let d = dmp_with_weights(vec![Vector3::zeros(); 5]);
        assert_eq!(d.beta(), d.alpha() / 4.0);
    }

    #[test]
    fn coupling_changes_acceleration_by_c_over_tau() {
        let d = dmp_with_weights(vec![Vector3::repeat(1.0); 10]).with_tau(2.0).unwrap();
        let st = d.initial_state();
        let ph = PhaseState::initial(DEFAULT_ALPHA_S, 2.0);
        let c = 0.7;
        let dt = 0.02;
        let base = d.step(&st, &ph, &Modulation::default(), dt).unwrap();
        let m = Modulation {
            coupling: CouplingTerm::position(Vector3::new(c, 0.0, 0.0)),
            ..Default::default()
        };
        let pushed = d.step(&st, &ph, &m, dt).unwrap();
        let zdot_diff = (pushed.z - base.z) / dt;
        assert_abs_diff_eq!(zdot_diff.x, c / 2.0, epsilon = 1e-12);
        assert_eq!(zdot_diff.y, 0.0);
        assert_eq!(pushed.p, base.p);
    }

    #[test]
    fn modulation_hooks_are_additive() {
        let d = dmp_with_weights(vec![Vector3::zeros(); 10]);
        let st = d.initial_state();
        let ph = PhaseState::initial(DEFAULT_ALPHA_S, 1.0);
        let eta = Vector3::new(0.0, 0.3, 0.0);
        let action = Modulation {
            action_offset: eta,
            ..Default::default()
        };
        let forcing = Modulation {
            forcing_weight_offset: Some(vec![eta; 10]),
            ..Default::default()
        };
        let a = d.step(&st, &ph, &action, 0.01).unwrap();
        let f = d.step(&st, &ph, &forcing, 0.01).unwrap();
        // Constant weight offset η at s = 1 adds η · s = η to the forcing term.
        assert_abs_diff_eq!(a.z.y, f.z.y, epsilon = 1e-14);
        let bad = Modulation {
            forcing_weight_offset: Some(vec![eta; 3]),
            ..Default::default()
        };
        assert!(d.step(&st, &ph, &bad, 0.01).is_err());
    }

    #[test]
    fn rejects_bad_step_and_params() {
        let d = dmp_with_weights(vec![Vector3::zeros(); 4]);
        let ph = PhaseState::initial(DEFAULT_ALPHA_S, 1.0);
        assert!(d.step(&d.initial_state(), &ph, &Modulation::default(), 0.0).is_err());
        let basis = RbfBasis::new(4).unwrap();
        assert!(PositionDmp::new(25.0, Vector3::zeros(), Vector3::zeros(), 0.0, basis.clone(), vec![Vector3::zeros(); 4]).is_err());
        assert!(PositionDmp::new(25.0, Vector3::zeros(), Vector3::zeros(), 1.0, basis, vec![Vector3::zeros(); 3]).is_err());
        let nan = PositionState {
            p: Vector3::new(f64::NAN, 0.0, 0.0),
            z: Vector3::zeros(),
        };
        assert!(matches!(
            d.step(&nan, &ph, &Modulation::default(), 0.01),
            Err(Error::NonFinite(_))
        ));
    }
}
