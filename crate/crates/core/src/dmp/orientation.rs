use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::fit::{check_demo_times, differentiate, regress_weights};
use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis, UnitQuaternion};

/// Orientation DMP in quaternion error coordinates:
///
/// ```text
/// τ ṙ   = -α (β e_Q + r) + D₀ ∘ f(s) + C
/// τ ė_Q = r
/// e_Q   = 2 log(q_g * q̄)
/// ```
///
/// `D₀ = 2 log(q_g * q̄₀)` scales the forcing term per axis, so the forcing
/// term is inert along axes the demonstration never rotates about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationDmp {
    alpha: f64,
    beta: f64,
    goal: UnitQuaternion,
    start: UnitQuaternion,
    tau: f64,
    basis: RbfBasis,
    weights: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    pub q: UnitQuaternion,
    /// Scaled error rate `τ ė_Q`, rad/s.
    pub r: Vector3<f64>,
}

/// `2 log(goal * q̄)`.
pub fn orientation_error(goal: &UnitQuaternion, q: &UnitQuaternion) -> Vector3<f64> {
    2.0 * goal.mul(&q.conjugate()).log()
}

impl OrientationDmp {
    pub fn new(
        alpha: f64,
        goal: UnitQuaternion,
        start: UnitQuaternion,
        tau: f64,
        basis: RbfBasis,
        weights: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let dmp = OrientationDmp {
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

    /// A DMP that holds `q` for `tau` seconds.
    pub fn constant(q: UnitQuaternion, tau: f64, basis_count: usize, alpha: f64) -> Result<Self> {
        let basis = RbfBasis::new(basis_count)?;
        OrientationDmp::new(alpha, q, q, tau, basis, vec![Vector3::zeros(); basis_count])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.beta != self.alpha / 4.0 {
            return Err(Error::InvalidArgument(format!(
                "orientation gains must satisfy alpha > 0, beta = alpha/4 (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.weights.len() != self.basis.len() {
            return Err(Error::LengthMismatch(self.basis.len(), self.weights.len()));
        }
        if self.weights.iter().flat_map(|w| w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("orientation DMP weights"));
        }
        Ok(())
    }

    pub fn fit(
        times: &[f64],
        orientations: &[UnitQuaternion],
        basis_count: usize,
        alpha: f64,
        alpha_s: f64,
    ) -> Result<Self> {
        check_demo_times(times)?;
        if orientations.len() != times.len() {
            return Err(Error::LengthMismatch(times.len(), orientations.len()));
        }
        let basis = RbfBasis::new(basis_count)?;
        let tau = times[times.len() - 1] - times[0];
        let start = orientations[0];
        let goal = orientations[orientations.len() - 1];
        let beta = alpha / 4.0;

        let errors: Vec<Vector3<f64>> = orientations
            .iter()
            .map(|q| orientation_error(&goal, q))
            .collect();
        let d_err = differentiate(times, &errors);
        let dd_err = differentiate(times, &d_err);
        let rel: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
        let phases = PhaseState::along(alpha_s, tau, &rel)?;
        let targets: Vec<Vector3<f64>> = errors
            .iter()
            .zip(&d_err)
            .zip(&dd_err)
            .map(|((e, de), dde)| tau * tau * dde + alpha * (beta * e + tau * de))
            .collect();
        let scale = orientation_error(&goal, &start);
        let weights = regress_weights(&basis, &phases, &targets, &scale)?;
        OrientationDmp::new(alpha, goal, start, tau, basis, weights)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn goal(&self) -> UnitQuaternion {
        self.goal
    }

    pub fn start(&self) -> UnitQuaternion {
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

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    /// Per-axis scaling `D₀ = 2 log(q_g * q̄₀)`.
    pub fn forcing_scale(&self) -> Vector3<f64> {
        orientation_error(&self.goal, &self.start)
    }

    /// Unscaled forcing term `f(s)`.
    pub fn forcing(&self, s: f64) -> Vector3<f64> {
        let psi = self.basis.eval(s);
        psi.iter()
            .zip(&self.weights)
            .map(|(p, w)| w * *p)
            .sum::<Vector3<f64>>()
            * s
    }

    pub fn initial_state(&self) -> OrientationState {
        OrientationState {
            q: self.start,
            r: Vector3::zeros(),
        }
    }

    pub fn step(
        &self,
        state: &OrientationState,
        phase: &PhaseState,
        coupling: &Vector3<f64>,
        dt: f64,
    ) -> Result<OrientationState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        let e = orientation_error(&self.goal, &state.q);
        let f = self.forcing_scale().component_mul(&self.forcing(phase.s));
        let rdot = (-self.alpha * (self.beta * e + state.r) + f + coupling) / self.tau;
        let edot = state.r / self.tau;
        let e_next = e + dt * edot;
        let r_next = state.r + dt * rdot;
        if e_next.iter().chain(r_next.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("orientation DMP state"));
        }
        // q = exp(-e/2) * q_g inverts e = 2 log(q_g * q̄).
        let q = UnitQuaternion::exp(&(-0.5 * e_next)).mul(&self.goal);
        Ok(OrientationState { q, r: r_next })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::DEFAULT_ALPHA_S;

    #[test]
    fn at_goal_with_zero_rate_nothing_moves() {
        let g = UnitQuaternion::from_axis_angle(&Vector3::new(0.2, 1.0, -0.4), 0.9);
        let s = UnitQuaternion::from_axis_angle(&Vector3::x(), 0.3);
        let basis = RbfBasis::new(10).unwrap();
        let d = OrientationDmp::new(25.0, g, s, 1.0, basis, vec![Vector3::zeros(); 10]).unwrap();
        let st = OrientationState {
            q: g,
            r: Vector3::zeros(),
        };
        assert_eq!(orientation_error(&g, &g), Vector3::zeros());
        let ph = PhaseState::initial(DEFAULT_ALPHA_S, 1.0);
        let next = d.step(&st, &ph, &Vector3::zeros(), 0.02).unwrap();
        assert_eq!(next.r, Vector3::zeros());
        assert!(next.q.angle_to(&g) < 1e-15);
    }

    #[test]
    fn error_points_from_current_to_goal() {
        let g = UnitQuaternion::from_axis_angle(&Vector3::z(), 0.5);
        let e = orientation_error(&g, &UnitQuaternion::IDENTITY);
        assert!((e - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn zero_scale_axes_carry_no_forcing() {
        let g = UnitQuaternion::from_axis_angle(&Vector3::z(), 1.0);
        let basis = RbfBasis::new(6).unwrap();
        let d = OrientationDmp::new(25.0, g, UnitQuaternion::IDENTITY, 1.0, basis, vec![Vector3::repeat(3.0); 6]).unwrap();
        let f = d.forcing_scale().component_mul(&d.forcing(0.7));
        assert_eq!(f.x, 0.0);
        assert_eq!(f.y, 0.0);
        assert!(f.z != 0.0);
    }
}
