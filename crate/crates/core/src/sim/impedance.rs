use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal Cartesian impedance `M ẍ + D ẋ + K (x - x_ref) = F_ext`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpedanceGains {
    /// Virtual mass, kg.
    pub mass: Vector3<f64>,
    /// Damping, N·s/m.
    pub damping: Vector3<f64>,
    /// Stiffness, N/m.
    pub stiffness: Vector3<f64>,
}

impl Default for ImpedanceGains {
    fn default() -> Self {
        ImpedanceGains {
            mass: Vector3::repeat(2.0),
            damping: Vector3::repeat(300.0),
            stiffness: Vector3::repeat(10_000.0),
        }
    }
}

impl ImpedanceGains {
    pub fn validate(&self) -> Result<()> {
        let all = self.mass.iter().chain(self.damping.iter()).chain(self.stiffness.iter());
        if all.clone().any(|v| !v.is_finite()) || all.clone().any(|v| *v <= 0.0) {
            return Err(Error::Config(format!("impedance gains must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImpedanceState {
    /// Tool position, m.
    pub x: Vector3<f64>,
    /// Tool velocity, m/s.
    pub v: Vector3<f64>,
}

/// One explicit-Euler step of the impedance dynamics.
pub fn impedance_step(
    gains: &ImpedanceGains,
    x_ref: &Vector3<f64>,
    f_ext: &Vector3<f64>,
    state: &ImpedanceState,
    dt: f64,
) -> Result<ImpedanceState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidStep(dt));
    }
    if x_ref.iter().chain(f_ext.iter()).chain(state.x.iter()).chain(state.v.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("impedance input"));
    }
    let spring = gains.stiffness.component_mul(&(state.x - x_ref));
    let acc = (f_ext - gains.damping.component_mul(&state.v) - spring).component_div(&gains.mass);
    Ok(ImpedanceState {
        x: state.x + dt * state.v,
        v: state.v + dt * acc,
    })
}
