use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::surface::WorkpieceSurface;
use crate::error::{Error, Result};
use crate::net::Wrench;

/// Below this tangential speed (m/s) friction ramps linearly to zero.
pub const SLIDING_REGULARIZATION: f64 = 1e-4;

/// Point contact between the polishing wheel and the workpiece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    /// Normal stiffness, N/m.
    pub k_n: f64,
    /// Normal damping while approaching, N·s/m.
    pub d_n: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Extra friction coefficient per 1000 rpm of spindle speed.
    pub spin_gain: f64,
    /// Spindle speed, rev/min.
    pub spindle_rpm: f64,
    /// Wheel radius, m.
    pub wheel_radius: f64,
    /// Spindle axis in world coordinates; need not be normalized.
    pub spin_axis: Vector3<f64>,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            k_n: 20_000.0,
            d_n: 50.0,
            mu: 0.3,
            spin_gain: 0.1,
            spindle_rpm: 2000.0,
            wheel_radius: 0.0125,
            spin_axis: Vector3::y(),
        }
    }
}

impl ContactConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k_n > 0.0
            && self.d_n >= 0.0
            && self.mu >= 0.0
            && self.spin_gain >= 0.0
            && self.spindle_rpm >= 0.0
            && self.wheel_radius > 0.0;
        let finite = [self.k_n, self.d_n, self.mu, self.spin_gain, self.spindle_rpm, self.wheel_radius]
            .iter()
            .chain(self.spin_axis.iter())
            .all(|v| v.is_finite());
        if !ok || !finite || self.spin_axis.norm() < 1e-12 {
            return Err(Error::Config(format!("invalid contact parameters: {self:?}")));
        }
        Ok(())
    }

    /// Effective tangential coefficient `mu + spin_gain · rpm / 1000`.
    pub fn friction_coefficient(&self) -> f64 {
        self.mu + self.spin_gain * self.spindle_rpm / 1000.0
    }
}

/// Wrench exerted by the workpiece on the tool, expressed at the wheel
/// center (a wheel radius above the contact point along the normal).
/// Friction opposes the sliding velocity of the wheel rim at the contact
/// point: tool velocity plus the spindle rotation.
pub fn contact_force(
    position: &Vector3<f64>,
    velocity: &Vector3<f64>,
    surface: &WorkpieceSurface,
    cfg: &ContactConfig,
) -> Wrench {
    let sp = surface.query(position);
    let depth = -sp.distance;
    if depth <= 0.0 {
        return [0.0; 6];
    }
    let approach = (-velocity.dot(&sp.rate_axis)).max(0.0);
    let fn_mag = cfg.k_n * depth + cfg.d_n * approach;
    let n = sp.normal;
    let f_n = n * fn_mag;

    let lever = -cfg.wheel_radius * n;
    let omega = cfg.spin_axis.normalize() * (cfg.spindle_rpm * std::f64::consts::TAU / 60.0);
    let v_c = velocity + omega.cross(&lever);
    let v_t = v_c - n * v_c.dot(&n);
    let speed = v_t.norm();
    let f_t = if speed > 0.0 {
        let ramp = (speed / SLIDING_REGULARIZATION).min(1.0);
        -v_t / speed * (cfg.friction_coefficient() * fn_mag * ramp)
    } else {
        Vector3::zeros()
    };
    let force = f_n + f_t;
    let torque = lever.cross(&f_t);
    [force.x, force.y, force.z, torque.x, torque.y, torque.z]
}
