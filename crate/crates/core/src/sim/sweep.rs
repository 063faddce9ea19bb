use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::surface::WorkpieceSurface;
use crate::error::{Error, Result};
use crate::math::UnitQuaternion;
use crate::record::{EpisodeRecord, EpisodeRow};

/// A straight polishing pass: descend from a hover height to a commanded
/// depth below the surface, then sweep along the first tangent axis at
/// constant depth and hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Start point in surface tangent coordinates `(u, v)`, m.
    pub start: [f64; 2],
    /// Signed travel along `u`, m.
    pub length: f64,
    /// Initial height above the surface, m.
    pub hover: f64,
    /// Commanded depth of the reference below the surface, m.
    pub depth: f64,
    /// Time to reach the commanded depth, s.
    pub approach_time: f64,
    /// Hold time at the end of the sweep, s.
    pub end_hold: f64,
    /// Total duration, s.
    pub duration: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            start: [-0.075, 0.0],
            length: 0.15,
            hover: 0.003,
            depth: 0.003375,
            approach_time: 1.5,
            end_hold: 1.0,
            duration: 25.0,
        }
    }
}

/// Minimum-jerk blend from 0 to 1 over `[t0, t1]`.
pub fn min_jerk(t: f64, t0: f64, t1: f64) -> f64 {
    let x = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Tool pointing against the surface normal `z`.
pub fn tool_down() -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vector3::x(), std::f64::consts::PI)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.start[0],
            self.start[1],
            self.length,
            self.hover,
            self.depth,
            self.approach_time,
            self.end_hold,
            self.duration,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sweep"));
        }
        if !(self.approach_time > 0.0) || self.end_hold < 0.0 || self.approach_time + self.end_hold >= self.duration {
            return Err(Error::Config(format!(
                "sweep needs 0 < approach_time and approach_time + end_hold < duration (got {} + {} vs {})",
                self.approach_time, self.end_hold, self.duration
            )));
        }
        Ok(())
    }

    /// Reference position at time `t` over `surface` (its undisturbed plane).
    pub fn position(&self, surface: &WorkpieceSurface, t: f64) -> Vector3<f64> {
        let (e1, e2) = surface.tangent_basis();
        let h = self.hover - (self.hover + self.depth) * min_jerk(t, 0.0, self.approach_time);
        let u = self.start[0] + self.length * min_jerk(t, self.approach_time, self.duration - self.end_hold);
        surface.origin + e1 * u + e2 * self.start[1] + surface.normal * h
    }

    /// Sampled demonstration with constant orientation.
    pub fn demo(&self, surface: &WorkpieceSurface, dt: f64) -> Result<EpisodeRecord> {
        self.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        let n = (self.duration / dt).round() as usize + 1;
        let q = tool_down();
        let rows = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                EpisodeRow {
                    t,
                    p: self.position(surface, t),
                    q,
                    f: [0.0; 6],
                }
            })
            .collect();
        Ok(EpisodeRecord::new(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_endpoints_and_midpoint() {
        assert_eq!(min_jerk(-1.0, 0.0, 2.0), 0.0);
        assert_eq!(min_jerk(1.0, 0.0, 2.0), 0.5);
        assert_eq!(min_jerk(3.0, 0.0, 2.0), 1.0);
    }

    #[test]
    fn demo_geometry() {
        let s = WorkpieceSurface::flat(Vector3::new(0.5, 0.0, 0.2), Vector3::z()).unwrap();
        let spec = SweepSpec::default();
        let d = spec.demo(&s, 0.02).unwrap();
        assert_eq!(d.len(), 1251);
        let first = d.rows[0].p;
        let last = d.rows.last().unwrap().p;
        assert!((first - Vector3::new(0.425, 0.0, 0.203)).norm() < 1e-12);
        assert!((last - Vector3::new(0.575, 0.0, 0.2 - 0.003375)).norm() < 1e-12);
        let at_contact = spec.position(&s, spec.approach_time);
        assert!((at_contact.z - (0.2 - 0.003375)).abs() < 1e-12);
        assert!((at_contact.x - 0.425).abs() < 1e-12);
        assert!((d.rows[0].q.rotate(&Vector3::z()) + Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_timing() {
        let spec = SweepSpec {
            approach_time: 20.0,
            end_hold: 5.0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
