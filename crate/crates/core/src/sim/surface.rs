use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::UnitQuaternion;

/// Heights on a regular grid over the surface tangent coordinates
/// `(u, v)`, bilinearly interpolated and clamped at the border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightField {
    /// `(u, v)` of the first grid node, m.
    pub start: [f64; 2],
    /// Grid spacing along `u` and `v`, m.
    pub spacing: [f64; 2],
    /// Nodes along `u`.
    pub nu: usize,
    /// Nodes along `v`.
    pub nv: usize,
    /// Row-major heights, `v` major, m.
    pub values: Vec<f64>,
}

impl HeightField {
    /// Sinusoidal ripple along `u`, constant along `v`.
    pub fn ripple(u_range: [f64; 2], spacing: f64, amplitude: f64, wavelength: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(wavelength > 0.0) || !(u_range[1] > u_range[0]) {
            return Err(Error::InvalidArgument("invalid ripple parameters".into()));
        }
        let nu = ((u_range[1] - u_range[0]) / spacing).ceil() as usize + 1;
        let row: Vec<f64> = (0..nu)
            .map(|i| {
                let u = u_range[0] + i as f64 * spacing;
                amplitude * (std::f64::consts::TAU * u / wavelength).sin()
            })
            .collect();
        let mut values = row.clone();
        values.extend_from_slice(&row);
        let f = HeightField {
            start: [u_range[0], -1.0],
            spacing: [spacing, 2.0],
            nu,
            nv: 2,
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu < 2 || self.nv < 2 || self.values.len() != self.nu * self.nv {
            return Err(Error::Shape(format!(
                "height field needs at least 2x2 nodes and nu*nv values (nu={}, nv={}, values={})",
                self.nu,
                self.nv,
                self.values.len()
            )));
        }
        if !(self.spacing[0] > 0.0 && self.spacing[1] > 0.0) {
            return Err(Error::InvalidArgument("height field spacing must be positive".into()));
        }
        if self.values.iter().chain(&self.start).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("height field"));
        }
        Ok(())
    }

    fn cell(&self, x: f64, axis: usize, n: usize) -> (usize, f64) {
        let g = ((x - self.start[axis]) / self.spacing[axis]).clamp(0.0, (n - 1) as f64);
        let i = (g.floor() as usize).min(n - 2);
        (i, g - i as f64)
    }

    /// Height and its partial derivatives `(h, ∂h/∂u, ∂h/∂v)`.
    pub fn eval(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let (i, a) = self.cell(u, 0, self.nu);
        let (j, b) = self.cell(v, 1, self.nv);
        let at = |i: usize, j: usize| self.values[j * self.nu + i];
        let (h00, h10, h01, h11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
        let h = (1.0 - a) * (1.0 - b) * h00 + a * (1.0 - b) * h10 + (1.0 - a) * b * h01 + a * b * h11;
        let inside_u = (self.start[0]..=self.start[0] + (self.nu - 1) as f64 * self.spacing[0]).contains(&u);
        let inside_v = (self.start[1]..=self.start[1] + (self.nv - 1) as f64 * self.spacing[1]).contains(&v);
        let du = if inside_u {
            ((1.0 - b) * (h10 - h00) + b * (h11 - h01)) / self.spacing[0]
        } else {
            0.0
        };
        let dv = if inside_v {
            ((1.0 - a) * (h01 - h00) + a * (h11 - h10)) / self.spacing[1]
        } else {
            0.0
        };
        (h, du, dv)
    }
}

/// A plane through `origin` with unit `normal` pointing out of the
/// material, optionally displaced along the normal by a height field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkpieceSurface {
    pub origin: Vector3<f64>,
    pub normal: Vector3<f64>,
    #[serde(default)]
    pub height: Option<HeightField>,
}

/// Local contact geometry at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Signed distance along the normal, positive outside the material.
    pub distance: f64,
    /// Unit outward normal of the displaced surface.
    pub normal: Vector3<f64>,
    /// Unnormalized normal `n - h_u e₁ - h_v e₂`; its dot product with a
    /// velocity gives the rate of `distance`.
    pub rate_axis: Vector3<f64>,
}

impl WorkpieceSurface {
    pub fn flat(origin: Vector3<f64>, normal: Vector3<f64>) -> Result<Self> {
        let s = WorkpieceSurface {
            origin,
            normal: normal.try_normalize(1e-12).ok_or(Error::InvalidArgument("zero surface normal".into()))?,
            height: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_height(mut self, height: HeightField) -> Result<Self> {
        height.validate()?;
        self.height = Some(height);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if ((self.normal.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "surface normal must be unit length, got norm {}",
                self.normal.norm()
            )));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surface origin"));
        }
        if let Some(h) = &self.height {
            h.validate()?;
        }
        Ok(())
    }

    /// Orthonormal tangent axes `(e₁, e₂)` with `e₁ × e₂ = n`.
    pub fn tangent_basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        (e1, n.cross(&e1))
    }

    pub fn query(&self, p: &Vector3<f64>) -> SurfacePoint {
        let rel = p - self.origin;
        let n = self.normal;
        let along = rel.dot(&n);
        match &self.height {
            None => SurfacePoint {
                distance: along,
                normal: n,
                rate_axis: n,
            },
            Some(field) => {
                let (e1, e2) = self.tangent_basis();
                let (h, hu, hv) = field.eval(rel.dot(&e1), rel.dot(&e2));
                let axis = n - hu * e1 - hv * e2;
                SurfacePoint {
                    distance: along - h,
                    normal: axis.normalize(),
                    rate_axis: axis,
                }
            }
        }
    }

    /// The surface shifted by `offset` and rotated by `tilt` about its origin.
    pub fn transformed(&self, offset: &Vector3<f64>, tilt: &UnitQuaternion) -> Self {
        WorkpieceSurface {
            origin: self.origin + offset,
            normal: tilt.rotate(&self.normal).normalize(),
            height: self.height.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_distance() {
        let s = WorkpieceSurface::flat(Vector3::new(0.0, 0.0, 0.1), Vector3::z()).unwrap();
        let q = s.query(&Vector3::new(0.3, -0.2, 0.098));
        assert!((q.distance + 0.002).abs() < 1e-15);
        assert_eq!(q.normal, Vector3::z());
        let (e1, e2) = s.tangent_basis();
        assert_eq!(e1, Vector3::x());
        assert_eq!(e2, Vector3::y());
    }

    #[test]
    fn ripple_interpolates_and_is_continuous() {
        let f = HeightField::ripple([0.0, 0.1], 0.001, 0.0005, 0.04).unwrap();
        let (h, du, dv) = f.eval(0.01, 0.0);
        assert!((h - 0.0005).abs() < 1e-12);
        assert!(du.abs() < 0.01);
        assert_eq!(dv, 0.0);
        // Across a grid node.
        let eps = 1e-12;
        let (a, ..) = f.eval(0.021 - eps, 0.0);
        let (b, ..) = f.eval(0.021 + eps, 0.0);
        assert!((a - b).abs() < 1e-12);
        // Clamped outside the grid.
        assert_eq!(f.eval(-1.0, 0.0).0, f.eval(0.0, 0.0).0);
    }

    #[test]
    fn tilt_rotates_normal() {
        let s = WorkpieceSurface::flat(Vector3::zeros(), Vector3::z()).unwrap();
        let t = s.transformed(&Vector3::new(0.0, 0.0, 0.001), &UnitQuaternion::from_axis_angle(&Vector3::x(), 0.1));
        assert!((t.normal.norm() - 1.0).abs() < 1e-12);
        assert!((t.normal.z - 0.1f64.cos()).abs() < 1e-12);
        assert!((t.query(&Vector3::zeros()).distance + 0.001 * 0.1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(WorkpieceSurface::flat(Vector3::zeros(), Vector3::zeros()).is_err());
        let mut f = HeightField::ripple([0.0, 0.1], 0.01, 0.001, 0.05).unwrap();
        f.values.pop();
        assert!(f.validate().is_err());
    }
}
