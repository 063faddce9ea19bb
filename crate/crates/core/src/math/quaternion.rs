use std::ops::Mul;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this vector-part norm the log/exp maps switch to their series
/// expansions.
const SERIES_THRESHOLD: f64 = 1e-6;

/// Unit quaternion stored as `(w, x, y, z)`.
///
/// Every constructor renormalizes and folds the value onto the `w >= 0`
/// hemisphere, so `q` and `-q` always map to the same stored value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a unit quaternion from raw components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("quaternion components"));
        }
        if n < 1e-300 {
            return Err(Error::InvalidArgument("zero-norm quaternion".into()));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            // Already unit within rounding; keep the bits so stored values
            // survive a serialize/parse round trip unchanged.
            return Ok(Self::canonical(w, x, y, z));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            // w == 0: first non-zero vector component decides.
            [x, y, z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            UnitQuaternion {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            UnitQuaternion { w, x, y, z }
        }
    }

    fn renormalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let half = 0.5 * angle;
        let v = axis / n * half.sin();
        Self::renormalized(half.cos(), v.x, v.y, v.z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        // Conjugation keeps w, so the hemisphere is unchanged unless w == 0.
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product, renormalized.
    pub fn mul(&self, rhs: &UnitQuaternion) -> Self {
        let (a, b) = (self, rhs);
        Self::renormalized(
            a.w * b.w - (a.x * b.x + a.y * b.y + a.z * b.z),
            // Grouped so that q * q̄ has an exactly zero vector part.
            (a.w * b.x + a.x * b.w) + (a.y * b.z - a.z * b.y),
            (a.w * b.y + a.y * b.w) + (a.z * b.x - a.x * b.z),
            (a.w * b.z + a.z * b.w) + (a.x * b.y - a.y * b.x),
        )
    }

    /// Half-angle logarithm: for `q = (cos θ, sin θ · n)` returns `θ · n`.
    pub fn log(&self) -> Vector3<f64> {
        let v = self.vector();
        let n = v.norm();
        if n < SERIES_THRESHOLD {
            // asin(n)/n = 1 + n²/6 + O(n⁴)
            v * (1.0 + n * n / 6.0)
        } else {
            v * (n.atan2(self.w) / n)
        }
    }

    /// Inverse of [`log`](Self::log).
    pub fn exp(v: &Vector3<f64>) -> Self {
        let theta = v.norm();
        if theta < SERIES_THRESHOLD {
            let t2 = theta * theta;
            let s = 1.0 - t2 / 6.0;
            Self::renormalized(1.0 - t2 / 2.0, v.x * s, v.y * s, v.z * s)
        } else {
            let s = theta.sin() / theta;
            Self::renormalized(theta.cos(), v.x * s, v.y * s, v.z * s)
        }
    }

    /// Full rotation angle (radians, in `[0, π]`) between two orientations.
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        2.0 * other.mul(&self.conjugate()).log().norm()
    }

    /// Rotates a vector by this quaternion.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = self.vector();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion::mul(&self, &rhs)
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        UnitQuaternion::new(c[0], c[1], c[2], c[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> [f64; 4] {
        q.components()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn x_axis() -> Vector3<f64> {
        Vector3::x()
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(UnitQuaternion::IDENTITY.log(), Vector3::zeros());
    }

    #[test]
    fn log_of_quarter_turn_is_half_angle() {
        let q = UnitQuaternion::new(FRAC_PI_4.cos(), FRAC_PI_4.sin(), 0.0, 0.0).unwrap();
        let v = q.log();
        assert_abs_diff_eq!(v.x, FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(v.y, 0.0);
        assert_eq!(v.z, 0.0);
    }

    #[test]
    fn antipodal_identity_folds_to_identity() {
        let q = UnitQuaternion::new(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
        assert_eq!(q.log(), Vector3::zeros());
    }

    #[test]
    fn mul_identity_and_inverse() {
        let a = UnitQuaternion::new(0.3, -0.2, 0.9, 0.1).unwrap();
        let left = a * UnitQuaternion::IDENTITY;
        for (p, q) in left.components().iter().zip(a.components()) {
            assert_abs_diff_eq!(*p, q, epsilon = 1e-15);
        }
        let id = a * a.conjugate();
        assert_abs_diff_eq!(id.w(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(id.vector().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn series_branch_is_continuous() {
        let below = Vector3::new(0.9e-6, 0.0, 0.0);
        let above = Vector3::new(1.1e-6, 0.0, 0.0);
        let qb = UnitQuaternion::exp(&below);
        let qa = UnitQuaternion::exp(&above);
        assert_abs_diff_eq!(qb.log().x, 0.9e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(qa.log().x, 1.1e-6, epsilon = 1e-18);
    }

    #[test]
    fn rejects_zero_and_nan() {
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn construction_normalizes() {
        let q = UnitQuaternion::new(2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
        let q = UnitQuaternion::new(-3.0, 4.0, 0.0, 0.0).unwrap();
        assert!(q.w() > 0.0);
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotate_quarter_turn() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let v = q.rotate(&x_axis());
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn angle_to_measures_full_angle() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::y(), 0.2);
        let b = UnitQuaternion::from_axis_angle(&Vector3::y(), 0.2 + PI / 3.0);
        assert_abs_diff_eq!(a.angle_to(&b), PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn serde_uses_wxyz_array() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7);
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.starts_with('['));
        let back: UnitQuaternion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }
}
