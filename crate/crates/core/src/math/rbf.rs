use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `M` Gaussian basis functions over the phase, with centers `c_i = i/M`
/// (`i = 1..=M`) and widths `h_i = 1 / (2 (c_{i+1} - c_i)²)`, `h_M = h_{M-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisDoc", into = "BasisDoc")]
pub struct RbfBasis {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisDoc {
    m: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl From<RbfBasis> for BasisDoc {
    fn from(b: RbfBasis) -> Self {
        BasisDoc {
            m: b.len(),
            centers: b.centers,
            widths: b.widths,
        }
    }
}

impl TryFrom<BasisDoc> for RbfBasis {
    type Error = Error;

    fn try_from(d: BasisDoc) -> Result<Self> {
        if d.m != d.centers.len() {
            return Err(Error::LengthMismatch(d.m, d.centers.len()));
        }
        RbfBasis::from_parts(d.centers, d.widths)
    }
}

impl RbfBasis {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "basis needs at least 2 functions, got {m}"
            )));
        }
        let centers: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let mut widths: Vec<f64> = centers
            .windows(2)
            .map(|w| 1.0 / (2.0 * (w[1] - w[0]).powi(2)))
            .collect();
        widths.push(widths[m - 2]);
        Ok(RbfBasis { centers, widths })
    }

    /// Rebuilds a basis from stored centers and widths.
    pub fn from_parts(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.len() != widths.len() {
            return Err(Error::LengthMismatch(centers.len(), widths.len()));
        }
        if centers.is_empty() || widths.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidArgument("invalid basis parameters".into()));
        }
        Ok(RbfBasis { centers, widths })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Unnormalized activations `Ψ_i(s)`.
    pub fn raw(&self, s: f64) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(c, h)| (-h * (s - c) * (s - c)).exp())
            .collect()
    }

    /// Normalized activations `Ψ_i(s) / Σ_j Ψ_j(s)` written into `out`.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let mut sum = 0.0;
        for ((o, c), h) in out.iter_mut().zip(&self.centers).zip(&self.widths) {
            *o = (-h * (s - c) * (s - c)).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }

    /// Normalized activations; components sum to one.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(s, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn centers_and_widths_follow_the_grid() {
        let b = RbfBasis::new(4).unwrap();
        assert_eq!(b.centers(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(b.widths(), &[8.0, 8.0, 8.0, 8.0]);
    }

    #[test]
    fn raw_activation_is_one_at_center() {
        let b = RbfBasis::new(25).unwrap();
        for (k, c) in b.centers().iter().enumerate() {
            assert_eq!(b.raw(*c)[k], 1.0);
        }
    }

    #[test]
    fn normalized_sums_to_one() {
        let b = RbfBasis::new(25).unwrap();
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let sum: f64 = b.eval(s).iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn m25_midpoint_matches_scalar_evaluation() {
        // Independent scalar evaluation of the Gaussian definition.
        let m = 25usize;
        let s = 0.5;
        let mut raw = [0.0f64; 25];
        for i in 1..=m {
            let c = i as f64 / m as f64;
            let h = 1.0 / (2.0 * (1.0 / m as f64) * (1.0 / m as f64));
            raw[i - 1] = f64::exp(-h * (s - c) * (s - c));
        }
        let total: f64 = raw.iter().sum();
        let b = RbfBasis::new(m).unwrap();
        for (got, r) in b.eval(s).iter().zip(raw) {
            assert_abs_diff_eq!(*got, r / total, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(RbfBasis::new(0).is_err());
        assert!(RbfBasis::new(1).is_err());
    }
}
