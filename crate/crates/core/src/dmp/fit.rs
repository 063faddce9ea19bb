//! Regression of forcing-term weights from sampled target values.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis};

/// Ridge regularization on the normal equations.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Derivative of uniformly or non-uniformly sampled vectors: central
/// differences inside, one-sided differences at both ends.
pub(crate) fn differentiate(times: &[f64], values: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = match k {
            0 => (0, 1),
            k if k == n - 1 => (n - 2, n - 1),
            k => (k - 1, k + 1),
        };
        out.push((values[b] - values[a]) / (times[b] - times[a]));
    }
    out
}

pub(crate) fn check_demo_times(times: &[f64]) -> Result<()> {
    if times.len() < 3 {
        return Err(Error::DemoTooShort(times.len()));
    }
    for (k, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotonicTime(k + 1));
        }
    }
    Ok(())
}

/// Least-squares weights `w` (M×3) minimizing
/// `Σ_k ‖target_k - scale ∘ (Σ_i w_i ψ̃_i(s_k) s_k)‖² + λ‖w‖²`, solved jointly
/// over all basis functions for each axis. Axes whose `scale` is zero get
/// zero weights.
pub(crate) fn regress_weights(
    basis: &RbfBasis,
    phases: &[PhaseState],
    targets: &[Vector3<f64>],
    scale: &Vector3<f64>,
) -> Result<Vec<Vector3<f64>>> {
    let m = basis.len();
    let n = phases.len();
    if targets.len() != n {
        return Err(Error::LengthMismatch(n, targets.len()));
    }
    let mut phi = DMatrix::<f64>::zeros(n, m);
    let mut row = vec![0.0; m];
    for (k, ph) in phases.iter().enumerate() {
        basis.eval_into(ph.s, &mut row);
        for (i, v) in row.iter().enumerate() {
            phi[(k, i)] = v * ph.s;
        }
    }
    let mut weights = vec![Vector3::zeros(); m];
    for axis in 0..3 {
        let sc = scale[axis];
        if sc == 0.0 {
            continue;
        }
        let features = &phi * sc;
        let mut gram = features.transpose() * &features;
        for i in 0..m {
            gram[(i, i)] += RIDGE_LAMBDA;
        }
        let rhs = features.transpose() * DVector::from_iterator(n, targets.iter().map(|t| t[axis]));
        let w = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidArgument("singular forcing regression".into()))?,
        };
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forcing weights"));
        }
        for i in 0..m {
            weights[i][axis] = w[i];
        }
    }
    Ok(weights)
}
