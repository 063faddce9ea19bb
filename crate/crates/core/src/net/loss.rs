use crate::error::{Error, Result};

/// Sum of squared residuals `Σ_t ‖pred_t - target_t‖²`.
pub fn loss_ssr(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch(target.len(), pred.len()));
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch(t.len(), p.len()));
        }
        for (a, b) in p.iter().zip(t) {
            acc += (a - b) * (a - b);
        }
    }
    Ok(acc)
}
