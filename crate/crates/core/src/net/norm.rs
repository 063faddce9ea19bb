use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension affine normalization `(x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Dimensions with a spread below this are left unscaled.
const MIN_SCALE: f64 = 1e-12;

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of the samples.
    pub fn z_score<'a, I>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let (mut sum, mut count) = (vec![0.0; dim], 0usize);
        for x in samples.clone() {
            check_dim(dim, x)?;
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidArgument("no samples to normalize".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; dim];
        for x in samples {
            for k in 0..dim {
                var[k] += (x[k] - mean[k]).powi(2);
            }
        }
        let scale = var.iter().map(|v| fallback((v / count as f64).sqrt())).collect();
        Ok(Normalizer { offset: mean, scale })
    }

    /// Root mean square per dimension, without centering.
    pub fn rms<'a, I>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let (mut sq, mut count) = (vec![0.0; dim], 0usize);
        for x in samples {
            check_dim(dim, x)?;
            sq.iter_mut().zip(x).for_each(|(s, v)| *s += v * v);
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidArgument("no samples to normalize".into()));
        }
        Ok(Normalizer {
            offset: vec![0.0; dim],
            scale: sq.iter().map(|s| fallback((s / count as f64).sqrt())).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| v * s + o)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset.len() != self.scale.len() {
            return Err(Error::LengthMismatch(self.scale.len(), self.offset.len()));
        }
        if self.scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || self.offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::NonFinite("normalizer statistics"));
        }
        Ok(())
    }
}

fn fallback(s: f64) -> f64 {
    if s > MIN_SCALE {
        s
    } else {
        1.0
    }
}

fn check_dim(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::LengthMismatch(dim, x.len()));
    }
    Ok(())
}
