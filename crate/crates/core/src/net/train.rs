use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{loss_ssr, Dims, Network, Sequence};
use crate::error::{Error, Result};

/// Minibatch gradient-descent settings and network widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Sequences per gradient step.
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub output: usize,
    pub phase_bases: usize,
    pub seed: u64,
    /// Rescale the batch gradient to at most this Euclidean norm.
    pub clip_grad_norm: Option<f64>,
    /// Constrain the GRU recurrent matrices to be diagonal.
    pub diagonal_recurrence: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let dims = Dims::default();
        TrainConfig {
            learning_rate: 0.02,
            batch_size: 8,
            epochs: 3000,
            hidden: dims.hidden,
            output: dims.output,
            phase_bases: dims.phase_bases,
            seed: 0,
            clip_grad_norm: None,
            diagonal_recurrence: false,
        }
    }
}

impl TrainConfig {
    pub fn dims(&self) -> Dims {
        Dims {
            hidden: self.hidden,
            output: self.output,
            phase_bases: self.phase_bases,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if let Some(c) = self.clip_grad_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_grad_norm must be positive, got {c}")));
            }
        }
        self.dims().validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<N> {
    pub params: N,
    /// Mean per-sequence SSR seen during each epoch.
    pub loss_curve: Vec<f64>,
    /// Mean per-sequence SSR of the trained parameters.
    pub final_ssr: f64,
}

/// Mean per-sequence SSR of `net` over `data`.
pub fn mean_ssr<N: Network>(net: &N, data: &[Sequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|seq| loss_ssr(&net.predict(seq)?, &seq.targets))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

fn add_scaled<N: Network>(dst: &mut N, alpha: f64, src: &N) {
    for ((_, d), (_, s)) in dst.tensors_mut().into_iter().zip(src.tensors()) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += alpha * b;
        }
    }
}

fn norm<N: Network>(n: &N) -> f64 {
    n.tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Minibatch gradient descent on the mean per-sequence SSR of each batch.
/// Per-sequence gradients are computed in parallel and reduced in batch
/// order, so results depend only on the seed.
pub fn train<N: Network>(init: N, data: &[Sequence], cfg: &TrainConfig) -> Result<TrainOutcome<N>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let output = init.dims().output;
    for seq in data {
        seq.validate(output)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut params = init;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, N)> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = params.zeros_like();
                    let l = params.accumulate_gradient(&data[i], &mut g)?;
                    Ok((l, g))
                })
                .collect::<Result<_>>()?;
            let mut grad = params.zeros_like();
            let mut batch_loss = 0.0;
            for (l, g) in &results {
                batch_loss += l;
                add_scaled(&mut grad, 1.0, g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            let inv = 1.0 / batch.len() as f64;
            params.project_gradient(&mut grad);
            let mut step = -cfg.learning_rate * inv;
            if let Some(max) = cfg.clip_grad_norm {
                let gn = norm(&grad) * inv;
                if gn > max {
                    step *= max / gn;
                }
            }
            add_scaled(&mut params, step, &grad);
            epoch_loss += batch_loss;
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        if epoch % 500 == 0 {
            log::debug!("epoch {epoch}: loss {mean:.6}");
        }
        curve.push(mean);
    }
    let final_ssr = mean_ssr(&params, data)?;
    Ok(TrainOutcome {
        params,
        loss_curve: curve,
        final_ssr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PhaseState;
    use crate::net::{PmdrnnParams, PmnnParams};

    fn dataset(zero_targets: bool) -> Vec<Sequence> {
        (0..4)
            .map(|k| {
                let phases = PhaseState::grid(4.6, 1.0, 0.1, 12).unwrap();
                let inputs: Vec<_> = (0..12).map(|t| [((t + k) as f64 * 0.3).sin(); 6]).collect();
                let targets = inputs
                    .iter()
                    .map(|x| if zero_targets { vec![0.0; 3] } else { vec![x[0], -x[0], 0.5] })
                    .collect();
                Sequence { inputs, phases, targets }
            })
            .collect()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 2,
            hidden: 6,
            phase_bases: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_targets_drive_loss_down() {
        let c = cfg(200);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = PmnnParams::init(c.dims(), &mut rng).unwrap();
        let out = train(init, &dataset(true), &c).unwrap();
        assert_eq!(out.loss_curve.len(), 200);
        assert!(out.final_ssr < out.loss_curve[0]);
    }

    #[test]
    fn same_seed_same_curve() {
        let c = cfg(30);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let init = PmdrnnParams::init(c.dims(), false, &mut rng).unwrap();
            train(init, &dataset(false), &c).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn diagonal_constraint_survives_training() {
        let c = TrainConfig {
            diagonal_recurrence: true,
            ..cfg(10)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = PmdrnnParams::init(c.dims(), true, &mut rng).unwrap();
        let out = train(init, &dataset(false), &c).unwrap();
        assert_eq!(out.params.u_z.get(0, 3), 0.0);
        assert_ne!(out.params.u_z.get(3, 3), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let c = TrainConfig {
            learning_rate: 1e6,
            ..cfg(50)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init = PmnnParams::init(c.dims(), &mut rng).unwrap();
        let mut data = dataset(false);
        for s in &mut data {
            for t in &mut s.targets {
                t.iter_mut().for_each(|v| *v *= 1e6);
            }
        }
        assert!(matches!(train(init, &data, &c), Err(Error::Diverged { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let t: TrainConfig = toml::from_str("epochs = 5").unwrap();
        assert_eq!(t.epochs, 5);
        assert_eq!(t.learning_rate, 0.02);
        assert!(toml::from_str::<TrainConfig>("epoch = 5").is_err());
    }
}
