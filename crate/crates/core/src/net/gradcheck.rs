use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{FeedbackModel, ModelKind};
use super::{Dims, Network, PmdrnnParams, PmnnParams, Sequence, INPUT_DIM};
use crate::error::{Error, Result};
use crate::math::{PhaseState, DEFAULT_ALPHA_S};

/// Gradient magnitudes below this are compared in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// `max |a - n| / max(|a|, |n|, GRADCHECK_FLOOR)` over all parameters.
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub parameters: usize,
    pub epsilon: f64,
}

/// `SSR(plus) - SSR(minus)` accumulated per element as
/// `(c⁺ - c⁻)(c⁺ + c⁻ - 2y)`, which avoids cancelling two large totals.
fn ssr_difference(plus: &[Vec<f64>], minus: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for ((p, m), y) in plus.iter().zip(minus).zip(targets) {
        for ((a, b), t) in p.iter().zip(m).zip(y) {
            acc += (a - b) * (a + b - 2.0 * t);
        }
    }
    acc
}

/// Compares the analytic SSR gradient of every parameter with a central
/// finite difference of step `eps`.
pub fn grad_check<N: Network>(net: &N, seq: &Sequence, eps: f64) -> Result<GradCheckReport> {
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in [1e-7, 1e-4], got {eps}")));
    }
    let mut analytic = net.zeros_like();
    net.accumulate_gradient(seq, &mut analytic)?;
    let analytic: Vec<(&'static str, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.to_vec()))
        .collect();

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        parameters: 0,
        epsilon: eps,
    };
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        for (k, a) in grads.iter().enumerate() {
            let orig = probe.tensors()[ti].1[k];
            probe.tensors_mut()[ti].1[k] = orig + eps;
            let plus = probe.predict(seq)?;
            probe.tensors_mut()[ti].1[k] = orig - eps;
            let minus = probe.predict(seq)?;
            probe.tensors_mut()[ti].1[k] = orig;
            let numeric = ssr_difference(&plus, &minus, &seq.targets) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            if !rel.is_finite() {
                return Err(Error::NonFinite("finite-difference gradient"));
            }
            if rel > report.max_rel_error || report.worst_tensor.is_empty() {
                report.max_rel_error = rel;
                report.worst_tensor = (*name).to_string();
                report.worst_index = k;
                report.worst_analytic = *a;
                report.worst_numeric = numeric;
            }
            report.parameters += 1;
        }
    }
    Ok(report)
}

fn fill_uniform<N: Network>(net: &mut N, half_width: f64, rng: &mut ChaCha8Rng) {
    for (_, t) in net.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-half_width..=half_width);
        }
    }
}

/// A network with weights uniform in `±weight` and a `steps`-long sequence
/// of inputs in `±2` and targets in `±1` over one phase period, all drawn
/// from `seed`.
pub fn random_case(kind: ModelKind, dims: Dims, steps: usize, weight: f64, seed: u64) -> Result<(FeedbackModel, Sequence)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("gradient check needs at least one step".into()));
    }
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::InvalidArgument(format!("weight scale must be positive, got {weight}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = match kind {
        ModelKind::Pmdrnn => {
            let mut p = PmdrnnParams::init(dims, false, &mut rng)?;
            fill_uniform(&mut p, weight, &mut rng);
            FeedbackModel::Pmdrnn(p)
        }
        ModelKind::Pmnn => {
            let mut p = PmnnParams::init(dims, &mut rng)?;
            fill_uniform(&mut p, weight, &mut rng);
            FeedbackModel::Pmnn(p)
        }
    };
    let tau = 1.0;
    let seq = Sequence {
        inputs: (0..steps)
            .map(|_| std::array::from_fn::<f64, INPUT_DIM, _>(|_| rng.random_range(-2.0..2.0)))
            .collect(),
        phases: PhaseState::grid(DEFAULT_ALPHA_S, tau, tau / steps as f64, steps)?,
        targets: (0..steps)
            .map(|_| (0..dims.output).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    };
    Ok((model, seq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PhaseState;
    use crate::net::{Dims, PmnnParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_out_of_range_epsilon() {
        let p = PmnnParams::constant(Dims::default(), 0.0).unwrap();
        let seq = Sequence {
            inputs: vec![[0.0; 6]],
            phases: vec![PhaseState::initial(4.6, 1.0)],
            targets: vec![vec![0.0; 3]],
        };
        assert!(grad_check(&p, &seq, 1e-3).is_err());
        assert!(grad_check(&p, &seq, 1e-9).is_err());
    }

    #[test]
    fn zero_data_gives_zero_output_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = PmnnParams::init(Dims::default(), &mut rng).unwrap();
        p.w_c.fill(0.0);
        let seq = Sequence {
            inputs: vec![[0.0; 6]; 5],
            phases: PhaseState::grid(4.6, 1.0, 0.1, 5).unwrap(),
            targets: vec![vec![0.0; 3]; 5],
        };
        let mut g = p.zeros_like();
        p.accumulate_gradient(&seq, &mut g).unwrap();
        assert!(g.w_c.data().iter().all(|v| *v == 0.0));
        let report = grad_check(&p, &seq, 1e-6).unwrap();
        assert_eq!(report.max_rel_error, 0.0, "{report:?}");
        assert_eq!(report.parameters, p.parameter_count());
    }

    #[test]
    fn random_cases_are_reproducible_and_pass() {
        for kind in [ModelKind::Pmdrnn, ModelKind::Pmnn] {
            let (m, seq) = random_case(kind, Dims::default(), 6, 0.1, 3).unwrap();
            assert_eq!(random_case(kind, Dims::default(), 6, 0.1, 3).unwrap(), (m.clone(), seq.clone()));
            assert_eq!(seq.inputs.len(), 6);
            let r = m.grad_check(&seq, 1e-6).unwrap();
            assert!(r.max_rel_error < 1e-5, "{kind}: {r:?}");
        }
        assert!(random_case(ModelKind::Pmnn, Dims::default(), 0, 0.1, 0).is_err());
    }
}
