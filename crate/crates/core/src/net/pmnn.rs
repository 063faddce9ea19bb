use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{phase_basis, phase_gate, sigmoid, Dims, Network, Sequence, Wrench, INPUT_DIM};
use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis};

/// Weights of the feedforward phase-modulated baseline.
///
/// ```text
/// h_1  = σ(W_1 ΔF + b_1)
/// h_2  = σ(W_2 h_1 + b_2)
/// h_3  = σ(W_3 h_2 + b_3)
/// h_pm = G ∘ (W_pm h_3 + b_pm)
/// C    = w_C h_pm
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmnnParams {
    pub w_1: Matrix,
    pub b_1: Vec<f64>,
    pub w_2: Matrix,
    pub b_2: Vec<f64>,
    pub w_3: Matrix,
    pub b_3: Vec<f64>,
    pub w_pm: Matrix,
    pub b_pm: Vec<f64>,
    pub w_c: Matrix,
    pub basis: RbfBasis,
}

struct Tape {
    hidden: usize,
    bases: usize,
    output: usize,
    h1: Vec<f64>,
    h2: Vec<f64>,
    h3: Vec<f64>,
    g: Vec<f64>,
    hpm: Vec<f64>,
    c: Vec<f64>,
}

fn dense_sigmoid(w: &Matrix, b: &[f64], x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(b);
    w.matvec_add(x, out);
    out.iter_mut().for_each(|v| *v = sigmoid(*v));
}

impl PmnnParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let (h, d, n) = (dims.hidden, dims.output, dims.phase_bases);
        Ok(PmnnParams {
            w_1: Matrix::glorot(h, INPUT_DIM, INPUT_DIM, rng),
            b_1: vec![0.0; h],
            w_2: Matrix::glorot(h, h, h, rng),
            b_2: vec![0.0; h],
            w_3: Matrix::glorot(h, h, h, rng),
            b_3: vec![0.0; h],
            w_pm: Matrix::glorot(n, h, h, rng),
            b_pm: vec![0.0; n],
            w_c: Matrix::glorot(d, n, n, rng),
            basis: phase_basis(n)?,
        })
    }

    /// Every weight and bias set to `value`.
    pub fn constant(dims: Dims, value: f64) -> Result<Self> {
        let mut p = Self::init(dims, &mut ChaCha8Rng::seed_from_u64(0))?;
        for (_, t) in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = value);
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        dims.validate()?;
        let (h, d, n) = (dims.hidden, dims.output, dims.phase_bases);
        let shapes = [
            ("w_1", self.w_1.shape(), (h, INPUT_DIM)),
            ("w_2", self.w_2.shape(), (h, h)),
            ("w_3", self.w_3.shape(), (h, h)),
            ("w_pm", self.w_pm.shape(), (n, h)),
            ("w_c", self.w_c.shape(), (d, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Shape(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        if self.b_2.len() != h || self.b_3.len() != h || self.basis.len() != n {
            return Err(Error::Shape("PMNN bias or basis length mismatch".into()));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("PMNN parameters"));
        }
        Ok(())
    }

    /// Stateless evaluation of `C` for one wrench error.
    pub fn forward(&self, df: &Wrench, phase: &PhaseState) -> Vec<f64> {
        let dims = self.dims();
        let (h, n) = (dims.hidden, dims.phase_bases);
        let (mut h1, mut h2, mut h3) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        let mut g = vec![0.0; n];
        let mut hpm = vec![0.0; n];
        let mut c = vec![0.0; dims.output];
        phase_gate(&self.basis, phase, &mut g);
        self.step_into(df, &g, &mut h1, &mut h2, &mut h3, &mut hpm, &mut c);
        c
    }

    #[allow(clippy::too_many_arguments)]
    fn step_into(&self, x: &[f64], g: &[f64], h1: &mut [f64], h2: &mut [f64], h3: &mut [f64], hpm: &mut [f64], c: &mut [f64]) {
        dense_sigmoid(&self.w_1, &self.b_1, x, h1);
        dense_sigmoid(&self.w_2, &self.b_2, h1, h2);
        dense_sigmoid(&self.w_3, &self.b_3, h2, h3);
        hpm.copy_from_slice(&self.b_pm);
        self.w_pm.matvec_add(h3, hpm);
        for (v, gi) in hpm.iter_mut().zip(g) {
            *v *= gi;
        }
        c.iter_mut().for_each(|v| *v = 0.0);
        self.w_c.matvec_add(hpm, c);
    }

    fn run_tape(&self, seq: &Sequence) -> Result<Tape> {
        let dims = self.dims();
        seq.validate(dims.output)?;
        let (h, n, d) = (dims.hidden, dims.phase_bases, dims.output);
        let steps = seq.len();
        let mut tape = Tape {
            hidden: h,
            bases: n,
            output: d,
            h1: vec![0.0; steps * h],
            h2: vec![0.0; steps * h],
            h3: vec![0.0; steps * h],
            g: vec![0.0; steps * n],
            hpm: vec![0.0; steps * n],
            c: vec![0.0; steps * d],
        };
        for t in 0..steps {
            let hs = t * h..(t + 1) * h;
            let ns = t * n..(t + 1) * n;
            phase_gate(&self.basis, &seq.phases[t], &mut tape.g[ns.clone()]);
            self.step_into(
                &seq.inputs[t],
                &tape.g[ns.clone()],
                &mut tape.h1[hs.clone()],
                &mut tape.h2[hs.clone()],
                &mut tape.h3[hs],
                &mut tape.hpm[ns],
                &mut tape.c[t * d..(t + 1) * d],
            );
        }
        Ok(tape)
    }
}

/// Backpropagates `dy` through `y = σ(W x + b)`, accumulating into the
/// gradient tensors and writing `∂L/∂x` into `dx`.
fn dense_sigmoid_backward(w: &Matrix, x: &[f64], y: &[f64], dy: &[f64], da: &mut [f64], gw: &mut Matrix, gb: &mut [f64], dx: &mut [f64]) {
    for i in 0..y.len() {
        da[i] = dy[i] * y[i] * (1.0 - y[i]);
        gb[i] += da[i];
    }
    gw.outer_add(da, x);
    dx.fill(0.0);
    w.matvec_t_add(da, dx);
}

impl Network for PmnnParams {
    fn dims(&self) -> Dims {
        Dims {
            hidden: self.b_1.len(),
            output: self.w_c.rows(),
            phase_bases: self.b_pm.len(),
        }
    }

    fn predict(&self, seq: &Sequence) -> Result<Vec<Vec<f64>>> {
        let tape = self.run_tape(seq)?;
        Ok(tape.c.chunks_exact(tape.output).map(|c| c.to_vec()).collect())
    }

    fn accumulate_gradient(&self, seq: &Sequence, grad: &mut Self) -> Result<f64> {
        let tape = self.run_tape(seq)?;
        let (h, n, d) = (tape.hidden, tape.bases, tape.output);
        let mut loss = 0.0;
        let mut dc = vec![0.0; d];
        let mut dhpm = vec![0.0; n];
        let mut da_pm = vec![0.0; n];
        let (mut dh3, mut dh2, mut dh1) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        let mut da = vec![0.0; h];
        let mut dx = vec![0.0; INPUT_DIM];
        for t in 0..seq.len() {
            let c = &tape.c[t * d..(t + 1) * d];
            for k in 0..d {
                let e = c[k] - seq.targets[t][k];
                loss += e * e;
                dc[k] = 2.0 * e;
            }
            let hs = t * h..(t + 1) * h;
            let ns = t * n..(t + 1) * n;
            let (h1, h2, h3) = (&tape.h1[hs.clone()], &tape.h2[hs.clone()], &tape.h3[hs]);
            let g = &tape.g[ns.clone()];
            grad.w_c.outer_add(&dc, &tape.hpm[ns]);
            dhpm.fill(0.0);
            self.w_c.matvec_t_add(&dc, &mut dhpm);
            for i in 0..n {
                da_pm[i] = dhpm[i] * g[i];
                grad.b_pm[i] += da_pm[i];
            }
            grad.w_pm.outer_add(&da_pm, h3);
            dh3.fill(0.0);
            self.w_pm.matvec_t_add(&da_pm, &mut dh3);
            dense_sigmoid_backward(&self.w_3, h2, h3, &dh3, &mut da, &mut grad.w_3, &mut grad.b_3, &mut dh2);
            dense_sigmoid_backward(&self.w_2, h1, h2, &dh2, &mut da, &mut grad.w_2, &mut grad.b_2, &mut dh1);
            dense_sigmoid_backward(&self.w_1, &seq.inputs[t], h1, &dh1, &mut da, &mut grad.w_1, &mut grad.b_1, &mut dx);
        }
        Ok(loss)
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w_1", self.w_1.data()),
            ("b_1", &self.b_1),
            ("w_2", self.w_2.data()),
            ("b_2", &self.b_2),
            ("w_3", self.w_3.data()),
            ("b_3", &self.b_3),
            ("w_pm", self.w_pm.data()),
            ("b_pm", &self.b_pm),
            ("w_c", self.w_c.data()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_1", self.w_1.data_mut()),
            ("b_1", &mut self.b_1),
            ("w_2", self.w_2.data_mut()),
            ("b_2", &mut self.b_2),
            ("w_3", self.w_3.data_mut()),
            ("b_3", &mut self.b_3),
            ("w_pm", self.w_pm.data_mut()),
            ("b_pm", &mut self.b_pm),
            ("w_c", self.w_c.data_mut()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let p = PmnnParams::constant(Dims::default(), 0.0).unwrap();
        let ph = PhaseState::initial(4.6, 1.0);
        assert_eq!(p.forward(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &ph), vec![0.0; 3]);
    }

    #[test]
    fn zero_phase_velocity_gates_output() {
        let p = PmnnParams::init(Dims::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let ph = PhaseState { s: 0.2, u: 0.0, tau: 1.0 };
        assert_eq!(p.forward(&[7.0; 6], &ph), vec![0.0; 3]);
    }

    #[test]
    fn hand_evaluated_single_unit() {
        let dims = Dims {
            hidden: 1,
            output: 1,
            phase_bases: 1,
        };
        let p = PmnnParams::constant(dims, 0.1).unwrap();
        let ph = PhaseState { s: 0.3, u: -2.0, tau: 1.0 };
        let c = p.forward(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &ph);
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let h1 = sig(0.1 + 0.1);
        let h2 = sig(0.1 * h1 + 0.1);
        let h3 = sig(0.1 * h2 + 0.1);
        let expect = 0.1 * (-2.0 * (0.1 * h3 + 0.1));
        assert!((c[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn validate_catches_shapes() {
        let mut p = PmnnParams::constant(Dims::default(), 0.0).unwrap();
        p.validate().unwrap();
        p.w_2 = Matrix::zeros(3, 3);
        assert!(p.validate().is_err());
    }
}
