use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{phase_basis, phase_gate, sigmoid, Dims, FeedbackState, Network, Sequence, Wrench, INPUT_DIM};
use crate::error::{Error, Result};
use crate::math::{PhaseState, RbfBasis};

/// Weights of the phase-modulated recurrent feedback network.
///
/// ```text
/// h_in  = tanh(W_F ΔF_t + W_C1 C_{t-1} + W_C2 C_{t-2} + b_in)
/// r     = σ(W_r h_in + U_r h_{t-1} + b_r)
/// z     = σ(W_z h_in + U_z h_{t-1} + b_z)
/// ĥ     = tanh(W_h h_in + U_h (r ∘ h_{t-1}) + b_h)
/// h_t   = z ∘ h_{t-1} + (1 - z) ∘ ĥ
/// h_1   = σ(W_1 h_t + b_1)
/// h_pm  = G ∘ (W_pm h_1 + b_pm),   G_i = ψ̃_i(s) u
/// C_t   = w_C h_pm
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmdrnnParams {
    pub w_f: Matrix,
    pub w_c1: Matrix,
    pub w_c2: Matrix,
    pub b_in: Vec<f64>,
    pub w_r: Matrix,
    pub w_z: Matrix,
    pub w_h: Matrix,
    pub u_r: Matrix,
    pub u_z: Matrix,
    pub u_h: Matrix,
    pub b_r: Vec<f64>,
    pub b_z: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_1: Matrix,
    pub b_1: Vec<f64>,
    pub w_pm: Matrix,
    pub b_pm: Vec<f64>,
    pub w_c: Matrix,
    pub basis: RbfBasis,
    /// Restrict `U_r`, `U_z`, `U_h` to diagonal matrices.
    #[serde(default)]
    pub diagonal_recurrence: bool,
}

/// Per-step activations kept for the backward pass.
struct Tape {
    hidden: usize,
    bases: usize,
    output: usize,
    hin: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `(T + 1) × H`, row 0 is the initial state.
    h: Vec<f64>,
    h1: Vec<f64>,
    g: Vec<f64>,
    a_pm: Vec<f64>,
    hpm: Vec<f64>,
    /// `(T + 2) × d`, rows 0 and 1 are `C_{-2}` and `C_{-1}`.
    c: Vec<f64>,
}

impl Tape {
    fn new(dims: Dims, steps: usize) -> Self {
        let (h, n, d) = (dims.hidden, dims.phase_bases, dims.output);
        Tape {
            hidden: h,
            bases: n,
            output: d,
            hin: vec![0.0; steps * h],
            r: vec![0.0; steps * h],
            z: vec![0.0; steps * h],
            n: vec![0.0; steps * h],
            h: vec![0.0; (steps + 1) * h],
            h1: vec![0.0; steps * h],
            g: vec![0.0; steps * n],
            a_pm: vec![0.0; steps * n],
            hpm: vec![0.0; steps * n],
            c: vec![0.0; (steps + 2) * d],
        }
    }

    fn hid(v: &[f64], t: usize, h: usize) -> &[f64] {
        &v[t * h..(t + 1) * h]
    }

    fn output_at(&self, t: usize) -> &[f64] {
        let d = self.output;
        &self.c[(t + 2) * d..(t + 3) * d]
    }
}

/// Mutable views of one step's activations.
struct StepOut<'a> {
    hin: &'a mut [f64],
    r: &'a mut [f64],
    z: &'a mut [f64],
    n: &'a mut [f64],
    h: &'a mut [f64],
    h1: &'a mut [f64],
    a_pm: &'a mut [f64],
    hpm: &'a mut [f64],
    c: &'a mut [f64],
}

impl PmdrnnParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: Dims, diagonal_recurrence: bool, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let (h, d, n) = (dims.hidden, dims.output, dims.phase_bases);
        let in_fan = INPUT_DIM + 2 * d;
        let mut p = PmdrnnParams {
            w_f: Matrix::glorot(h, INPUT_DIM, in_fan, rng),
            w_c1: Matrix::glorot(h, d, in_fan, rng),
            w_c2: Matrix::glorot(h, d, in_fan, rng),
            b_in: vec![0.0; h],
            w_r: Matrix::glorot(h, h, 2 * h, rng),
            w_z: Matrix::glorot(h, h, 2 * h, rng),
            w_h: Matrix::glorot(h, h, 2 * h, rng),
            u_r: Matrix::glorot(h, h, 2 * h, rng),
            u_z: Matrix::glorot(h, h, 2 * h, rng),
            u_h: Matrix::glorot(h, h, 2 * h, rng),
            b_r: vec![0.0; h],
            b_z: vec![0.0; h],
            b_h: vec![0.0; h],
            w_1: Matrix::glorot(h, h, h, rng),
            b_1: vec![0.0; h],
            w_pm: Matrix::glorot(n, h, h, rng),
            b_pm: vec![0.0; n],
            w_c: Matrix::glorot(d, n, n, rng),
            basis: phase_basis(n)?,
            diagonal_recurrence,
        };
        if diagonal_recurrence {
            p.u_r.keep_diagonal();
            p.u_z.keep_diagonal();
            p.u_h.keep_diagonal();
        }
        Ok(p)
    }

    /// Every weight and bias set to `value`.
    pub fn constant(dims: Dims, value: f64) -> Result<Self> {
        let mut p = Self::init(dims, false, &mut ChaCha8Rng::seed_from_u64(0))?;
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
            ("w_f", self.w_f.shape(), (h, INPUT_DIM)),
            ("w_c1", self.w_c1.shape(), (h, d)),
            ("w_c2", self.w_c2.shape(), (h, d)),
            ("w_r", self.w_r.shape(), (h, h)),
            ("w_z", self.w_z.shape(), (h, h)),
            ("w_h", self.w_h.shape(), (h, h)),
            ("u_r", self.u_r.shape(), (h, h)),
            ("u_z", self.u_z.shape(), (h, h)),
            ("u_h", self.u_h.shape(), (h, h)),
            ("w_1", self.w_1.shape(), (h, h)),
            ("w_pm", self.w_pm.shape(), (n, h)),
            ("w_c", self.w_c.shape(), (d, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Shape(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        let biases = [
            ("b_in", self.b_in.len(), h),
            ("b_r", self.b_r.len(), h),
            ("b_z", self.b_z.len(), h),
            ("b_h", self.b_h.len(), h),
            ("b_1", self.b_1.len(), h),
            ("b_pm", self.b_pm.len(), n),
            ("basis", self.basis.len(), n),
        ];
        for (name, got, want) in biases {
            if got != want {
                return Err(Error::Shape(format!("{name} has length {got}, expected {want}")));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("PMDRNN parameters"));
        }
        Ok(())
    }

    /// One step of the network. Returns `C_t` and the successor state.
    pub fn forward(&self, df: &Wrench, state: &FeedbackState, phase: &PhaseState) -> Result<(Vec<f64>, FeedbackState)> {
        let dims = self.dims();
        if state.h.len() != dims.hidden || state.c_prev1.len() != dims.output || state.c_prev2.len() != dims.output {
            return Err(Error::Shape("feedback state does not match network dimensions".into()));
        }
        let (h, n, d) = (dims.hidden, dims.phase_bases, dims.output);
        let mut g = vec![0.0; n];
        phase_gate(&self.basis, phase, &mut g);
        let mut buf = vec![0.0; 6 * h + 2 * n + d];
        let (hin, rest) = buf.split_at_mut(h);
        let (r, rest) = rest.split_at_mut(h);
        let (z, rest) = rest.split_at_mut(h);
        let (nn, rest) = rest.split_at_mut(h);
        let (hh, rest) = rest.split_at_mut(h);
        let (h1, rest) = rest.split_at_mut(h);
        let (a_pm, rest) = rest.split_at_mut(n);
        let (hpm, c) = rest.split_at_mut(n);
        self.step_into(
            df,
            &state.c_prev1,
            &state.c_prev2,
            &state.h,
            &g,
            StepOut {
                hin,
                r,
                z,
                n: nn,
                h: hh,
                h1,
                a_pm,
                hpm,
                c,
            },
        );
        let next = FeedbackState {
            h: hh.to_vec(),
            c_prev1: c.to_vec(),
            c_prev2: state.c_prev1.clone(),
        };
        Ok((c.to_vec(), next))
    }

    #[allow(clippy::too_many_arguments)]
    fn step_into(&self, x: &[f64], c1: &[f64], c2: &[f64], h_prev: &[f64], g: &[f64], out: StepOut<'_>) {
        out.hin.copy_from_slice(&self.b_in);
        self.w_f.matvec_add(x, out.hin);
        self.w_c1.matvec_add(c1, out.hin);
        self.w_c2.matvec_add(c2, out.hin);
        out.hin.iter_mut().for_each(|v| *v = v.tanh());

        out.r.copy_from_slice(&self.b_r);
        self.w_r.matvec_add(out.hin, out.r);
        self.u_r.matvec_add(h_prev, out.r);
        out.r.iter_mut().for_each(|v| *v = sigmoid(*v));

        out.z.copy_from_slice(&self.b_z);
        self.w_z.matvec_add(out.hin, out.z);
        self.u_z.matvec_add(h_prev, out.z);
        out.z.iter_mut().for_each(|v| *v = sigmoid(*v));

        // `h` doubles as scratch for r ∘ h_{t-1} before it is overwritten.
        for ((rh, r), hp) in out.h.iter_mut().zip(out.r.iter()).zip(h_prev) {
            *rh = r * hp;
        }
        out.n.copy_from_slice(&self.b_h);
        self.w_h.matvec_add(out.hin, out.n);
        self.u_h.matvec_add(out.h, out.n);
        out.n.iter_mut().for_each(|v| *v = v.tanh());

        for i in 0..out.h.len() {
            out.h[i] = out.z[i] * h_prev[i] + (1.0 - out.z[i]) * out.n[i];
        }

        out.h1.copy_from_slice(&self.b_1);
        self.w_1.matvec_add(out.h, out.h1);
        out.h1.iter_mut().for_each(|v| *v = sigmoid(*v));

        out.a_pm.copy_from_slice(&self.b_pm);
        self.w_pm.matvec_add(out.h1, out.a_pm);
        for ((hp, a), gi) in out.hpm.iter_mut().zip(out.a_pm.iter()).zip(g) {
            *hp = gi * a;
        }

        out.c.iter_mut().for_each(|v| *v = 0.0);
        self.w_c.matvec_add(out.hpm, out.c);
    }

    fn run_tape(&self, seq: &Sequence) -> Result<Tape> {
        let dims = self.dims();
        seq.validate(dims.output)?;
        let steps = seq.len();
        let (h, n, d) = (dims.hidden, dims.phase_bases, dims.output);
        let mut tape = Tape::new(dims, steps);
        for t in 0..steps {
            phase_gate(&self.basis, &seq.phases[t], &mut tape.g[t * n..(t + 1) * n]);
            let (c_past, c_now) = tape.c.split_at_mut((t + 2) * d);
            let (h_past, h_now) = tape.h.split_at_mut((t + 1) * h);
            self.step_into(
                &seq.inputs[t],
                &c_past[(t + 1) * d..(t + 2) * d],
                &c_past[t * d..(t + 1) * d],
                &h_past[t * h..(t + 1) * h],
                &tape.g[t * n..(t + 1) * n],
                StepOut {
                    hin: &mut tape.hin[t * h..(t + 1) * h],
                    r: &mut tape.r[t * h..(t + 1) * h],
                    z: &mut tape.z[t * h..(t + 1) * h],
                    n: &mut tape.n[t * h..(t + 1) * h],
                    h: &mut h_now[..h],
                    h1: &mut tape.h1[t * h..(t + 1) * h],
                    a_pm: &mut tape.a_pm[t * n..(t + 1) * n],
                    hpm: &mut tape.hpm[t * n..(t + 1) * n],
                    c: &mut c_now[..d],
                },
            );
        }
        Ok(tape)
    }
}

impl Network for PmdrnnParams {
    fn dims(&self) -> Dims {
        Dims {
            hidden: self.b_in.len(),
            output: self.w_c.rows(),
            phase_bases: self.b_pm.len(),
        }
    }

    fn predict(&self, seq: &Sequence) -> Result<Vec<Vec<f64>>> {
        let tape = self.run_tape(seq)?;
        Ok((0..seq.len()).map(|t| tape.output_at(t).to_vec()).collect())
    }

    fn accumulate_gradient(&self, seq: &Sequence, grad: &mut Self) -> Result<f64> {
        let tape = self.run_tape(seq)?;
        let (h, n, d) = (tape.hidden, tape.bases, tape.output);
        let steps = seq.len();

        let mut loss = 0.0;
        let mut dc_acc = vec![0.0; (steps + 2) * d];
        let mut dh_next = vec![0.0; h];
        let mut dc = vec![0.0; d];
        let mut dhpm = vec![0.0; n];
        let mut da_pm = vec![0.0; n];
        let mut dh1 = vec![0.0; h];
        let mut da1 = vec![0.0; h];
        let mut dh = vec![0.0; h];
        let mut dh_prev = vec![0.0; h];
        let mut dan = vec![0.0; h];
        let mut daz = vec![0.0; h];
        let mut dar = vec![0.0; h];
        let mut drh = vec![0.0; h];
        let mut rh = vec![0.0; h];
        let mut dhin = vec![0.0; h];

        for t in (0..steps).rev() {
            let c_t = tape.output_at(t);
            for k in 0..d {
                let e = c_t[k] - seq.targets[t][k];
                loss += e * e;
                dc[k] = dc_acc[(t + 2) * d + k] + 2.0 * e;
            }
            let hpm = Tape::hid(&tape.hpm, t, n);
            let g = Tape::hid(&tape.g, t, n);
            let h1 = Tape::hid(&tape.h1, t, h);
            let h_t = Tape::hid(&tape.h, t + 1, h);
            let h_prev = Tape::hid(&tape.h, t, h);
            let hin = Tape::hid(&tape.hin, t, h);
            let r = Tape::hid(&tape.r, t, h);
            let z = Tape::hid(&tape.z, t, h);
            let nn = Tape::hid(&tape.n, t, h);

            grad.w_c.outer_add(&dc, hpm);
            dhpm.fill(0.0);
            self.w_c.matvec_t_add(&dc, &mut dhpm);
            for i in 0..n {
                da_pm[i] = g[i] * dhpm[i];
                grad.b_pm[i] += da_pm[i];
            }
            grad.w_pm.outer_add(&da_pm, h1);
            dh1.fill(0.0);
            self.w_pm.matvec_t_add(&da_pm, &mut dh1);
            for i in 0..h {
                da1[i] = dh1[i] * h1[i] * (1.0 - h1[i]);
                grad.b_1[i] += da1[i];
            }
            grad.w_1.outer_add(&da1, h_t);
            dh.copy_from_slice(&dh_next);
            self.w_1.matvec_t_add(&da1, &mut dh);

            for i in 0..h {
                let dn = dh[i] * (1.0 - z[i]);
                let dz = dh[i] * (h_prev[i] - nn[i]);
                dh_prev[i] = dh[i] * z[i];
                dan[i] = dn * (1.0 - nn[i] * nn[i]);
                daz[i] = dz * z[i] * (1.0 - z[i]);
                rh[i] = r[i] * h_prev[i];
                grad.b_h[i] += dan[i];
                grad.b_z[i] += daz[i];
            }
            grad.w_h.outer_add(&dan, hin);
            grad.u_h.outer_add(&dan, &rh);
            drh.fill(0.0);
            self.u_h.matvec_t_add(&dan, &mut drh);
            for i in 0..h {
                let dr = drh[i] * h_prev[i];
                dh_prev[i] += drh[i] * r[i];
                dar[i] = dr * r[i] * (1.0 - r[i]);
                grad.b_r[i] += dar[i];
            }
            grad.w_z.outer_add(&daz, hin);
            grad.u_z.outer_add(&daz, h_prev);
            grad.w_r.outer_add(&dar, hin);
            grad.u_r.outer_add(&dar, h_prev);
            self.u_z.matvec_t_add(&daz, &mut dh_prev);
            self.u_r.matvec_t_add(&dar, &mut dh_prev);

            dhin.fill(0.0);
            self.w_h.matvec_t_add(&dan, &mut dhin);
            self.w_z.matvec_t_add(&daz, &mut dhin);
            self.w_r.matvec_t_add(&dar, &mut dhin);
            for i in 0..h {
                dhin[i] *= 1.0 - hin[i] * hin[i];
                grad.b_in[i] += dhin[i];
            }
            let c1 = &tape.c[(t + 1) * d..(t + 2) * d];
            let c2 = &tape.c[t * d..(t + 1) * d];
            grad.w_f.outer_add(&dhin, &seq.inputs[t]);
            grad.w_c1.outer_add(&dhin, c1);
            grad.w_c2.outer_add(&dhin, c2);
            self.w_c1.matvec_t_add(&dhin, &mut dc_acc[(t + 1) * d..(t + 2) * d]);
            self.w_c2.matvec_t_add(&dhin, &mut dc_acc[t * d..(t + 1) * d]);

            std::mem::swap(&mut dh_next, &mut dh_prev);
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
            ("w_f", self.w_f.data()),
            ("w_c1", self.w_c1.data()),
            ("w_c2", self.w_c2.data()),
            ("b_in", &self.b_in),
            ("w_r", self.w_r.data()),
            ("w_z", self.w_z.data()),
            ("w_h", self.w_h.data()),
            ("u_r", self.u_r.data()),
            ("u_z", self.u_z.data()),
            ("u_h", self.u_h.data()),
            ("b_r", &self.b_r),
            ("b_z", &self.b_z),
            ("b_h", &self.b_h),
            ("w_1", self.w_1.data()),
            ("b_1", &self.b_1),
            ("w_pm", self.w_pm.data()),
            ("b_pm", &self.b_pm),
            ("w_c", self.w_c.data()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_f", self.w_f.data_mut()),
            ("w_c1", self.w_c1.data_mut()),
            ("w_c2", self.w_c2.data_mut()),
            ("b_in", &mut self.b_in),
            ("w_r", self.w_r.data_mut()),
            ("w_z", self.w_z.data_mut()),
            ("w_h", self.w_h.data_mut()),
            ("u_r", self.u_r.data_mut()),
            ("u_z", self.u_z.data_mut()),
            ("u_h", self.u_h.data_mut()),
            ("b_r", &mut self.b_r),
            ("b_z", &mut self.b_z),
            ("b_h", &mut self.b_h),
            ("w_1", self.w_1.data_mut()),
            ("b_1", &mut self.b_1),
            ("w_pm", self.w_pm.data_mut()),
            ("b_pm", &mut self.b_pm),
            ("w_c", self.w_c.data_mut()),
        ]
    }

    fn project_gradient(&self, grad: &mut Self) {
        if self.diagonal_recurrence {
            grad.u_r.keep_diagonal();
            grad.u_z.keep_diagonal();
            grad.u_h.keep_diagonal();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dims {
        Dims {
            hidden: 1,
            output: 1,
            phase_bases: 1,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = PmdrnnParams::constant(Dims::default(), 0.0).unwrap();
        let st = FeedbackState::zeros(p.dims());
        let ph = PhaseState::initial(4.6, 2.0);
        let (c, _) = p.forward(&[3.0, -1.0, 2.0, 0.1, 0.0, 5.0], &st, &ph).unwrap();
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn zero_phase_velocity_gates_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PmdrnnParams::init(Dims::default(), false, &mut rng).unwrap();
        let mut st = FeedbackState::zeros(p.dims());
        st.c_prev1 = vec![1.0, 2.0, 3.0];
        let ph = PhaseState { s: 0.4, u: 0.0, tau: 1.0 };
        let (c, next) = p.forward(&[1.0; 6], &st, &ph).unwrap();
        assert_eq!(c, vec![0.0; 3]);
        assert_eq!(next.c_prev2, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn hand_evaluated_single_unit() {
        let p = PmdrnnParams::constant(tiny(), 0.1).unwrap();
        let st = FeedbackState::zeros(tiny());
        let ph = PhaseState { s: 0.7, u: -0.5, tau: 1.0 };
        let df = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (c, next) = p.forward(&df, &st, &ph).unwrap();

        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let hin = (0.1f64 * 1.0 + 0.1).tanh();
        let r = sig(0.1 * hin + 0.1);
        let z = sig(0.1 * hin + 0.1);
        let n = (0.1 * hin + 0.1 * r * 0.0 + 0.1).tanh();
        let h = z * 0.0 + (1.0 - z) * n;
        let h1 = sig(0.1 * h + 0.1);
        // A single normalized basis function is identically 1.
        let g = 1.0 * -0.5;
        let hpm = g * (0.1 * h1 + 0.1);
        let expect = 0.1 * hpm;
        assert!((c[0] - expect).abs() < 1e-15, "{} vs {expect}", c[0]);
        assert!((next.h[0] - h).abs() < 1e-15);
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = PmdrnnParams::init(Dims::default(), false, &mut rng).unwrap();
        let phases = PhaseState::grid(4.6, 1.0, 0.1, 10).unwrap();
        let seq = Sequence {
            inputs: (0..10).map(|k| [k as f64 * 0.1; 6]).collect(),
            phases,
            targets: vec![vec![0.0; 3]; 10],
        };
        assert_eq!(p.predict(&seq).unwrap(), p.predict(&seq).unwrap());
        // The tape path agrees with repeated single steps.
        let mut st = FeedbackState::zeros(p.dims());
        let tape_out = p.predict(&seq).unwrap();
        for t in 0..10 {
            let (c, next) = p.forward(&seq.inputs[t], &st, &seq.phases[t]).unwrap();
            assert_eq!(c, tape_out[t]);
            st = next;
        }
    }

    #[test]
    fn diagonal_init_and_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PmdrnnParams::init(Dims::default(), true, &mut rng).unwrap();
        assert_eq!(p.u_h.get(0, 1), 0.0);
        let mut g = p.clone();
        p.project_gradient(&mut g);
        assert_eq!(g.u_r.get(2, 1), 0.0);
        assert_eq!(g.u_r.get(2, 2), p.u_r.get(2, 2));
    }

    #[test]
    fn validate_catches_shapes() {
        let mut p = PmdrnnParams::constant(Dims::default(), 0.0).unwrap();
        p.validate().unwrap();
        p.b_r.pop();
        assert!(p.validate().is_err());
    }
}
