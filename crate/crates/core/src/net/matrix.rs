use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + rows) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `out += W x`
    #[inline]
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o += acc;
        }
    }

    /// `out += Wᵀ y`
    #[inline]
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (yv, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if *yv == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * yv;
            }
        }
    }

    /// `W += y xᵀ`
    #[inline]
    pub fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (yv, row) in y.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if *yv == 0.0 {
                continue;
            }
            for (w, v) in row.iter_mut().zip(x) {
                *w += yv * v;
            }
        }
    }

    /// Zeroes every off-diagonal entry.
    pub fn keep_diagonal(&mut self) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if r != c {
                    self.data[r * self.cols + c] = 0.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_hand_values() {
        let w = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = vec![1.0, 1.0];
        w.matvec_add(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-1.0, -1.0]);
        let mut out = vec![0.0; 3];
        w.matvec_t_add(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
        let mut g = Matrix::zeros(2, 3);
        g.outer_add(&[1.0, 2.0], &[3.0, 0.0, 1.0]);
        assert_eq!(g.data(), &[3.0, 0.0, 1.0, 6.0, 0.0, 2.0]);
    }

    #[test]
    fn shape_checked() {
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }
}
