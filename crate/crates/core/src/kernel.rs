use ndarray::Array2;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Which way a [`ConditionalKernel`] maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Rows indexed by source symbols, columns by codes (or reconstructions).
    Encoder,
    /// Rows indexed by codes, columns by reconstruction symbols.
    Decoder,
}

/// Row-stochastic matrix: row `i` is a distribution conditioned on symbol `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    matrix: Array2<f64>,
    orientation: Orientation,
}

impl ConditionalKernel {
    pub fn new(matrix: Array2<f64>, orientation: Orientation) -> Result<Self> {
        for (i, row) in matrix.rows().into_iter().enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "kernel row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "kernel row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            matrix,
            orientation,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[[i, j]]
    }

    /// `Σ_i weights_i · row_i`, the output marginal under an input pmf.
    pub fn push_forward(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for (row, &w) in self.matrix.rows().into_iter().zip(weights) {
            for (o, k) in out.iter_mut().zip(row) {
                *o += w * k;
            }
        }
        out
    }
}
