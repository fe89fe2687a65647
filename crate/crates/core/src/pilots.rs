//! DFT pilot codebook.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{CMat, CVec};

/// Unnormalized DFT codebook: column `k` is pilot `k`, every column has
/// squared norm `pilot_len` and distinct columns are orthogonal.
#[derive(Debug, Clone)]
pub struct PilotBook {
    matrix: CMat,
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn pilot(&self, index: usize) -> CVec {
        self.matrix.column(index).into_owned()
    }
}

/// `Phi[n][k] = exp(-j 2 pi n k / pilot_len)`.
pub fn dft_pilots(pilot_len: usize) -> PilotBook {
    assert!(pilot_len >= 1, "pilot length must be positive");
    let tau = pilot_len as f64;
    let matrix = CMat::from_fn(pilot_len, pilot_len, |n, k| {
        // Reduce n*k modulo tau first to keep the phase argument small.
        let nk = (n * k) % pilot_len;
        Complex64::from_polar(1.0, -2.0 * PI * nk as f64 / tau)
    });
    PilotBook { matrix }
}
