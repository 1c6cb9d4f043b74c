use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{asymmetry, symmetrize};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// How a state (or residual) component behaves under arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    Linear,
    /// Radians; differences are wrapped to (−π, π].
    Angle,
    /// Seconds.
    ClockOffset,
    /// Dimensionless (s/s).
    ClockSkew,
}

/// Mean and covariance of a Gaussian with a per-component layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub layout: Vec<StateTag>,
}

impl GaussianState {
    /// Validates shapes, finiteness, symmetry and positive semidefiniteness,
    /// then stores an exactly symmetric covariance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, layout: Vec<StateTag>) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) || layout.len() != n {
            return Err(Error::Dimension(format!("mean {n}, cov {:?}, layout {}", cov.shape(), layout.len())));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian state".into()));
        }
        let scale = cov.abs().max();
        if asymmetry(&cov) > SYMMETRY_TOL * scale {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let mut state = Self { mean, cov, layout };
        symmetrize(&mut state.cov);
        state.check_psd()?;
        Ok(state)
    }

    /// Builds a state from parts produced internally; only symmetrizes.
    pub(crate) fn from_parts(mean: DVector<f64>, mut cov: DMatrix<f64>, layout: Vec<StateTag>) -> Self {
        debug_assert_eq!(mean.len(), layout.len());
        symmetrize(&mut cov);
        Self { mean, cov, layout }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Minimum eigenvalue must be ≥ −1e-10·trace.
    pub fn check_psd(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let min = self.cov.symmetric_eigenvalues().min();
        if min < -PSD_TOL * self.cov.trace().abs() {
            return Err(Error::InvalidParameter(format!("covariance not PSD (min eigenvalue {min:.3e})")));
        }
        Ok(())
    }

    /// Marginal over the listed indices, in the listed order.
    pub fn marginal(&self, idx: &[usize]) -> GaussianState {
        let mean = DVector::from_fn(idx.len(), |i, _| self.mean[idx[i]]);
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        let layout = idx.iter().map(|&i| self.layout[i]).collect();
        GaussianState { mean, cov, layout }
    }
}

/// Linear Gaussian transition `s' = F s + u`, `u ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransition {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl LinearTransition {
    pub fn new(f: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        if !f.is_square() || f.shape() != q.shape() {
            return Err(Error::Dimension(format!("F {:?}, Q {:?}", f.shape(), q.shape())));
        }
        if asymmetry(&q) > SYMMETRY_TOL * q.abs().max() {
            return Err(Error::InvalidParameter("Q is not symmetric".into()));
        }
        Ok(Self { f, q })
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }
}
