use nalgebra::DVector;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::linalg::cholesky_jittered;
use super::GaussianState;
use crate::error::{Error, Result};

/// Scaled unscented transform parameters.
///
/// `lambda = alpha² (n + kappa) − n` unless `lambda_override` is set, in
/// which case that value is used for every state dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub lambda_override: Option<f64>,
}

impl Default for UtParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            lambda_override: None,
        }
    }
}

impl UtParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Self {
        Self {
            alpha,
            beta,
            kappa,
            lambda_override: None,
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        match self.lambda_override {
            Some(l) => l,
            None => self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64,
        }
    }

    fn validate(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be >= 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        let lambda = self.lambda(n);
        let spread = n as f64 + lambda;
        if spread == 0.0 || !spread.is_finite() {
            return Err(Error::InvalidParameter(format!("n + lambda = {spread} (n = {n})")));
        }
        Ok(lambda)
    }
}

/// Mean and covariance weights for the 2n+1 sigma points.
#[derive(Debug, Clone, PartialEq)]
pub struct UtWeights {
    pub mean: DVector<f64>,
    pub cov: DVector<f64>,
    pub lambda: f64,
}

pub fn ut_weights(n: usize, params: &UtParams) -> Result<UtWeights> {
    let lambda = params.validate(n)?;
    let denom = n as f64 + lambda;
    let wi = 1.0 / (2.0 * denom);
    let mut mean = DVector::from_element(2 * n + 1, wi);
    let mut cov = mean.clone();
    mean[0] = lambda / denom;
    cov[0] = lambda / denom + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(UtWeights { mean, cov, lambda })
}

/// Symmetric sigma-point set: `points[0]` is the mean, `points[i]` and
/// `points[n + i]` sit at `±√(n+λ)` times column `i` of the lower Cholesky
/// factor.
#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights_mean: DVector<f64>,
    pub weights_cov: DVector<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copies of the points with `map` applied to each.
    pub fn mapped(&self, map: impl Fn(&mut DVector<f64>)) -> Vec<DVector<f64>> {
        self.points
            .iter()
            .map(|p| {
                let mut q = p.clone();
                map(&mut q);
                q
            })
            .collect()
    }
}

pub fn sigma_points(state: &GaussianState, params: &UtParams) -> Result<SigmaPointSet> {
    let n = state.dim();
    let w = ut_weights(n, params)?;
    let spread = n as f64 + w.lambda;
    if spread < 0.0 {
        return Err(Error::InvalidParameter(format!("n + lambda = {spread} is negative")));
    }
    let root = cholesky_jittered(&state.cov)? * spread.sqrt();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(state.mean.clone());
    for i in 0..n {
        points.push(&state.mean + root.column(i));
    }
    for i in 0..n {
        points.push(&state.mean - root.column(i));
    }
    Ok(SigmaPointSet {
        points,
        weights_mean: w.mean,
        weights_cov: w.cov,
    })
}
