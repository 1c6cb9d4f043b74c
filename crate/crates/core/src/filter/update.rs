use nalgebra::{DMatrix, DVector};

use super::angle::wrap;
use super::linalg::{solve_spd, symmetrize};
use super::ut::sigma_points;
use super::{GaussianState, LinearTransition, StateTag, UtParams};
use crate::error::{Error, Result};

/// `mean ← F mean`, `cov ← F cov Fᵀ + Q`.
pub fn predict_linear(state: &GaussianState, model: &LinearTransition) -> Result<GaussianState> {
    if model.dim() != state.dim() {
        return Err(Error::Dimension(format!(
            "transition is {}x{}, state has {} entries",
            model.dim(),
            model.dim(),
            state.dim()
        )));
    }
    let mean = &model.f * &state.mean;
    let cov = &model.f * &state.cov * model.f.transpose() + &model.q;
    let mut out = GaussianState::from_parts(mean, cov, state.layout.clone());
    wrap_tagged(&mut out.mean, &out.layout);
    Ok(out)
}

fn wrap_tagged(v: &mut DVector<f64>, layout: &[StateTag]) {
    for (x, tag) in v.iter_mut().zip(layout) {
        if *tag == StateTag::Angle {
            *x = wrap(*x);
        }
    }
}

/// `a − b` with angle-tagged components wrapped.
fn difference(a: &DVector<f64>, b: &DVector<f64>, layout: &[StateTag]) -> DVector<f64> {
    let mut d = a - b;
    wrap_tagged(&mut d, layout);
    d
}

/// Weighted mean where angle-tagged components are averaged as wrapped
/// offsets from the first sample.
fn weighted_mean(samples: &[DVector<f64>], weights: &DVector<f64>, layout: &[StateTag]) -> DVector<f64> {
    let anchor = &samples[0];
    let mut acc = DVector::zeros(anchor.len());
    for (w, s) in weights.iter().zip(samples) {
        acc += difference(s, anchor, layout) * *w;
    }
    let mut mean = anchor + acc;
    wrap_tagged(&mut mean, layout);
    mean
}

fn check_measurement_shapes(y: &DVector<f64>, r: &DMatrix<f64>, residual_layout: &[StateTag]) -> Result<()> {
    let m = y.len();
    if r.shape() != (m, m) || residual_layout.len() != m {
        return Err(Error::Dimension(format!(
            "measurement {m}, R {:?}, residual layout {}",
            r.shape(),
            residual_layout.len()
        )));
    }
    if y.iter().chain(r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement or R".into()));
    }
    Ok(())
}

fn evaluate<H>(h: &H, points: &[DVector<f64>], m: Option<usize>) -> Result<Vec<DVector<f64>>>
where
    H: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let ys = points.iter().map(h).collect::<Result<Vec<_>>>()?;
    let m = m.unwrap_or(ys[0].len());
    if ys.iter().any(|y| y.len() != m) {
        return Err(Error::Dimension(format!("measurement function must return {m} entries")));
    }
    if ys.iter().any(|y| y.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("measurement function output".into()));
    }
    Ok(ys)
}

/// Kalman correction given cross-covariance `C`, innovation covariance `S`
/// and innovation `nu`.
fn correct(prior: &GaussianState, c: &DMatrix<f64>, s: &DMatrix<f64>, nu: &DVector<f64>) -> Result<GaussianState> {
    let gain = solve_spd(s, &c.transpose())?.transpose();
    let mean = &prior.mean + &gain * nu;
    let cov = &prior.cov - &gain * s * gain.transpose();
    let mut out = GaussianState::from_parts(mean, cov, prior.layout.clone());
    wrap_tagged(&mut out.mean, &out.layout);
    Ok(out)
}

/// Unscented measurement update.
///
/// Residual components tagged [`StateTag::Angle`] (innovation, sigma-point
/// spread around the predicted measurement) are wrapped to (−π, π].
pub fn ukf_update<H>(prior: &GaussianState, y: &DVector<f64>, h: H, r: &DMatrix<f64>, params: &UtParams, residual_layout: &[StateTag]) -> Result<GaussianState>
where
    H: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_measurement_shapes(y, r, residual_layout)?;
    let set = sigma_points(prior, params)?;
    let ys = evaluate(&h, &set.points, Some(y.len()))?;
    let mu = weighted_mean(&ys, &set.weights_mean, residual_layout);

    let m = y.len();
    let n = prior.dim();
    let mut s = r.clone();
    let mut c = DMatrix::zeros(n, m);
    for ((w, x), yy) in set.weights_cov.iter().zip(&set.points).zip(&ys) {
        let dy = difference(yy, &mu, residual_layout);
        let dx = difference(x, &prior.mean, &prior.layout);
        s += &dy * dy.transpose() * *w;
        c += &dx * dy.transpose() * *w;
    }
    symmetrize(&mut s);
    let nu = difference(y, &mu, residual_layout);
    correct(prior, &c, &s, &nu)
}

/// First-order (extended) Kalman measurement update with the same residual
/// wrapping as [`ukf_update`].
pub fn ekf_update<H, J>(prior: &GaussianState, y: &DVector<f64>, h: H, jacobian: J, r: &DMatrix<f64>, residual_layout: &[StateTag]) -> Result<GaussianState>
where
    H: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    check_measurement_shapes(y, r, residual_layout)?;
    let predicted = h(&prior.mean)?;
    let jac = jacobian(&prior.mean)?;
    if predicted.len() != y.len() || jac.shape() != (y.len(), prior.dim()) {
        return Err(Error::Dimension(format!(
            "h returned {}, jacobian {:?}, expected {}x{}",
            predicted.len(),
            jac.shape(),
            y.len(),
            prior.dim()
        )));
    }
    let c = &prior.cov * jac.transpose();
    let mut s = &jac * &c + r;
    symmetrize(&mut s);
    let nu = difference(y, &predicted, residual_layout);
    correct(prior, &c, &s, &nu)
}

/// Weighted statistical linear regression of `h` about a Gaussian.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `Cᵀ P⁻¹`, an m×n matrix.
    pub jacobian: DMatrix<f64>,
    /// Sigma-point mean of `h`.
    pub mean: DVector<f64>,
    /// `h` evaluated at the (mapped) central sigma point.
    pub at_mean: DVector<f64>,
}

/// Propagates sigma points of `state` through `h` and regresses the output
/// on the input. `map` is applied to each sigma point before evaluating `h`
/// (e.g. to fold angles into a feasible region); deviations are always taken
/// from the unmapped points.
pub fn statistical_linearization<H, M>(state: &GaussianState, h: H, params: &UtParams, map: M, residual_layout: &[StateTag]) -> Result<Linearization>
where
    H: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    M: Fn(&mut DVector<f64>),
{
    let set = sigma_points(state, params)?;
    let mapped = set.mapped(map);
    let ys = evaluate(&h, &mapped, None)?;
    let m = ys[0].len();
    if residual_layout.len() != m {
        return Err(Error::Dimension(format!("residual layout {} vs output {m}", residual_layout.len())));
    }
    let mu = weighted_mean(&ys, &set.weights_mean, residual_layout);
    let n = state.dim();
    let mut c = DMatrix::zeros(n, m);
    for ((w, x), yy) in set.weights_cov.iter().zip(&set.points).zip(&ys) {
        let dy = difference(yy, &mu, residual_layout);
        let dx = x - &state.mean;
        c += dx * dy.transpose() * *w;
    }
    let jacobian = solve_spd(&state.cov, &c)?.transpose();
    Ok(Linearization {
        jacobian,
        mean: mu,
        at_mean: ys[0].clone(),
    })
}
