//! Per-access-node DoA/ToA tracker.
//!
//! State `[τ, φ, θ, Δτ, Δφ, Δθ]` under a constant-velocity model. The
//! measurement is the whole channel snapshot: for a state `s` the model is
//! the projection of the snapshot onto the span of `B(θ, φ, τ)`, i.e. the
//! path weights are the conditional least-squares solution for that state.
//! Complex vectors are handled as stacked real and imaginary parts.
//!
//! Each update runs a few Gauss-Newton iterations in information form. The
//! Jacobian of every iteration is a statistical linearization from sigma
//! points drawn about the current iterate; the final inverse information
//! matrix is the posterior covariance.
//!
//! The pilot grid only determines `τ` modulo `1/f0`. When the predicted
//! delay uncertainty is large (after initialization, or while the skew is
//! still unknown) a 1D delay search at the predicted angles is folded in as
//! a pseudo-measurement, and the snapshot's coarse delay picks the alias.

use std::f64::consts::{PI, TAU};

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::channel::{polarimetric_response, vandermonde, ChannelSnapshot, Eadf};
use crate::error::{Error, Result};
use crate::filter::linalg::{inverse_spd, solve_spd, symmetrize};
use crate::filter::{ekf_update, predict_linear, statistical_linearization, wrap, GaussianState, LinearTransition, StateTag, UtParams};
use crate::fusion::EpochMeasurement;

type C64 = Complex<f64>;

const TAU_IDX: usize = 0;
const PHI_IDX: usize = 1;
const THETA_IDX: usize = 2;

/// Layout of the tracker state.
pub const TRACKER_LAYOUT: [StateTag; 6] = [
    StateTag::ClockOffset,
    StateTag::Angle,
    StateTag::Angle,
    StateTag::Linear,
    StateTag::Linear,
    StateTag::Linear,
];

/// Initialization grid, in degrees and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub azimuth_step_deg: f64,
    pub coelevation_step_deg: f64,
    pub delay_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            azimuth_step_deg: 3.0,
            coelevation_step_deg: 3.0,
            delay_step: 25e-9,
        }
    }
}

/// Explicit search grids for [`init_tracker`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub azimuth: Vec<f64>,
    pub coelevation: Vec<f64>,
    /// Delays within one period `[0, 1/f0)`.
    pub delay: Vec<f64>,
}

impl SearchGrid {
    /// Full circle in azimuth, `[0, π]` in co-elevation, one delay period.
    pub fn uniform(cfg: &GridConfig, delay_period: f64) -> Result<Self> {
        let steps = [cfg.azimuth_step_deg, cfg.coelevation_step_deg, cfg.delay_step];
        if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid steps must be positive, got {steps:?}")));
        }
        let da = cfg.azimuth_step_deg.to_radians();
        let de = cfg.coelevation_step_deg.to_radians();
        let na = (TAU / da).round().max(1.0) as usize;
        let ne = (PI / de).round() as usize + 1;
        let nt = (delay_period / cfg.delay_step).round().max(1.0) as usize;
        Ok(Self {
            azimuth: (0..na).map(|i| wrap(-PI + (i as f64 + 1.0) * TAU / na as f64)).collect(),
            coelevation: (0..ne).map(|i| (i as f64 * PI / (ne - 1).max(1) as f64).min(PI)).collect(),
            delay: (0..nt).map(|i| i as f64 * delay_period / nt as f64).collect(),
        })
    }

    fn cell(&self) -> [f64; 3] {
        fn step(v: &[f64], fallback: f64) -> f64 {
            if v.len() < 2 {
                fallback
            } else {
                (v[1] - v[0]).abs()
            }
        }
        [step(&self.delay, 1e-7), step(&self.azimuth, 0.1), step(&self.coelevation, 0.1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Rate-of-change noise of the delay, s/s per √s.
    pub sigma_tau: f64,
    /// Rate-of-change noise of the azimuth, rad/s per √s.
    pub sigma_phi: f64,
    /// Rate-of-change noise of the co-elevation, rad/s per √s.
    pub sigma_theta: f64,
    pub ut: UtParams,
    pub gn_iters: usize,
    pub grid: GridConfig,
    /// Initial standard deviation of the delay rate (clock skew plus radial
    /// velocity over c).
    pub init_delay_rate_std: f64,
    /// Initial standard deviation of the angle rates, rad/s.
    pub init_angle_rate_std: f64,
    /// Run a delay search whenever the predicted delay std exceeds this.
    pub acquisition_threshold: f64,
    pub acquisition_step: f64,
    /// Matched power over snapshot energy below which an initialization is
    /// flagged as unreliable.
    pub min_power_ratio: f64,
    /// Normalized residual energy above which an epoch counts as divergent.
    pub divergence_ratio: f64,
    pub divergence_epochs: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_tau: 2e-8,
            sigma_phi: 0.3,
            sigma_theta: 0.3,
            ut: UtParams {
                alpha: 1.0,
                beta: 2.0,
                kappa: -3.0,
                lambda_override: Some(24.0),
            },
            gn_iters: 3,
            grid: GridConfig::default(),
            init_delay_rate_std: 60e-6,
            init_angle_rate_std: 0.5,
            acquisition_threshold: 50e-9,
            acquisition_step: 10e-9,
            min_power_ratio: 0.25,
            divergence_ratio: 3.0,
            divergence_epochs: 3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.sigma_tau,
            self.sigma_phi,
            self.sigma_theta,
            self.init_delay_rate_std,
            self.init_angle_rate_std,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("tracker noise stds must be finite and >= 0".into()));
        }
        if self.gn_iters == 0 {
            return Err(Error::InvalidParameter("gn_iters must be >= 1".into()));
        }
        if !(self.acquisition_step > 0.0) || !(self.acquisition_threshold > 0.0) {
            return Err(Error::InvalidParameter("acquisition step and threshold must be positive".into()));
        }
        if !(self.divergence_ratio > 0.0) || self.divergence_epochs == 0 {
            return Err(Error::InvalidParameter("divergence detector needs a positive ratio and epoch count".into()));
        }
        Ok(())
    }
}

/// One tracker instance.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub state: GaussianState,
    pub config: TrackerConfig,
    pub an_id: usize,
    pub timestamp: f64,
    /// Matched-power ratio of the initializing grid search.
    pub init_power_ratio: f64,
    /// The initializing snapshot looked like noise.
    pub low_power: bool,
    /// Consecutive epochs with a normalized residual above the threshold.
    pub divergent_epochs: usize,
    /// Set once `divergent_epochs` reaches the configured count; the owner
    /// should re-run [`init_tracker`].
    pub needs_reinit: bool,
}

impl TrackerState {
    pub fn delay(&self) -> f64 {
        self.state.mean[TAU_IDX]
    }

    pub fn azimuth(&self) -> f64 {
        self.state.mean[PHI_IDX]
    }

    pub fn coelevation(&self) -> f64 {
        self.state.mean[THETA_IDX]
    }
}

/// Result of one [`tracker_step`].
#[derive(Debug, Clone)]
pub struct TrackerOutput {
    /// `(φ̂, θ̂, τ̂)` with θ̂ the co-elevation.
    pub estimate: Vector3<f64>,
    /// Covariance of `(θ̂, φ̂, τ̂)`.
    pub cov: Matrix3<f64>,
    /// Residual energy over its expectation under the noise model.
    pub residual_ratio: f64,
}

impl TrackerOutput {
    /// Converts to the fusion convention: elevation above the horizon
    /// (`π/2 − θ̂`), then azimuth and delay.
    pub fn to_measurement(&self, an_id: usize, timestamp: f64) -> EpochMeasurement {
        let y = Vector3::new(PI / 2.0 - self.estimate[1], self.estimate[0], self.estimate[2]);
        let flip = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        EpochMeasurement {
            an_id,
            y,
            r: flip * self.cov * flip,
            timestamp,
        }
    }
}

/// Constant-velocity transition for `[τ, φ, θ, Δτ, Δφ, Δθ]`.
pub fn tracker_transition(dt: f64, sigma_tau: f64, sigma_phi: f64, sigma_theta: f64) -> LinearTransition {
    let d = [sigma_tau * sigma_tau, sigma_phi * sigma_phi, sigma_theta * sigma_theta];
    let mut f = DMatrix::identity(6, 6);
    let mut q = DMatrix::zeros(6, 6);
    for (i, di) in d.iter().enumerate() {
        f[(i, i + 3)] = dt;
        q[(i, i)] = dt.powi(3) / 3.0 * di;
        q[(i, i + 3)] = dt.powi(2) / 2.0 * di;
        q[(i + 3, i)] = dt.powi(2) / 2.0 * di;
        q[(i + 3, i + 3)] = dt * di;
    }
    LinearTransition { f, q }
}

/// Folds `(θ, φ)` into θ ∈ [0, π], φ ∈ (−π, π] by reflection through the
/// poles. Returns whether θ was reflected.
pub fn fold_angles(theta: &mut f64, phi: &mut f64) -> bool {
    let mut t = theta.rem_euclid(TAU);
    let mut reflected = false;
    if t > PI {
        t = TAU - t;
        reflected = true;
    }
    if reflected {
        *phi += PI;
    }
    *theta = t;
    *phi = wrap(*phi);
    reflected
}

fn fold_point(x: &mut DVector<f64>) {
    let (mut t, mut p) = (x[THETA_IDX], x[PHI_IDX]);
    fold_angles(&mut t, &mut p);
    x[THETA_IDX] = t;
    x[PHI_IDX] = p;
}

/// Canonicalizes a posterior: a reflected θ also reverses the sign of its
/// rate, so the θ and Δθ rows and columns of the covariance change sign.
fn canonicalize(state: &mut GaussianState) {
    let (mut t, mut p) = (state.mean[THETA_IDX], state.mean[PHI_IDX]);
    if fold_angles(&mut t, &mut p) {
        state.mean[THETA_IDX + 3] = -state.mean[THETA_IDX + 3];
        for idx in [THETA_IDX, THETA_IDX + 3] {
            state.cov.row_mut(idx).neg_mut();
            state.cov.column_mut(idx).neg_mut();
        }
    }
    state.mean[THETA_IDX] = t;
    state.mean[PHI_IDX] = p;
}

fn stack(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Solves the 2×2 Hermitian system `gram · x = z`, falling back to the
/// stronger column alone when the two responses are (nearly) collinear.
fn solve_gram(gram: &[[C64; 2]; 2], z: &[C64; 2]) -> [C64; 2] {
    let (g11, g22, g12) = (gram[0][0].re, gram[1][1].re, gram[0][1]);
    let det = g11 * g22 - g12.norm_sqr();
    if det > 1e-10 * g11 * g22 && det > 0.0 {
        [(z[0] * g22 - g12 * z[1]) / det, (z[1] * g11 - g12.conj() * z[0]) / det]
    } else if g11 >= g22 && g11 > 0.0 {
        [z[0] / g11, C64::new(0.0, 0.0)]
    } else if g22 > 0.0 {
        [C64::new(0.0, 0.0), z[1] / g22]
    } else {
        [C64::new(0.0, 0.0); 2]
    }
}

/// Projection of `g` onto the column span of the (ports·subcarriers)×2
/// response `b`.
fn project(b: &DMatrix<C64>, g: &DVector<C64>) -> DVector<C64> {
    let (c0, c1) = (b.column(0), b.column(1));
    let gram = [[c0.dotc(&c0), c0.dotc(&c1)], [c1.dotc(&c0), c1.dotc(&c1)]];
    let z = [c0.dotc(g), c1.dotc(g)];
    let gamma = solve_gram(&gram, &z);
    c0 * gamma[0] + c1 * gamma[1]
}

/// `‖P_B g‖²` for `B = [a_h ⊗ f, a_v ⊗ f]`, given `w = G conj(f)` where `G`
/// is the snapshot reshaped ports × subcarriers and `fnorm2 = ‖f‖²`.
fn matched_power(a_h: &DVector<C64>, a_v: &DVector<C64>, w: &DVector<C64>, fnorm2: f64) -> f64 {
    let z = [a_h.dotc(w), a_v.dotc(w)];
    let gram = [
        [C64::new(a_h.norm_squared() * fnorm2, 0.0), a_h.dotc(a_v) * fnorm2],
        [a_v.dotc(a_h) * fnorm2, C64::new(a_v.norm_squared() * fnorm2, 0.0)],
    ];
    let x = solve_gram(&gram, &z);
    (z[0].conj() * x[0] + z[1].conj() * x[1]).re
}

/// Per-delay pieces for [`matched_power`].
fn delay_terms(eadf: &Eadf, g: &DVector<C64>, taus: &[f64]) -> Vec<(DVector<C64>, f64)> {
    let (ports, mf) = (eadf.ports(), eadf.subcarriers());
    let gm = DMatrix::from_fn(ports, mf, |p, k| g[p * mf + k]);
    taus.iter()
        .map(|&tau| {
            let f = &eadf.g_f * vandermonde(TAU * eadf.subcarrier_spacing * tau, mf);
            (&gm * f.conjugate(), f.norm_squared())
        })
        .collect()
}

fn check_snapshot(snapshot: &ChannelSnapshot, eadf: &Eadf) -> Result<()> {
    if snapshot.g.len() != eadf.snapshot_len() {
        return Err(Error::Dimension(format!(
            "snapshot has {} samples, EADF expects {}",
            snapshot.g.len(),
            eadf.snapshot_len()
        )));
    }
    if snapshot.g.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("channel snapshot".into()));
    }
    Ok(())
}

/// Moves `tau` by whole delay periods to the alias nearest `reference`.
fn nearest_alias(tau: f64, reference: f64, period: f64) -> f64 {
    tau + period * ((reference - tau) / period).round()
}

/// Grid-search initialization on one snapshot.
pub fn init_tracker(snapshot: &ChannelSnapshot, eadf: &Eadf, grid: &SearchGrid, config: &TrackerConfig) -> Result<TrackerState> {
    config.validate()?;
    check_snapshot(snapshot, eadf)?;
    if grid.azimuth.is_empty() || grid.coelevation.is_empty() || grid.delay.is_empty() {
        return Err(Error::InvalidParameter("empty initialization grid".into()));
    }
    let energy = snapshot.g.norm_squared();
    if energy == 0.0 {
        return Err(Error::InvalidParameter("all-zero snapshot".into()));
    }
    let terms = delay_terms(eadf, &snapshot.g, &grid.delay);
    let w = DMatrix::from_columns(&terms.iter().map(|(w, _)| w.clone()).collect::<Vec<_>>());
    let fnorm2: Vec<f64> = terms.iter().map(|(_, f)| *f).collect();
    let (ports, ma, me) = (eadf.ports(), eadf.modes_az, eadf.modes_el);
    let half = (ma / 2) as f64;
    let d_phi = DMatrix::from_fn(ma, grid.azimuth.len(), |k, j| C64::from_polar(1.0, (k as f64 - half) * grid.azimuth[j]));

    // Contracting the EADF over the co-elevation modes first makes the
    // azimuth sweep a single small matrix product per co-elevation.
    let best = grid
        .coelevation
        .par_iter()
        .map(|&theta| {
            let d_t = vandermonde(theta, me);
            let mut c_h = DMatrix::<C64>::zeros(ports, ma);
            let mut c_v = DMatrix::<C64>::zeros(ports, ma);
            for (ie, d) in d_t.iter().enumerate() {
                c_h += eadf.g_h.columns(ie * ma, ma) * *d;
                c_v += eadf.g_v.columns(ie * ma, ma) * *d;
            }
            let a_h = c_h * &d_phi;
            let a_v = c_v * &d_phi;
            let z_h = a_h.adjoint() * &w;
            let z_v = a_v.adjoint() * &w;
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
            for (j, &phi) in grid.azimuth.iter().enumerate() {
                let (h, v) = (a_h.column(j), a_v.column(j));
                let (nh, nv, x) = (h.norm_squared(), v.norm_squared(), h.dotc(&v));
                for (t, &tau) in grid.delay.iter().enumerate() {
                    let f = fnorm2[t];
                    let gram = [[C64::new(nh * f, 0.0), x * f], [x.conj() * f, C64::new(nv * f, 0.0)]];
                    let z = [z_h[(j, t)], z_v[(j, t)]];
                    let sol = solve_gram(&gram, &z);
                    let p = (z[0].conj() * sol[0] + z[1].conj() * sol[1]).re;
                    if p > best.0 {
                        best = (p, theta, phi, tau);
                    }
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, 0.0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let (power, theta, phi, mut tau) = best;
    if let Some(hint) = snapshot.coarse_delay {
        tau = nearest_alias(tau, hint, eadf.delay_period());
    }
    let ratio = power / energy;
    let cell = grid.cell();
    let mean = DVector::from_vec(vec![tau, phi, theta, 0.0, 0.0, 0.0]);
    let var = [
        cell[0] * cell[0],
        cell[1] * cell[1],
        cell[2] * cell[2],
        config.init_delay_rate_std.powi(2),
        config.init_angle_rate_std.powi(2),
        config.init_angle_rate_std.powi(2),
    ];
    let mut state = GaussianState::new(mean, DMatrix::from_diagonal(&DVector::from_row_slice(&var)), TRACKER_LAYOUT.to_vec())?;
    canonicalize(&mut state);
    Ok(TrackerState {
        state,
        config: config.clone(),
        an_id: snapshot.an_id,
        timestamp: snapshot.timestamp,
        init_power_ratio: ratio,
        low_power: ratio < config.min_power_ratio,
        divergent_epochs: 0,
        needs_reinit: false,
    })
}

/// Delay search at fixed angles; returns the best delay within the window.
fn acquire_delay(eadf: &Eadf, g: &DVector<C64>, theta: f64, phi: f64, center: f64, half_width: f64, step: f64) -> f64 {
    let n = (2.0 * half_width / step).ceil().max(1.0) as usize;
    let taus: Vec<f64> = (0..=n).map(|i| center - half_width + i as f64 * 2.0 * half_width / n as f64).collect();
    let (a_h, a_v) = eadf.array_response(theta, phi);
    let terms = delay_terms(eadf, g, &taus);
    let mut best = (f64::NEG_INFINITY, center);
    for (&tau, (w, fnorm2)) in taus.iter().zip(&terms) {
        let p = matched_power(&a_h, &a_v, w, *fnorm2);
        if p > best.0 {
            best = (p, tau);
        }
    }
    best.1
}

/// Folds a delay search into the prior as a scalar pseudo-measurement.
fn acquisition_update(prior: &GaussianState, snapshot: &ChannelSnapshot, eadf: &Eadf, config: &TrackerConfig) -> Result<GaussianState> {
    let period = eadf.delay_period();
    let sd = prior.cov[(TAU_IDX, TAU_IDX)].sqrt();
    let (mut theta, mut phi) = (prior.mean[THETA_IDX], prior.mean[PHI_IDX]);
    fold_angles(&mut theta, &mut phi);
    let center = prior.mean[TAU_IDX];
    let half = (4.0 * sd).min(period / 2.0);
    let found = acquire_delay(eadf, &snapshot.g, theta, phi, center, half, config.acquisition_step);
    let reference = match snapshot.coarse_delay {
        Some(hint) if sd > period / 4.0 => hint,
        _ => center,
    };
    let tau = nearest_alias(found, reference, period);
    let y = DVector::from_element(1, tau);
    let r = DMatrix::from_element(1, 1, config.acquisition_step.powi(2));
    ekf_update(
        prior,
        &y,
        |x| Ok(DVector::from_element(1, x[TAU_IDX])),
        |_| {
            let mut h = DMatrix::zeros(1, 6);
            h[(0, TAU_IDX)] = 1.0;
            Ok(h)
        },
        &r,
        &[StateTag::Linear],
    )
}

fn model_output(eadf: &Eadf, g: &DVector<C64>, x: &DVector<f64>) -> DVector<f64> {
    let b = polarimetric_response(eadf, x[THETA_IDX], x[PHI_IDX], x[TAU_IDX]);
    stack(&project(&b, g))
}

/// One predict + iterated update cycle.
pub fn tracker_step(tracker: &TrackerState, snapshot: &ChannelSnapshot, eadf: &Eadf, dt: f64) -> Result<(TrackerState, TrackerOutput)> {
    check_snapshot(snapshot, eadf)?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be finite and >= 0, got {dt}")));
    }
    let cfg = &tracker.config;
    let model = tracker_transition(dt, cfg.sigma_tau, cfg.sigma_phi, cfg.sigma_theta);
    let mut prior = predict_linear(&tracker.state, &model)?;
    if prior.cov[(TAU_IDX, TAU_IDX)].sqrt() > cfg.acquisition_threshold {
        prior = acquisition_update(&prior, snapshot, eadf, cfg)?;
    }

    let g = &snapshot.g;
    let len = g.len();
    let y = stack(g);
    let noise_floor = 1e-10 * g.norm_squared() / len as f64;
    let r = snapshot.noise_var.max(noise_floor) / 2.0;
    let residual_layout = vec![StateTag::Linear; 2 * len];
    let h = |x: &DVector<f64>| Ok(model_output(eadf, g, x));

    let prior_info = inverse_spd(&prior.cov)?;
    let mut iterate = prior.clone();
    for _ in 0..cfg.gn_iters {
        let lin = statistical_linearization(&iterate, h, &cfg.ut, fold_point, &residual_layout)?;
        let mut jac = lin.jacobian;
        // the snapshot does not depend on the rates
        jac.columns_mut(3, 3).fill(0.0);
        let mut dx = &iterate.mean - &prior.mean;
        dx[PHI_IDX] = wrap(dx[PHI_IDX]);
        dx[THETA_IDX] = wrap(dx[THETA_IDX]);
        let grad = jac.transpose() * (&y - &lin.at_mean) / r - &prior_info * dx;
        let mut info = &prior_info + jac.transpose() * &jac / r;
        symmetrize(&mut info);
        let step = solve_spd(&info, &DMatrix::from_column_slice(6, 1, grad.as_slice()))?;
        let mean = &iterate.mean + step.column(0);
        let cov = inverse_spd(&info)?;
        iterate = GaussianState::from_parts(mean, cov, prior.layout.clone());
    }
    canonicalize(&mut iterate);
    if iterate.mean.iter().chain(iterate.cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("tracker posterior", f64::INFINITY));
    }

    let residual = (&y - h(&iterate.mean)?).norm_squared();
    let dof = 2.0 * (len as f64 - 2.0).max(1.0);
    let residual_ratio = residual / (r * dof);
    let divergent_epochs = if residual_ratio > cfg.divergence_ratio {
        tracker.divergent_epochs + 1
    } else {
        0
    };

    let m = &iterate.mean;
    let estimate = Vector3::new(m[PHI_IDX], m[THETA_IDX], m[TAU_IDX]);
    let order = [THETA_IDX, PHI_IDX, TAU_IDX];
    let cov = Matrix3::from_fn(|i, j| iterate.cov[(order[i], order[j])]);

    let next = TrackerState {
        state: iterate,
        config: cfg.clone(),
        an_id: tracker.an_id,
        timestamp: snapshot.timestamp,
        init_power_ratio: tracker.init_power_ratio,
        low_power: tracker.low_power,
        divergent_epochs,
        needs_reinit: tracker.needs_reinit || divergent_epochs >= cfg.divergence_epochs,
    };
    Ok((next, TrackerOutput { estimate, cov, residual_ratio }))
}
