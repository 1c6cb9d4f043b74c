use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix, DVector};

use super::eadf::Eadf;
use super::require_odd;
use crate::error::Result;

type C64 = Complex<f64>;

/// Unit-modulus Vandermonde vector `[e^{j k x}]` for
/// `k = −(m−1)/2 … (m−1)/2`.
pub fn vandermonde(x: f64, m: usize) -> DVector<C64> {
    let half = (m / 2) as f64;
    DVector::from_fn(m, |i, _| C64::from_polar(1.0, (i as f64 - half) * x))
}

fn vandermonde_derivative(x: f64, m: usize) -> DVector<C64> {
    let half = (m / 2) as f64;
    DVector::from_fn(m, |i, _| {
        let k = i as f64 - half;
        C64::new(0.0, k) * C64::from_polar(1.0, k * x)
    })
}

fn kron(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    let nb = b.len();
    DVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

/// Delay steering vector over `m_f` subcarriers spaced `f0` apart.
pub fn delay_steering(tau: f64, m_f: usize, f0: f64) -> Result<DVector<C64>> {
    require_odd("subcarrier count", m_f)?;
    Ok(vandermonde(TAU * f0 * tau, m_f))
}

/// `d(θ) ⊗ d(φ)` with `m_a` azimuth and `m_e` co-elevation modes.
pub fn angle_steering(phi: f64, theta: f64, m_a: usize, m_e: usize) -> Result<DVector<C64>> {
    require_odd("azimuth mode count", m_a)?;
    require_odd("elevation mode count", m_e)?;
    Ok(kron(&vandermonde(theta, m_e), &vandermonde(phi, m_a)))
}

/// Polarimetric response `B(θ, φ, τ)`: a (ports · subcarriers) × 2 matrix
/// with columns `G_H d(φ,θ) ⊗ G_f d(τ)` and `G_V d(φ,θ) ⊗ G_f d(τ)`.
pub fn polarimetric_response(eadf: &Eadf, theta: f64, phi: f64, tau: f64) -> DMatrix<C64> {
    let (a_h, a_v) = eadf.array_response(theta, phi);
    let f = &eadf.g_f * vandermonde(TAU * eadf.subcarrier_spacing * tau, eadf.subcarriers());
    let mut b = DMatrix::zeros(a_h.len() * f.len(), 2);
    b.set_column(0, &kron(&a_h, &f));
    b.set_column(1, &kron(&a_v, &f));
    b
}

/// Partial derivatives `[∂B/∂θ, ∂B/∂φ, ∂B/∂τ]`.
pub fn polarimetric_response_gradient(eadf: &Eadf, theta: f64, phi: f64, tau: f64) -> [DMatrix<C64>; 3] {
    let (ma, me) = (eadf.modes_az, eadf.modes_el);
    let w = TAU * eadf.subcarrier_spacing;
    let d_th = vandermonde(theta, me);
    let d_ph = vandermonde(phi, ma);
    let steer = kron(&d_th, &d_ph);
    let steer_th = kron(&vandermonde_derivative(theta, me), &d_ph);
    let steer_ph = kron(&d_th, &vandermonde_derivative(phi, ma));
    let f = &eadf.g_f * vandermonde(w * tau, eadf.subcarriers());
    let f_tau = &eadf.g_f * vandermonde_derivative(w * tau, eadf.subcarriers()) * C64::new(w, 0.0);

    let build = |s: &DVector<C64>, freq: &DVector<C64>| {
        let mut b = DMatrix::zeros(eadf.ports() * freq.len(), 2);
        b.set_column(0, &kron(&(&eadf.g_h * s), freq));
        b.set_column(1, &kron(&(&eadf.g_v * s), freq));
        b
    };
    [build(&steer_th, &f), build(&steer_ph, &f), build(&steer, &f_tau)]
}
