use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{Complex, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Far-field amplitude model of one array port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ElementPattern {
    /// Unit response to both polarizations from every direction.
    Isotropic,
    /// Short dipole along `orientation`: the response to a field with
    /// polarization `e` is the projection `orientation · e`.
    ShortDipole { orientation: [f64; 3] },
}

/// One receive port: phase centre plus pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Port {
    /// Metres, relative to the array reference point.
    pub position: [f64; 3],
    pub pattern: ElementPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub ports: Vec<Port>,
    /// Carrier wavelength, metres.
    pub wavelength: f64,
}

/// Unit propagation-direction and polarization basis for `(theta, phi)`.
/// Valid on the whole torus: `theta ∈ (π, 2π)` describes the same direction
/// as `(2π − theta, phi + π)` with both polarization vectors negated.
pub(crate) fn basis(theta: f64, phi: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let u = Vector3::new(st * cp, st * sp, ct);
    let e_theta = Vector3::new(ct * cp, ct * sp, -st);
    let e_phi = Vector3::new(-sp, cp, 0.0);
    (u, e_theta, e_phi)
}

impl ArrayGeometry {
    pub fn new(ports: Vec<Port>, wavelength: f64) -> Result<Self> {
        if ports.len() < 2 {
            return Err(Error::InvalidParameter(format!("array needs >= 2 ports, got {}", ports.len())));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength}")));
        }
        if ports.iter().any(|p| p.position.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("port position".into()));
        }
        Ok(Self { ports, wavelength })
    }

    /// Ten dual-polarized (±45° slant) cross-dipoles on two circles of
    /// radius λ/2 at heights 0 and λ/4; five per circle, the upper circle
    /// rotated by 36°. Twenty ports in total.
    pub fn cylindrical(wavelength: f64) -> Self {
        let radius = wavelength / 2.0;
        let mut ports = Vec::with_capacity(20);
        for ring in 0..2 {
            let height = ring as f64 * wavelength / 4.0;
            for i in 0..5 {
                let psi = TAU * i as f64 / 5.0 + ring as f64 * PI / 5.0;
                let (s, c) = psi.sin_cos();
                let position = [radius * c, radius * s, height];
                let tangent = [-s, c, 0.0];
                for sign in [1.0, -1.0] {
                    let orientation = [FRAC_1_SQRT_2 * tangent[0], FRAC_1_SQRT_2 * tangent[1], sign * FRAC_1_SQRT_2];
                    ports.push(Port {
                        position,
                        pattern: ElementPattern::ShortDipole { orientation },
                    });
                }
            }
        }
        Self { ports, wavelength }
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    /// Ideal complex response of every port to horizontal (`e_phi`) and
    /// vertical (`e_theta`) excitation from `(theta, phi)`.
    pub fn ideal_response(&self, theta: f64, phi: f64) -> Vec<(Complex<f64>, Complex<f64>)> {
        let (u, e_theta, e_phi) = basis(theta, phi);
        let k = TAU / self.wavelength;
        self.ports
            .iter()
            .map(|p| {
                let r = Vector3::from(p.position);
                let phase = Complex::from_polar(1.0, k * u.dot(&r));
                let (h, v) = match p.pattern {
                    ElementPattern::Isotropic => (1.0, 1.0),
                    ElementPattern::ShortDipole { orientation } => {
                        let o = Vector3::from(orientation);
                        (o.dot(&e_phi), o.dot(&e_theta))
                    }
                };
                (phase * h, phase * v)
            })
            .collect()
    }
}
