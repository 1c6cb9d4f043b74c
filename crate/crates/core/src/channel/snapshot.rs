use nalgebra::{Complex, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eadf::Eadf;
use super::response::polarimetric_response;
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// One beacon observed at one access node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    /// Ports × subcarriers channel vector (port-major).
    pub g: DVector<C64>,
    /// Per complex sample noise variance σ_n².
    pub noise_var: f64,
    pub an_id: usize,
    /// Seconds.
    pub timestamp: f64,
    /// Coarse frame-timing estimate of the delay, seconds. Resolves the
    /// `1/f0` ambiguity of the pilot-based delay; only its nearest alias
    /// is ever used.
    pub coarse_delay: Option<f64>,
}

/// σ_n² that gives `snr_db` for a noiseless channel vector `signal`, with
/// SNR = ‖signal‖² / (len · σ_n²).
pub fn noise_variance_for_snr(signal: &DVector<C64>, snr_db: f64) -> f64 {
    let power = signal.norm_squared() / signal.len() as f64;
    power / 10f64.powf(snr_db / 10.0)
}

/// `g = B(θ, φ, τ) γ + n` with complex-circular `n ~ CN(0, σ_n² I)`.
#[allow(clippy::too_many_arguments)]
pub fn generate_snapshot<R: Rng + ?Sized>(
    eadf: &Eadf,
    theta: f64,
    phi: f64,
    tau: f64,
    gamma: [C64; 2],
    noise_var: f64,
    rng: &mut R,
) -> Result<ChannelSnapshot> {
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let b = polarimetric_response(eadf, theta, phi, tau);
    let mut g = b.column(0) * gamma[0] + b.column(1) * gamma[1];
    if noise_var > 0.0 {
        let s = (noise_var / 2.0).sqrt();
        for v in g.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v += C64::new(s * re, s * im);
        }
    }
    Ok(ChannelSnapshot {
        g,
        noise_var,
        an_id: 0,
        timestamp: 0.0,
        coarse_delay: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_eadf, ArrayGeometry, EadfConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eadf() -> Eadf {
        synthesize_eadf(&ArrayGeometry::cylindrical(0.1), &EadfConfig::default()).unwrap()
    }

    #[test]
    fn noiseless_snapshot_is_b_gamma() {
        let e = eadf();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gamma = [C64::new(0.3, -0.2), C64::new(-0.5, 0.7)];
        let s = generate_snapshot(&e, 1.7, 0.6, 80e-9, gamma, 0.0, &mut rng).unwrap();
        let b = polarimetric_response(&e, 1.7, 0.6, 80e-9);
        let expect = b.column(0) * gamma[0] + b.column(1) * gamma[1];
        assert_eq!(s.g, expect);
    }

    #[test]
    fn pure_noise_sample_variance() {
        let e = eadf();
        assert!(e.snapshot_len() >= 200);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = C64::new(0.0, 0.0);
        let s = generate_snapshot(&e, 1.0, 0.0, 0.0, [zero, zero], 0.25, &mut rng).unwrap();
        let var = s.g.norm_squared() / s.g.len() as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn noise_energy_calibration() {
        // E‖n‖² = len · σ_n², checked over many draws of a small vector
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let len = 10;
        let draws = 100_000;
        let sigma2 = 2.0;
        let s = (sigma2 / 2.0f64).sqrt();
        let mut total = 0.0;
        for _ in 0..draws {
            for _ in 0..len {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                total += (s * re).powi(2) + (s * im).powi(2);
            }
        }
        let mean = total / draws as f64;
        assert!((mean / (len as f64 * sigma2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn snr_definition() {
        let e = eadf();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gamma = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let clean = generate_snapshot(&e, 1.4, 2.0, 0.0, gamma, 0.0, &mut rng).unwrap();
        let var = noise_variance_for_snr(&clean.g, 20.0);
        let snr = clean.g.norm_squared() / (clean.g.len() as f64 * var);
        assert!((snr - 100.0).abs() < 1e-9);
        assert!(generate_snapshot(&e, 1.4, 2.0, 0.0, gamma, -1.0, &mut rng).is_err());
    }
}
