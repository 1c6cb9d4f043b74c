//! Clock offset / skew truth model and the clock process-noise blocks used
//! by the fusion filters.
//!
//! Truth evolves as `α[k] = β α[k−1] + η[k]`, `ρ[k] = ρ[k−1] + α[k] Δt`
//! with `η ~ N(0, σ_η²)` per step. Offsets are in seconds, skews are
//! dimensionless.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    /// Offset ρ, seconds.
    pub offset: f64,
    /// Skew α, s/s.
    pub skew: f64,
    /// Rounding error carried from offset accumulation.
    #[serde(skip)]
    carry: f64,
}

impl ClockState {
    pub fn new(offset: f64, skew: f64) -> Self {
        Self { offset, skew, carry: 0.0 }
    }

    /// Adds `inc` to the offset with compensated summation so long runs
    /// stay linear to the last bit.
    fn accumulate(&mut self, inc: f64) {
        let x = inc + self.carry;
        let t = self.offset + x;
        let err = if self.offset.abs() >= x.abs() {
            (self.offset - t) + x
        } else {
            (x - t) + self.offset
        };
        self.offset = t;
        self.carry = err;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ClockTruthParams {
    /// Skew autoregression coefficient.
    pub beta: f64,
    /// Per-step skew noise standard deviation.
    pub sigma_eta: f64,
    /// Initial offset standard deviation, seconds.
    pub offset_std: f64,
    /// Initial skew mean.
    pub skew_mean: f64,
    /// Initial skew standard deviation.
    pub skew_std: f64,
}

impl Default for ClockTruthParams {
    fn default() -> Self {
        Self {
            beta: 1.0 - 1e-9,
            sigma_eta: 6.3e-8,
            offset_std: 100e-6,
            skew_mean: 25e-6,
            skew_std: 30e-6,
        }
    }
}

impl ClockTruthParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta, self.sigma_eta, self.offset_std, self.skew_mean, self.skew_std]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("clock parameters".into()));
        }
        if self.sigma_eta < 0.0 || self.offset_std < 0.0 || self.skew_std < 0.0 {
            return Err(Error::InvalidParameter("clock standard deviations must be >= 0".into()));
        }
        if self.beta.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!("|beta| must be <= 1, got {}", self.beta)));
        }
        Ok(())
    }

    /// Draws an initial clock from the configured offset / skew priors.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> ClockState {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        ClockState::new(self.offset_std * z0, self.skew_mean + self.skew_std * z1)
    }
}

/// Advances a clock by one step of length `dt`. The skew is updated first
/// and the new skew drives the offset increment.
pub fn step_clock<R: Rng + ?Sized>(c: &ClockState, dt: f64, p: &ClockTruthParams, rng: &mut R) -> Result<ClockState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("clock step dt must be > 0, got {dt}")));
    }
    if !c.offset.is_finite() || !c.skew.is_finite() {
        return Err(Error::NonFinite("clock state".into()));
    }
    let eta = if p.sigma_eta > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        p.sigma_eta * z
    } else {
        0.0
    };
    let mut next = *c;
    next.skew = p.beta * c.skew + eta;
    next.accumulate(next.skew * dt);
    Ok(next)
}

/// Process-noise blocks for the fusion state: the 2×2 offset/skew block of
/// the user node and the L×L random-walk block of access-node offsets.
pub fn clock_process_blocks(dt: f64, sigma_eta: f64, sigma_rho: f64, l: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = sigma_eta * sigma_eta;
    let skew_block = DMatrix::from_row_slice(2, 2, &[q * dt.powi(3) / 3.0, q * dt.powi(2) / 2.0, q * dt.powi(2) / 2.0, q * dt]);
    let an_block = DMatrix::identity(l, l) * (sigma_rho * sigma_rho);
    (skew_block, an_block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless(beta: f64) -> ClockTruthParams {
        ClockTruthParams {
            beta,
            sigma_eta: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn single_step_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = step_clock(&ClockState::new(0.0, 25e-6), 0.1, &noiseless(1.0), &mut rng).unwrap();
        assert!((c.offset - 2.5e-6).abs() < 1e-21);
        assert_eq!(c.skew, 25e-6);
    }

    #[test]
    fn zero_skew_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = ClockState::new(3e-6, 0.0);
        for _ in 0..1000 {
            c = step_clock(&c, 0.1, &noiseless(0.5), &mut rng).unwrap();
        }
        assert_eq!(c.offset, 3e-6);
    }

    #[test]
    fn closed_form_linear_growth() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let alpha = 25e-6;
        let mut c = ClockState::new(0.0, alpha);
        for k in 1..=500u32 {
            c = step_clock(&c, 0.1, &noiseless(1.0), &mut rng).unwrap();
            let expect = f64::from(k) * 0.1 * alpha;
            assert!(((c.offset - expect) / expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ClockTruthParams::default();
        assert!(step_clock(&ClockState::new(0.0, 0.0), 0.0, &p, &mut rng).is_err());
        assert!(step_clock(&ClockState::new(f64::NAN, 0.0), 0.1, &p, &mut rng).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = ClockTruthParams::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = p.sample_initial(&mut rng);
            for _ in 0..100 {
                c = step_clock(&c, 0.1, &p, &mut rng).unwrap();
            }
            (c.offset.to_bits(), c.skew.to_bits())
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn process_blocks() {
        let (q, qr) = clock_process_blocks(1.0, 1.0, 3.0, 2);
        assert!((q[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(q[(0, 1)], 0.5);
        assert_eq!(q[(1, 0)], 0.5);
        assert_eq!(q[(1, 1)], 1.0);
        assert_eq!(qr, DMatrix::identity(2, 2) * 9.0);
        let (z, _) = clock_process_blocks(0.1, 0.0, 1.0, 0);
        assert_eq!(z, DMatrix::zeros(2, 2));
    }

    #[test]
    fn skew_block_is_psd() {
        for &(dt, s) in &[(0.1, 1e-4), (1.0, 2.0), (1e-3, 6.3e-8), (10.0, 0.5)] {
            let (q, _) = clock_process_blocks(dt, s, 0.0, 0);
            let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
            let expect = s.powi(4) * dt.powi(4) / 12.0;
            assert!(det >= -1e-30 && (det - expect).abs() <= 1e-9 * expect.max(1e-300));
        }
    }
}
