//! Synthetic multiantenna-multicarrier channel.
//!
//! Angles follow one convention throughout: azimuth `phi` in (−π, π]
//! measured from the x-axis, and `theta` the co-elevation (angle from the
//! +z axis) in [0, π]. The array response is represented by its effective
//! aperture distribution function (EADF): a truncated 2D Fourier series on
//! the torus `(theta, phi) ∈ [0, 2π)²`, evaluated with Vandermonde steering
//! vectors.

mod array;
mod eadf;
mod response;
mod snapshot;

pub use array::{ArrayGeometry, ElementPattern, Port};
pub use eadf::{synthesize_eadf, Eadf, EadfConfig, EadfJson};
pub use response::{angle_steering, delay_steering, polarimetric_response, polarimetric_response_gradient, vandermonde};
pub use snapshot::{generate_snapshot, noise_variance_for_snr, ChannelSnapshot};

use crate::error::{Error, Result};

pub(crate) fn require_odd(name: &str, m: usize) -> Result<()> {
    if m == 0 || m.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("{name} must be odd and >= 1, got {m}")));
    }
    Ok(())
}
