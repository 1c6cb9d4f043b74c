use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps a finite angle into (−π, π].
pub fn wrap_angle(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("angle {x}")));
    }
    Ok(wrap(x))
}

/// Infallible variant of [`wrap_angle`] for values already known finite.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
