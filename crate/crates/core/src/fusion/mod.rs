//! Central fusion of per-access-node DoA/ToA estimates.
//!
//! State `[p(3), v(3), ρ_UN, α]` for synchronized access nodes (Pos&Clock)
//! and additionally one offset slot per non-reference line-of-sight access
//! node for phase-locked networks (Pos&Sync). Offsets are relative to a
//! reference access node whose offset is zero by definition.

mod model;
mod ops;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{GaussianState, UtParams};

pub use model::{fusion_transition, measurement_jacobian, observe, observe_jacobian, predict_measurement, CORE_DIM, POSITION_EPS};
pub use ops::{add_an_slot, fuse_epoch, init_fusion, init_position_cl, manage_an_set, PositionFragment};

/// One access node's (elevation, azimuth, delay) estimate for one epoch.
///
/// Elevation is measured up from the horizontal plane, azimuth from the
/// x-axis; the delay includes the clock-offset difference.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMeasurement {
    pub an_id: usize,
    /// `(θ, φ, τ)` in rad, rad, s.
    pub y: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockModel {
    /// Access nodes synchronized to the reference.
    PosClock,
    /// Access nodes phase-locked with unknown constant offsets.
    PosSync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Ukf,
    Ekf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observables {
    DoaToa,
    DoaOnly,
}

/// One point of the filter-mode matrix, written as e.g. `posclock-ukf` or
/// `possync-ekf-doa` (DoA-only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FilterMode {
    pub clock: ClockModel,
    pub estimator: Estimator,
    pub observables: Observables,
}

impl FilterMode {
    pub const fn new(clock: ClockModel, estimator: Estimator, observables: Observables) -> Self {
        Self { clock, estimator, observables }
    }

    /// All eight combinations in a fixed order.
    pub fn all() -> Vec<FilterMode> {
        let mut out = Vec::with_capacity(8);
        for clock in [ClockModel::PosClock, ClockModel::PosSync] {
            for estimator in [Estimator::Ukf, Estimator::Ekf] {
                for observables in [Observables::DoaToa, Observables::DoaOnly] {
                    out.push(FilterMode::new(clock, estimator, observables));
                }
            }
        }
        out
    }

    pub fn uses_toa(&self) -> bool {
        self.observables == Observables::DoaToa
    }

    /// Rows per access node in the stacked measurement.
    pub fn rows_per_an(&self) -> usize {
        if self.uses_toa() {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clock = match self.clock {
            ClockModel::PosClock => "posclock",
            ClockModel::PosSync => "possync",
        };
        let est = match self.estimator {
            Estimator::Ukf => "ukf",
            Estimator::Ekf => "ekf",
        };
        write!(f, "{clock}-{est}")?;
        if self.observables == Observables::DoaOnly {
            write!(f, "-doa")?;
        }
        Ok(())
    }
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let bad = || Error::InvalidParameter(format!("unknown filter mode '{s}' (expected e.g. posclock-ukf or possync-ekf-doa)"));
        let clock = match parts.first().copied() {
            Some("posclock") => ClockModel::PosClock,
            Some("possync") => ClockModel::PosSync,
            _ => return Err(bad()),
        };
        let estimator = match parts.get(1).copied() {
            Some("ukf") => Estimator::Ukf,
            Some("ekf") => Estimator::Ekf,
            _ => return Err(bad()),
        };
        let observables = match parts.get(2).copied() {
            None => Observables::DoaToa,
            Some("doa") => Observables::DoaOnly,
            Some(_) => return Err(bad()),
        };
        if parts.len() > 3 {
            return Err(bad());
        }
        Ok(FilterMode::new(clock, estimator, observables))
    }
}

impl Serialize for FilterMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FilterMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for FilterMode {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "FilterMode".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({
            "type": "string",
            "pattern": "^(posclock|possync)-(ukf|ekf)(-doa)?$"
        })
    }
}

/// Fusion filter tuning and priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    /// Velocity process noise, m/s per √s.
    pub sigma_v: f64,
    /// Skew process noise of the user-node clock.
    pub sigma_eta: f64,
    /// Per-step random-walk std of access-node offsets, s.
    pub sigma_rho: f64,
    pub ut: UtParams,
    pub init_velocity_std: f64,
    pub init_offset_std: f64,
    pub init_skew_mean: f64,
    pub init_skew_std: f64,
    /// Floor of the initial per-axis position variance, m².
    pub position_var_floor: f64,
    /// When set, replaces each measurement's own covariance with this
    /// diagonal `(σ_θ, σ_φ, σ_τ)`.
    pub fixed_measurement_std: Option<[f64; 3]>,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            sigma_v: 3.5,
            sigma_eta: 1e-4,
            sigma_rho: 1e-9,
            ut: UtParams::default(),
            init_velocity_std: 5.0,
            init_offset_std: 100e-6,
            init_skew_mean: 25e-6,
            init_skew_std: 30e-6,
            position_var_floor: 100.0,
            fixed_measurement_std: None,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_v", self.sigma_v),
            ("sigma_eta", self.sigma_eta),
            ("sigma_rho", self.sigma_rho),
            ("init_velocity_std", self.init_velocity_std),
            ("init_offset_std", self.init_offset_std),
            ("init_skew_std", self.init_skew_std),
            ("position_var_floor", self.position_var_floor),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.init_skew_mean.is_finite() {
            return Err(Error::InvalidParameter("init_skew_mean must be finite".into()));
        }
        if let Some(std) = self.fixed_measurement_std {
            if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed_measurement_std must be positive, got {std:?}")));
            }
        }
        Ok(())
    }
}

/// A fusion filter for one user node.
#[derive(Debug, Clone)]
pub struct FusionState {
    pub state: GaussianState,
    pub mode: FilterMode,
    /// Access-node ids owning the offset slots `8..8+L` (Pos&Sync only).
    pub registry: Vec<usize>,
    pub reference_id: usize,
    /// Time of the last processed epoch.
    pub timestamp: f64,
}

impl FusionState {
    pub fn position(&self) -> Vector3<f64> {
        self.state.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.state.mean.fixed_rows::<3>(3).into_owned()
    }

    pub fn clock_offset(&self) -> f64 {
        self.state.mean[6]
    }

    pub fn clock_skew(&self) -> f64 {
        self.state.mean[7]
    }

    /// Slot index (0-based among the offset slots) of `an_id`, `None` for
    /// the reference node or in Pos&Clock mode.
    pub fn slot_of(&self, an_id: usize) -> Result<Option<usize>> {
        if self.mode.clock == ClockModel::PosClock || an_id == self.reference_id {
            return Ok(None);
        }
        match self.registry.iter().position(|&id| id == an_id) {
            Some(i) => Ok(Some(i)),
            None => Err(Error::InvalidParameter(format!("access node {an_id} has no offset slot"))),
        }
    }

    /// Estimated offset of `an_id` relative to the reference.
    pub fn an_offset(&self, an_id: usize) -> Option<f64> {
        match self.slot_of(an_id) {
            Ok(Some(i)) => Some(self.state.mean[CORE_DIM + i]),
            Ok(None) => Some(0.0),
            Err(_) => None,
        }
    }
}
