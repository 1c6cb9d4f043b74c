use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::channel::EadfConfig;
use crate::clock::ClockTruthParams;
use crate::error::{Error, Result};
use crate::fusion::{FilterMode, FusionParams};
use crate::sim::{AnClockMode, MeasurementMode, NetworkConfig, NoiseConfig, TrajectoryConfig, TrajectoryKind};
use crate::tracker::TrackerConfig;

/// Which trajectory kind each replication uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryChoice {
    Vehicle,
    Drone,
    /// Even replications drive, odd ones fly.
    Alternate,
}

impl TrajectoryChoice {
    pub fn kind(self, replication: usize) -> TrajectoryKind {
        match self {
            TrajectoryChoice::Vehicle => TrajectoryKind::Vehicle,
            TrajectoryChoice::Drone => TrajectoryKind::Drone,
            TrajectoryChoice::Alternate if replication.is_multiple_of(2) => TrajectoryKind::Vehicle,
            TrajectoryChoice::Alternate => TrajectoryKind::Drone,
        }
    }
}

/// Where the fusion filters start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// Centroid of the first line-of-sight nodes, zero velocity, clock
    /// priors from the fusion parameters.
    Centroid,
    /// Mean at the true state (covariance unchanged); for consistency
    /// checks.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    /// User-node clock truth.
    pub un: ClockTruthParams,
    pub an_mode: AnClockMode,
    /// Std of phase-locked access-node offsets, s.
    pub an_offset_std: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            un: ClockTruthParams::default(),
            an_mode: AnClockMode::Synchronized,
            an_offset_std: 100e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    /// Hz; sets the wavelength of the cylindrical array.
    pub carrier_frequency: f64,
    pub eadf: EadfConfig,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 3.5e9,
            eadf: EadfConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    pub mode: MeasurementMode,
    pub noise: NoiseConfig,
    pub array: ArrayConfig,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            mode: MeasurementMode::Direct,
            noise: NoiseConfig::default(),
            array: ArrayConfig::default(),
        }
    }
}

/// A complete batch experiment. Every field has a default, so `{}` is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Replication `i` runs with seed `seed + i`.
    pub seed: u64,
    pub replications: usize,
    /// Epoch spacing, s.
    pub dt: f64,
    /// Epochs excluded from every RMSE.
    pub warmup_epochs: usize,
    /// Line-of-sight nodes per epoch.
    pub los_count: usize,
    pub network: NetworkConfig,
    /// Reference node id; unset picks the node nearest to the start of each
    /// trajectory.
    pub reference_an: Option<usize>,
    pub trajectory_kind: TrajectoryChoice,
    pub trajectory: TrajectoryConfig,
    pub clocks: ClockConfig,
    pub measurement: MeasurementConfig,
    pub tracker: TrackerConfig,
    pub fusion: FusionParams,
    pub init: InitPolicy,
    pub modes: Vec<FilterMode>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            replications: 20,
            dt: 0.1,
            warmup_epochs: 50,
            los_count: 2,
            network: NetworkConfig::default(),
            reference_an: None,
            trajectory_kind: TrajectoryChoice::Alternate,
            trajectory: TrajectoryConfig::default(),
            clocks: ClockConfig::default(),
            measurement: MeasurementConfig::default(),
            tracker: TrackerConfig::default(),
            fusion: FusionParams::default(),
            init: InitPolicy::Centroid,
            modes: FilterMode::all(),
        }
    }
}

fn at(path: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter(m) | Error::NonFinite(m) => Error::config(path, m),
        other => Error::config(path, other.to_string()),
    }
}

impl ScenarioConfig {
    /// Parses and validates a JSON configuration. Errors name the offending
    /// field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.los_count == 0 {
            return Err(Error::config("los_count", "must be >= 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one filter mode is required"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return Err(Error::config(format!("modes[{i}]"), format!("duplicate mode {m}")));
            }
        }
        let epochs = (self.trajectory.duration / self.dt + 1e-9).floor() as usize + 1;
        if self.warmup_epochs >= epochs {
            return Err(Error::config("warmup_epochs", format!("must be below the epoch count {epochs}")));
        }
        let nodes = crate::sim::build_network(&self.network).map_err(at("network"))?;
        if let Some(id) = self.reference_an {
            if id >= nodes.len() {
                return Err(Error::config("reference_an", format!("node {id} does not exist ({} nodes)", nodes.len())));
            }
        }
        self.trajectory.validate().map_err(at("trajectory"))?;
        self.clocks.un.validate().map_err(at("clocks.un"))?;
        if !(self.clocks.an_offset_std >= 0.0) || !self.clocks.an_offset_std.is_finite() {
            return Err(Error::config("clocks.an_offset_std", "must be finite and >= 0"));
        }
        self.measurement.noise.validate().map_err(at("measurement.noise"))?;
        let f = self.measurement.array.carrier_frequency;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::config("measurement.array.carrier_frequency", format!("must be positive, got {f}")));
        }
        self.tracker.validate().map_err(at("tracker"))?;
        self.fusion.validate().map_err(at("fusion"))?;
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        (self.trajectory.duration / self.dt + 1e-9).floor() as usize + 1
    }

    /// JSON schema of the configuration file.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
    }
}
