use std::io::Write;
use std::sync::Arc;

use nalgebra::{Complex, Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{select_los, true_observables, AnNode, Trajectory};
use crate::channel::{generate_snapshot, noise_variance_for_snr, polarimetric_response, ChannelSnapshot, Eadf};
use crate::clock::{step_clock, ClockState, ClockTruthParams};
use crate::error::{Error, Result};
use crate::filter::wrap;
use crate::fusion::EpochMeasurement;

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Noisy angles and delays drawn around the truth.
    Direct,
    /// Channel snapshots for the per-node trackers.
    Channel,
}

/// How access-node clocks relate to the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum AnClockMode {
    /// All offsets zero.
    Synchronized,
    /// Constant nonzero offsets with zero mutual skew.
    PhaseLocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_elevation_deg: f64,
    pub sigma_azimuth_deg: f64,
    /// Seconds.
    pub sigma_delay: f64,
    /// Per-snapshot SNR in channel mode; `None` gives noiseless snapshots.
    pub snr_db: Option<f64>,
    /// Quantum of the coarse delay hint as a fraction of the delay period;
    /// `None` omits the hint.
    pub coarse_delay_fraction: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_elevation_deg: 1.0,
            sigma_azimuth_deg: 1.0,
            sigma_delay: 3e-9,
            snr_db: Some(20.0),
            coarse_delay_fraction: Some(0.25),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_elevation_deg", self.sigma_elevation_deg),
            ("sigma_azimuth_deg", self.sigma_azimuth_deg),
            ("sigma_delay", self.sigma_delay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("snr_db must be finite".into()));
        }
        if self.coarse_delay_fraction.is_some_and(|f| !(f > 0.0 && f < 0.5)) {
            return Err(Error::InvalidParameter("coarse_delay_fraction must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    fn stds(&self) -> Vector3<f64> {
        Vector3::new(self.sigma_elevation_deg.to_radians(), self.sigma_azimuth_deg.to_radians(), self.sigma_delay)
    }
}

/// Ground truth of one user node moving through an access-node grid.
#[derive(Debug, Clone)]
pub struct World {
    pub nodes: Vec<AnNode>,
    pub eadf: Option<Arc<Eadf>>,
    pub trajectory: Trajectory,
    pub un_clock: ClockState,
    pub un_clock_params: ClockTruthParams,
    pub los_count: usize,
    next: usize,
}

impl World {
    /// Draws the user clock and, for phase-locked nodes, the constant
    /// offsets of every non-reference node.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        mut nodes: Vec<AnNode>,
        reference_id: usize,
        an_clocks: AnClockMode,
        an_offset_std: f64,
        trajectory: Trajectory,
        un_clock_params: ClockTruthParams,
        los_count: usize,
        eadf: Option<Arc<Eadf>>,
        rng: &mut R,
    ) -> Result<Self> {
        un_clock_params.validate()?;
        if nodes.iter().enumerate().any(|(i, n)| n.id != i) {
            return Err(Error::InvalidParameter("access-node ids must be 0..n in order".into()));
        }
        if reference_id >= nodes.len() {
            return Err(Error::InvalidParameter(format!("reference node {reference_id} does not exist")));
        }
        if los_count == 0 {
            return Err(Error::InvalidParameter("line-of-sight count must be >= 1".into()));
        }
        if !(an_offset_std >= 0.0) || !an_offset_std.is_finite() {
            return Err(Error::InvalidParameter(format!("an_offset_std must be >= 0, got {an_offset_std}")));
        }
        if trajectory.is_empty() {
            return Err(Error::InvalidParameter("empty trajectory".into()));
        }
        let un_clock = un_clock_params.sample_initial(rng);
        for n in &mut nodes {
            n.is_reference = n.id == reference_id;
            let offset = match an_clocks {
                AnClockMode::PhaseLocked if !n.is_reference => {
                    let z: f64 = StandardNormal.sample(rng);
                    an_offset_std * z
                }
                _ => 0.0,
            };
            n.clock = ClockState::new(offset, 0.0);
        }
        Ok(Self {
            nodes,
            eadf,
            trajectory,
            un_clock,
            un_clock_params,
            los_count,
            next: 0,
        })
    }

    /// Index of the next epoch `emit_epoch` will produce.
    pub fn next_epoch(&self) -> usize {
        self.next
    }

    pub fn epochs(&self) -> usize {
        self.trajectory.len()
    }

    pub fn reference_id(&self) -> usize {
        self.nodes.iter().find(|n| n.is_reference).map(|n| n.id).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTruth {
    pub epoch: usize,
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub un_clock: ClockState,
    /// Line-of-sight node ids, nearest first.
    pub los: Vec<usize>,
    /// Offset of each line-of-sight node, parallel to `los`.
    pub an_offsets: Vec<f64>,
    /// `(elevation, azimuth, delay)` per line-of-sight node.
    pub observables: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpochData {
    Direct(Vec<EpochMeasurement>),
    Channel(Vec<ChannelSnapshot>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutput {
    pub truth: EpochTruth,
    pub data: EpochData,
}

/// Advances the world by one epoch and generates the measurements of every
/// line-of-sight node. The user clock is stepped before every epoch but the
/// first; timestamps are `k·Δt`.
pub fn emit_epoch<R: Rng + ?Sized>(world: &mut World, mode: MeasurementMode, noise: &NoiseConfig, rng: &mut R) -> Result<EpochOutput> {
    noise.validate()?;
    let k = world.next;
    if k >= world.trajectory.len() {
        return Err(Error::InvalidParameter(format!("trajectory has only {} epochs", world.trajectory.len())));
    }
    let eadf = match mode {
        MeasurementMode::Channel => Some(
            world
                .eadf
                .clone()
                .ok_or_else(|| Error::InvalidParameter("channel mode needs an array model".into()))?,
        ),
        MeasurementMode::Direct => None,
    };
    if k > 0 {
        world.un_clock = step_clock(&world.un_clock, world.trajectory.dt, &world.un_clock_params, rng)?;
    }
    let time = world.trajectory.time(k);
    let position = world.trajectory.positions[k];
    let los = select_los(&position, &world.nodes, world.los_count);
    let mut observables = Vec::with_capacity(los.len());
    let mut an_offsets = Vec::with_capacity(los.len());
    for &id in &los {
        let an = &world.nodes[id];
        observables.push(true_observables(&position, an, &world.un_clock, &an.clock)?);
        an_offsets.push(an.clock.offset);
    }

    let data = match eadf {
        None => {
            let std = noise.stds();
            let r = Matrix3::from_diagonal(&std.component_mul(&std));
            let meas = los
                .iter()
                .zip(&observables)
                .map(|(&an_id, truth)| {
                    let mut y = *truth;
                    for i in 0..3 {
                        let z: f64 = StandardNormal.sample(rng);
                        y[i] += std[i] * z;
                    }
                    y[1] = wrap(y[1]);
                    EpochMeasurement { an_id, y, r, timestamp: time }
                })
                .collect();
            EpochData::Direct(meas)
        }
        Some(eadf) => {
            let quantum = noise.coarse_delay_fraction.map(|f| f * eadf.delay_period());
            let mut snaps = Vec::with_capacity(los.len());
            for (&an_id, truth) in los.iter().zip(&observables) {
                let (theta, phi, tau) = (std::f64::consts::FRAC_PI_2 - truth[0], truth[1], truth[2]);
                let gamma = [unit_gain(rng), unit_gain(rng)];
                let noise_var = match noise.snr_db {
                    Some(snr) => {
                        let b = polarimetric_response(&eadf, theta, phi, tau);
                        let clean = b.column(0) * gamma[0] + b.column(1) * gamma[1];
                        noise_variance_for_snr(&clean, snr)
                    }
                    None => 0.0,
                };
                let mut s = generate_snapshot(&eadf, theta, phi, tau, gamma, noise_var, rng)?;
                s.an_id = an_id;
                s.timestamp = time;
                s.coarse_delay = quantum.map(|q| (tau / q).round() * q);
                snaps.push(s);
            }
            EpochData::Channel(snaps)
        }
    };
    world.next += 1;
    Ok(EpochOutput {
        truth: EpochTruth {
            epoch: k,
            time,
            position,
            velocity: world.trajectory.velocities[k],
            un_clock: world.un_clock,
            los,
            an_offsets,
            observables,
        },
        data,
    })
}

/// Complex-circular gain with unit expected power.
fn unit_gain<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Writes one row per (epoch, line-of-sight node).
pub fn write_truth_csv<W: Write>(truth: &[EpochTruth], mut w: W) -> Result<()> {
    writeln!(w, "epoch,t,x,y,z,vx,vy,vz,rho_un,alpha_un,an_id,rho_an,elevation,azimuth,delay")?;
    for e in truth {
        for ((id, off), obs) in e.los.iter().zip(&e.an_offsets).zip(&e.observables) {
            write!(w, "{},{:.16e}", e.epoch, e.time)?;
            for v in e.position.iter().chain(e.velocity.iter()) {
                write!(w, ",{v:.16e}")?;
            }
            write!(w, ",{:.16e},{:.16e},{id},{off:.16e}", e.un_clock.offset, e.un_clock.skew)?;
            writeln!(w, ",{:.16e},{:.16e},{:.16e}", obs[0], obs[1], obs[2])?;
        }
    }
    Ok(())
}
