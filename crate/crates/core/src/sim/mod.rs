//! Synthetic ground truth: access-node grid, user trajectories, clocks,
//! line-of-sight selection and measurement generation.

mod trajectory;
mod world;

use nalgebra::Vector3;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::clock::ClockState;
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

pub use trajectory::{gen_trajectory, Trajectory, TrajectoryConfig, TrajectoryKind};
pub use world::{emit_epoch, write_truth_csv, AnClockMode, EpochData, EpochOutput, EpochTruth, MeasurementMode, NoiseConfig, World};

/// An access node. Offsets are relative to the reference node.
#[derive(Debug, Clone, PartialEq)]
pub struct AnNode {
    pub id: usize,
    pub position: Vector3<f64>,
    pub clock: ClockState,
    pub is_reference: bool,
}

/// Rectangular access-node grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Inter-site distance, m.
    pub spacing: f64,
    /// Grid extent along x and y, m. Nodes sit at `0, spacing, …` up to the
    /// extent.
    pub extent: [f64; 2],
    /// Mounting height, m.
    pub height: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            spacing: 50.0,
            extent: [100.0, 100.0],
            height: 7.0,
        }
    }
}

/// Builds the grid row by row (x fastest). Node 0 is the reference.
pub fn build_network(cfg: &NetworkConfig) -> Result<Vec<AnNode>> {
    if !(cfg.spacing > 0.0) || cfg.extent.iter().any(|e| !(*e >= 0.0)) || !cfg.height.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid network grid {cfg:?}")));
    }
    let count = |e: f64| (e / cfg.spacing + 1e-9).floor() as usize + 1;
    let (nx, ny) = (count(cfg.extent[0]), count(cfg.extent[1]));
    let mut nodes = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let id = nodes.len();
            nodes.push(AnNode {
                id,
                position: Vector3::new(ix as f64 * cfg.spacing, iy as f64 * cfg.spacing, cfg.height),
                clock: ClockState::new(0.0, 0.0),
                is_reference: id == 0,
            });
        }
    }
    Ok(nodes)
}

/// The `l` nearest nodes by 3D distance, nearest first; ties go to the
/// lower id. Asking for more nodes than exist returns all of them.
pub fn select_los(un_position: &Vector3<f64>, nodes: &[AnNode], l: usize) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = nodes.iter().map(|n| ((n.position - un_position).norm(), n.id)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(l).map(|(_, id)| id).collect()
}

/// `(elevation, azimuth, delay)` of the user node as seen from `an`, with
/// the delay including the offset difference `ρ_AN − ρ_UN`.
pub fn true_observables(un_position: &Vector3<f64>, an: &AnNode, un_clock: &ClockState, an_clock: &ClockState) -> Result<Vector3<f64>> {
    let d = un_position - an.position;
    let r3 = d.norm();
    if !(r3 > crate::fusion::POSITION_EPS) {
        return Err(Error::SingularGeometry(format!("user node at access node {}", an.id)));
    }
    let r2 = d[0].hypot(d[1]);
    Ok(Vector3::new(
        d[2].atan2(r2),
        d[1].atan2(d[0]),
        r3 / SPEED_OF_LIGHT + (an_clock.offset - un_clock.offset),
    ))
}
