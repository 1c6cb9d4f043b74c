use nalgebra::{DMatrix, DVector, Vector3};

use super::ClockModel;
use super::FusionState;
use crate::clock::clock_process_blocks;
use crate::error::{Error, Result};
use crate::filter::linalg::block_diag;
use crate::filter::LinearTransition;
use crate::SPEED_OF_LIGHT;

/// Dimension of the position/velocity/clock core shared by both models.
pub const CORE_DIM: usize = 8;

/// Minimum UN-AN separation (3D, and horizontal for the elevation row).
pub const POSITION_EPS: f64 = 1e-6;

/// Constant-velocity position model, offset/skew clock model and `L`
/// random-walk access-node offsets (Pos&Sync only).
pub fn fusion_transition(clock: ClockModel, dt: f64, sigma_v: f64, sigma_eta: f64, sigma_rho: f64, l: usize) -> LinearTransition {
    let l = if clock == ClockModel::PosClock { 0 } else { l };
    let n = CORE_DIM + l;
    let mut f = DMatrix::identity(n, n);
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f[(6, 7)] = dt;

    let qv = sigma_v * sigma_v;
    let mut kinematic = DMatrix::zeros(6, 6);
    for i in 0..3 {
        kinematic[(i, i)] = qv * dt.powi(3) / 3.0;
        kinematic[(i, i + 3)] = qv * dt.powi(2) / 2.0;
        kinematic[(i + 3, i)] = qv * dt.powi(2) / 2.0;
        kinematic[(i + 3, i + 3)] = qv * dt;
    }
    let (skew, offsets) = clock_process_blocks(dt, sigma_eta, sigma_rho, l);
    let q = block_diag(&[&kinematic, &skew, &offsets]);
    LinearTransition { f, q }
}

/// Measurement model on a raw state vector: `(θ, φ, τ)` of the beacon at
/// an access node at `an`, whose offset lives in `slot` (absolute index).
pub fn observe(x: &DVector<f64>, an: &Vector3<f64>, slot: Option<usize>) -> Result<Vector3<f64>> {
    let d = Vector3::new(x[0] - an[0], x[1] - an[1], x[2] - an[2]);
    let r3 = d.norm();
    if !(r3 > POSITION_EPS) {
        return Err(Error::SingularGeometry(format!("user node within {POSITION_EPS} m of access node")));
    }
    let r2 = d[0].hypot(d[1]);
    let an_offset = slot.map_or(0.0, |s| x[s]);
    Ok(Vector3::new(d[2].atan2(r2), d[1].atan2(d[0]), r3 / SPEED_OF_LIGHT + (an_offset - x[6])))
}

/// Analytic Jacobian of [`observe`], 3×n.
pub fn observe_jacobian(x: &DVector<f64>, an: &Vector3<f64>, slot: Option<usize>) -> Result<DMatrix<f64>> {
    let d = Vector3::new(x[0] - an[0], x[1] - an[1], x[2] - an[2]);
    let r3 = d.norm();
    let r2 = d[0].hypot(d[1]);
    if !(r3 > POSITION_EPS) || !(r2 > POSITION_EPS) {
        return Err(Error::SingularGeometry(format!(
            "user node within {POSITION_EPS} m of access node (or of its vertical axis)"
        )));
    }
    let r3s = r3 * r3;
    let r2s = r2 * r2;
    let mut j = DMatrix::zeros(3, x.len());
    j[(0, 0)] = -d[0] * d[2] / (r2 * r3s);
    j[(0, 1)] = -d[1] * d[2] / (r2 * r3s);
    j[(0, 2)] = r2 / r3s;
    j[(1, 0)] = -d[1] / r2s;
    j[(1, 1)] = d[0] / r2s;
    for i in 0..3 {
        j[(2, i)] = d[i] / (SPEED_OF_LIGHT * r3);
    }
    j[(2, 6)] = -1.0;
    if let Some(s) = slot {
        j[(2, s)] = 1.0;
    }
    Ok(j)
}

fn absolute_slot(state: &FusionState, an_slot: Option<usize>) -> Result<Option<usize>> {
    if state.mode.clock == ClockModel::PosClock {
        return Ok(None);
    }
    match an_slot {
        Some(s) if CORE_DIM + s < state.state.dim() => Ok(Some(CORE_DIM + s)),
        Some(s) => Err(Error::Dimension(format!("offset slot {s} out of range"))),
        None => Ok(None),
    }
}

/// `(θ̂, φ̂, τ̂)` for an access node at `an_position`. `an_slot` is the
/// 0-based offset slot (ignored in Pos&Clock mode, `None` for the
/// reference node).
pub fn predict_measurement(state: &FusionState, an_position: &Vector3<f64>, an_slot: Option<usize>) -> Result<Vector3<f64>> {
    observe(&state.state.mean, an_position, absolute_slot(state, an_slot)?)
}

pub fn measurement_jacobian(state: &FusionState, an_position: &Vector3<f64>, an_slot: Option<usize>) -> Result<DMatrix<f64>> {
    observe_jacobian(&state.state.mean, an_position, absolute_slot(state, an_slot)?)
}
