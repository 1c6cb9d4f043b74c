use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use super::model::{fusion_transition, observe, observe_jacobian, CORE_DIM};
use super::{ClockModel, Estimator, FilterMode, FusionParams, FusionState};
use crate::error::{Error, Result};
use crate::filter::linalg::block_diag;
use crate::filter::{ekf_update, predict_linear, ukf_update, GaussianState, StateTag};
use crate::fusion::EpochMeasurement;

/// Position prior from centroid localization.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionFragment {
    pub position: Vector3<f64>,
    /// Per-axis variance, m².
    pub variance: f64,
}

/// Centroid of the line-of-sight access nodes, with per-axis variance equal
/// to the largest squared centroid-to-node distance, floored at
/// `variance_floor`.
pub fn init_position_cl(los_an_positions: &[Vector3<f64>], variance_floor: f64) -> Result<PositionFragment> {
    if los_an_positions.is_empty() {
        return Err(Error::InvalidParameter("centroid localization needs at least one access node".into()));
    }
    let centroid = los_an_positions.iter().sum::<Vector3<f64>>() / los_an_positions.len() as f64;
    let spread = los_an_positions.iter().map(|p| (p - centroid).norm_squared()).fold(0.0, f64::max);
    Ok(PositionFragment {
        position: centroid,
        variance: spread.max(variance_floor),
    })
}

fn core_layout() -> Vec<StateTag> {
    let mut layout = vec![StateTag::Linear; 6];
    layout.push(StateTag::ClockOffset);
    layout.push(StateTag::ClockSkew);
    layout
}

/// Builds the initial filter. In Pos&Sync mode every id in `slot_ids`
/// other than the reference gets an offset slot with the offset prior.
pub fn init_fusion(
    mode: FilterMode,
    fragment: &PositionFragment,
    params: &FusionParams,
    reference_id: usize,
    slot_ids: &[usize],
    timestamp: f64,
) -> Result<FusionState> {
    params.validate()?;
    if !(fragment.variance >= 0.0) || !fragment.position.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("position fragment must be finite with variance >= 0".into()));
    }
    let mut mean = DVector::zeros(CORE_DIM);
    mean.fixed_rows_mut::<3>(0).copy_from(&fragment.position);
    mean[7] = params.init_skew_mean;
    let vv = params.init_velocity_std.powi(2);
    let diag = [
        fragment.variance,
        fragment.variance,
        fragment.variance,
        vv,
        vv,
        vv,
        params.init_offset_std.powi(2),
        params.init_skew_std.powi(2),
    ];
    let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&diag));
    let mut fs = FusionState {
        state: GaussianState::new(mean, cov, core_layout())?,
        mode,
        registry: Vec::new(),
        reference_id,
        timestamp,
    };
    if mode.clock == ClockModel::PosSync {
        for &id in slot_ids {
            if id != reference_id && !fs.registry.contains(&id) {
                fs = add_an_slot(&fs, id, params)?;
            }
        }
    }
    Ok(fs)
}

/// Appends an offset slot for `an_id` with the offset prior and no
/// cross-covariance.
pub fn add_an_slot(fs: &FusionState, an_id: usize, params: &FusionParams) -> Result<FusionState> {
    if fs.mode.clock != ClockModel::PosSync {
        return Err(Error::InvalidParameter("offset slots exist only in Pos&Sync mode".into()));
    }
    if an_id == fs.reference_id {
        return Err(Error::InvalidParameter(format!("reference access node {an_id} cannot carry an offset slot")));
    }
    if fs.registry.contains(&an_id) {
        return Err(Error::InvalidParameter(format!("access node {an_id} already has a slot")));
    }
    let n = fs.state.dim();
    let mut mean = fs.state.mean.clone().insert_row(n, 0.0);
    mean[n] = 0.0;
    let prior = DMatrix::from_element(1, 1, params.init_offset_std.powi(2));
    let cov = block_diag(&[&fs.state.cov, &prior]);
    let mut layout = fs.state.layout.clone();
    layout.push(StateTag::ClockOffset);
    let mut out = fs.clone();
    out.state = GaussianState::new(mean, cov, layout)?;
    out.registry.push(an_id);
    Ok(out)
}

/// Reconciles the offset slots with the current line-of-sight set:
/// departing nodes are marginalized out, arriving ones appended. The
/// reference node never gets a slot. No-op in Pos&Clock mode.
pub fn manage_an_set(fs: &FusionState, new_los_an_ids: &[usize], params: &FusionParams) -> Result<FusionState> {
    if fs.mode.clock != ClockModel::PosSync {
        return Ok(fs.clone());
    }
    let keep: Vec<usize> = (0..fs.registry.len()).filter(|&i| new_los_an_ids.contains(&fs.registry[i])).collect();
    let mut out = fs.clone();
    if keep.len() != fs.registry.len() {
        let idx: Vec<usize> = (0..CORE_DIM).chain(keep.iter().map(|i| CORE_DIM + i)).collect();
        out.state = fs.state.marginal(&idx);
        out.registry = keep.iter().map(|&i| fs.registry[i]).collect();
    }
    for &id in new_los_an_ids {
        if id != fs.reference_id && !out.registry.contains(&id) {
            out = add_an_slot(&out, id, params)?;
        }
    }
    Ok(out)
}

struct Stacked {
    y: DVector<f64>,
    r: DMatrix<f64>,
    layout: Vec<StateTag>,
    /// (AN position, absolute offset slot) per measurement.
    sources: Vec<(Vector3<f64>, Option<usize>)>,
}

fn stack_measurements(
    fs: &FusionState,
    measurements: &[EpochMeasurement],
    an_positions: &BTreeMap<usize, Vector3<f64>>,
    params: &FusionParams,
) -> Result<Stacked> {
    let rows = fs.mode.rows_per_an();
    let m = rows * measurements.len();
    let mut y = DVector::zeros(m);
    let mut r = DMatrix::zeros(m, m);
    let mut layout = Vec::with_capacity(m);
    let mut sources = Vec::with_capacity(measurements.len());
    for (k, meas) in measurements.iter().enumerate() {
        let pos = *an_positions
            .get(&meas.an_id)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown access node {}", meas.an_id)))?;
        let slot = fs.slot_of(meas.an_id)?.map(|s| CORE_DIM + s);
        let cov = match params.fixed_measurement_std {
            Some(std) => DMatrix::from_diagonal(&DVector::from_iterator(3, std.iter().map(|s| s * s))),
            None => DMatrix::from_iterator(3, 3, meas.r.iter().copied()),
        };
        let base = rows * k;
        for i in 0..rows {
            y[base + i] = meas.y[i];
            for j in 0..rows {
                r[(base + i, base + j)] = cov[(i, j)];
            }
        }
        layout.extend([StateTag::Angle, StateTag::Angle]);
        if rows == 3 {
            layout.push(StateTag::Linear);
        }
        sources.push((pos, slot));
    }
    Ok(Stacked { y, r, layout, sources })
}

/// One predict over `dt` followed by a single stacked update with all
/// measurements of the epoch. Without measurements only the prediction is
/// applied.
pub fn fuse_epoch(
    fs: &FusionState,
    measurements: &[EpochMeasurement],
    an_positions: &BTreeMap<usize, Vector3<f64>>,
    dt: f64,
    params: &FusionParams,
) -> Result<FusionState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be finite and >= 0, got {dt}")));
    }
    if let Some(m) = measurements.iter().find(|m| m.timestamp < fs.timestamp) {
        return Err(Error::OutOfOrder {
            last: fs.timestamp,
            got: m.timestamp,
        });
    }
    let l = fs.registry.len();
    let model = fusion_transition(fs.mode.clock, dt, params.sigma_v, params.sigma_eta, params.sigma_rho, l);
    let prior = predict_linear(&fs.state, &model)?;
    let mut out = fs.clone();
    out.timestamp = fs.timestamp + dt;
    if measurements.is_empty() {
        out.state = prior;
        return Ok(out);
    }

    let stacked = stack_measurements(fs, measurements, an_positions, params)?;
    let rows = fs.mode.rows_per_an();
    let h = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let mut out = DVector::zeros(rows * stacked.sources.len());
        for (k, (pos, slot)) in stacked.sources.iter().enumerate() {
            let z = observe(x, pos, *slot)?;
            out.rows_mut(rows * k, rows).copy_from(&z.rows(0, rows));
        }
        Ok(out)
    };
    out.state = match fs.mode.estimator {
        Estimator::Ukf => ukf_update(&prior, &stacked.y, h, &stacked.r, &params.ut, &stacked.layout)?,
        Estimator::Ekf => {
            let jac = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
                let mut out = DMatrix::zeros(rows * stacked.sources.len(), x.len());
                for (k, (pos, slot)) in stacked.sources.iter().enumerate() {
                    let j = observe_jacobian(x, pos, *slot)?;
                    out.rows_mut(rows * k, rows).copy_from(&j.rows(0, rows));
                }
                Ok(out)
            };
            ekf_update(&prior, &stacked.y, h, jac, &stacked.r, &stacked.layout)?
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{predict_measurement, Observables};
    use nalgebra::Matrix3;
    use std::f64::consts::PI;

    fn mode(clock: ClockModel, est: Estimator) -> FilterMode {
        FilterMode::new(clock, est, Observables::DoaToa)
    }

    fn positions() -> BTreeMap<usize, Vector3<f64>> {
        BTreeMap::from([(0, Vector3::new(0.0, 0.0, 7.0)), (1, Vector3::new(50.0, 0.0, 7.0))])
    }

    fn exact(fs: &FusionState, id: usize, t: f64) -> EpochMeasurement {
        let slot = fs.slot_of(id).unwrap();
        EpochMeasurement {
            an_id: id,
            y: predict_measurement(fs, &positions()[&id], slot).unwrap(),
            r: Matrix3::from_diagonal(&Vector3::new(1e-4, 1e-4, 9e-18)),
            timestamp: t,
        }
    }

    #[test]
    fn centroid_examples() {
        let f = init_position_cl(&[Vector3::new(0.0, 0.0, 7.0), Vector3::new(50.0, 0.0, 7.0)], 100.0).unwrap();
        assert_eq!(f.position, Vector3::new(25.0, 0.0, 7.0));
        assert_eq!(f.variance, 625.0);
        let f = init_position_cl(&[Vector3::new(3.0, 4.0, 7.0)], 100.0).unwrap();
        assert_eq!(f.position, Vector3::new(3.0, 4.0, 7.0));
        assert_eq!(f.variance, 100.0);
        let tri = [Vector3::new(0.0, 0.0, 7.0), Vector3::new(60.0, 0.0, 7.0), Vector3::new(0.0, 30.0, 7.0)];
        let f = init_position_cl(&tri, 100.0).unwrap();
        assert_eq!(f.position, Vector3::new(20.0, 10.0, 7.0));
        assert!((f.variance - 1700.0).abs() < 1e-9);
        assert!(init_position_cl(&[], 100.0).is_err());
    }

    #[test]
    fn init_dimensions_and_priors() {
        let frag = init_position_cl(&[Vector3::new(10.0, 0.0, 7.0)], 100.0).unwrap();
        let p = FusionParams::default();
        let fs = init_fusion(mode(ClockModel::PosClock, Estimator::Ukf), &frag, &p, 0, &[0, 1, 2], 0.0).unwrap();
        assert_eq!(fs.state.dim(), 8);
        assert!(fs.registry.is_empty());
        let fs = init_fusion(mode(ClockModel::PosSync, Estimator::Ukf), &frag, &p, 0, &[0, 1, 2], 0.0).unwrap();
        assert_eq!(fs.state.dim(), 10);
        assert_eq!(fs.registry, vec![1, 2]);
        assert_eq!(fs.state.cov[(3, 3)], 25.0);
        assert_eq!(fs.state.cov[(6, 6)], 1e-8);
        assert_eq!(fs.state.mean[7], 25e-6);
        assert_eq!(fs.state.cov[(7, 7)], 30e-6 * 30e-6);
        assert_eq!(fs.state.cov[(9, 9)], 1e-8);
        assert_eq!(fs.state.mean[9], 0.0);
    }

    #[test]
    fn slots_follow_the_los_set() {
        let frag = init_position_cl(&[Vector3::new(10.0, 0.0, 7.0)], 100.0).unwrap();
        let p = FusionParams::default();
        let mut fs = init_fusion(mode(ClockModel::PosSync, Estimator::Ekf), &frag, &p, 0, &[1, 2], 0.0).unwrap();
        fs.state.cov[(8, 9)] = 1e-9;
        fs.state.cov[(9, 8)] = 1e-9;
        fs.state.cov[(0, 9)] = 1e-3;
        fs.state.cov[(9, 0)] = 1e-3;

        let same = manage_an_set(&fs, &[0, 1, 2], &p).unwrap();
        assert_eq!(same.state.mean, fs.state.mean);
        assert_eq!(same.state.cov, fs.state.cov);

        let dropped = manage_an_set(&fs, &[0, 2], &p).unwrap();
        assert_eq!(dropped.state.dim(), 9);
        assert_eq!(dropped.registry, vec![2]);
        assert_eq!(dropped.state.cov[(0, 8)], 1e-3);
        assert_eq!(dropped.state.cov.view((0, 0), (8, 8)), fs.state.cov.view((0, 0), (8, 8)));

        let added = manage_an_set(&dropped, &[0, 2, 5], &p).unwrap();
        assert_eq!(added.registry, vec![2, 5]);
        assert_eq!(added.state.mean[9], 0.0);
        assert_eq!(added.state.cov[(9, 9)], p.init_offset_std.powi(2));
        assert_eq!(added.state.cov.row(9).iter().filter(|v| **v != 0.0).count(), 1);

        assert!(add_an_slot(&fs, 0, &p).is_err());
        assert!(add_an_slot(&fs, 1, &p).is_err());
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let p = FusionParams::default();
        for clock in [ClockModel::PosClock, ClockModel::PosSync] {
            for est in [Estimator::Ukf, Estimator::Ekf] {
                // the unscented mean carries the curvature term of the
                // angles, so its zero-innovation point needs a tight prior
                let frag = PositionFragment {
                    position: Vector3::new(20.0, 15.0, 1.5),
                    variance: if est == Estimator::Ukf { 1e-8 } else { 4.0 },
                };
                let mut fs = init_fusion(mode(clock, est), &frag, &p, 0, &[0, 1], 0.0).unwrap();
                fs.state.mean[7] = 0.0;
                let meas = [exact(&fs, 0, 0.0), exact(&fs, 1, 0.0)];
                let post = fuse_epoch(&fs, &meas, &positions(), 0.0, &p).unwrap();
                let diff = (&post.state.mean - &fs.state.mean).amax();
                assert!(diff < 1e-8, "{}: moved by {diff}", fs.mode);
            }
        }
    }

    #[test]
    fn azimuth_residual_is_wrapped() {
        let frag = PositionFragment {
            position: Vector3::new(-10.0, -10.0 * 1f64.to_radians().tan(), 7.0),
            variance: 1.0,
        };
        let p = FusionParams::default();
        let fs = init_fusion(
            FilterMode::new(ClockModel::PosClock, Estimator::Ekf, Observables::DoaOnly),
            &frag,
            &p,
            0,
            &[],
            0.0,
        )
        .unwrap();
        let pred = predict_measurement(&fs, &positions()[&0], None).unwrap();
        assert!(pred[1] < -PI + 0.1);
        let mut m = exact(&fs, 0, 0.0);
        m.y[1] = PI - 1f64.to_radians();
        let post = fuse_epoch(&fs, &[m], &positions(), 0.0, &p).unwrap();
        let moved = (post.position() - fs.position()).norm();
        assert!(moved < 1.0, "wrapped residual should give a small correction, moved {moved}");
    }

    #[test]
    fn predict_only_and_ordering() {
        let frag = PositionFragment {
            position: Vector3::new(20.0, 15.0, 1.5),
            variance: 4.0,
        };
        let p = FusionParams::default();
        let fs = init_fusion(mode(ClockModel::PosClock, Estimator::Ukf), &frag, &p, 0, &[], 1.0).unwrap();
        let next = fuse_epoch(&fs, &[], &positions(), 0.1, &p).unwrap();
        assert!((next.timestamp - 1.1).abs() < 1e-15);
        assert!(next.state.cov[(0, 0)] > fs.state.cov[(0, 0)]);
        let stale = exact(&fs, 0, 0.5);
        assert!(matches!(fuse_epoch(&next, &[stale], &positions(), 0.1, &p), Err(Error::OutOfOrder { .. })));
        let mut unknown = exact(&fs, 0, 2.0);
        unknown.an_id = 9;
        assert!(fuse_epoch(&next, &[unknown], &positions(), 0.1, &p).is_err());
    }

    #[test]
    fn clock_variance_follows_observability() {
        let frag = PositionFragment {
            position: Vector3::new(20.0, 15.0, 1.5),
            variance: 4.0,
        };
        let p = FusionParams::default();
        for est in [Estimator::Ukf, Estimator::Ekf] {
            let fs = init_fusion(mode(ClockModel::PosClock, est), &frag, &p, 0, &[], 0.0).unwrap();
            let post = fuse_epoch(&fs, &[exact(&fs, 0, 0.0)], &positions(), 0.0, &p).unwrap();
            assert!(post.state.cov[(6, 6)] < fs.state.cov[(6, 6)]);

            let doa = FilterMode::new(ClockModel::PosClock, est, Observables::DoaOnly);
            let fs = init_fusion(doa, &frag, &p, 0, &[], 0.0).unwrap();
            let post = fuse_epoch(&fs, &[exact(&fs, 0, 0.0), exact(&fs, 1, 0.0)], &positions(), 0.0, &p).unwrap();
            assert!(post.state.cov[(6, 6)] >= fs.state.cov[(6, 6)] * (1.0 - 1e-12));
        }
    }
}
