//! Helpers shared by the fusion and acceptance test targets.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use udn_posync::filter::linalg::solve_spd;
use udn_posync::filter::{predict_linear, GaussianState};
use udn_posync::fusion::{
    fuse_epoch, fusion_transition, init_fusion, manage_an_set, observe, predict_measurement, ClockModel, EpochMeasurement, Estimator, FilterMode, FusionParams,
    FusionState, Observables, PositionFragment, CORE_DIM,
};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn direct_noise() -> Matrix3<f64> {
    let s = 1f64.to_radians();
    Matrix3::from_diagonal(&Vector3::new(s * s, s * s, 9e-18))
}

fn perturbed(y: Vector3<f64>, r: &Matrix3<f64>, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(
        y[0] + r[(0, 0)].sqrt() * normal(rng),
        y[1] + r[(1, 1)].sqrt() * normal(rng),
        y[2] + r[(2, 2)].sqrt() * normal(rng),
    )
}

/// Largest difference between the (p, v, ρ_UN, α) marginals of
///
/// 1. a Pos&Sync filter that fuses access nodes A (reference) and B for one
///    epoch and then drops B's offset slot, and
/// 2. a Pos&Clock filter that never had the slot but fuses B's delay with
///    the slot's predicted mean subtracted and its predicted variance added
///    to the delay noise.
///
/// Mean differences are scaled by the prior marginal std, covariance
/// differences by the product of stds. The sigma-point spread `α²(n+κ)`
/// depends on the state dimension, so the Pos&Clock filter uses `κ + 1`
/// to place its sigma points where the Pos&Sync filter puts them.
pub fn marginalization_gap(estimator: Estimator, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = BTreeMap::from([(0, Vector3::new(0.0, 0.0, 7.0)), (1, Vector3::new(50.0, 0.0, 7.0))]);
    let params = FusionParams::default();
    let frag = PositionFragment {
        position: Vector3::new(20.0 + 5.0 * normal(&mut rng), 15.0 + 5.0 * normal(&mut rng), 1.5),
        variance: 4.0,
    };
    let dt = 0.1;
    let sync = init_fusion(
        FilterMode::new(ClockModel::PosSync, estimator, Observables::DoaToa),
        &frag,
        &params,
        0,
        &[0, 1],
        0.0,
    )
    .unwrap();
    let mut matched = params.clone();
    matched.ut.kappa += 1.0;
    let clock = init_fusion(
        FilterMode::new(ClockModel::PosClock, estimator, Observables::DoaToa),
        &frag,
        &matched,
        0,
        &[0],
        0.0,
    )
    .unwrap();

    let r = direct_noise();
    let meas: Vec<EpochMeasurement> = [0usize, 1]
        .iter()
        .map(|&id| {
            let slot = sync.slot_of(id).unwrap();
            let y = predict_measurement(&sync, &positions[&id], slot).unwrap();
            EpochMeasurement {
                an_id: id,
                y: perturbed(y, &(r * 4.0), &mut rng),
                r,
                timestamp: dt,
            }
        })
        .collect();

    let fused = fuse_epoch(&sync, &meas, &positions, dt, &params).unwrap();
    let dropped = manage_an_set(&fused, &[0], &params).unwrap();

    let model = fusion_transition(ClockModel::PosSync, dt, params.sigma_v, params.sigma_eta, params.sigma_rho, 1);
    let prior = predict_linear(&sync.state, &model).unwrap();
    let (mu_b, var_b) = (prior.mean[CORE_DIM], prior.cov[(CORE_DIM, CORE_DIM)]);
    let mut folded = meas.clone();
    folded[1].y[2] -= mu_b;
    folded[1].r[(2, 2)] += var_b;
    let direct = fuse_epoch(&clock, &folded, &positions, dt, &matched).unwrap();

    let (a, b) = (&dropped.state, &direct.state);
    assert_eq!(a.dim(), CORE_DIM);
    let std: Vec<f64> = (0..CORE_DIM).map(|i| prior.cov[(i, i)].sqrt()).collect();
    let mut gap = 0.0f64;
    for i in 0..CORE_DIM {
        gap = gap.max((a.mean[i] - b.mean[i]).abs() / std[i]);
        for j in 0..CORE_DIM {
            gap = gap.max((a.cov[(i, j)] - b.cov[(i, j)]).abs() / (std[i] * std[j]));
        }
    }
    gap
}

/// Normalized estimation error squared of a Pos&Clock UKF against truth
/// drawn from the filter's own motion and measurement model. Returns the
/// NEES per epoch averaged over `runs` independent seeds.
pub fn nees_profile(runs: u64, epochs: usize) -> Vec<f64> {
    let positions = BTreeMap::from([(0, Vector3::new(-150.0, 0.0, 7.0)), (1, Vector3::new(150.0, 0.0, 7.0))]);
    let params = FusionParams::default();
    let mode = FilterMode::new(ClockModel::PosClock, Estimator::Ukf, Observables::DoaToa);
    let dt = 0.1;
    let model = fusion_transition(ClockModel::PosClock, dt, params.sigma_v, params.sigma_eta, params.sigma_rho, 0);
    let lq = model.q.clone().cholesky().expect("process noise is positive definite").l();
    let m0 = DVector::from_vec(vec![0.0, 80.0, 1.5, 0.0, 0.0, 0.0, 0.0, 25e-6]);
    let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1e-14, 1e-12]));
    let l0 = p0.map(f64::sqrt);
    let r = direct_noise();

    let mut sum = vec![0.0; epochs];
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let frag = PositionFragment {
            position: Vector3::zeros(),
            variance: 1.0,
        };
        let mut fs: FusionState = init_fusion(mode, &frag, &params, 0, &[0], 0.0).unwrap();
        fs.state = GaussianState::new(m0.clone(), p0.clone(), fs.state.layout.clone()).unwrap();
        let mut x = &m0 + &l0 * DVector::from_fn(CORE_DIM, |_, _| normal(&mut rng));
        for (k, acc) in sum.iter_mut().enumerate() {
            x = &model.f * &x + &lq * DVector::from_fn(CORE_DIM, |_, _| normal(&mut rng));
            let t = (k + 1) as f64 * dt;
            let meas: Vec<EpochMeasurement> = positions
                .iter()
                .map(|(&id, an)| EpochMeasurement {
                    an_id: id,
                    y: perturbed(observe(&x, an, None).unwrap(), &r, &mut rng),
                    r,
                    timestamp: t,
                })
                .collect();
            fs = fuse_epoch(&fs, &meas, &positions, dt, &params).unwrap();
            let e = &x - &fs.state.mean;
            let w = solve_spd(&fs.state.cov, &DMatrix::from_column_slice(CORE_DIM, 1, e.as_slice())).unwrap();
            *acc += e.dot(&w.column(0)) / runs as f64;
        }
    }
    sum
}
