use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{InitPolicy, ScenarioConfig};
use super::metrics::{median, nullable, root_mean, Metrics};
use crate::channel::{synthesize_eadf, ArrayGeometry, ChannelSnapshot, Eadf};
use crate::error::{Error, Result};
use crate::filter::wrap;
use crate::fusion::{fuse_epoch, init_fusion, init_position_cl, manage_an_set, ClockModel, EpochMeasurement, FilterMode, FusionState, CORE_DIM};
use crate::sim::{build_network, emit_epoch, gen_trajectory, select_los, EpochData, EpochTruth, MeasurementMode, TrajectoryKind, World};
use crate::tracker::{init_tracker, tracker_step, SearchGrid, TrackerState};
use crate::SPEED_OF_LIGHT;

/// One epoch of one filter mode in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub replication: usize,
    pub mode: FilterMode,
    pub epoch: usize,
    pub time: f64,
    pub true_position: [f64; 3],
    pub est_position: [f64; 3],
    pub true_offset: f64,
    pub est_offset: f64,
    pub true_skew: f64,
    pub est_skew: f64,
}

/// One line-of-sight node at one epoch of one filter mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AnRecord {
    pub replication: usize,
    pub mode: FilterMode,
    pub epoch: usize,
    pub an_id: usize,
    pub reference: bool,
    pub true_offset: f64,
    /// NaN when the filter has no estimate for this node.
    pub est_offset: f64,
    /// True `(elevation, azimuth, delay)`.
    pub truth: [f64; 3],
    /// The measurement handed to the fusion filters.
    pub measured: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFailure {
    pub mode: FilterMode,
    pub epoch: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationInfo {
    pub index: usize,
    pub seed: u64,
    pub trajectory: TrajectoryKind,
    pub reference_an: usize,
    /// SHA-256 of the measurement stream every mode consumed.
    pub stream_hash: String,
    pub failures: Vec<ModeFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    /// Errors pooled over all post-warm-up epochs of all replications.
    pub pooled: Metrics,
    /// Per-metric medians over replications.
    pub median: Metrics,
    pub per_replication: Vec<Metrics>,
}

/// Accuracy of the measurements fed to the fusion filters, pooled over
/// post-warm-up (epoch, node) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMetrics {
    #[serde(with = "nullable")]
    pub rmse_elevation_deg: f64,
    #[serde(with = "nullable")]
    pub rmse_azimuth_deg: f64,
    #[serde(with = "nullable")]
    pub rmse_delay_ns: f64,
    pub per_an: BTreeMap<usize, [f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub replications: Vec<ReplicationInfo>,
    pub epochs: Vec<EpochRecord>,
    pub an_epochs: Vec<AnRecord>,
    pub modes: BTreeMap<String, ModeSummary>,
    pub measurements: MeasurementMetrics,
}

impl RunResult {
    pub fn failures(&self) -> impl Iterator<Item = &ModeFailure> {
        self.replications.iter().flat_map(|r| r.failures.iter())
    }

    pub fn mode(&self, mode: FilterMode) -> Option<&ModeSummary> {
        self.modes.get(&mode.to_string())
    }
}

struct Replication {
    info: ReplicationInfo,
    epochs: Vec<EpochRecord>,
    an_epochs: Vec<AnRecord>,
}

/// Runs every replication and filter mode of `cfg`. Filter failures are
/// recorded per mode and replication rather than aborting the run.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let eadf = match cfg.measurement.mode {
        MeasurementMode::Direct => None,
        MeasurementMode::Channel => {
            let wavelength = SPEED_OF_LIGHT / cfg.measurement.array.carrier_frequency;
            Some(Arc::new(synthesize_eadf(&ArrayGeometry::cylindrical(wavelength), &cfg.measurement.array.eadf)?))
        }
    };
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| run_replication(cfg, i, eadf.clone()))
        .collect::<Result<_>>()?;
    let mut replications = Vec::with_capacity(reps.len());
    let mut epochs = Vec::new();
    let mut an_epochs = Vec::new();
    for r in reps {
        replications.push(r.info);
        epochs.extend(r.epochs);
        an_epochs.extend(r.an_epochs);
    }
    let (modes, measurements) = summarize(&epochs, &an_epochs, cfg.warmup_epochs);
    Ok(RunResult {
        config: cfg.clone(),
        replications,
        epochs,
        an_epochs,
        modes,
        measurements,
    })
}

fn run_replication(cfg: &ScenarioConfig, index: usize, eadf: Option<Arc<Eadf>>) -> Result<Replication> {
    let seed = cfg.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = cfg.trajectory_kind.kind(index);
    let nodes = build_network(&cfg.network)?;
    let bounds = [[0.0, cfg.network.extent[0]], [0.0, cfg.network.extent[1]]];
    let trajectory_seed: u64 = rng.random();
    let trajectory = gen_trajectory(kind, &cfg.trajectory, bounds, cfg.dt, trajectory_seed)?;
    let reference = cfg.reference_an.unwrap_or_else(|| select_los(&trajectory.positions[0], &nodes, 1)[0]);
    let positions: BTreeMap<usize, Vector3<f64>> = nodes.iter().map(|n| (n.id, n.position)).collect();
    let grid = match &eadf {
        Some(e) => Some(SearchGrid::uniform(&cfg.tracker.grid, e.delay_period())?),
        None => None,
    };
    let mut world = World::new(
        nodes,
        reference,
        cfg.clocks.an_mode,
        cfg.clocks.an_offset_std,
        trajectory,
        cfg.clocks.un,
        cfg.los_count,
        eadf.clone(),
        &mut rng,
    )?;
    let an_truth: Vec<f64> = world.nodes.iter().map(|n| n.clock.offset).collect();

    let mut truths = Vec::with_capacity(world.epochs());
    let mut stream = Vec::with_capacity(world.epochs());
    let mut trackers = BTreeMap::new();
    for _ in 0..world.epochs() {
        let out = emit_epoch(&mut world, cfg.measurement.mode, &cfg.measurement.noise, &mut rng)?;
        let meas = match out.data {
            EpochData::Direct(m) => m,
            EpochData::Channel(snaps) => {
                let (e, g) = (
                    eadf.as_deref().expect("channel mode has an array"),
                    grid.as_ref().expect("channel mode has a grid"),
                );
                track(&mut trackers, snaps, e, g, cfg)?
            }
        };
        truths.push(out.truth);
        stream.push(meas);
    }
    let stream_hash = hash_stream(&stream);

    let mut info = ReplicationInfo {
        index,
        seed,
        trajectory: kind,
        reference_an: reference,
        stream_hash,
        failures: Vec::new(),
    };
    let mut epochs = Vec::new();
    let mut an_epochs = Vec::new();
    for &mode in &cfg.modes {
        let run = ModeRun {
            cfg,
            mode,
            replication: index,
            reference,
            positions: &positions,
            an_truth: &an_truth,
        };
        let (e, a, consumed, failure) = run.execute(&truths, &stream);
        if failure.is_none() && consumed != info.stream_hash {
            return Err(Error::InvalidParameter(format!("mode {mode} consumed a different measurement stream")));
        }
        epochs.extend(e);
        an_epochs.extend(a);
        info.failures.extend(failure);
    }
    Ok(Replication { info, epochs, an_epochs })
}

/// Steps the per-node trackers, (re)initializing nodes that are new in the
/// line-of-sight set or flagged as diverged.
fn track(
    trackers: &mut BTreeMap<usize, TrackerState>,
    snaps: Vec<ChannelSnapshot>,
    eadf: &Eadf,
    grid: &SearchGrid,
    cfg: &ScenarioConfig,
) -> Result<Vec<EpochMeasurement>> {
    trackers.retain(|id, _| snaps.iter().any(|s| s.an_id == *id));
    let mut out = Vec::with_capacity(snaps.len());
    for s in snaps {
        let (state, est) = match trackers.get(&s.an_id) {
            Some(tr) if !tr.needs_reinit => tracker_step(tr, &s, eadf, s.timestamp - tr.timestamp)?,
            _ => {
                let tr = init_tracker(&s, eadf, grid, &cfg.tracker)?;
                tracker_step(&tr, &s, eadf, 0.0)?
            }
        };
        out.push(est.to_measurement(s.an_id, s.timestamp));
        trackers.insert(s.an_id, state);
    }
    Ok(out)
}

fn hash_measurements(h: &mut Sha256, meas: &[EpochMeasurement]) {
    h.update((meas.len() as u64).to_le_bytes());
    for m in meas {
        h.update((m.an_id as u64).to_le_bytes());
        h.update(m.timestamp.to_le_bytes());
        for v in m.y.iter().chain(m.r.iter()) {
            h.update(v.to_le_bytes());
        }
    }
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_stream(stream: &[Vec<EpochMeasurement>]) -> String {
    let mut h = Sha256::new();
    for m in stream {
        hash_measurements(&mut h, m);
    }
    hex(&h.finalize())
}

struct ModeRun<'a> {
    cfg: &'a ScenarioConfig,
    mode: FilterMode,
    replication: usize,
    reference: usize,
    positions: &'a BTreeMap<usize, Vector3<f64>>,
    an_truth: &'a [f64],
}

impl ModeRun<'_> {
    fn start(&self, truth: &EpochTruth) -> Result<FusionState> {
        let los: Vec<Vector3<f64>> = truth.los.iter().map(|id| self.positions[id]).collect();
        let frag = init_position_cl(&los, self.cfg.fusion.position_var_floor)?;
        let mut fs = init_fusion(self.mode, &frag, &self.cfg.fusion, self.reference, &truth.los, truth.time)?;
        if self.cfg.init == InitPolicy::Truth {
            let m = &mut fs.state.mean;
            m.fixed_rows_mut::<3>(0).copy_from(&truth.position);
            m.fixed_rows_mut::<3>(3).copy_from(&truth.velocity);
            m[6] = truth.un_clock.offset;
            m[7] = truth.un_clock.skew;
            for (i, id) in fs.registry.iter().enumerate() {
                m[CORE_DIM + i] = self.an_truth[*id];
            }
        }
        Ok(fs)
    }

    fn step(&self, fs: Option<&FusionState>, truth: &EpochTruth, meas: &[EpochMeasurement]) -> Result<FusionState> {
        match fs {
            None => fuse_epoch(&self.start(truth)?, meas, self.positions, 0.0, &self.cfg.fusion),
            Some(prev) => {
                let managed = manage_an_set(prev, &truth.los, &self.cfg.fusion)?;
                fuse_epoch(&managed, meas, self.positions, truth.time - prev.timestamp, &self.cfg.fusion)
            }
        }
    }

    /// Filters the whole stream; stops at the first failure.
    fn execute(&self, truths: &[EpochTruth], stream: &[Vec<EpochMeasurement>]) -> (Vec<EpochRecord>, Vec<AnRecord>, String, Option<ModeFailure>) {
        let mut fs: Option<FusionState> = None;
        let mut epochs = Vec::with_capacity(truths.len());
        let mut an_epochs = Vec::with_capacity(truths.len() * self.cfg.los_count);
        let mut hasher = Sha256::new();
        for (truth, meas) in truths.iter().zip(stream) {
            hash_measurements(&mut hasher, meas);
            let next = match self.step(fs.as_ref(), truth, meas) {
                Ok(s) if s.state.mean.iter().all(|v| v.is_finite()) => s,
                Ok(_) => return self.fail(epochs, an_epochs, truth.epoch, "non-finite state estimate".into()),
                Err(e) => return self.fail(epochs, an_epochs, truth.epoch, e.to_string()),
            };
            let p = next.position();
            epochs.push(EpochRecord {
                replication: self.replication,
                mode: self.mode,
                epoch: truth.epoch,
                time: truth.time,
                true_position: truth.position.into(),
                est_position: p.into(),
                true_offset: truth.un_clock.offset,
                est_offset: next.clock_offset(),
                true_skew: truth.un_clock.skew,
                est_skew: next.clock_skew(),
            });
            for (i, &id) in truth.los.iter().enumerate() {
                let measured = meas.iter().find(|m| m.an_id == id).map(|m| m.y.into()).unwrap_or([f64::NAN; 3]);
                an_epochs.push(AnRecord {
                    replication: self.replication,
                    mode: self.mode,
                    epoch: truth.epoch,
                    an_id: id,
                    reference: id == self.reference,
                    true_offset: truth.an_offsets[i],
                    est_offset: next.an_offset(id).unwrap_or(f64::NAN),
                    truth: truth.observables[i].into(),
                    measured,
                });
            }
            fs = Some(next);
        }
        (epochs, an_epochs, hex(&hasher.finalize()), None)
    }

    fn fail(
        &self,
        epochs: Vec<EpochRecord>,
        an_epochs: Vec<AnRecord>,
        epoch: usize,
        message: String,
    ) -> (Vec<EpochRecord>, Vec<AnRecord>, String, Option<ModeFailure>) {
        let failure = ModeFailure {
            mode: self.mode,
            epoch,
            message,
        };
        (epochs, an_epochs, String::new(), Some(failure))
    }
}

#[derive(Default)]
struct Squares {
    d3: Vec<f64>,
    d2: Vec<f64>,
    z: Vec<f64>,
    un: Vec<f64>,
    an: Vec<f64>,
}

impl Squares {
    fn metrics(&self, clock: ClockModel) -> Metrics {
        Metrics {
            rmse_3d: root_mean(&self.d3),
            rmse_2d: root_mean(&self.d2),
            rmse_z: root_mean(&self.z),
            rmse_clock_un_ns: root_mean(&self.un) * 1e9,
            rmse_clock_an_ns: (clock == ClockModel::PosSync).then(|| root_mean(&self.an) * 1e9),
        }
    }
}

/// Mode and measurement metrics as pure functions of the records.
pub fn summarize(epochs: &[EpochRecord], an_epochs: &[AnRecord], warmup: usize) -> (BTreeMap<String, ModeSummary>, MeasurementMetrics) {
    let mut per: BTreeMap<(FilterMode, usize), Squares> = BTreeMap::new();
    for r in epochs.iter().filter(|r| r.epoch >= warmup) {
        let s = per.entry((r.mode, r.replication)).or_default();
        let d: Vec<f64> = (0..3).map(|i| r.est_position[i] - r.true_position[i]).collect();
        s.d2.push(d[0] * d[0] + d[1] * d[1]);
        s.z.push(d[2] * d[2]);
        s.d3.push(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        s.un.push((r.est_offset - r.true_offset).powi(2));
    }
    for r in an_epochs.iter().filter(|r| r.epoch >= warmup && !r.reference) {
        if let Some(s) = per.get_mut(&(r.mode, r.replication)) {
            s.an.push((r.est_offset - r.true_offset).powi(2));
        }
    }

    let mut modes = BTreeMap::new();
    let mut grouped: BTreeMap<FilterMode, Vec<&Squares>> = BTreeMap::new();
    for ((mode, _), s) in &per {
        grouped.entry(*mode).or_default().push(s);
    }
    for (mode, reps) in grouped {
        let mut pooled = Squares::default();
        for s in &reps {
            pooled.d3.extend(&s.d3);
            pooled.d2.extend(&s.d2);
            pooled.z.extend(&s.z);
            pooled.un.extend(&s.un);
            pooled.an.extend(&s.an);
        }
        let per_replication: Vec<Metrics> = reps.iter().map(|s| s.metrics(mode.clock)).collect();
        let med = |f: fn(&Metrics) -> f64| median(&per_replication.iter().map(f).collect::<Vec<_>>());
        let median = Metrics {
            rmse_3d: med(|m| m.rmse_3d),
            rmse_2d: med(|m| m.rmse_2d),
            rmse_z: med(|m| m.rmse_z),
            rmse_clock_un_ns: med(|m| m.rmse_clock_un_ns),
            rmse_clock_an_ns: (mode.clock == ClockModel::PosSync).then(|| med(|m| m.rmse_clock_an_ns.unwrap_or(f64::NAN))),
        };
        modes.insert(
            mode.to_string(),
            ModeSummary {
                pooled: pooled.metrics(mode.clock),
                median,
                per_replication,
            },
        );
    }

    // the stream is shared, so any one mode carries every measurement
    let first = an_epochs.first().map(|r| r.mode);
    let mut all: [Vec<f64>; 3] = Default::default();
    let mut by_an: BTreeMap<usize, [Vec<f64>; 3]> = BTreeMap::new();
    for r in an_epochs.iter().filter(|r| Some(r.mode) == first && r.epoch >= warmup) {
        let e = [
            (r.measured[0] - r.truth[0]).to_degrees(),
            wrap(r.measured[1] - r.truth[1]).to_degrees(),
            (r.measured[2] - r.truth[2]) * 1e9,
        ];
        let slot = by_an.entry(r.an_id).or_default();
        for i in 0..3 {
            all[i].push(e[i] * e[i]);
            slot[i].push(e[i] * e[i]);
        }
    }
    let measurements = MeasurementMetrics {
        rmse_elevation_deg: root_mean(&all[0]),
        rmse_azimuth_deg: root_mean(&all[1]),
        rmse_delay_ns: root_mean(&all[2]),
        per_an: by_an
            .into_iter()
            .map(|(id, s)| (id, [root_mean(&s[0]), root_mean(&s[1]), root_mean(&s[2])]))
            .collect(),
    };
    (modes, measurements)
}
