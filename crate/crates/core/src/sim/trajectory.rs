use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Ground vehicle at constant height, stopping at every waypoint.
    Vehicle,
    /// Take-off, cruise, landing and ground halts.
    Drone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Seconds.
    pub duration: f64,
    /// m/s.
    pub v_max: f64,
    /// Acceleration and deceleration of the trapezoidal speed profiles,
    /// m/s².
    pub accel: f64,
    /// Height of vehicle trajectories, m.
    pub vehicle_height: f64,
    pub drone_min_altitude: f64,
    pub drone_max_altitude: f64,
    /// Chance of a halt after each vehicle leg.
    pub halt_probability: f64,
    pub halt_min: f64,
    pub halt_max: f64,
    /// Time at rest before the first move, s.
    pub initial_halt: f64,
    /// Waypoints are drawn from `[x0, x1] × [y0, y1]`; defaults to the
    /// access-node grid extent when unset.
    pub bounds: Option<[[f64; 2]; 2]>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            v_max: 50.0 / 3.6,
            accel: 2.0,
            vehicle_height: 1.5,
            drone_min_altitude: 10.0,
            drone_max_altitude: 40.0,
            halt_probability: 0.5,
            halt_min: 1.0,
            halt_max: 5.0,
            initial_halt: 0.0,
            bounds: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration", self.duration),
            ("v_max", self.v_max),
            ("accel", self.accel),
            ("drone_max_altitude", self.drone_max_altitude),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("trajectory {name} must be positive, got {v}")));
            }
        }
        if !(self.drone_min_altitude > 0.0) || self.drone_min_altitude > self.drone_max_altitude {
            return Err(Error::InvalidParameter("drone altitudes must satisfy 0 < min <= max".into()));
        }
        if !(0.0..=1.0).contains(&self.halt_probability) {
            return Err(Error::InvalidParameter("halt_probability must be in [0, 1]".into()));
        }
        if !(self.halt_min > 0.0) || self.halt_min > self.halt_max {
            return Err(Error::InvalidParameter("halt durations must satisfy 0 < min <= max".into()));
        }
        if !(self.initial_halt >= 0.0) || !self.initial_halt.is_finite() {
            return Err(Error::InvalidParameter("initial_halt must be finite and >= 0".into()));
        }
        if let Some(b) = self.bounds {
            if !(b[0][0] < b[0][1]) || !(b[1][0] < b[1][1]) {
                return Err(Error::InvalidParameter(format!("empty trajectory bounds {b:?}")));
            }
        }
        Ok(())
    }
}

/// Positions and velocities sampled at `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub dt: f64,
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Straight move from rest to rest with a trapezoidal (or triangular)
/// speed profile.
#[derive(Debug, Clone, Copy)]
struct Leg {
    start: f64,
    from: Vector3<f64>,
    dir: Vector3<f64>,
    dist: f64,
    peak: f64,
    accel: f64,
}

impl Leg {
    fn new(start: f64, from: Vector3<f64>, to: Vector3<f64>, cruise: f64, accel: f64) -> Self {
        let delta = to - from;
        let dist = delta.norm();
        let dir = if dist > 0.0 { delta / dist } else { Vector3::zeros() };
        let peak = cruise.min((accel * dist).sqrt());
        Self {
            start,
            from,
            dir,
            dist,
            peak,
            accel,
        }
    }

    fn ramp(&self) -> f64 {
        self.peak / self.accel
    }

    fn duration(&self) -> f64 {
        if self.dist == 0.0 {
            return 0.0;
        }
        let ramp_dist = self.peak * self.ramp();
        2.0 * self.ramp() + (self.dist - ramp_dist) / self.peak
    }

    fn end(&self) -> f64 {
        self.start + self.duration()
    }

    /// Distance along the leg and speed `tau` seconds after its start.
    fn profile(&self, tau: f64) -> (f64, f64) {
        let (ta, total, a) = (self.ramp(), self.duration(), self.accel);
        if tau <= 0.0 || self.dist == 0.0 {
            (0.0, 0.0)
        } else if tau < ta {
            (0.5 * a * tau * tau, a * tau)
        } else if tau < total - ta {
            (0.5 * a * ta * ta + self.peak * (tau - ta), self.peak)
        } else if tau < total {
            let rem = total - tau;
            (self.dist - 0.5 * a * rem * rem, a * rem)
        } else {
            (self.dist, 0.0)
        }
    }

    fn destination(&self) -> Vector3<f64> {
        self.from + self.dir * self.dist
    }
}

/// Distance a rest-to-rest leg with this cruise speed covers in `t`.
fn reachable(t: f64, cruise: f64, accel: f64) -> f64 {
    if t >= 2.0 * cruise / accel {
        cruise * t - cruise * cruise / accel
    } else {
        accel * t * t / 4.0
    }
}

fn leg_time(dist: f64, cruise: f64, accel: f64) -> f64 {
    Leg::new(0.0, Vector3::zeros(), Vector3::new(dist, 0.0, 0.0), cruise, accel).duration()
}

enum Piece {
    Move(Leg),
    Halt { end: f64, at: Vector3<f64> },
}

impl Piece {
    fn end(&self) -> f64 {
        match self {
            Piece::Move(l) => l.end(),
            Piece::Halt { end, .. } => *end,
        }
    }

    fn end_position(&self) -> Vector3<f64> {
        match self {
            Piece::Move(l) => l.destination(),
            Piece::Halt { at, .. } => *at,
        }
    }
}

struct Builder<'a> {
    cfg: &'a TrajectoryConfig,
    bounds: [[f64; 2]; 2],
    rng: ChaCha8Rng,
    pieces: Vec<Piece>,
    now: f64,
    at: Vector3<f64>,
}

impl Builder<'_> {
    fn waypoint(&mut self, z: f64) -> Vector3<f64> {
        let b = self.bounds;
        loop {
            let p = Vector3::new(self.rng.random_range(b[0][0]..b[0][1]), self.rng.random_range(b[1][0]..b[1][1]), z);
            let span = (b[0][1] - b[0][0]).min(b[1][1] - b[1][0]);
            if (p - self.at).xy().norm() > 0.2 * span {
                return p;
            }
        }
    }

    fn cruise(&mut self) -> f64 {
        self.cfg.v_max * self.rng.random_range(0.6..1.0)
    }

    fn go(&mut self, to: Vector3<f64>, cruise: f64) {
        let leg = Leg::new(self.now, self.at, to, cruise, self.cfg.accel);
        self.now = leg.end();
        self.at = leg.destination();
        self.pieces.push(Piece::Move(leg));
    }

    fn halt(&mut self) {
        let d = self.rng.random_range(self.cfg.halt_min..=self.cfg.halt_max);
        self.rest(d);
    }

    fn rest(&mut self, d: f64) {
        self.pieces.push(Piece::Halt {
            end: self.now + d,
            at: self.at,
        });
        self.now += d;
    }
}

/// Piecewise rest-to-rest trajectory, deterministic per `seed`.
///
/// Vehicles drive between random waypoints at constant height, halting at
/// random. Drones repeat take-off, one or two horizontal legs, landing and
/// a ground halt; the first cycle is shortened so that it lands within 60%
/// of the duration.
pub fn gen_trajectory(kind: TrajectoryKind, cfg: &TrajectoryConfig, bounds: [[f64; 2]; 2], dt: f64, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("trajectory dt must be positive, got {dt}")));
    }
    let bounds = cfg.bounds.unwrap_or(bounds);
    if !(bounds[0][0] < bounds[0][1]) || !(bounds[1][0] < bounds[1][1]) {
        return Err(Error::InvalidParameter(format!("empty trajectory bounds {bounds:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = match kind {
        TrajectoryKind::Vehicle => cfg.vehicle_height,
        TrajectoryKind::Drone => 0.0,
    };
    let start = Vector3::new(rng.random_range(bounds[0][0]..bounds[0][1]), rng.random_range(bounds[1][0]..bounds[1][1]), z0);
    let mut b = Builder {
        cfg,
        bounds,
        rng,
        pieces: Vec::new(),
        now: 0.0,
        at: start,
    };
    if cfg.initial_halt > 0.0 {
        b.rest(cfg.initial_halt);
    }

    match kind {
        TrajectoryKind::Vehicle => {
            while b.now < cfg.duration {
                let to = b.waypoint(z0);
                let cruise = b.cruise();
                b.go(to, cruise);
                if b.rng.random_bool(cfg.halt_probability) {
                    b.halt();
                }
            }
        }
        TrajectoryKind::Drone => {
            let mut first = true;
            while b.now < cfg.duration {
                let mut alt = b.rng.random_range(cfg.drone_min_altitude..=cfg.drone_max_altitude);
                let cruise = b.cruise();
                let budget = 0.6 * cfg.duration;
                if first {
                    while 2.0 * leg_time(alt, cruise, cfg.accel) > 0.8 * budget && alt > 1.0 {
                        alt /= 2.0;
                    }
                }
                let up = Vector3::new(b.at.x, b.at.y, alt);
                b.go(up, cruise);
                let mut to = b.waypoint(alt);
                if first {
                    let spare = budget - b.now - leg_time(alt, cruise, cfg.accel);
                    let max_dist = reachable(spare.max(0.0), cruise, cfg.accel);
                    let delta = to - b.at;
                    if delta.norm() > max_dist {
                        to = b.at + delta * (max_dist / delta.norm());
                    }
                }
                b.go(to, cruise);
                if !first && b.rng.random_bool(0.5) {
                    let to = b.waypoint(alt);
                    b.go(to, cruise);
                }
                let down = Vector3::new(b.at.x, b.at.y, 0.0);
                b.go(down, cruise);
                b.halt();
                first = false;
            }
        }
    }

    let n = (cfg.duration / dt + 1e-9).floor() as usize + 1;
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut idx = 0;
    for k in 0..n {
        let t = k as f64 * dt;
        while idx + 1 < b.pieces.len() && b.pieces[idx].end() <= t {
            idx += 1;
        }
        let (p, v) = match &b.pieces[idx] {
            Piece::Move(leg) => {
                let (s, speed) = leg.profile(t - leg.start);
                if t >= leg.end() {
                    (leg.destination(), Vector3::zeros())
                } else {
                    (leg.from + leg.dir * s, leg.dir * speed)
                }
            }
            halt @ Piece::Halt { .. } => (halt.end_position(), Vector3::zeros()),
        };
        positions.push(p);
        velocities.push(v);
    }
    Ok(Trajectory {
        kind,
        dt,
        positions,
        velocities,
        seed,
    })
}
