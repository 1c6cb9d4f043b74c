use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::array::ArrayGeometry;
use super::require_odd;
use super::response::angle_steering;
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Mode counts and sampling grid for EADF synthesis, plus the multicarrier
/// layout the resulting response is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EadfConfig {
    /// Azimuth modes (odd).
    pub modes_az: usize,
    /// Co-elevation modes (odd).
    pub modes_el: usize,
    /// Azimuth samples over [0, 2π); must be >= `modes_az`.
    pub grid_az: usize,
    /// Co-elevation samples over [0, 2π); must be >= `modes_el`.
    pub grid_el: usize,
    /// Pilot subcarrier count (odd).
    pub subcarriers: usize,
    /// Subcarrier spacing, Hz.
    pub subcarrier_spacing: f64,
}

impl Default for EadfConfig {
    fn default() -> Self {
        Self {
            modes_az: 21,
            modes_el: 21,
            grid_az: 48,
            grid_el: 48,
            subcarriers: 19,
            subcarrier_spacing: 240e3,
        }
    }
}

/// Effective aperture distribution function of one array.
#[derive(Debug, Clone, PartialEq)]
pub struct Eadf {
    /// Ports × (modes_el · modes_az), horizontal excitation.
    pub g_h: DMatrix<C64>,
    /// Ports × (modes_el · modes_az), vertical excitation.
    pub g_v: DMatrix<C64>,
    /// Transceiver frequency response, subcarriers × subcarriers.
    pub g_f: DMatrix<C64>,
    pub modes_az: usize,
    pub modes_el: usize,
    pub subcarrier_spacing: f64,
}

impl Eadf {
    pub fn new(g_h: DMatrix<C64>, g_v: DMatrix<C64>, g_f: DMatrix<C64>, modes_az: usize, modes_el: usize, subcarrier_spacing: f64) -> Result<Self> {
        require_odd("azimuth mode count", modes_az)?;
        require_odd("elevation mode count", modes_el)?;
        require_odd("subcarrier count", g_f.nrows())?;
        let modes = modes_az * modes_el;
        if g_h.shape() != g_v.shape() || g_h.ncols() != modes || !g_f.is_square() || g_h.nrows() < 2 {
            return Err(Error::Dimension(format!(
                "G_H {:?}, G_V {:?}, G_f {:?}, modes {modes}",
                g_h.shape(),
                g_v.shape(),
                g_f.shape()
            )));
        }
        if !(subcarrier_spacing > 0.0) {
            return Err(Error::InvalidParameter("subcarrier spacing must be positive".into()));
        }
        Ok(Self {
            g_h,
            g_v,
            g_f,
            modes_az,
            modes_el,
            subcarrier_spacing,
        })
    }

    pub fn ports(&self) -> usize {
        self.g_h.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.g_f.nrows()
    }

    /// Length of a channel snapshot produced with this EADF.
    pub fn snapshot_len(&self) -> usize {
        self.ports() * self.subcarriers()
    }

    /// Delay ambiguity period `1 / f0`, seconds.
    pub fn delay_period(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Array responses `(G_H d(φ,θ), G_V d(φ,θ))`.
    pub fn array_response(&self, theta: f64, phi: f64) -> (DVector<C64>, DVector<C64>) {
        let d = angle_steering(phi, theta, self.modes_az, self.modes_el).expect("mode counts validated at construction");
        (&self.g_h * &d, &self.g_v * &d)
    }

    pub fn to_json(&self) -> EadfJson {
        fn rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
        }
        EadfJson {
            schema_version: EadfJson::SCHEMA_VERSION,
            modes_az: self.modes_az,
            modes_el: self.modes_el,
            subcarrier_spacing: self.subcarrier_spacing,
            g_h: rows(&self.g_h),
            g_v: rows(&self.g_v),
            g_f: rows(&self.g_f),
        }
    }

    pub fn from_json(j: &EadfJson) -> Result<Self> {
        if j.schema_version != EadfJson::SCHEMA_VERSION {
            return Err(Error::config("schema_version", format!("unsupported EADF schema version {}", j.schema_version)));
        }
        fn matrix(name: &str, rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<C64>> {
            let nr = rows.len();
            let nc = rows.first().map_or(0, Vec::len);
            if nr == 0 || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::config(name, "ragged or empty matrix"));
            }
            Ok(DMatrix::from_fn(nr, nc, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
        }
        Self::new(
            matrix("g_h", &j.g_h)?,
            matrix("g_v", &j.g_v)?,
            matrix("g_f", &j.g_f)?,
            j.modes_az,
            j.modes_el,
            j.subcarrier_spacing,
        )
    }
}

/// JSON exchange form of an [`Eadf`]. Matrices are row-major arrays of
/// `[re, im]` pairs; `g_h`/`g_v` columns are ordered co-elevation-major
/// (`index = i_el · modes_az + i_az`), mode indices running from
/// `−(M−1)/2` to `+(M−1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EadfJson {
    pub schema_version: u32,
    pub modes_az: usize,
    pub modes_el: usize,
    pub subcarrier_spacing: f64,
    pub g_h: Vec<Vec<[f64; 2]>>,
    pub g_v: Vec<Vec<[f64; 2]>>,
    pub g_f: Vec<Vec<[f64; 2]>>,
}

impl EadfJson {
    pub const SCHEMA_VERSION: u32 = 1;
}

/// Samples the ideal port responses on a uniform torus grid and keeps the
/// central `modes_el × modes_az` 2D Fourier coefficients. `G_f` is the
/// identity (ideal transceiver).
pub fn synthesize_eadf(geom: &ArrayGeometry, cfg: &EadfConfig) -> Result<Eadf> {
    require_odd("azimuth mode count", cfg.modes_az)?;
    require_odd("elevation mode count", cfg.modes_el)?;
    require_odd("subcarrier count", cfg.subcarriers)?;
    if cfg.grid_az < cfg.modes_az || cfg.grid_el < cfg.modes_el {
        return Err(Error::InvalidParameter(format!(
            "EADF grid {}x{} aliases {}x{} modes",
            cfg.grid_el, cfg.grid_az, cfg.modes_el, cfg.modes_az
        )));
    }
    let ports = geom.port_count();
    let (na, ne) = (cfg.grid_az, cfg.grid_el);
    let half_a = (cfg.modes_az / 2) as i64;
    let half_e = (cfg.modes_el / 2) as i64;

    // samples[el][az][port] = (h, v)
    let samples: Vec<Vec<Vec<(C64, C64)>>> = (0..ne)
        .map(|p| {
            let theta = TAU * p as f64 / ne as f64;
            (0..na).map(|q| geom.ideal_response(theta, TAU * q as f64 / na as f64)).collect()
        })
        .collect();

    let kernel = |m: i64, idx: usize, n: usize| C64::from_polar(1.0, -TAU * m as f64 * idx as f64 / n as f64);

    let modes = cfg.modes_az * cfg.modes_el;
    let mut g_h = DMatrix::zeros(ports, modes);
    let mut g_v = DMatrix::zeros(ports, modes);
    let norm = 1.0 / (na * ne) as f64;
    for port in 0..ports {
        // azimuth transform per co-elevation row
        let mut row_h = vec![vec![C64::new(0.0, 0.0); cfg.modes_az]; ne];
        let mut row_v = row_h.clone();
        for p in 0..ne {
            for (ia, ma) in (-half_a..=half_a).enumerate() {
                let (mut sh, mut sv) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for (q, sample) in samples[p].iter().enumerate() {
                    let k = kernel(ma, q, na);
                    let (h, v) = sample[port];
                    sh += h * k;
                    sv += v * k;
                }
                row_h[p][ia] = sh;
                row_v[p][ia] = sv;
            }
        }
        for (ie, me) in (-half_e..=half_e).enumerate() {
            for ia in 0..cfg.modes_az {
                let (mut sh, mut sv) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for p in 0..ne {
                    let k = kernel(me, p, ne);
                    sh += row_h[p][ia] * k;
                    sv += row_v[p][ia] * k;
                }
                g_h[(port, ie * cfg.modes_az + ia)] = sh * norm;
                g_v[(port, ie * cfg.modes_az + ia)] = sv * norm;
            }
        }
    }
    Eadf::new(
        g_h,
        g_v,
        DMatrix::identity(cfg.subcarriers, cfg.subcarriers),
        cfg.modes_az,
        cfg.modes_el,
        cfg.subcarrier_spacing,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ElementPattern, Port};
    use std::f64::consts::PI;

    fn small_cfg(modes: usize, grid: usize) -> EadfConfig {
        EadfConfig {
            modes_az: modes,
            modes_el: modes,
            grid_az: grid,
            grid_el: grid,
            subcarriers: 3,
            subcarrier_spacing: 240e3,
        }
    }

    fn rel_err(eadf: &Eadf, geom: &ArrayGeometry, theta: f64, phi: f64) -> f64 {
        let (h, v) = eadf.array_response(theta, phi);
        let ideal = geom.ideal_response(theta, phi);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (ih, iv)) in ideal.iter().enumerate() {
            num += (h[i] - ih).norm_sqr() + (v[i] - iv).norm_sqr();
            den += ih.norm_sqr() + iv.norm_sqr();
        }
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn exact_at_grid_nodes_when_modes_equal_grid() {
        let geom = ArrayGeometry::cylindrical(0.1);
        let eadf = synthesize_eadf(&geom, &small_cfg(15, 15)).unwrap();
        for p in [0usize, 3, 8, 14] {
            for q in [0usize, 5, 11] {
                let theta = TAU * p as f64 / 15.0;
                let phi = TAU * q as f64 / 15.0;
                assert!(rel_err(&eadf, &geom, theta, phi) < 1e-6);
            }
        }
    }

    #[test]
    fn isotropic_origin_element_has_single_mode() {
        let iso = Port {
            position: [0.0; 3],
            pattern: ElementPattern::Isotropic,
        };
        let off = Port {
            position: [0.0, 0.0, 0.0],
            pattern: ElementPattern::Isotropic,
        };
        let geom = ArrayGeometry::new(vec![iso, off], 0.1).unwrap();
        let eadf = synthesize_eadf(&geom, &small_cfg(5, 8)).unwrap();
        let centre = 2 * 5 + 2;
        for j in 0..25 {
            let expect = if j == centre { 1.0 } else { 0.0 };
            assert!((eadf.g_h[(0, j)] - C64::new(expect, 0.0)).norm() < 1e-12);
        }
        let (h1, _) = eadf.array_response(0.3, 1.2);
        let (h2, _) = eadf.array_response(2.0, -2.5);
        assert!((h1[0] - h2[0]).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_improves_with_mode_count() {
        let geom = ArrayGeometry::cylindrical(0.1);
        let probes: Vec<(f64, f64)> = (0..40)
            .map(|i| (0.1 + 2.9 * (i as f64 * 0.618).fract(), -PI + TAU * (i as f64 * 0.377).fract()))
            .collect();
        let mut last = f64::INFINITY;
        for modes in [7usize, 11, 15, 19, 23] {
            let eadf = synthesize_eadf(&geom, &small_cfg(modes, 48)).unwrap();
            let err = probes.iter().map(|&(t, p)| rel_err(&eadf, &geom, t, p)).fold(0.0, f64::max);
            assert!(err < last, "modes {modes}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn default_config_is_accurate() {
        let geom = ArrayGeometry::cylindrical(0.1);
        let eadf = synthesize_eadf(&geom, &EadfConfig::default()).unwrap();
        assert_eq!(eadf.snapshot_len(), 20 * 19);
        for &(t, p) in &[(1.7, 0.3), (0.4, -2.9), (2.9, 1.1)] {
            assert!(rel_err(&eadf, &geom, t, p) < 1e-3);
        }
    }

    #[test]
    fn rejects_aliasing_and_even_counts() {
        let geom = ArrayGeometry::cylindrical(0.1);
        assert!(synthesize_eadf(&geom, &small_cfg(15, 11)).is_err());
        assert!(synthesize_eadf(&geom, &small_cfg(14, 32)).is_err());
        let mut c = small_cfg(5, 8);
        c.subcarriers = 20;
        assert!(synthesize_eadf(&geom, &c).is_err());
    }

    #[test]
    fn json_round_trip() {
        let geom = ArrayGeometry::cylindrical(0.1);
        let eadf = synthesize_eadf(&geom, &small_cfg(5, 8)).unwrap();
        let text = serde_json::to_string(&eadf.to_json()).unwrap();
        let back = Eadf::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, eadf);
    }
}
