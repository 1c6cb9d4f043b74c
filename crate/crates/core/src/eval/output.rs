use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{AnRecord, EpochRecord, MeasurementMetrics, ModeSummary, ReplicationInfo, RunResult};
use crate::error::{Error, Result};
use crate::fusion::FilterMode;

/// Version written into every CSV row and `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

pub const EPOCHS_HEADER: &str =
    "schema_version,replication,mode,epoch,t,true_x,true_y,true_z,est_x,est_y,est_z,true_rho_un,est_rho_un,true_alpha_un,est_alpha_un";

pub const AN_EPOCHS_HEADER: &str = "schema_version,replication,mode,epoch,an_id,reference,true_rho_an,est_rho_an,true_elevation,true_azimuth,true_delay,meas_elevation,meas_azimuth,meas_delay";

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub warmup_epochs: usize,
    pub replications: Vec<ReplicationInfo>,
    pub modes: BTreeMap<String, ModeSummary>,
    pub measurements: MeasurementMetrics,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes `epochs.csv`, `an_epochs.csv`, `summary.json` and
/// `config_echo.json` into `out_dir`, creating it if needed. Floats use 17
/// significant digits; angles are in radians and times in seconds.
pub fn write_outputs(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out_dir.display()))))?;
    let paths: Vec<PathBuf> = ["epochs.csv", "an_epochs.csv", "summary.json", "config_echo.json"]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();

    let mut w = create(&paths[0])?;
    writeln!(w, "{EPOCHS_HEADER}")?;
    for r in &result.epochs {
        write!(w, "{SCHEMA_VERSION},{},{},{},{:.16e}", r.replication, r.mode, r.epoch, r.time)?;
        for v in r.true_position.iter().chain(&r.est_position) {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w, ",{:.16e},{:.16e},{:.16e},{:.16e}", r.true_offset, r.est_offset, r.true_skew, r.est_skew)?;
    }
    w.flush()?;

    let mut w = create(&paths[1])?;
    writeln!(w, "{AN_EPOCHS_HEADER}")?;
    for r in &result.an_epochs {
        write!(
            w,
            "{SCHEMA_VERSION},{},{},{},{},{},{:.16e},{:.16e}",
            r.replication, r.mode, r.epoch, r.an_id, r.reference as u8, r.true_offset, r.est_offset
        )?;
        for v in r.truth.iter().chain(&r.measured) {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let summary = SummaryFile {
        schema_version: SCHEMA_VERSION,
        warmup_epochs: result.config.warmup_epochs,
        replications: result.replications.clone(),
        modes: result.modes.clone(),
        measurements: result.measurements.clone(),
    };
    let mut w = create(&paths[2])?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&paths[3])?;
    serde_json::to_writer_pretty(&mut w, &result.config)?;
    writeln!(w)?;
    w.flush()?;
    Ok(paths)
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{}:{line}: {msg}", path.display()))
}

/// Reads a CSV written by [`write_outputs`], checking the header, and
/// returns the fields of every data row.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first != header {
        return Err(parse_err(path, 1, "unexpected header"));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<String> = line.split(',').map(str::to_owned).collect();
        if fields.len() != width {
            return Err(parse_err(path, i + 2, format!("expected {width} fields, got {}", fields.len())));
        }
        if fields[0] != SCHEMA_VERSION.to_string() {
            return Err(parse_err(path, i + 2, format!("unsupported schema version {}", fields[0])));
        }
        rows.push((i + 2, fields));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| parse_err(path, line, format!("bad field '{s}': {e}")))
}

pub fn read_epochs_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    read_rows(path, EPOCHS_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            let num = |i: usize| field::<f64>(path, ln, &f[i]);
            Ok(EpochRecord {
                replication: field(path, ln, &f[1])?,
                mode: field::<FilterMode>(path, ln, &f[2])?,
                epoch: field(path, ln, &f[3])?,
                time: num(4)?,
                true_position: [num(5)?, num(6)?, num(7)?],
                est_position: [num(8)?, num(9)?, num(10)?],
                true_offset: num(11)?,
                est_offset: num(12)?,
                true_skew: num(13)?,
                est_skew: num(14)?,
            })
        })
        .collect()
}

pub fn read_an_epochs_csv(path: &Path) -> Result<Vec<AnRecord>> {
    read_rows(path, AN_EPOCHS_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            let num = |i: usize| field::<f64>(path, ln, &f[i]);
            Ok(AnRecord {
                replication: field(path, ln, &f[1])?,
                mode: field::<FilterMode>(path, ln, &f[2])?,
                epoch: field(path, ln, &f[3])?,
                an_id: field(path, ln, &f[4])?,
                reference: field::<u8>(path, ln, &f[5])? != 0,
                true_offset: num(6)?,
                est_offset: num(7)?,
                truth: [num(8)?, num(9)?, num(10)?],
                measured: [num(11)?, num(12)?, num(13)?],
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<SummaryFile> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
