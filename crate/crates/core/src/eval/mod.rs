//! Batch evaluation: scenario configuration, the replicated cascade run,
//! RMSE metrics and result files.

mod config;
mod metrics;
mod output;
mod run;

pub use config::{ArrayConfig, ClockConfig, InitPolicy, MeasurementConfig, ScenarioConfig, TrajectoryChoice};
pub use metrics::{median, rmse, rmse_scalar, Component, Metrics};
pub use output::{read_an_epochs_csv, read_epochs_csv, read_summary, write_outputs, SummaryFile, AN_EPOCHS_HEADER, EPOCHS_HEADER, SCHEMA_VERSION};
pub use run::{run_scenario, summarize, AnRecord, EpochRecord, MeasurementMetrics, ModeFailure, ModeSummary, ReplicationInfo, RunResult};
