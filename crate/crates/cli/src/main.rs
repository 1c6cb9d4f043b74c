use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use udn_posync::eval::{run_scenario, write_outputs, ScenarioConfig};
use udn_posync::fusion::FilterMode;
use udn_posync::Error;

/// Cascaded DoA/ToA tracking and joint positioning / synchronization
/// experiments.
#[derive(Debug, Parser)]
#[command(name = "udn-posync", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write epochs.csv, an_epochs.csv, summary.json and
    /// config_echo.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated filter modes, e.g. posclock-ukf,possync-ekf-doa.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<String>>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the JSON schema of the configuration file.
    Schema,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_json_str(&text)
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        e if e.is_config() => ExitCode::from(EXIT_CONFIG),
        Error::Numerical { .. } | Error::NonFinite(_) | Error::SingularGeometry(_) => ExitCode::from(EXIT_NUMERICAL),
        _ => ExitCode::FAILURE,
    }
}

fn run(config: &Path, out: &Path, seed: Option<u64>, modes: Option<Vec<String>>, replications: Option<usize>) -> Result<ExitCode, Error> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if let Some(names) = modes {
        cfg.modes = names
            .iter()
            .map(|m| {
                m.parse::<FilterMode>().map_err(|e| Error::Config {
                    path: "--modes".into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;

    let result = run_scenario(&cfg)?;
    write_outputs(&result, out)?;

    println!(
        "{:<18} {:>9} {:>9} {:>9} {:>11} {:>11}",
        "mode", "3d [m]", "2d [m]", "z [m]", "ρ_UN [ns]", "ρ_AN [ns]"
    );
    for mode in &cfg.modes {
        if let Some(s) = result.mode(*mode) {
            let m = &s.median;
            let an = m.rmse_clock_an_ns.map_or("-".to_string(), |v| format!("{v:.3}"));
            println!(
                "{:<18} {:>9.3} {:>9.3} {:>9.3} {:>11.3} {:>11}",
                mode.to_string(),
                m.rmse_3d,
                m.rmse_2d,
                m.rmse_z,
                m.rmse_clock_un_ns,
                an
            );
        }
    }
    println!(
        "medians over {} replications, first {} epochs excluded; results in {}",
        cfg.replications,
        cfg.warmup_epochs,
        out.display()
    );

    let failures: Vec<_> = result.failures().collect();
    for f in &failures {
        eprintln!("filter failure: {} at epoch {}: {}", f.mode, f.epoch, f.message);
    }
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            modes,
            replications,
        } => run(&config, &out, seed, modes, replications),
        Command::Validate { config } => load(&config).map(|cfg| {
            println!(
                "{}: ok ({} replications, {} epochs, {} modes)",
                config.display(),
                cfg.replications,
                cfg.epochs(),
                cfg.modes.len()
            );
            ExitCode::SUCCESS
        }),
        Command::Schema => {
            println!("{:#}", ScenarioConfig::schema());
            Ok(ExitCode::SUCCESS)
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_for(&e)
    })
}
