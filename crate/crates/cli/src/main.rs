//! Command-line front end for the twinbeam simulator.
//!
//! `simulate` runs one scenario described by a JSON config file and prints
//! the artifact paths it wrote; `sweep` re-runs the scenario once per grid
//! value of a single numeric parameter and writes the collected table.
//! Exit codes: 0 on success, 2 for configuration problems, 3 when a
//! requested computation is physically infeasible.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use twinbeam::scenario::{run, sweep, ScenarioConfig};
use twinbeam::Error;

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Two-channel quantum communication simulator over correlated twin beams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config file.
    Simulate(SimulateArgs),
    /// Re-run the configured scenario across a grid of one parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to the JSON scenario config.
    #[arg(long)]
    config: PathBuf,
    /// Override (or supply) the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sample budget.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the JSON scenario config.
    #[arg(long)]
    config: PathBuf,
    /// Parameter to scan: sigma, omega, xi, eta, t2, n_common, epsilon,
    /// rho (tap) or m (probe readout noise).
    #[arg(long)]
    axis: String,
    /// Comma-separated grid values; an empty grid yields an empty table.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    grid: Vec<f64>,
}

/// Load the config, applying command-line overrides before the strict
/// parse so that `--seed` can stand in for a seed the file omits.
fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    samples: Option<usize>,
) -> twinbeam::Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad scenario config: {e}")))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    if let Some(seed) = seed {
        obj.insert("seed".into(), seed.into());
    }
    if let Some(samples) = samples {
        obj.insert("n_samples".into(), samples.into());
    }
    if let Some(dir) = out {
        obj.insert("out_dir".into(), Value::String(dir.display().to_string()));
    }
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("bad scenario config: {e}")))
}

fn dispatch(cli: Cli) -> twinbeam::Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(&args.config, args.seed, args.out.as_deref(), args.samples)?;
            let artifacts = run(&config)?;
            println!("{}", artifacts.summary_path.display());
            for path in &artifacts.table_paths {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Sweep(args) => {
            let config = load_config(&args.config, None, None, None)?;
            let table = sweep(&config, &args.axis, &args.grid)?;
            let artifacts = table.write(&config.out_dir)?;
            println!("{}", artifacts.summary_path.display());
            for path in &artifacts.table_paths {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
