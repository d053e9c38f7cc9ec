//! Command-line front end: Monte-Carlo sweeps, replica sweeps and presets.
//! Exit codes: 0 success, 2 configuration error, 3 I/O error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qmimo::harness::{
    preset, run_experiment, run_replica_sweep, write_replica_csv, write_simulate_csv,
    ExperimentSpec, HarnessError, RunMeta,
};

#[derive(Parser)]
#[command(name = "qmimo", version, about = "Quantized massive-MIMO simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count of the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the replica fixed point over the configured sweep.
    Replica {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in preset (fig2, fig3, fig4).
    Preset {
        name: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(f)
        }
    }
}

fn apply_overrides(spec: &mut ExperimentSpec, trials: Option<usize>, seed: Option<u64>) {
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(s) = seed {
        spec.master_seed = s;
    }
}

fn write_out(
    path: &PathBuf,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    body(&mut buf)?;
    buf.flush()?;
    Ok(())
}

fn simulate_to(spec: &ExperimentSpec, out: &PathBuf) -> Result<(), CliError> {
    let meta = RunMeta::new(spec.config_hash(), spec.master_seed);
    let rows = run_experiment(spec)?;
    write_out(out, |w| write_simulate_csv(w, &rows, &meta))
}

fn replica_to(spec: &ExperimentSpec, out: &PathBuf) -> Result<(), CliError> {
    let meta = RunMeta::new(spec.config_hash(), spec.master_seed);
    let rows = run_replica_sweep(spec)?;
    write_out(out, |w| write_replica_csv(w, &rows, &meta))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            trials,
            seed,
            threads,
            out,
        } => {
            let mut spec = load_config(&config)?;
            apply_overrides(&mut spec, trials, seed);
            spec.validate()?;
            with_pool(threads, move || simulate_to(&spec, &out))
        }
        Command::Replica {
            config,
            threads,
            out,
        } => {
            let spec = load_config(&config)?;
            with_pool(threads, move || replica_to(&spec, &out))
        }
        Command::Preset {
            name,
            trials,
            seed,
            threads,
            out,
        } => {
            let mut spec = preset(&name)?;
            apply_overrides(&mut spec, trials, seed);
            with_pool(threads, move || {
                // replica-only presets emit the replica schema
                if spec.estimators.is_empty() {
                    replica_to(&spec, &out)
                } else {
                    simulate_to(&spec, &out)
                }
            })
        }
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentSpec, CliError> {
    // missing config files are config errors, not I/O errors
    if !path.exists() {
        return Err(CliError::Config(format!("config file not found: {}", path.display())));
    }
    Ok(ExperimentSpec::from_path(path)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(3)
        }
    }
}
