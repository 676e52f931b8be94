use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regime_langevin::experiment::{
    bundled_experiment, complexity_csv, CtmcCheckConfig, ExperimentConfig, ExperimentError, ExperimentOutcome,
    RunOptions, TheoryConfig, BUNDLED_EXPERIMENTS, DATA_DIR_ENV,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_MISSING_DATA: u8 = 4;

#[derive(Parser)]
#[command(name = "rslmc", version, about = "Regime-switching Langevin samplers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the samplers described by an experiment config.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
    },
    /// Print the iteration-complexity table as CSV.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a generator: stationary law, spectrum and path occupation.
    CtmcCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a bundled experiment.
    Experiment {
        #[arg(long)]
        name: String,
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use seeds 0..k instead of the bundled ones.
        #[arg(long)]
        seeds: Option<u64>,
        /// Print the experiment's config as JSON and exit.
        #[arg(long)]
        dump_config: bool,
    },
}

fn exit_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::MissingDataset(_) => EXIT_MISSING_DATA,
        ExperimentError::Config { .. }
        | ExperimentError::UnknownExperiment(_)
        | ExperimentError::Ctmc(_)
        | ExperimentError::Theory(_)
        | ExperimentError::Model(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

fn report(outcome: &ExperimentOutcome) -> u8 {
    emit(&format!("experiment {} (config {})\n", outcome.id, outcome.config_hash));
    for r in &outcome.records {
        let last = r.final_metric.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        let status = match r.divergence_iteration {
            Some(k) => format!("diverged at {k}"),
            None => "ok".to_string(),
        };
        emit(&format!("{:<28} {:<10} seed {:<4} final {} {:<6} {}\n", r.label, r.display_name, r.seed, outcome.metric, last, status));
    }
    if let Some(dir) = &outcome.output_dir {
        emit(&format!("output: {}\n", dir.display()));
    }
    if outcome.any_diverged() {
        eprintln!("error: at least one run diverged");
        EXIT_DIVERGENCE
    } else {
        0
    }
}

fn run(cli: Cli) -> Result<u8, ExperimentError> {
    match cli.command {
        Command::Sample { config, out, data_dir } => {
            let cfg = ExperimentConfig::from_json(&read(&config)?)?;
            let outcome = regime_langevin::experiment::run_experiment(&cfg, &RunOptions { data_dir, out_dir: out })?;
            Ok(report(&outcome))
        }
        Command::Theory { config, out } => {
            let rows = TheoryConfig::from_json(&read(&config)?)?.table()?;
            let text = complexity_csv(&rows)?;
            match out {
                Some(path) => fs::write(&path, text).map_err(|source| ExperimentError::Io { path, source })?,
                None => emit(&text),
            }
            Ok(0)
        }
        Command::CtmcCheck { config } => {
            let report = CtmcCheckConfig::from_json(&read(&config)?)?.run()?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&report)?));
            if report.passed {
                Ok(0)
            } else {
                eprintln!("error: total variation {} exceeds {}", report.total_variation, report.threshold);
                Ok(EXIT_FAILURE)
            }
        }
        Command::Experiment { name, data_dir, out, seeds, dump_config } => {
            let mut cfg = bundled_experiment(&name)?;
            if let Some(k) = seeds {
                cfg.seeds = (0..k).collect();
            }
            if dump_config {
                emit(&cfg.to_json());
                return Ok(0);
            }
            let out = out.or_else(|| Some(PathBuf::from("out")));
            let outcome = regime_langevin::experiment::run_experiment(&cfg, &RunOptions { data_dir, out_dir: out })?;
            Ok(report(&outcome))
        }
    }
}

/// Writes to stdout; a closed pipe (`rslmc ... | head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let ExperimentError::UnknownExperiment(_) = e {
                eprintln!("usage: rslmc experiment --name <{}>", BUNDLED_EXPERIMENTS.join("|"));
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
