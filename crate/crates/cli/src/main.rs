//! `hybridstat`: run the hybrid pipeline, compare models or generate data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridstat_core::pipeline::{
    compare_models, emit_reports, generate_synthetic, run_hybrid, to_rounded_json, write_atomic, PipelineConfig,
    PipelineError, SyntheticSpec,
};
use hybridstat_core::tabular::write_csv;

#[derive(Parser)]
#[command(
    name = "hybridstat",
    version,
    about = "LASSO-selected ML predictors with statistical diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hybrid recipe and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every configured model on one split and write a comparison.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic CSV plus a `.meta.json` sidecar with the
    /// generating coefficients.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed given in the --spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<PipelineConfig, PipelineError> {
    let mut config = PipelineConfig::from_path(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn output_dir(config: &PipelineConfig, out: Option<PathBuf>) -> Result<PathBuf, PipelineError> {
    out.or_else(|| config.output_dir.clone())
        .ok_or_else(|| PipelineError::Config("no output directory: pass --out or set output_dir".into()))
}

fn generate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>, PipelineError> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (table, meta) = generate_synthetic(&spec)?;
    let mut buf = Vec::new();
    write_csv(&table, &mut buf)?;
    write_atomic(out, &buf)?;
    let sidecar = out.with_extension("meta.json");
    write_atomic(&sidecar, to_rounded_json(&meta)?.as_bytes())?;
    Ok(vec![out.to_path_buf(), sidecar])
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, PipelineError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let config = load_config(&config, seed)?;
            let dir = output_dir(&config, out)?;
            emit_reports(&run_hybrid(&config)?.report, &dir)
        }
        Command::Compare { config, out, seed } => {
            let config = load_config(&config, seed)?;
            let dir = output_dir(&config, out)?;
            emit_reports(&compare_models(&config)?.report, &dir)
        }
        Command::Generate { spec, out, seed } => generate(&spec, &out, seed),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hybridstat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
