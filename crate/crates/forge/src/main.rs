use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forge_core::pipeline::{compute_stats, run_batch, run_scene, validate_output, PipelineConfig, PipelineError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "forge", version, about = "Generate aerial navigation episodes from splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one scene seed.
    Scene {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Overrides `output_root` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenes master_seed .. master_seed + N in parallel.
    Batch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenes: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dataset statistics over an output root.
    Stats {
        #[arg(long)]
        root: PathBuf,
    },
    /// Re-check every archived target and episode under an output root.
    Validate {
        #[arg(long)]
        root: PathBuf,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn load(config: Option<PathBuf>, out: Option<PathBuf>) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(&p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = out {
        cfg.output_root = o;
    }
    Ok(cfg)
}

fn print(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({"error": kind, "message": message}));
    ExitCode::FAILURE
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    match cli.command {
        Command::Scene { config, seed, out } => {
            let cfg = load(config, out)?;
            cfg.validate()?;
            cfg.prepare_output()?;
            let manifest = run_scene(&cfg, seed, &cfg.services())?;
            print(&manifest);
            Ok(match manifest.failed_stage() {
                None => ExitCode::SUCCESS,
                Some(s) => fail("stage_failed", format!("{}: {}", s.name, s.error.clone().unwrap_or_default())),
            })
        }
        Command::Batch { config, scenes, out, workers, seed } => {
            let mut cfg = load(config, out)?;
            if let Some(w) = workers {
                cfg.worker_count = w;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let manifest = run_batch(&cfg, scenes, &cfg.services())?;
            print(&manifest);
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { root } => {
            print(&compute_stats(&root)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { root } => {
            let report = validate_output(&root)?;
            print(&report);
            Ok(if report.ok() {
                ExitCode::SUCCESS
            } else {
                fail("validation_failed", format!("{} failures", report.failures.len()))
            })
        }
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
