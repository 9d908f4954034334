//! `cat-amp`: run scenario configs and regenerate figure data.

mod figures;
mod output;
mod scenario;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::figures::{reproduce, Figure, ReproduceOptions};
use crate::output::{Manifest, OutputDir};
use crate::scenario::{execute, Failure, Scenario};

const SCHEMA: &str = include_str!("../schema/scenario.schema.json");
const DEFAULT_OUT: &str = "cat-amp-out";

#[derive(Parser)]
#[command(name = "cat-amp", version, about = "Cat-state amplification simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a JSON scenario config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_path` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cavity truncation override.
        #[arg(long)]
        nc: Option<usize>,
    },
    /// Regenerate the data behind a figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        nc: Option<usize>,
        /// Smoke-test sizes and exact-operator stand-ins for long runs.
        #[arg(long)]
        fast: bool,
    },
    /// Print the JSON schema of scenario configs.
    Schema,
}

fn run(config: PathBuf, out: Option<PathBuf>, nc: Option<usize>) -> Result<(), Failure> {
    let started = Instant::now();
    let text = fs::read_to_string(&config).map_err(|e| Failure::Io(format!("{}: {e}", config.display())))?;
    let mut scenario = Scenario::parse(&text)?;
    if let Some(nc) = nc {
        scenario.set_cavity_dim(nc);
    }
    scenario.validate()?;
    let root = out
        .or_else(|| scenario.output_path().cloned())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut dir = OutputDir::create(&root)?;
    let summary = execute(&scenario, &mut dir)?;
    let resolved = serde_json::to_value(&scenario).map_err(|e| Failure::Io(e.to_string()))?;
    let command = vec!["run".to_string(), config.display().to_string()];
    let outputs = dir.written().to_vec();
    dir.write_json("manifest.json", &Manifest::new(command, resolved, started, &outputs))?;
    println!("{summary}");
    Ok(())
}

fn reproduce_cmd(figure: Figure, out: Option<PathBuf>, nc: Option<usize>, fast: bool) -> Result<(), Failure> {
    let started = Instant::now();
    let root = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut dir = OutputDir::create(&root)?;
    let opts = ReproduceOptions { cavity_dim: nc, fast };
    let summary = reproduce(figure, &mut dir, opts)?;
    let config = json!({ "figure": figure.name(), "cavity_dim": nc, "fast": fast });
    let command = vec!["reproduce".to_string(), figure.name().to_string()];
    let outputs = dir.written().to_vec();
    let name = format!("{}/manifest.json", figure.name());
    dir.write_json(&name, &Manifest::new(command, config, started, &outputs))?;
    println!("{}", json!({ "figure": figure.name(), "out": root.display().to_string(), "files": outputs.len() + 1 }));
    if figure == Figure::Fig4 {
        eprintln!("{}", summary["panels"]);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, nc } => run(config, out, nc),
        Command::Reproduce { figure, out, nc, fast } => reproduce_cmd(figure, out, nc, fast),
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
