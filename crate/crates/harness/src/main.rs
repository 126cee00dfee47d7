use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcshap_harness::{run_experiment, ExperimentConfig, ExperimentKind, HarnessError};

#[derive(Parser)]
#[command(name = "dcshap", version, about = "Data Collaboration SHAP consistency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Biased two-user split: count sign contradictions between users.
    DemoContradiction(RunArgs),
    /// Two-user RMSE of attributions, KernelSHAP vs DC-SHAP, over seeds.
    HorizontalConsistency(RunArgs),
    /// Vertical third-party full vs host/guest partial explanations.
    VerticalConsistency(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted keys take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset name from the manifest.
    #[arg(long)]
    dataset: Option<String>,
}

fn configure(kind: ExperimentKind, args: RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(kind, path)?,
        None => ExperimentConfig::defaults(kind, args.dataset.as_deref().unwrap_or(dcshap_harness::config::ADULT)),
    };
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::DemoContradiction(a) => (ExperimentKind::DemoContradiction, a),
        Command::HorizontalConsistency(a) => (ExperimentKind::HorizontalConsistency, a),
        Command::VerticalConsistency(a) => (ExperimentKind::VerticalConsistency, a),
    };
    let result = configure(kind, args).and_then(|cfg| run_experiment(kind, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
