use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ewnn_cdpa::cli::{self, ExperimentConfig, Overrides, SweepKind, TrainTarget};
use ewnn_cdpa::Result;

#[derive(Parser)]
#[command(version, about = "Class-D amplifier simulation and behavioral modeling experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Training seed, overriding `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the amplifier and write traces, spectrum and PS-IMD levels.
    Simulate,
    /// Train one model: benn, ewnn, ewnn-ab or volterra.
    Train {
        #[arg(long, default_value = "ewnn")]
        model: String,
    },
    /// Train all three models and write the comparison report.
    Compare,
    /// Run a sweep: hidden, frequency or ab-updates.
    Sweep {
        #[arg(long)]
        kind: String,
        /// Network for the hidden sweep, overriding `train.model`.
        #[arg(long)]
        model: Option<String>,
    },
}

fn run(args: Args) -> Result<()> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = Overrides { out: args.out, seed: args.seed }.apply(base);
    let written = match args.command {
        Command::Simulate => cli::cmd_simulate(&cfg)?,
        Command::Train { model } => cli::cmd_train(&cfg, model.parse()?)?,
        Command::Compare => cli::cmd_compare(&cfg)?,
        Command::Sweep { kind, model } => {
            let kind: SweepKind = kind.parse()?;
            if let Some(model) = model {
                match model.parse()? {
                    TrainTarget::Network(m) => cfg.train.model = m,
                    TrainTarget::Volterra => {
                        return Err(ewnn_cdpa::Error::Config("sweeps need a network model".into()))
                    }
                }
            }
            cli::cmd_sweep(&cfg, kind)?
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = run(args);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
