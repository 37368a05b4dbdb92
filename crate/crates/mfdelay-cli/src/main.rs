use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use mfdelay_cli::config::{describe, experiment_defaults, load_config};
use mfdelay_cli::{run_experiment, RunError, EXPERIMENTS};

#[derive(Parser)]
#[command(
    name = "mfdelay",
    version,
    about = "Mean-field delay solver experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result files.
    Run {
        /// TOML configuration, or a manifest.json from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<String>,
    },
    /// Validate a configuration and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the experiment names.
    ListExperiments,
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for name in EXPERIMENTS {
                let (t, k, d, _, _) = experiment_defaults(name);
                println!("{name:<22} T={t} K={k} delta={d}  {}", describe(name));
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config, None, None) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&RunError::Config(e)),
        },
        Command::Run { config, seed, out } => {
            let cfg = match load_config(&config, seed, out.as_deref()) {
                Ok(cfg) => cfg,
                Err(e) => return fail(&RunError::Config(e)),
            };
            match run_experiment(&cfg) {
                Ok(outcome) => {
                    println!(
                        "{}: {} ({})",
                        cfg.experiment,
                        if outcome.passed() {
                            "passed"
                        } else {
                            "failed checks"
                        },
                        cfg.output_dir
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
