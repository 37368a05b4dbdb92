//! Experiment runner: configuration, the named experiments and their result
//! files.

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt;
use std::path::Path;

pub use config::{load_config, validate_config, ConfigErrors, ExperimentConfig, EXPERIMENTS};
pub use output::{Outcome, Series};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Solver(mfdelay::Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Solver(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    /// 2 unknown experiment, 3 non-convergence, 4 divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(e) if e.unknown_experiment => 2,
            RunError::Solver(mfdelay::Error::NonConvergence { .. }) => 3,
            RunError::Solver(mfdelay::Error::Divergence { .. }) => 4,
            _ => 1,
        }
    }
}

/// Runs `cfg` and writes result.json, the CSV series and manifest.json into
/// `cfg.output_dir`. A non-convergence error also writes diagnostics.json.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let dir = Path::new(&cfg.output_dir);
    match experiments::run(cfg) {
        Ok(outcome) => {
            output::write_outputs(cfg, &outcome, dir)?;
            Ok(outcome)
        }
        Err(e) => {
            if let mfdelay::Error::NonConvergence { norms } = &e {
                std::fs::create_dir_all(dir)?;
                let diag = serde_json::json!({
                    "error": e.to_string(),
                    "experiment": cfg.experiment,
                    "norms": norms,
                });
                std::fs::write(dir.join("diagnostics.json"), output::pretty(&diag))?;
                std::fs::write(
                    dir.join("manifest.json"),
                    output::pretty(&output::manifest(cfg)),
                )?;
            }
            Err(RunError::Solver(e))
        }
    }
}
