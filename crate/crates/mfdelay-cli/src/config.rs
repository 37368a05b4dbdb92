//! Flat TOML experiment configuration.
//!
//! Keys: `experiment`, `T`, `K`, `delta`, `dt`, `n_particles`, `seed`,
//! `beta`, `basis_degree`, `bins`, `picard_tol`, `picard_max_iter`,
//! `interaction_budget`, `output_dir`. Only `experiment` is required.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const EXPERIMENTS: [&str; 10] = [
    "counterexample",
    "comparison",
    "contraction-backward",
    "contraction-forward",
    "euler-order",
    "ito-check",
    "lions-check",
    "lq-control",
    "lq-delay-control",
    "gateaux-check",
];

const KEYS: [&str; 14] = [
    "experiment",
    "T",
    "K",
    "delta",
    "dt",
    "n_particles",
    "seed",
    "beta",
    "basis_degree",
    "bins",
    "picard_tol",
    "picard_max_iter",
    "interaction_budget",
    "output_dir",
];

pub const DEFAULT_DT: f64 = 1e-2;
pub const DEFAULT_N: usize = 10_000;

/// A fully resolved configuration; every defaulted field is filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub extension: f64,
    pub delta: f64,
    pub dt: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Picard-norm weight; absent means the solver's own formula.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub basis_degree: usize,
    pub bins: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub interaction_budget: usize,
    pub output_dir: String,
}

/// Experiment-specific defaults: (T, K, delta, picard_tol, picard_max_iter).
pub fn experiment_defaults(name: &str) -> (f64, f64, f64, f64, usize) {
    match name {
        "counterexample" => (1.0, 0.0, 0.25, 1e-8, 30),
        "comparison" => (1.0, 0.2, 0.2, 1e-8, 30),
        "contraction-backward" => (1.0, 0.2, 0.2, 1e-10, 60),
        "contraction-forward" => (1.0, 0.0, 0.2, 1e-9, 50),
        "lq-control" => (1.0, 0.0, 0.0, 1e-8, 60),
        "lq-delay-control" | "gateaux-check" => (1.0, 0.0, 0.25, 1e-8, 60),
        _ => (1.0, 0.0, 0.0, 1e-8, 30),
    }
}

/// Short description shown by `list-experiments`.
pub fn describe(name: &str) -> &'static str {
    match name {
        "counterexample" => "anticipated mean-field BSDE where xi1 <= xi2 but Y1_0 > Y2_0",
        "comparison" => "comparison of two ordered drivers and the monotone bootstrap",
        "contraction-backward" => "Picard rate of the backward solver under its default beta",
        "contraction-forward" => "Picard rate of the forward solver and agreement with Euler",
        "euler-order" => "strong order of Euler-Maruyama on geometric Brownian motion",
        "ito-check" => "Ito formula residual for x, x^2 and (int y dmu)^2",
        "lions-check" => "finite-difference check of three Lions derivatives",
        "lq-control" => "optimal control of dX = u dt + dB against the Riccati solution",
        "lq-delay-control" => {
            "optimal control of dX = u(t-delta) dt + dB against dynamic programming"
        }
        "gateaux-check" => "finite-difference directional derivative of J against the adjoint",
        _ => "",
    }
}

/// Every problem found while validating a configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigErrors {
    pub errors: Vec<String>,
    pub unknown_experiment: bool,
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.errors.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Reader<'a> {
    table: &'a toml::Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn float(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            toml::Value::Float(x) => Some(*x),
            toml::Value::Integer(i) => Some(*i as f64),
            other => {
                self.errors
                    .push(format!("{key} must be a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn int(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key)? {
            toml::Value::Integer(i) => Some(*i),
            other => {
                self.errors.push(format!(
                    "{key} must be an integer, got {}",
                    other.type_str()
                ));
                None
            }
        }
    }

    fn count(&mut self, key: &str, min: i64, default: usize) -> usize {
        match self.int(key) {
            Some(v) if v < min => {
                self.errors
                    .push(format!("{key} must be at least {min}, got {v}"));
                default
            }
            Some(v) => v as usize,
            None => default,
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        match self.float(key) {
            Some(v) if !(v > 0.0) || !v.is_finite() => {
                self.errors.push(format!("{key} must be positive, got {v}"));
                default
            }
            Some(v) => v,
            None => default,
        }
    }

    fn nonnegative(&mut self, key: &str, default: f64) -> f64 {
        match self.float(key) {
            Some(v) if !(v >= 0.0) || !v.is_finite() => {
                self.errors
                    .push(format!("{key} must be nonnegative, got {v}"));
                default
            }
            Some(v) => v,
            None => default,
        }
    }
}

fn steps(x: f64, dt: f64) -> Option<usize> {
    let r = x / dt;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * k.max(1.0)).then_some(k as usize)
}

/// Parses and validates configuration text, filling defaults. All problems
/// are reported together; malformed input never panics.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigErrors> {
    match raw.parse::<toml::Table>() {
        Ok(table) => validate_table(&table),
        Err(e) => Err(single(format!("malformed configuration: {}", e.message()))),
    }
}

pub fn validate_table(table: &toml::Table) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = Reader {
        table,
        errors: Vec::new(),
    };
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key `{key}`"));
        }
    }
    let mut unknown_experiment = false;
    let experiment = match table.get("experiment") {
        None => {
            r.errors.push("experiment is required".into());
            String::new()
        }
        Some(toml::Value::String(s)) if EXPERIMENTS.contains(&s.as_str()) => s.clone(),
        Some(toml::Value::String(s)) => {
            unknown_experiment = true;
            r.errors.push(format!(
                "unknown experiment `{s}` (expected one of {})",
                EXPERIMENTS.join(", ")
            ));
            s.clone()
        }
        Some(other) => {
            r.errors.push(format!(
                "experiment must be a string, got {}",
                other.type_str()
            ));
            String::new()
        }
    };
    let (t0, k0, d0, tol0, it0) = experiment_defaults(&experiment);
    let horizon = r.positive("T", t0);
    let extension = r.nonnegative("K", k0);
    let delta = r.nonnegative("delta", d0);
    let dt = r.positive("dt", DEFAULT_DT);
    let n_particles = r.count("n_particles", 2, DEFAULT_N);
    let seed = r.count("seed", 0, 0) as u64;
    let beta = match r.float("beta") {
        Some(b) if !(b > 0.0) || !b.is_finite() => {
            r.errors.push(format!("beta must be positive, got {b}"));
            None
        }
        b => b,
    };
    let basis_degree = r.count("basis_degree", 1, 2);
    let bins = r.count("bins", 1, 20);
    let picard_tol = r.positive("picard_tol", tol0);
    let picard_max_iter = r.count("picard_max_iter", 1, it0);
    let interaction_budget = r.count("interaction_budget", 2, 256);
    let output_dir = match table.get("output_dir") {
        None => format!(
            "out/{}",
            if experiment.is_empty() {
                "run"
            } else {
                &experiment
            }
        ),
        Some(toml::Value::String(s)) if !s.is_empty() => s.clone(),
        Some(other) => {
            r.errors.push(format!(
                "output_dir must be a nonempty string, got {}",
                other.type_str()
            ));
            String::new()
        }
    };

    for (name, x) in [("T", horizon), ("K", extension), ("delta", delta)] {
        if steps(x, dt).is_none() {
            r.errors
                .push(format!("dt = {dt} does not divide {name} = {x}"));
        }
    }
    match experiment.as_str() {
        "counterexample" if horizon != 1.0 || delta != 0.25 || extension != 0.0 => {
            r.errors
                .push("counterexample is defined on T = 1 with K = 0 and delta = 0.25".into());
        }
        "comparison" | "contraction-backward" if delta > extension => {
            r.errors.push(format!(
                "delta = {delta} must not exceed K = {extension} (anticipated values past T + K)"
            ));
        }
        "ito-check" if delta != 0.0 => {
            r.errors.push("ito-check needs delta = 0".into());
        }
        "ito-check" if steps(horizon, 2.0 * dt).is_none() => {
            r.errors.push(format!(
                "ito-check also runs at 2dt, which must divide T = {horizon}"
            ));
        }
        "lq-control" if delta != 0.0 => {
            r.errors
                .push("lq-control is the undelayed problem; use lq-delay-control".into());
        }
        "lq-delay-control" if delta == 0.0 => {
            r.errors.push("lq-delay-control needs delta > 0".into());
        }
        _ => {}
    }

    let errors = r.errors;
    if errors.is_empty() {
        Ok(ExperimentConfig {
            experiment,
            horizon,
            extension,
            delta,
            dt,
            n_particles,
            seed,
            beta,
            basis_degree,
            bins,
            picard_tol,
            picard_max_iter,
            interaction_budget,
            output_dir,
        })
    } else {
        Err(ConfigErrors {
            errors,
            unknown_experiment,
        })
    }
}

impl ExperimentConfig {
    /// The configuration as TOML text that validates back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Grid steps of (T, K, delta).
    pub fn steps(&self) -> (usize, usize, usize) {
        let s = |x| steps(x, self.dt).expect("validated");
        (s(self.horizon), s(self.extension), s(self.delta))
    }
}

fn single(msg: String) -> ConfigErrors {
    ConfigErrors {
        errors: vec![msg],
        unknown_experiment: false,
    }
}

/// The `config` object of a run manifest as a table.
fn manifest_table(text: &str) -> Result<toml::Table, ConfigErrors> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| single(format!("malformed manifest: {e}")))?;
    let cfg = v
        .get("config")
        .ok_or_else(|| single("manifest has no `config` object".into()))?;
    toml::Table::try_from(cfg)
        .map_err(|e| single(format!("manifest config is not a flat table: {e}")))
}

/// Loads a TOML configuration, or the configuration recorded in a
/// `manifest.json`, applies command-line overrides and validates.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    output_dir: Option<&str>,
) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| single(format!("cannot read {}: {e}", path.display())))?;
    let mut table = if path.extension().is_some_and(|e| e == "json") {
        manifest_table(&text)?
    } else {
        text.parse::<toml::Table>()
            .map_err(|e| single(format!("malformed configuration: {}", e.message())))?
    };
    if let Some(s) = seed {
        let s = i64::try_from(s)
            .map_err(|_| single(format!("seed must be at most {}, got {s}", i64::MAX)))?;
        table.insert("seed".into(), toml::Value::Integer(s));
    }
    if let Some(dir) = output_dir {
        table.insert("output_dir".into(), toml::Value::String(dir.into()));
    }
    validate_table(&table)
}
