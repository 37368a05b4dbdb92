use serde_json::{Map, Value};
use std::fs;
use std::io;
use std::path::Path;

use crate::config::ExperimentConfig;

/// One CSV file: a header row and equally long columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Series {
    pub fn new(name: &str) -> Self {
        Series {
            name: name.into(),
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, header: &str, values: Vec<f64>) -> Self {
        if let Some((_, first)) = self.columns.first() {
            assert_eq!(
                first.len(),
                values.len(),
                "column {header} has a different length"
            );
        }
        self.columns.push((header.into(), values));
        self
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|(h, _)| h.as_str()))
            .expect("in-memory write");
        let rows = self.columns.first().map_or(0, |(_, c)| c.len());
        for r in 0..rows {
            w.write_record(self.columns.iter().map(|(_, c)| c[r].to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
    }
}

/// Headline numbers, pass/fail flags and series of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub result: Map<String, Value>,
    pub series: Vec<Series>,
}

impl Outcome {
    pub fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.result.insert(key.into(), v.into());
    }

    /// Sets `passed` to the conjunction of the given flags, which are also
    /// recorded.
    pub fn verdict(&mut self, flags: &[(&str, bool)]) {
        for (k, v) in flags {
            self.put(k, *v);
        }
        self.put("passed", flags.iter().all(|(_, v)| *v));
    }

    pub fn passed(&self) -> bool {
        self.result.get("passed") == Some(&Value::Bool(true))
    }
}

pub fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn manifest(cfg: &ExperimentConfig) -> Value {
    let mut m = Map::new();
    m.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    m.insert("library_version".into(), mfdelay::VERSION.into());
    m.insert("cli_version".into(), env!("CARGO_PKG_VERSION").into());
    Value::Object(m)
}

/// Writes result.json, one CSV per series and manifest.json into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("result.json"), pretty(&outcome.result))?;
    for s in &outcome.series {
        fs::write(dir.join(format!("{}.csv", s.name)), s.to_csv())?;
    }
    fs::write(dir.join("manifest.json"), pretty(&manifest(cfg)))
}
