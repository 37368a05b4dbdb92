use mfdelay_cli::config::validate_table;
use mfdelay_cli::{validate_config, ExperimentConfig, RunError, EXPERIMENTS};
use proptest::prelude::*;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfdelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = validate_config("experiment = \"euler-order\"").unwrap();
    assert_eq!(cfg.dt, 1e-2);
    assert_eq!(cfg.n_particles, 10_000);
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.horizon, 1.0);
    assert_eq!(cfg.output_dir, "out/euler-order");
    let delayed = validate_config("experiment = \"lq-delay-control\"").unwrap();
    assert_eq!(delayed.delta, 0.25);
}

#[test]
fn dt_not_dividing_delta_names_both_fields() {
    let e = validate_config("experiment = \"lq-delay-control\"\ndt = 0.03\ndelta = 0.25\nT = 0.9")
        .unwrap_err();
    assert_eq!(e.errors.len(), 1, "{e}");
    assert!(
        e.errors[0].contains("dt") && e.errors[0].contains("delta"),
        "{e}"
    );
}

#[test]
fn errors_accumulate() {
    let e = validate_config("experiment = \"nope\"\nn_particles = -5").unwrap_err();
    assert_eq!(e.errors.len(), 2, "{e}");
    assert!(e.unknown_experiment);
    let e = validate_config("experiment = 3\ndt = \"x\"\nfoo = 1\nseed = -1").unwrap_err();
    assert_eq!(e.errors.len(), 4, "{e}");
    assert!(!e.unknown_experiment);
}

#[test]
fn malformed_text_is_an_error() {
    for raw in [
        "",
        "experiment = ",
        "[[[",
        "experiment = \"lq-control\"\ndt = nan",
        "dt = inf",
    ] {
        assert!(validate_config(raw).is_err(), "{raw}");
    }
}

fn any_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        0..EXPERIMENTS.len(),
        1usize..200,
        (1usize..50, 0usize..50),
        prop::sample::select(vec![0.05, 0.01, 0.005, 0.001]),
        2usize..1_000_000,
        0u64..=i64::MAX as u64,
        prop::option::of(0.1..100.0f64),
        (
            1usize..6,
            1usize..64,
            1e-14..1.0f64,
            1usize..500,
            2usize..5000,
        ),
        "[a-z0-9_/.]{1,20}",
    )
        .prop_map(
            |(e, t, (d, k), dt, n, seed, beta, (deg, bins, tol, it, ib), out)| {
                let experiment = EXPERIMENTS[e].to_string();
                let (t0, k0, d0, _, _) = mfdelay_cli::config::experiment_defaults(&experiment);
                let (horizon, extension, delta) = match experiment.as_str() {
                    "counterexample"
                    | "comparison"
                    | "contraction-backward"
                    | "ito-check"
                    | "lq-control" => (t0, k0, d0),
                    _ => (t as f64 * dt, k as f64 * dt, d as f64 * dt),
                };
                ExperimentConfig {
                    experiment,
                    horizon,
                    extension,
                    delta,
                    dt,
                    n_particles: n,
                    seed,
                    beta,
                    basis_degree: deg,
                    bins,
                    picard_tol: tol,
                    picard_max_iter: it,
                    interaction_budget: ib,
                    output_dir: out,
                }
            },
        )
}

proptest! {
    #[test]
    fn config_round_trips(cfg in any_config()) {
        let back = validate_config(&cfg.to_toml());
        prop_assert_eq!(back, Ok(cfg));
    }

    #[test]
    fn arbitrary_text_never_panics(raw in "\\PC{0,200}") {
        let _ = validate_config(&raw);
    }

    #[test]
    fn arbitrary_tables_never_panic(keys in prop::collection::vec(("[a-zA-Z_]{1,12}", -1e6..1e6f64), 0..10)) {
        let mut t = toml::Table::new();
        for (k, v) in keys {
            t.insert(k, toml::Value::Float(v));
        }
        let _ = validate_table(&t);
    }
}

#[test]
fn list_experiments_names_all() {
    let o = bin(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for e in EXPERIMENTS {
        assert!(text.lines().any(|l| l.starts_with(e)), "{e}");
    }
}

#[test]
fn validate_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.toml", "experiment = \"lions-check\"\n");
    let o = bin(&["validate", "--config", &p]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        validate_config(&text).unwrap(),
        validate_config("experiment = \"lions-check\"").unwrap()
    );
    let bad = write(
        dir.path(),
        "b.toml",
        "experiment = \"lions-check\"\nn_particles = 0\n",
    );
    let o = bin(&["validate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("n_particles"));
}

#[test]
fn unknown_experiment_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.toml", "experiment = \"heat-equation\"\n");
    let o = bin(&["run", "--config", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("heat-equation"));
}

#[test]
fn non_convergence_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let p = write(
        dir.path(),
        "c.toml",
        "experiment = \"contraction-backward\"\nn_particles = 200\npicard_max_iter = 2\n",
    );
    let o = bin(&["run", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["norms"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let div = RunError::Solver(mfdelay::Error::Divergence { step: 3, time: 0.1 });
    assert_eq!(div.exit_code(), 4);
    let nc = RunError::Solver(mfdelay::Error::NonConvergence { norms: vec![1.0] });
    assert_eq!(nc.exit_code(), 3);
    assert_eq!(
        RunError::Solver(mfdelay::Error::Config("x".into())).exit_code(),
        1
    );
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .filter(|(n, _)| n != "manifest.json")
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    let p = write(
        dir.path(),
        "c.toml",
        "experiment = \"counterexample\"\nn_particles = 2000\n",
    );
    for out in [&a, &b] {
        let o = bin(&[
            "run",
            "--config",
            &p,
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(files(&a), files(&b));

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("result.json")).unwrap()).unwrap();
    for key in ["Y1_0", "Y2_0", "violation", "passed"] {
        assert!(result.get(key).is_some(), "{key}");
    }
    assert_eq!(result["Y2_0"], 0.0);
    let csv = fs::read_to_string(a.join("counterexample.csv")).unwrap();
    assert!(csv.starts_with("t,Y_mean,"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 102);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["library_version"], mfdelay::VERSION);
    assert_eq!(manifest["config"]["seed"], 42);
    assert_eq!(manifest["config"]["dt"], 0.01);
    assert_eq!(manifest["config"]["picard_tol"], 1e-8);

    let m = a.join("manifest.json");
    let o = bin(&[
        "run",
        "--config",
        m.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&a), files(&c));
}

#[test]
fn json_keys_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let p = write(
        dir.path(),
        "c.toml",
        "experiment = \"lions-check\"\nn_particles = 300\n",
    );
    let o = bin(&["run", "--config", &p, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("result.json")).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(keys.contains(&"passed"));
}
