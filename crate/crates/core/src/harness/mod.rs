//! Config-driven experiment runner behind the `maxent-bayes` binary.
//!
//! A config names a command and its inputs. [`validate`] runs every check
//! that depends only on the config; [`execute`] also computes the payloads;
//! [`run`] writes them with a [`RunManifest`] of checksums. Nothing is written
//! unless the whole computation succeeds.

mod config;
mod experiments;
mod inputs;
mod output;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{Command, ExperimentConfig, OutputFormat};
pub use experiments::Artifacts;
pub use output::{csv_bytes, sha256_hex, to_json_bytes};

use crate::error::{Error, ErrorFamily, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A problem found in a config, as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub family: ErrorFamily,
    pub code: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl From<&Error> for Diagnostic {
    fn from(e: &Error) -> Self {
        Self {
            family: e.family(),
            code: e.code(),
            exit_code: e.family().exit_code(),
            message: e.to_string(),
        }
    }
}

/// Schema and semantic checks without running the experiment. Empty means valid.
pub fn validate(config: &ExperimentConfig) -> Vec<Diagnostic> {
    match experiments::prepare(config.command, &config.inputs) {
        Ok(_) => Vec::new(),
        Err(e) => vec![Diagnostic::from(&e)],
    }
}

/// Payloads of a successful run, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub json: Vec<u8>,
    pub csv: Vec<u8>,
}

pub fn execute(config: &ExperimentConfig) -> Result<Outcome> {
    let experiment = experiments::prepare(config.command, &config.inputs)?;
    let Artifacts { json, csv } = experiment.run(config.seed)?;
    Ok(Outcome {
        command: config.command,
        json: to_json_bytes(&json)?,
        csv,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// What was run, with which config, and checksums of everything written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub artifact_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs the experiment and writes `<command>.json` and/or `<command>.csv`
/// plus `manifest.json` into the config's `output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let started_at = now();
    let outcome = execute(config)?;
    let dir = config
        .output_dir
        .as_deref()
        .ok_or_else(|| Error::ConfigInvalid("output_dir is required to write results".into()))?;
    write_outputs(config, &outcome, dir, started_at)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes an already computed outcome; used by [`run`] and the CLI.
pub fn write_outputs(config: &ExperimentConfig, outcome: &Outcome, dir: &Path, started_at: String) -> Result<RunManifest> {
    let mut files: Vec<(String, &[u8])> = Vec::new();
    if config.format.wants_json() {
        files.push((format!("{}.json", outcome.command), &outcome.json));
    }
    if config.format.wants_csv() {
        files.push((format!("{}.csv", outcome.command), &outcome.csv));
    }
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("creating {}: {e}", dir.display())))?;
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))?;
        outputs.push(OutputRecord {
            file: name,
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = RunManifest {
        command: config.command,
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_sha256: sha256_hex(&config.canonical_bytes()),
        seed: config.seed,
        started_at,
        finished_at: now(),
        outputs,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn config(command: Command, inputs: serde_json::Value) -> ExperimentConfig {
        ExperimentConfig::new(command, inputs)
    }

    fn output(c: &ExperimentConfig) -> serde_json::Value {
        serde_json::from_slice(&execute(c).unwrap().json).unwrap()
    }

    #[test]
    fn tilt_example() {
        let c = config(Command::Tilt, json!({"q": [0.5, 0.5], "potential": [0, 1], "target": 0.25}));
        assert!(validate(&c).is_empty());
        let out = output(&c);
        assert!((out["lambda"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn tilt_out_of_range_is_one_infeasible_diagnostic() {
        let c = config(Command::Tilt, json!({"q": [0.5, 0.5], "potential": [0, 1], "target": 1.5}));
        let d = validate(&c);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "InfeasibleConstraint");
        assert_eq!(d[0].exit_code, 3);
    }

    #[test]
    fn table_guard_reports_size() {
        let c = config(
            Command::Sanov,
            json!({"p": [0.25, 0.25, 0.25, 0.25], "potential": [0, 1, 2, 3], "target_interval": [2, 3], "n_grid": [500]}),
        );
        let d = validate(&c);
        assert_eq!(d[0].code, "TableTooLarge");
        assert!(d[0].message.contains("21084251"));
        assert_eq!(d[0].exit_code, 5);
    }

    #[test]
    fn rate_has_zero_at_typical_value() {
        let c = config(
            Command::Rate,
            json!({"p": [0.5, 0.5], "potential": [0, 1], "target_interval": [0, 1], "points": 11}),
        );
        let out = output(&c);
        let star = out["xi_star"].as_f64().unwrap();
        let row = out["points"]
            .as_array()
            .unwrap()
            .iter()
            .find(|p| p["xi"].as_f64() == Some(star))
            .unwrap();
        assert_eq!(row["rate"].as_f64(), Some(0.0));
        assert_eq!(out["points"].as_array().unwrap().len(), 11);
    }

    #[test]
    fn rate_outside_range_is_infinite() {
        let c = config(Command::Rate, json!({"p": [0.5, 0.5], "potential": [0, 1], "xi_grid": [1.5]}));
        let out = output(&c);
        let row = &out["points"][1];
        assert_eq!(row["rate"], json!("inf"));
        assert_eq!(row["status"], json!("infeasible"));
    }

    #[test]
    fn bayes_and_loss_matrix_rows() {
        let c = config(
            Command::Bayes,
            json!({"posterior": [0.2, 0.8], "loss": [[0, 1], [1, 0]]}),
        );
        let out = output(&c);
        assert_eq!(out["decision_index"], json!(1));
        let c = config(Command::Rate, json!({"p": [0.2, 0.8], "loss": [[0, 1], [1, 0]], "xi_grid": [0.5]}));
        let out = output(&c);
        assert_eq!(out["decision_index"], json!(1));
        assert!((out["xi_star"].as_f64().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn every_command_runs() {
        let bern = json!([0.5, 0.5]);
        let cases = [
            config(Command::Project, json!({"q": [0.2, 0.3, 0.5], "potential": [0, 1, 2], "target": 0.5, "divergence": "squared_euclidean"})),
            config(Command::Necessity, json!({"q": [1.0/3.0, 1.0/3.0, 1.0/3.0], "potential": [0, 1, 2], "target": 0.5})),
            config(Command::Sanov, json!({"p": bern, "potential": [0, 1], "target_interval": [0.75, 1], "n_grid": [20, 40]})),
            config(Command::Sanov, json!({"p": bern, "potential": [0, 1], "target_interval": [0.6, 1], "n_grid": [10, 20], "method": "monte_carlo", "trials": 2000})),
            config(Command::Gibbs, json!({"p": bern, "potential": [0, 1], "target_interval": [0.7, 0.8], "n_grid": [20, 40]})),
            config(Command::Meta, json!({"P": [0.4, 0.6], "loss_row": [0, 1], "n": 20, "Xi": [0, 1], "U": {"kind": "centered_square"}, "eta": 0.01, "model_grid_step": 0.01})),
            config(Command::Corr, json!({"sigma_y": 1.0})),
        ];
        for c in &cases {
            assert!(validate(c).is_empty(), "{:?}: {:?}", c.command, validate(c));
            let o = execute(c).unwrap();
            assert!(!o.csv.is_empty());
        }
    }

    #[test]
    fn meta_prescreens() {
        let c = config(
            Command::Meta,
            json!({"P": [0.4, 0.6], "loss_row": [0, 1], "Xi": [0.2, 0.21], "prior": {"kind": "discrete", "models": [[0.5, 0.5]], "weights": [1]}}),
        );
        assert_eq!(validate(&c)[0].code, "EmptyFeasibleSet");
        let c = config(Command::Meta, json!({"P": [0.4, 0.6], "loss_row": [0, 1], "U": {"kind": "identity"}}));
        assert_eq!(validate(&c)[0].code, "ConfigInvalid");
        let c = config(
            Command::Meta,
            json!({"P": [0.4, 0.6], "loss_row": [0, 1], "n": 10, "U": {"kind": "identity"}, "eta": 2.0}),
        );
        assert_eq!(validate(&c)[0].code, "InfeasibleConstraint");
    }

    #[test]
    fn run_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(Command::Corr, json!({"sigma_y": 1.0}));
        c.output_dir = Some(dir.path().to_path_buf());
        c.format = OutputFormat::Both;
        let m = run(&c).unwrap();
        assert_eq!(m.outputs.len(), 2);
        for rec in &m.outputs {
            let bytes = fs::read(dir.path().join(&rec.file)).unwrap();
            assert_eq!(sha256_hex(&bytes), rec.sha256);
        }
        let again = run(&c).unwrap();
        assert_eq!(m.outputs, again.outputs);
        assert_eq!(m.config_sha256, again.config_sha256);
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }
}
