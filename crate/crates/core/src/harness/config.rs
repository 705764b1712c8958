use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bayes,
    Tilt,
    Project,
    Necessity,
    Sanov,
    Gibbs,
    Rate,
    Meta,
    Corr,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Bayes,
        Command::Tilt,
        Command::Project,
        Command::Necessity,
        Command::Sanov,
        Command::Gibbs,
        Command::Rate,
        Command::Meta,
        Command::Corr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Bayes => "bayes",
            Command::Tilt => "tilt",
            Command::Project => "project",
            Command::Necessity => "necessity",
            Command::Sanov => "sanov",
            Command::Gibbs => "gibbs",
            Command::Rate => "rate",
            Command::Meta => "meta",
            Command::Corr => "corr",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::ConfigInvalid(format!("unknown format `{s}`"))),
        }
    }
}

/// One experiment: a command, its inputs, and where the results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "empty_object")]
    pub inputs: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn new(command: Command, inputs: Value) -> Self {
        Self {
            command,
            inputs,
            seed: 0,
            output_dir: None,
            format: OutputFormat::default(),
        }
    }

    /// Parses a config file. When `expected` is given, a missing `"command"`
    /// defaults to it and a different one is rejected.
    pub fn parse(text: &str, expected: Option<Command>) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("malformed JSON: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::ConfigInvalid("config must be a JSON object".into()))?;
        if let Some(cmd) = expected {
            match obj.get("command") {
                None => {
                    obj.insert("command".into(), Value::String(cmd.name().into()));
                }
                Some(Value::String(s)) if s == cmd.name() => {}
                Some(other) => {
                    return Err(Error::ConfigInvalid(format!(
                        "config command {other} does not match `{cmd}`"
                    )))
                }
            }
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Canonical JSON (sorted keys) used for hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&serde_json::to_value(self).expect("config is plain data")).expect("in-memory write")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        let c = ExperimentConfig::parse(r#"{"command": "tilt", "inputs": {"q": [0.5, 0.5]}}"#, None).unwrap();
        assert_eq!(c.command, Command::Tilt);
        assert_eq!(c.format, OutputFormat::Json);
        let c = ExperimentConfig::parse(r#"{"inputs": {}}"#, Some(Command::Rate)).unwrap();
        assert_eq!(c.command, Command::Rate);
        assert!(ExperimentConfig::parse(r#"{"command": "tilt"}"#, Some(Command::Rate)).is_err());
        assert!(ExperimentConfig::parse(r#"{"command": "fly"}"#, None).is_err());
        assert!(ExperimentConfig::parse("{not json", None).is_err());
        assert!(ExperimentConfig::parse(r#"{"command": "tilt", "extra": 1}"#, None).is_err());
    }

    #[test]
    fn canonical_bytes_ignore_key_order() {
        let a = ExperimentConfig::parse(r#"{"command": "tilt", "seed": 3, "inputs": {"b": 1, "a": 2}}"#, None).unwrap();
        let b = ExperimentConfig::parse(r#"{"inputs": {"a": 2, "b": 1}, "seed": 3, "command": "tilt"}"#, None).unwrap();
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
    }
}
