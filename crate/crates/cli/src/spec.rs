//! Experiment descriptions: a subcommand plus configuration, sweep ranges,
//! run parameters and an output target.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use align_lab::SystemConfig;
use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bounds,
    CjParams,
    Contradiction,
    Cj3,
    Probe,
    Solve,
    Verify,
    ExportPoly,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::CjParams => "cj-params",
            Command::Contradiction => "contradiction",
            Command::Cj3 => "cj3",
            Command::Probe => "probe",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::ExportPoly => "export-poly",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Inclusive integer range written `a..b`, `a..=b` or `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntRange {
    pub start: u64,
    pub end: u64,
}

impl IntRange {
    pub fn new(start: u64, end: u64) -> Result<Self, String> {
        if start > end {
            return Err(format!("empty range {start}..{end}"));
        }
        Ok(Self { start, end })
    }

    pub fn single(x: u64) -> Self {
        Self { start: x, end: x }
    }

    pub fn iter(self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }

    pub fn len(self) -> u64 {
        self.end - self.start + 1
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad range bound {t:?} in {s:?}"));
        match s.split_once("..") {
            Some((a, b)) => IntRange::new(num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
            None => Ok(IntRange::single(num(s)?)),
        }
    }
}

impl Serialize for IntRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IntRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(x) => Ok(IntRange::single(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Parameter sweep ranges.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub users: Option<IntRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<IntRange>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<IntRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<IntRange>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Run parameters; unset values fall back to per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_align: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

/// A complete, self-describing experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SystemConfig>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: Output,
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            config: None,
            sweep: Sweep::default(),
            params: Params::default(),
            output: Output::default(),
        }
    }

    /// Parse a `--config` document: either a full experiment (it has a
    /// `command` key) or a bare system configuration.
    pub fn from_config_file(command: Command, text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Spec(format!("config is not valid JSON: {e}")))?;
        if value.get("command").is_some() {
            let spec: ExperimentSpec = serde_json::from_value(value).map_err(|e| CliError::Spec(format!("invalid experiment spec: {e}")))?;
            if spec.command != command {
                return Err(CliError::Spec(format!(
                    "spec is for `{}` but `{}` was invoked",
                    spec.command.name(),
                    command.name()
                )));
            }
            Ok(spec)
        } else {
            let config: SystemConfig = serde_json::from_value(value).map_err(|e| CliError::Spec(format!("invalid system config: {e}")))?;
            Ok(Self {
                config: Some(config),
                ..Self::new(command)
            })
        }
    }

    pub fn require_config(&self) -> Result<&SystemConfig, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Spec(format!("`{}` needs a system config (--config)", self.command.name())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!("3..6".parse::<IntRange>().unwrap(), IntRange { start: 3, end: 6 });
        assert_eq!("3..=6".parse::<IntRange>().unwrap(), IntRange { start: 3, end: 6 });
        assert_eq!("4".parse::<IntRange>().unwrap(), IntRange::single(4));
        assert!("6..3".parse::<IntRange>().is_err());
        assert!("a..3".parse::<IntRange>().is_err());
        assert_eq!("1..5".parse::<IntRange>().unwrap().len(), 5);
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"command":"bounds","sweep":{"K":"3..6","n":2},"params":{"seed":7},"output":{"format":"csv"}}"#;
        let spec = ExperimentSpec::from_config_file(Command::Bounds, text).unwrap();
        assert_eq!(spec.sweep.users, Some(IntRange { start: 3, end: 6 }));
        assert_eq!(spec.sweep.n, Some(IntRange::single(2)));
        assert_eq!(spec.params.seed, Some(7));
        assert_eq!(spec.output.format, Format::Csv);
        let again: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn bare_config_and_mismatch() {
        let cfg = r#"{"K":3,"N":[2,2,2],"d":[1,1,1],"structure":{"kind":"Generic"}}"#;
        let spec = ExperimentSpec::from_config_file(Command::Solve, cfg).unwrap();
        assert_eq!(spec.require_config().unwrap(), &SystemConfig::symmetric(3, 2, 1));
        let err = ExperimentSpec::from_config_file(Command::Solve, r#"{"command":"probe"}"#).unwrap_err();
        assert!(matches!(err, CliError::Spec(_)));
        assert!(ExperimentSpec::from_config_file(Command::Solve, "{").is_err());
    }
}
