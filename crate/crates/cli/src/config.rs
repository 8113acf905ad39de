//! Run configuration: a TOML document with nested sections, environment
//! overrides, and fail-closed validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use streamctl_core::reason::{BandConfig, TrainMode, TrainerConfig};
use streamctl_core::sim::{OracleConfig, QueryConfig, SyntheticStreamConfig, ToyScorer};
use streamctl_core::CompressionPolicy;

use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "STREAMCTL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub memory: CompressionPolicy,
    pub band: BandConfig,
    pub trainer: TrainerConfig,
    pub environment: EnvironmentConfig,
    pub readiness: ReadinessConfig,
    pub impact: ImpactConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out: PathBuf::from("runs"),
            memory: CompressionPolicy::default(),
            band: BandConfig::default(),
            trainer: TrainerConfig::default(),
            environment: EnvironmentConfig::default(),
            readiness: ReadinessConfig::default(),
            impact: ImpactConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub stream: SyntheticStreamConfig,
    pub oracle: OracleConfig,
    pub queries: QueryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadinessConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for ReadinessConfig {
    fn default() -> Self {
        ReadinessConfig {
            epochs: 200,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactConfig {
    pub trials: usize,
    pub scorer: ToyScorer,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        ImpactConfig {
            trials: 100,
            scorer: ToyScorer::default(),
        }
    }
}

fn scoped<T>(section: &str, r: streamctl_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        streamctl_core::Error::Config { key, message } => CliError::Config {
            key: format!("{section}.{key}"),
            message,
        },
        other => CliError::Core(other),
    })
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        scoped("memory", self.memory.validate())?;
        scoped("band", self.band.validate())?;
        scoped("trainer", self.trainer.validate())?;
        scoped("environment.stream", self.environment.stream.validate())?;
        scoped("environment.oracle", self.environment.oracle.validate())?;
        scoped("environment.queries", self.environment.queries.validate())?;
        if self.trainer.steps > 1_000_000 {
            return Err(invalid("trainer.steps", "must not exceed 1000000"));
        }
        if self.readiness.epochs == 0 {
            return Err(invalid("readiness.epochs", "must be at least 1"));
        }
        if !(self.readiness.learning_rate > 0.0 && self.readiness.learning_rate.is_finite()) {
            return Err(invalid("readiness.learning_rate", "must be positive"));
        }
        if self.impact.trials == 0 {
            return Err(invalid("impact.trials", "must be at least 1"));
        }
        if !(self.impact.scorer.temperature > 0.0 && self.impact.scorer.temperature.is_finite()) {
            return Err(invalid("impact.scorer.temperature", "must be positive"));
        }
        Ok(())
    }

    pub fn mode(&self) -> TrainMode {
        self.trainer.mode
    }

    /// Trainer settings with the run seed filled in.
    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            seed: self.seed,
            ..self.trainer
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Data(format!("cannot serialize config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| CliError::io(path, e))
    }
}

/// Turns `STREAMCTL_SECTION__KEY=value` pairs into key paths. Values are
/// read as TOML literals, falling back to plain strings.
fn apply_overrides<I>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let path: Vec<String> = name[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Usage(format!(
                "malformed override variable {name}"
            )));
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let (leaf, parents) = path.split_last().expect("non-empty path");
        let mut cursor = &mut *table;
        for (depth, key) in parents.iter().enumerate() {
            let entry = cursor
                .entry(key.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cursor = entry.as_table_mut().ok_or_else(|| {
                invalid(
                    &path[..=depth].join("."),
                    format!("override {name} targets a non-table value"),
                )
            })?;
        }
        cursor.insert(leaf.clone(), value);
    }
    Ok(())
}

/// Parses a config document, applies overrides, fills defaults and
/// validates. Unknown keys are rejected with their full path.
pub fn parse_config<I>(text: &str, vars: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config {
            key: "<document>".into(),
            message: e.to_string().trim_end().to_string(),
        })?;
    apply_overrides(&mut table, vars)?;
    let config: RunConfig = serde_path_to_error::deserialize(table).map_err(|e| {
        let key = e.path().to_string();
        CliError::Config {
            key: if key == "." { "<document>".into() } else { key },
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config<I>(path: Option<&Path>, vars: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    parse_config(&text, vars)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Vec::new())
    }

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.memory.tau_near, 1.0);
        assert_eq!(c.memory.tau_hist, 0.01);
        assert_eq!(c.memory.window, 3);
        assert_eq!(c.band.eta, 0.3);
        assert_eq!(c.band.gamma, 0.2);
    }

    #[test]
    fn out_of_range_value_names_its_key() {
        let err = parse("[memory]\ntau_hist = 1.5\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Config { key, .. } if key == "memory.tau_hist"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_key_is_fatal_and_located() {
        let err = parse("[trainer]\nlearning_rte = 0.1\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Config { key, .. } if key.starts_with("trainer")),
            "{err}"
        );
        assert!(err.to_string().contains("learning_rte"));
        let err = parse("[environment.stream]\nfps = 3\n").unwrap_err();
        assert!(err.to_string().contains("environment.stream"), "{err}");
        assert!(parse("bogus = 1\n").is_err());
    }

    #[test]
    fn narrow_band_is_accepted() {
        let c = parse("[band]\neta = 0.4\ngamma = 0.1\n").unwrap();
        assert!((c.band.lower() - 0.3).abs() < 1e-12);
        assert!((c.band.upper() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tagged_sections_parse() {
        let c = parse(
            "[memory.operator]\nkind = \"average_pool\"\nkernel = 4\n\n\
             [environment.queries.difficulty]\nkind = \"uniform\"\n\n[trainer]\nmode = \"vanilla\"\n",
        )
        .unwrap();
        assert_eq!(
            c.memory.operator,
            streamctl_core::CompressionOperator::AveragePool { kernel: 4 }
        );
        assert_eq!(c.trainer.mode, TrainMode::Vanilla);
        assert!(parse("[memory.operator]\nkind = \"average_pool\"\nkernel = 0\n").is_err());
    }

    #[test]
    fn env_overrides_apply_by_key_path() {
        let vars = vec![
            ("STREAMCTL_MEMORY__TAU_HIST".to_string(), "0.5".to_string()),
            ("STREAMCTL_SEED".to_string(), "11".to_string()),
            ("STREAMCTL_TRAINER__MODE".to_string(), "vanilla".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = parse_config("[memory]\ntau_hist = 0.1\n", vars).unwrap();
        assert_eq!(c.memory.tau_hist, 0.5);
        assert_eq!(c.seed, 11);
        assert_eq!(c.trainer.mode, TrainMode::Vanilla);
        let bad = vec![(
            "STREAMCTL_MEMORY__TAU_HISTORY".to_string(),
            "0.5".to_string(),
        )];
        assert!(parse_config("", bad).is_err());
    }

    #[test]
    fn round_trip_defaults() {
        let c = RunConfig::default();
        assert_eq!(parse(&c.to_toml().unwrap()).unwrap(), c);
    }
}
