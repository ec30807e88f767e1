use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::ExternalEndpoint;
use crate::phonology::BandThresholds;
use crate::session::{EngineConfig, MAX_RETRIES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMode {
    Stub,
    External,
}

/// Service configuration. Every field has a default, so an empty file is valid.
///
/// ```toml
/// data_dir = "soundstory-data"
/// listen = "127.0.0.1:8080"
/// adapters = "stub"
/// retry_cap = 2
///
/// [thresholds]
/// excellent_max = 0.1
/// good_max = 1.0
/// fair_max = 2.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub listen: String,
    pub adapters: AdapterMode,
    pub transcriber: Option<ExternalEndpoint>,
    pub synthesizer: Option<ExternalEndpoint>,
    pub thresholds: BandThresholds,
    pub retry_cap: u8,
    pub inactivity_timeout_secs: i64,
    pub voice_profile: String,
    /// Audio older than this is deleted by `Store::purge_audio`; unset keeps everything.
    pub audio_retention_days: Option<u32>,
}

impl Default for Config {
    fn default() -> Self {
        let engine = EngineConfig::default();
        Config {
            data_dir: PathBuf::from("soundstory-data"),
            listen: "127.0.0.1:8080".into(),
            adapters: AdapterMode::Stub,
            transcriber: None,
            synthesizer: None,
            thresholds: BandThresholds::default(),
            retry_cap: engine.retry_cap,
            inactivity_timeout_secs: engine.inactivity_timeout_secs,
            voice_profile: engine.voice_profile,
            audio_retention_days: None,
        }
    }
}

/// Environment variables that override file values.
pub const ENV_VARS: &[&str] = &[
    "SOUNDSTORY_DATA_DIR",
    "SOUNDSTORY_LISTEN",
    "SOUNDSTORY_ADAPTERS",
    "SOUNDSTORY_TRANSCRIBER_URL",
    "SOUNDSTORY_SYNTHESIZER_URL",
    "SOUNDSTORY_RETRY_CAP",
    "SOUNDSTORY_EXCELLENT_MAX",
    "SOUNDSTORY_GOOD_MAX",
    "SOUNDSTORY_FAIR_MAX",
    "SOUNDSTORY_INACTIVITY_SECS",
];

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let c: Config = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path` if given (a missing path is an error), then applies
    /// environment overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        base.with_env(|k| std::env::var(k).ok())
    }

    /// Applies overrides from `lookup`, which maps a variable name to its value.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        fn parse<T: std::str::FromStr>(var: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                var: var.into(),
                message: e.to_string(),
            })
        }
        let timeout = |e: &Option<ExternalEndpoint>| e.as_ref().map_or(10_000, |e| e.timeout_ms);
        for var in ENV_VARS {
            let Some(v) = lookup(var) else { continue };
            match *var {
                "SOUNDSTORY_DATA_DIR" => self.data_dir = PathBuf::from(v),
                "SOUNDSTORY_LISTEN" => self.listen = v,
                "SOUNDSTORY_ADAPTERS" => {
                    self.adapters = match v.trim() {
                        "stub" => AdapterMode::Stub,
                        "external" => AdapterMode::External,
                        other => {
                            return Err(ConfigError::Env {
                                var: (*var).into(),
                                message: format!("expected stub or external, got {other:?}"),
                            })
                        }
                    }
                }
                "SOUNDSTORY_TRANSCRIBER_URL" => {
                    self.transcriber = Some(ExternalEndpoint {
                        url: v,
                        timeout_ms: timeout(&self.transcriber),
                    })
                }
                "SOUNDSTORY_SYNTHESIZER_URL" => {
                    self.synthesizer = Some(ExternalEndpoint {
                        url: v,
                        timeout_ms: timeout(&self.synthesizer),
                    })
                }
                "SOUNDSTORY_RETRY_CAP" => self.retry_cap = parse(var, &v)?,
                "SOUNDSTORY_EXCELLENT_MAX" => self.thresholds.excellent_max = parse(var, &v)?,
                "SOUNDSTORY_GOOD_MAX" => self.thresholds.good_max = parse(var, &v)?,
                "SOUNDSTORY_FAIR_MAX" => self.thresholds.fair_max = parse(var, &v)?,
                "SOUNDSTORY_INACTIVITY_SECS" => self.inactivity_timeout_secs = parse(var, &v)?,
                _ => unreachable!("listed variable"),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.retry_cap > MAX_RETRIES {
            return Err(ConfigError::Invalid(format!(
                "retry_cap {} exceeds the maximum of {MAX_RETRIES}",
                self.retry_cap
            )));
        }
        if self.inactivity_timeout_secs <= 0 {
            return Err(ConfigError::Invalid("inactivity_timeout_secs must be positive".into()));
        }
        if self.adapters == AdapterMode::External && self.transcriber.is_none() {
            return Err(ConfigError::Invalid("external adapters need a transcriber endpoint".into()));
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            inactivity_timeout_secs: self.inactivity_timeout_secs,
            voice_profile: self.voice_profile.clone(),
            retry_cap: self.retry_cap,
        }
    }
}
