//! Service configuration, read from a TOML file.
//!
//! ```toml
//! listen_address = "127.0.0.1:7300"
//! group = "production"        # or "toy"
//! rounds = 2
//! challenge_bits = 128
//! seal_every = 16
//! seal_interval_ms = 2000
//! schedule_path = "costs.toml" # optional, defaults to the reference costs
//! data_dir = "data"            # optional, in-memory when absent
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmeter::{CostError, CostSchedule};
use crate::identity::{GroupParams, ProofConfig, MAX_CHALLENGE_BITS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Schedule(#[from] CostError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub group: String,
    pub rounds: usize,
    pub challenge_bits: u32,
    pub seal_every: usize,
    pub seal_interval_ms: u64,
    pub schedule_path: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen_address: "127.0.0.1:7300".to_string(),
            group: "production".to_string(),
            rounds: 2,
            challenge_bits: MAX_CHALLENGE_BITS,
            seal_every: 16,
            seal_interval_ms: 2000,
            schedule_path: None,
            data_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads the file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.schedule_path, &mut config.data_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rounds < 1 {
            return Err(ConfigError::Invalid("rounds must be at least 1".into()));
        }
        if self.seal_every < 1 {
            return Err(ConfigError::Invalid("seal_every must be at least 1".into()));
        }
        if !(1..=MAX_CHALLENGE_BITS).contains(&self.challenge_bits) {
            return Err(ConfigError::Invalid(format!(
                "challenge_bits must be in 1..={MAX_CHALLENGE_BITS}"
            )));
        }
        GroupParams::by_name(&self.group).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn group_params(&self) -> Result<GroupParams, ConfigError> {
        GroupParams::by_name(&self.group).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn proof_config(&self) -> ProofConfig {
        ProofConfig {
            rounds: self.rounds,
            challenge_bits: self.challenge_bits,
        }
    }

    pub fn schedule(&self) -> Result<CostSchedule, ConfigError> {
        match &self.schedule_path {
            Some(path) => Ok(CostSchedule::load(path)?),
            None => Ok(CostSchedule::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let config = ServiceConfig::from_toml("group = \"toy\"\nrounds = 3\n").unwrap();
        assert_eq!(config.group, "toy");
        assert_eq!(config.rounds, 3);
        assert_eq!(config.seal_every, 16);
        assert_eq!(config.seal_interval_ms, 2000);
        assert_eq!(config.challenge_bits, 128);
        assert!(config.data_dir.is_none());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "rounds = 0",
            "seal_every = 0",
            "challenge_bits = 0",
            "challenge_bits = 129",
            "group = \"ed25519\"",
            "unknown_key = 1",
        ] {
            assert!(ServiceConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("service.toml");
        std::fs::write(&path, "data_dir = \"state\"\nschedule_path = \"/abs/costs.toml\"\n").unwrap();
        let config = ServiceConfig::load(&path).unwrap();
        assert_eq!(config.data_dir.unwrap(), dir.path().join("state"));
        assert_eq!(config.schedule_path.unwrap(), PathBuf::from("/abs/costs.toml"));
    }
}
