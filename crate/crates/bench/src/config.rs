//! Sweep configuration.
//!
//! ```toml
//! target = "http://127.0.0.1:7300"
//! operation = "write"                        # or "read"
//! send_rates = { from = 25, to = 300, step = 25 }
//! users = [25, 50, 75, 100]
//! duration_secs = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    /// `GET /polls/{id}/results`
    Read,
    /// `POST /polls/{id}/votes`, each by a voter that has not voted in that poll.
    Write,
}

/// A list of values, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<u64>),
    Range { from: u64, to: u64, step: u64 },
}

impl Grid {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { from, to, step } => {
                if *step == 0 {
                    return Vec::new();
                }
                (*from..=*to).step_by(*step as usize).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub target: String,
    pub operation: Operation,
    pub send_rates: Grid,
    pub users: Grid,
    #[serde(default = "default_duration")]
    pub duration_secs: f64,
}

fn default_duration() -> f64 {
    1.0
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let config: BenchConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let rates = self.send_rates.values();
        let users = self.users.values();
        if rates.is_empty() || rates.contains(&0) {
            return Err(BenchError::Config("send rates must be non-empty and positive".into()));
        }
        if users.is_empty() || users.contains(&0) {
            return Err(BenchError::Config("user counts must be non-empty and positive".into()));
        }
        if !(self.duration_secs >= 1.0) {
            return Err(BenchError::Config("duration must be at least 1 s".into()));
        }
        Ok(())
    }

    /// Cells in run order: users outer, send rate inner.
    pub fn cells(&self) -> Vec<(u64, u64)> {
        let rates = self.send_rates.values();
        self.users
            .values()
            .into_iter()
            .flat_map(|u| rates.iter().map(move |&r| (r, u)))
            .collect()
    }
}
