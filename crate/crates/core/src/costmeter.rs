//! Gas-style cost accounting.
//!
//! Each contract-level operation has one fixed cost from the schedule,
//! independent of argument sizes. Charges are grouped into scopes (one per
//! registration journey, one per poll) and reported in charge order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod ops {
    pub const SEND_REQ: &str = "sendReq";
    pub const GEN_KEY: &str = "genKey";
    pub const VERIFY_PROOF: &str = "verifyProof";
    pub const GEN_CHNG: &str = "genChng";
    pub const REG_USER: &str = "regUser";
    pub const CREATE_POLL: &str = "createPoll";
    pub const REGISTER_VOTERS: &str = "registerVoters";
    pub const OPEN_POLL: &str = "OpenPoll";
    pub const SET_OPEN: &str = "setOpen";
    pub const CAST_VOTES: &str = "castVotes";
    pub const CLOSE_POLL: &str = "closePoll";
    pub const GET_POLL_RES: &str = "getPollRes";
    /// Plumbing, not a contract operation; always free.
    pub const STORE_DOCUMENT: &str = "storeDocument";
}

/// Measured costs per contract operation.
pub const REFERENCE_COSTS: [(&str, u64); 12] = [
    (ops::SEND_REQ, 96584),
    (ops::GEN_KEY, 184584),
    (ops::VERIFY_PROOF, 65082),
    (ops::GEN_CHNG, 94214),
    (ops::REG_USER, 36548),
    (ops::CREATE_POLL, 215949),
    (ops::REGISTER_VOTERS, 150240),
    (ops::OPEN_POLL, 8981),
    (ops::SET_OPEN, 77852),
    (ops::CAST_VOTES, 19214),
    (ops::CLOSE_POLL, 7223),
    (ops::GET_POLL_RES, 68547),
];

const PLUMBING: [&str; 1] = [ops::STORE_DOCUMENT];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("operation {0:?} is not in the cost schedule")]
    UnknownOperation(String),
    #[error("cost scope {0:?} not found")]
    NotFound(String),
    #[error("schedule is missing operation {0:?}")]
    MissingOperation(String),
    #[error("plumbing operation {0:?} must cost 0")]
    NonZeroPlumbing(String),
    #[error("schedule: {0}")]
    Parse(String),
}

impl CostError {
    pub fn code(&self) -> &'static str {
        match self {
            CostError::UnknownOperation(_) => "UnknownOperation",
            CostError::NotFound(_) => "NotFound",
            CostError::MissingOperation(_) | CostError::NonZeroPlumbing(_) | CostError::Parse(_) => {
                "ConfigError"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostSchedule(BTreeMap<String, u64>);

impl Default for CostSchedule {
    fn default() -> Self {
        let mut map: BTreeMap<String, u64> = REFERENCE_COSTS
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for op in PLUMBING {
            map.insert(op.to_string(), 0);
        }
        CostSchedule(map)
    }
}

impl CostSchedule {
    /// Every reference operation must be present; anything else must be
    /// free plumbing.
    pub fn new(entries: BTreeMap<String, u64>) -> Result<Self, CostError> {
        for (op, _) in REFERENCE_COSTS {
            if !entries.contains_key(op) {
                return Err(CostError::MissingOperation(op.to_string()));
            }
        }
        for (op, cost) in &entries {
            if !REFERENCE_COSTS.iter().any(|(r, _)| r == op) && *cost != 0 {
                return Err(CostError::NonZeroPlumbing(op.clone()));
            }
        }
        Ok(CostSchedule(entries))
    }

    pub fn cost(&self, op: &str) -> Result<u64, CostError> {
        self.0
            .get(op)
            .copied()
            .ok_or_else(|| CostError::UnknownOperation(op.to_string()))
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.0
    }

    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let entries: BTreeMap<String, u64> =
            toml::from_str(text).map_err(|e| CostError::Parse(e.to_string()))?;
        Self::new(entries)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.0).expect("flat integer table")
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path).map_err(|e| CostError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostEntry {
    pub operation: String,
    pub gas: u64,
    pub tx_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostReport {
    pub scope: String,
    pub entries: Vec<CostEntry>,
    pub total: u64,
}

impl CostReport {
    pub fn gas_for(&self, op: &str) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.operation == op)
            .map(|e| e.gas)
            .collect()
    }
}

#[derive(Debug, Default)]
struct Accounts {
    scopes: HashMap<String, Vec<CostEntry>>,
    total: u64,
}

/// Accumulates charges; safe to share between threads.
#[derive(Debug)]
pub struct CostMeter {
    schedule: CostSchedule,
    accounts: Mutex<Accounts>,
}

impl CostMeter {
    pub fn new(schedule: CostSchedule) -> Self {
        CostMeter {
            schedule,
            accounts: Mutex::new(Accounts::default()),
        }
    }

    pub fn schedule(&self) -> &CostSchedule {
        &self.schedule
    }

    /// Makes `scope` reportable before anything is charged to it.
    pub fn open_scope(&self, scope: &str) {
        let mut acc = self.accounts.lock().expect("cost lock");
        acc.scopes.entry(scope.to_string()).or_default();
    }

    pub fn charge(&self, scope: &str, op: &str, tx_id: Option<u64>) -> Result<u64, CostError> {
        let gas = self.schedule.cost(op)?;
        let mut acc = self.accounts.lock().expect("cost lock");
        acc.scopes.entry(scope.to_string()).or_default().push(CostEntry {
            operation: op.to_string(),
            gas,
            tx_id,
        });
        acc.total += gas;
        Ok(gas)
    }

    pub fn report(&self, scope: &str) -> Result<CostReport, CostError> {
        let acc = self.accounts.lock().expect("cost lock");
        let entries = acc
            .scopes
            .get(scope)
            .cloned()
            .ok_or_else(|| CostError::NotFound(scope.to_string()))?;
        Ok(CostReport {
            scope: scope.to_string(),
            total: entries.iter().map(|e| e.gas).sum(),
            entries,
        })
    }

    /// Sum over all scopes.
    pub fn total(&self) -> u64 {
        self.accounts.lock().expect("cost lock").total
    }
}
