//! Open-loop load harness for the ballotledger HTTP API.
//!
//! A sweep runs one cell per (send rate, users) pair. Within a cell,
//! requests are released on a fixed schedule regardless of how fast the
//! service answers, and at most `users` of them are in flight at once.
//! Latency is measured from each request's scheduled release time, so
//! queueing behind the concurrency limit counts against the service.

pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

pub use config::{BenchConfig, Grid, Operation};
pub use report::{BenchReport, CellResult};
pub use runner::{run_cell, run_sweep, saturation_rate, Fixture};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("setup failed: {0}")]
    SetupFailed(String),
    #[error("report is empty")]
    EmptyReport,
    #[error("io: {0}")]
    Io(String),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "InvalidConfig",
            BenchError::ServiceUnreachable(_) => "ServiceUnreachable",
            BenchError::SetupFailed(_) => "SetupFailed",
            BenchError::EmptyReport => "EmptyReport",
            BenchError::Io(_) => "Io",
        }
    }
}
