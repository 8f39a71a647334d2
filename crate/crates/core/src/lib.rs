//! Core of the ballotledger voting service.
//!
//! - [`ledger`]: append-only hash-chained transaction log
//! - [`identity`]: Schnorr-based registration and authentication
//! - [`poll`]: poll lifecycle, eligibility and tally
//! - [`docstore`]: content-addressed document storage
//! - [`costmeter`]: per-operation gas accounting
//! - [`system`]: all of the above wired together, with ledger replay

pub mod codec;
pub mod config;
pub mod costmeter;
pub mod digest;
pub mod docstore;
pub mod identity;
pub mod ledger;
pub mod poll;
pub mod system;

pub use config::ServiceConfig;
pub use costmeter::{CostError, CostMeter, CostReport, CostSchedule};
pub use digest::Digest;
pub use docstore::{DocStore, DocStoreError};
pub use identity::{GroupElement, GroupParams, NiProof, PermanentId, Prover};
pub use ledger::{Ledger, LedgerError, Transaction, TxKind, VerificationReport};
pub use poll::{Poll, PollEngine, PollError, PollId, PollStatus};
pub use system::{SystemError, VotingSystem};
