//! HTTP API for ballotledger: the axum server, the JSON wire types and an
//! async client.
//!
//! The service speaks plain HTTP. Registration traffic carries public keys
//! and proof transcripts only, but deployments must still terminate TLS in
//! front of it.

pub mod client;
pub mod server;
pub mod wire;

pub use client::{Client, ClientError, RegistrationStep, RegistrationTranscript, Signer};
pub use server::{router, serve, start, start_with, AppState, Running, ServeError};
