//! Zero-knowledge identity registration.
//!
//! [`group`] holds the prime-order subgroup arithmetic, [`schnorr`] the
//! prover/verifier rounds and the Fiat–Shamir variant, and [`registry`] the
//! verifier-side journey from request to permanent id.

pub mod group;
pub mod registry;
pub mod schnorr;

pub use group::{GroupElement, GroupError, GroupParams};
pub use registry::{
    AcceptedProof, IdentityError, IdentityEvent, IdentityRecord, IdentityStatus, PermanentId,
    ProofConfig, ProofSession, Registry, RequestId, SessionId, UnvId, Verdict, VerifyOutcome,
};
pub use schnorr::{
    fiat_shamir_challenges, prove_non_interactive, verify_non_interactive, Challenge, NiProof,
    Prover, Transcript, MAX_CHALLENGE_BITS,
};

use crate::codec::Encoder;
use crate::digest::Digest;

/// Context bound into request-authentication proofs: the HTTP method, the
/// request path and the digest of the body.
pub fn request_context(method: &str, path: &str, body: &[u8]) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.str("method", &method.to_ascii_uppercase())
        .str("path", path)
        .bytes("body", Digest::of(body).as_bytes());
    enc.finish()
}
