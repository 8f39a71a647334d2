//! Verifier-side registration: request, temporary key, unverified id,
//! interactive proof sessions and permanent id issuance.
//!
//! Operations that change durable state do not mutate the registry
//! directly; they return an [`IdentityEvent`] that the caller records in the
//! ledger and then feeds to [`Registry::apply`]. Replaying the same events
//! into a fresh registry therefore reproduces the same records. Proof
//! sessions are transient verifier memory and are not replayed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::group::{GroupElement, GroupParams};
use super::schnorr::{Challenge, Transcript, MAX_CHALLENGE_BITS};
use crate::codec::{CodecError, Decoder, Encoder};
use crate::digest::Digest;
use crate::ledger::TxKind;

/// Bytes kept from the digest for `UnvID` and permanent ids.
pub const ID_BYTES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("user info must not be empty")]
    EmptyUserInfo,
    #[error("an identical registration request is already pending")]
    DuplicateRequest,
    #[error("no matching identity record")]
    NotFound,
    #[error("proof session not found")]
    SessionNotFound,
    #[error("public key is not a valid non-identity element of the order-q subgroup")]
    BadGroupElement,
    #[error("a proof session is already pending for this identity")]
    SessionExists,
    #[error("session is not accepting commitments")]
    SessionNotPending,
    #[error("expected {expected} commitments, got {got}")]
    RoundCountMismatch { expected: usize, got: usize },
    #[error("no commitments submitted yet")]
    NoCommitment,
    #[error("challenges were already issued for these commitments")]
    ChallengesAlreadyIssued,
    #[error("challenge list does not match the issued challenges")]
    ChallengeMismatch,
    #[error("session is not ready for verification")]
    SessionNotReady,
}

impl IdentityError {
    pub fn code(&self) -> &'static str {
        match self {
            IdentityError::EmptyUserInfo => "EmptyUserInfo",
            IdentityError::DuplicateRequest => "DuplicateRequest",
            IdentityError::NotFound => "NotFound",
            IdentityError::SessionNotFound => "SessionNotFound",
            IdentityError::BadGroupElement => "BadGroupElement",
            IdentityError::SessionExists => "SessionExists",
            IdentityError::SessionNotPending => "SessionNotPending",
            IdentityError::RoundCountMismatch { .. } => "RoundCountMismatch",
            IdentityError::NoCommitment => "NoCommitment",
            IdentityError::ChallengesAlreadyIssued => "ChallengesAlreadyIssued",
            IdentityError::ChallengeMismatch => "ChallengeMismatch",
            IdentityError::SessionNotReady => "SessionNotReady",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "req-{}", self.0)
    }
}

impl FromStr for RequestId {
    type Err = ParseIdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("req-")
            .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|n| n.parse().ok())
            .map(RequestId)
            .ok_or(ParseIdError)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed identifier")]
pub struct ParseIdError;

macro_rules! hex_id {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = ParseIdError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                if s.len() == 2 * $len && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                    Ok($name(s.to_string()))
                } else {
                    Err(ParseIdError)
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = ParseIdError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }
    };
}

hex_id!(
    /// The `UnvID`: `H(tmpKey || y)` truncated to 16 bytes.
    UnvId,
    ID_BYTES
);
hex_id!(
    /// Permanent identity: `H(unvId || transcript)` truncated to 16 bytes.
    PermanentId,
    ID_BYTES
);
hex_id!(SessionId, 16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityStatus {
    Requested,
    Unverified,
    Verified,
}

impl IdentityStatus {
    fn tag(self) -> u8 {
        match self {
            IdentityStatus::Requested => 0,
            IdentityStatus::Unverified => 1,
            IdentityStatus::Verified => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityRecord {
    pub request_id: RequestId,
    pub tmp_key: [u8; 32],
    pub requested_at_ms: u64,
    pub unv_id: Option<UnvId>,
    pub permanent_id: Option<PermanentId>,
    pub public_key: Option<GroupElement>,
    pub status: IdentityStatus,
    pub report_hash: Option<Digest>,
    fingerprint: Digest,
}

impl IdentityRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u64("request", self.request_id.0)
            .bytes("tmpKey", &self.tmp_key)
            .u64("requestedAt", self.requested_at_ms)
            .bytes("fingerprint", self.fingerprint.as_bytes())
            .optional("unvId", self.unv_id.as_ref().map(|u| u.as_str().as_bytes()))
            .optional(
                "permanentId",
                self.permanent_id.as_ref().map(|p| p.as_str().as_bytes()),
            )
            .optional("publicKey", self.public_key.as_ref().map(GroupElement::to_bytes).as_deref())
            .u8("status", self.status.tag())
            .optional("report", self.report_hash.as_ref().map(|d| &d.as_bytes()[..]));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pending,
    Accepted,
    Rejected,
}

impl Verdict {
    fn name(self) -> &'static str {
        match self {
            Verdict::Pending => "Pending",
            Verdict::Accepted => "Accepted",
            Verdict::Rejected => "Rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofSession {
    pub session_id: SessionId,
    pub unv_id: UnvId,
    /// Signals the prover that the proof phase has started.
    pub sig_zkp: bool,
    pub transcript: Transcript,
    pub recorded_answers: Option<Vec<BigUint>>,
    pub verdict: Verdict,
}

/// Durable registry changes, one per ledger transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentityEvent {
    RegisterRequest {
        request_id: RequestId,
        fingerprint: Digest,
        tmp_key: [u8; 32],
        requested_at_ms: u64,
    },
    IssueUnvId {
        request_id: RequestId,
        public_key: GroupElement,
        unv_id: UnvId,
    },
    ProofVerified {
        unv_id: UnvId,
        session_id: SessionId,
        transcript: Transcript,
        report_hash: Digest,
    },
    IssueId {
        unv_id: UnvId,
        permanent_id: PermanentId,
    },
}

impl IdentityEvent {
    pub fn kind(&self) -> TxKind {
        match self {
            IdentityEvent::RegisterRequest { .. } => TxKind::RegisterRequest,
            IdentityEvent::IssueUnvId { .. } => TxKind::IssueUnvId,
            IdentityEvent::ProofVerified { .. } => TxKind::ProofVerified,
            IdentityEvent::IssueId { .. } => TxKind::IssueId,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            IdentityEvent::RegisterRequest {
                request_id,
                fingerprint,
                tmp_key,
                requested_at_ms,
            } => {
                enc.u64("request", request_id.0)
                    .bytes("fingerprint", fingerprint.as_bytes())
                    .bytes("tmpKey", tmp_key)
                    .u64("requestedAt", *requested_at_ms);
            }
            IdentityEvent::IssueUnvId {
                request_id,
                public_key,
                unv_id,
            } => {
                enc.u64("request", request_id.0)
                    .bytes("publicKey", &public_key.to_bytes())
                    .str("unvId", unv_id.as_str());
            }
            IdentityEvent::ProofVerified {
                unv_id,
                session_id,
                transcript,
                report_hash,
            } => {
                enc.str("unvId", unv_id.as_str())
                    .str("session", session_id.as_str());
                transcript.encode_into(&mut enc);
                enc.bytes("report", report_hash.as_bytes());
            }
            IdentityEvent::IssueId {
                unv_id,
                permanent_id,
            } => {
                enc.str("unvId", unv_id.as_str())
                    .str("permanentId", permanent_id.as_str());
            }
        }
        enc.finish()
    }

    pub fn decode(kind: TxKind, payload: &[u8]) -> Result<Self, CodecError> {
        let mut dec = Decoder::new(payload);
        let event = match kind {
            TxKind::RegisterRequest => IdentityEvent::RegisterRequest {
                request_id: RequestId(dec.u64("request")?),
                fingerprint: Digest::from_bytes(dec.array("fingerprint")?),
                tmp_key: dec.array("tmpKey")?,
                requested_at_ms: dec.u64("requestedAt")?,
            },
            TxKind::IssueUnvId => IdentityEvent::IssueUnvId {
                request_id: RequestId(dec.u64("request")?),
                public_key: GroupElement::from_bytes(dec.bytes("publicKey")?)
                    .ok_or(CodecError::BadValue("publicKey"))?,
                unv_id: parse_id(dec.str("unvId")?, "unvId")?,
            },
            TxKind::ProofVerified => IdentityEvent::ProofVerified {
                unv_id: parse_id(dec.str("unvId")?, "unvId")?,
                session_id: parse_id(dec.str("session")?, "session")?,
                transcript: Transcript::decode_from(&mut dec)?,
                report_hash: Digest::from_bytes(dec.array("report")?),
            },
            TxKind::IssueId => IdentityEvent::IssueId {
                unv_id: parse_id(dec.str("unvId")?, "unvId")?,
                permanent_id: parse_id(dec.str("permanentId")?, "permanentId")?,
            },
            _ => return Err(CodecError::BadValue("kind")),
        };
        dec.finish()?;
        Ok(event)
    }
}

fn parse_id<T: FromStr>(s: &str, key: &'static str) -> Result<T, CodecError> {
    s.parse().map_err(|_| CodecError::BadValue(key))
}

/// A successful verification, before the caller has stored the report and
/// recorded the events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptedProof {
    pub unv_id: UnvId,
    pub request_id: RequestId,
    pub session_id: SessionId,
    pub transcript: Transcript,
    pub permanent_id: PermanentId,
    /// Canonical verification report destined for the document store.
    pub report: Vec<u8>,
}

impl AcceptedProof {
    pub fn events(&self, report_hash: Digest) -> [IdentityEvent; 2] {
        [
            IdentityEvent::ProofVerified {
                unv_id: self.unv_id.clone(),
                session_id: self.session_id.clone(),
                transcript: self.transcript.clone(),
                report_hash,
            },
            IdentityEvent::IssueId {
                unv_id: self.unv_id.clone(),
                permanent_id: self.permanent_id.clone(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Accepted(AcceptedProof),
    Rejected { request_id: RequestId, failed_round: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProofConfig {
    /// Rounds per session, each with its own commitment.
    pub rounds: usize,
    /// Challenges are drawn from `[0, 2^challenge_bits)`.
    pub challenge_bits: u32,
}

impl Default for ProofConfig {
    fn default() -> Self {
        ProofConfig {
            rounds: 2,
            challenge_bits: MAX_CHALLENGE_BITS,
        }
    }
}

#[derive(Debug)]
pub struct Registry {
    params: GroupParams,
    config: ProofConfig,
    records: BTreeMap<RequestId, IdentityRecord>,
    by_unv: BTreeMap<UnvId, RequestId>,
    by_permanent: BTreeMap<PermanentId, RequestId>,
    pending_requests: HashMap<Digest, RequestId>,
    sessions: HashMap<SessionId, ProofSession>,
    open_session: HashMap<UnvId, SessionId>,
}

fn fingerprint(user_info: &[u8], device_credentials: &[u8]) -> Digest {
    let mut enc = Encoder::new();
    enc.bytes("userInfo", user_info)
        .bytes("device", device_credentials);
    Digest::of(enc.as_slice())
}

impl Registry {
    pub fn new(params: GroupParams, config: ProofConfig) -> Self {
        assert!(config.rounds >= 1, "at least one round");
        assert!((1..=MAX_CHALLENGE_BITS).contains(&config.challenge_bits));
        Registry {
            params,
            config,
            records: BTreeMap::new(),
            by_unv: BTreeMap::new(),
            by_permanent: BTreeMap::new(),
            pending_requests: HashMap::new(),
            sessions: HashMap::new(),
            open_session: HashMap::new(),
        }
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn config(&self) -> ProofConfig {
        self.config
    }

    /// `tmpKey = H(deviceCredentials || timestamp || 16 random bytes)`.
    pub fn send_request<R: Rng + ?Sized>(
        &self,
        user_info: &[u8],
        device_credentials: &[u8],
        timestamp_ms: u64,
        rng: &mut R,
    ) -> Result<IdentityEvent, IdentityError> {
        if user_info.is_empty() {
            return Err(IdentityError::EmptyUserInfo);
        }
        let fingerprint = fingerprint(user_info, device_credentials);
        if self.pending_requests.contains_key(&fingerprint) {
            return Err(IdentityError::DuplicateRequest);
        }
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        let tmp_key = Digest::of_parts([device_credentials, &timestamp_ms.to_be_bytes()[..], &salt[..]]);
        Ok(IdentityEvent::RegisterRequest {
            request_id: RequestId(self.records.len() as u64),
            fingerprint,
            tmp_key: *tmp_key.as_bytes(),
            requested_at_ms: timestamp_ms,
        })
    }

    /// `unvId = H(tmpKey || y)` truncated, `y` at the fixed width of `p`.
    pub fn issue_unverified_id(&self, request_id: RequestId, public_key: &GroupElement) -> Result<IdentityEvent, IdentityError> {
        let record = self
            .records
            .get(&request_id)
            .filter(|r| r.status == IdentityStatus::Requested)
            .ok_or(IdentityError::NotFound)?;
        // y = 1 is a subgroup member but corresponds to x = 0.
        if !self.params.contains(public_key) || public_key.value() == &BigUint::from(1u32) {
            return Err(IdentityError::BadGroupElement);
        }
        let digest = Digest::of_parts([&record.tmp_key[..], &self.params.element_bytes(public_key)]);
        Ok(IdentityEvent::IssueUnvId {
            request_id,
            public_key: public_key.clone(),
            unv_id: UnvId(digest.truncated_hex(ID_BYTES)),
        })
    }

    pub fn begin_proof<R: Rng + ?Sized>(&mut self, unv_id: &UnvId, rng: &mut R) -> Result<SessionId, IdentityError> {
        self.unverified_record(unv_id)?;
        if self.open_session.contains_key(unv_id) {
            return Err(IdentityError::SessionExists);
        }
        let mut raw = [0u8; 16];
        rng.fill_bytes(&mut raw);
        let session_id = SessionId(hex::encode(raw));
        self.sessions.insert(
            session_id.clone(),
            ProofSession {
                session_id: session_id.clone(),
                unv_id: unv_id.clone(),
                sig_zkp: true,
                transcript: Transcript::default(),
                recorded_answers: None,
                verdict: Verdict::Pending,
            },
        );
        self.open_session.insert(unv_id.clone(), session_id.clone());
        Ok(session_id)
    }

    fn session_mut(&mut self, id: &SessionId) -> Result<&mut ProofSession, IdentityError> {
        self.sessions.get_mut(id).ok_or(IdentityError::SessionNotFound)
    }

    pub fn submit_commitments(&mut self, id: &SessionId, commitments: Vec<GroupElement>) -> Result<(), IdentityError> {
        let expected = self.config.rounds;
        let params = self.params.clone();
        let session = self.session_mut(id)?;
        if session.verdict != Verdict::Pending || !session.transcript.commitments.is_empty() {
            return Err(IdentityError::SessionNotPending);
        }
        if commitments.len() != expected {
            return Err(IdentityError::RoundCountMismatch {
                expected,
                got: commitments.len(),
            });
        }
        if !commitments.iter().all(|d| params.is_residue(d)) {
            return Err(IdentityError::BadGroupElement);
        }
        session.transcript.commitments = commitments;
        Ok(())
    }

    /// Draws one independent challenge per committed round. A commitment
    /// list receives exactly one challenge list.
    pub fn issue_challenges<R: Rng + ?Sized>(&mut self, id: &SessionId, rng: &mut R) -> Result<Vec<Challenge>, IdentityError> {
        let bits = self.config.challenge_bits;
        let session = self.session_mut(id)?;
        if session.transcript.commitments.is_empty() {
            return Err(IdentityError::NoCommitment);
        }
        if !session.transcript.challenges.is_empty() {
            return Err(IdentityError::ChallengesAlreadyIssued);
        }
        let challenges: Vec<Challenge> = (0..session.transcript.commitments.len())
            .map(|_| Challenge::random(bits, rng))
            .collect();
        session.transcript.challenges = challenges.clone();
        Ok(challenges)
    }

    /// Stores the prover's answers after checking it answered exactly the
    /// challenges this verifier issued.
    pub fn record_answers(&mut self, id: &SessionId, echoed: &[Challenge], answers: Vec<BigUint>) -> Result<(), IdentityError> {
        let session = self.session_mut(id)?;
        if session.verdict != Verdict::Pending || session.transcript.challenges.is_empty() {
            return Err(IdentityError::SessionNotReady);
        }
        if echoed != session.transcript.challenges.as_slice() || answers.len() != echoed.len() {
            return Err(IdentityError::ChallengeMismatch);
        }
        session.recorded_answers = Some(answers);
        Ok(())
    }

    /// Checks every round. Acceptance yields the permanent id and report;
    /// rejection closes the session and leaves the record Unverified.
    pub fn verify(&mut self, id: &SessionId, answers: Vec<BigUint>) -> Result<VerifyOutcome, IdentityError> {
        let session = self.sessions.get(id).ok_or(IdentityError::SessionNotFound)?;
        if session.verdict != Verdict::Pending
            || session.transcript.commitments.is_empty()
            || session.transcript.challenges.is_empty()
        {
            return Err(IdentityError::SessionNotReady);
        }
        let unv_id = session.unv_id.clone();
        let record = self.unverified_record(&unv_id)?;
        let request_id = record.request_id;
        let public_key = record.public_key.clone().ok_or(IdentityError::NotFound)?;

        let mut transcript = session.transcript.clone();
        transcript.answers = answers;
        let failed = transcript.first_failing_round(&self.params, &public_key);

        let session = self.sessions.get_mut(id).expect("present");
        session.transcript = transcript.clone();
        self.open_session.remove(&unv_id);
        if let Some(round) = failed {
            session.verdict = Verdict::Rejected;
            return Ok(VerifyOutcome::Rejected {
                request_id,
                failed_round: round,
            });
        }
        session.verdict = Verdict::Accepted;

        let encoded = transcript.encode();
        let permanent_id = PermanentId(
            Digest::of_parts([unv_id.as_str().as_bytes(), &encoded[..]]).truncated_hex(ID_BYTES),
        );
        let mut report = Encoder::new();
        report
            .str("unvId", unv_id.as_str())
            .str("session", id.as_str())
            .str("group", self.params.name())
            .bytes("publicKey", &public_key.to_bytes());
        transcript.encode_into(&mut report);
        report
            .str("verdict", Verdict::Accepted.name())
            .str("permanentId", permanent_id.as_str());
        Ok(VerifyOutcome::Accepted(AcceptedProof {
            unv_id,
            request_id,
            session_id: id.clone(),
            transcript,
            permanent_id,
            report: report.finish(),
        }))
    }

    pub fn apply(&mut self, event: &IdentityEvent) -> Result<(), String> {
        match event {
            IdentityEvent::RegisterRequest {
                request_id,
                fingerprint,
                tmp_key,
                requested_at_ms,
            } => {
                if request_id.0 != self.records.len() as u64 {
                    return Err(format!("{request_id} out of sequence"));
                }
                self.records.insert(
                    *request_id,
                    IdentityRecord {
                        request_id: *request_id,
                        tmp_key: *tmp_key,
                        requested_at_ms: *requested_at_ms,
                        unv_id: None,
                        permanent_id: None,
                        public_key: None,
                        status: IdentityStatus::Requested,
                        report_hash: None,
                        fingerprint: *fingerprint,
                    },
                );
                self.pending_requests.insert(*fingerprint, *request_id);
            }
            IdentityEvent::IssueUnvId {
                request_id,
                public_key,
                unv_id,
            } => {
                let record = self
                    .records
                    .get_mut(request_id)
                    .filter(|r| r.status == IdentityStatus::Requested)
                    .ok_or_else(|| format!("{request_id} is not awaiting an unverified id"))?;
                record.status = IdentityStatus::Unverified;
                record.public_key = Some(public_key.clone());
                record.unv_id = Some(unv_id.clone());
                self.pending_requests.remove(&record.fingerprint);
                self.by_unv.insert(unv_id.clone(), *request_id);
            }
            IdentityEvent::ProofVerified {
                unv_id,
                report_hash,
                ..
            } => {
                let request_id = self.unverified_record(unv_id).map_err(|e| e.to_string())?.request_id;
                self.records.get_mut(&request_id).expect("indexed").report_hash = Some(*report_hash);
                self.open_session.remove(unv_id);
            }
            IdentityEvent::IssueId {
                unv_id,
                permanent_id,
            } => {
                let request_id = self.unverified_record(unv_id).map_err(|e| e.to_string())?.request_id;
                let record = self.records.get_mut(&request_id).expect("indexed");
                if record.report_hash.is_none() {
                    return Err(format!("{unv_id} issued an id without a verified proof"));
                }
                record.status = IdentityStatus::Verified;
                record.permanent_id = Some(permanent_id.clone());
                self.by_permanent.insert(permanent_id.clone(), request_id);
            }
        }
        Ok(())
    }

    fn unverified_record(&self, unv_id: &UnvId) -> Result<&IdentityRecord, IdentityError> {
        self.by_unv
            .get(unv_id)
            .and_then(|id| self.records.get(id))
            .filter(|r| r.status == IdentityStatus::Unverified)
            .ok_or(IdentityError::NotFound)
    }

    pub fn record(&self, id: RequestId) -> Option<&IdentityRecord> {
        self.records.get(&id)
    }

    pub fn record_by_unv(&self, unv_id: &UnvId) -> Option<&IdentityRecord> {
        self.by_unv.get(unv_id).and_then(|id| self.records.get(id))
    }

    pub fn record_by_permanent(&self, id: &PermanentId) -> Option<&IdentityRecord> {
        self.by_permanent.get(id).and_then(|r| self.records.get(r))
    }

    pub fn public_key_of(&self, id: &PermanentId) -> Option<&GroupElement> {
        self.record_by_permanent(id).and_then(|r| r.public_key.as_ref())
    }

    pub fn is_verified(&self, id: &PermanentId) -> bool {
        self.by_permanent.contains_key(id)
    }

    pub fn verified_count(&self) -> usize {
        self.by_permanent.len()
    }

    pub fn session(&self, id: &SessionId) -> Option<&ProofSession> {
        self.sessions.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &IdentityRecord> {
        self.records.values()
    }

    /// Maps any identifier from a registration journey (request, unverified,
    /// permanent or session id) to its request.
    pub fn resolve_request(&self, s: &str) -> Option<RequestId> {
        if let Ok(id) = s.parse::<RequestId>() {
            return self.records.contains_key(&id).then_some(id);
        }
        if let Ok(unv) = s.parse::<UnvId>() {
            if let Some(id) = self.by_unv.get(&unv) {
                return Some(*id);
            }
        }
        if let Ok(pid) = s.parse::<PermanentId>() {
            if let Some(id) = self.by_permanent.get(&pid) {
                return Some(*id);
            }
        }
        let sid = s.parse::<SessionId>().ok()?;
        let session = self.sessions.get(&sid)?;
        self.by_unv.get(&session.unv_id).copied()
    }

    /// Canonical encoding of every durable record, in request order.
    pub fn snapshot(&self) -> Vec<u8> {
        let items: Vec<Vec<u8>> = self
            .records
            .values()
            .map(|r| {
                let mut enc = Encoder::new();
                r.encode_into(&mut enc);
                enc.finish()
            })
            .collect();
        let mut enc = Encoder::new();
        enc.bytes("group", self.params.fingerprint().as_bytes())
            .list("records", items);
        enc.finish()
    }
}
