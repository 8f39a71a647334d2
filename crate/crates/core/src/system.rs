//! The voting system: registry, polls, ledger, document store and cost
//! meter behind one set of operations.
//!
//! Every durable change goes through [`VotingSystem::record`]: the event is
//! appended to the ledger, then applied, then charged. Opening a system on
//! an existing ledger replays the same path without the append, so state
//! after a restart equals state before it.

use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{CodecError, Decoder, Encoder};
use crate::config::{ConfigError, ServiceConfig};
use crate::costmeter::{ops, CostError, CostMeter, CostReport, CostSchedule};
use crate::digest::Digest;
use crate::docstore::{DocStore, DocStoreError};
use crate::identity::{
    verify_non_interactive, Challenge, GroupElement, GroupParams, IdentityError, IdentityEvent,
    NiProof, PermanentId, ProofConfig, Registry, RequestId, SessionId, UnvId, Verdict,
    VerifyOutcome,
};
use crate::ledger::{
    Ledger, LedgerError, LocatedTransaction, NewTransaction, Transaction, TxKind,
    VerificationReport,
};
use crate::poll::{Poll, PollEngine, PollError, PollEvent, PollId};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Poll(#[from] PollError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Docs(#[from] DocStoreError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("identity is not registered and verified")]
    UnknownIdentity,
    #[error("request proof does not verify")]
    Unauthenticated,
    #[error("ledger replay failed at tx {tx_id}: {reason}")]
    Replay { tx_id: u64, reason: String },
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl SystemError {
    pub fn code(&self) -> &'static str {
        match self {
            SystemError::Identity(e) => e.code(),
            SystemError::Poll(e) => e.code(),
            SystemError::Ledger(e) => e.code(),
            SystemError::Docs(e) => e.code(),
            SystemError::Cost(e) => e.code(),
            SystemError::Config(_) => "ConfigError",
            SystemError::UnknownIdentity => "UnknownIdentity",
            SystemError::Unauthenticated => "Unauthenticated",
            SystemError::Replay { .. } => "LedgerCorrupt",
            SystemError::Internal(_) => "Internal",
        }
    }
}

/// Anything the ledger can record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemEvent {
    Identity(IdentityEvent),
    Poll(PollEvent),
    StoreDocument { hash: Digest, size: u64 },
}

impl SystemEvent {
    pub fn kind(&self) -> TxKind {
        match self {
            SystemEvent::Identity(e) => e.kind(),
            SystemEvent::Poll(e) => e.kind(),
            SystemEvent::StoreDocument { .. } => TxKind::StoreDocument,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            SystemEvent::Identity(e) => e.encode(),
            SystemEvent::Poll(e) => e.encode(),
            SystemEvent::StoreDocument { hash, size } => {
                let mut enc = Encoder::new();
                enc.bytes("hash", hash.as_bytes()).u64("size", *size);
                enc.finish()
            }
        }
    }

    pub fn decode(kind: TxKind, payload: &[u8]) -> Result<Self, CodecError> {
        match kind {
            TxKind::RegisterRequest | TxKind::IssueUnvId | TxKind::ProofVerified | TxKind::IssueId => {
                IdentityEvent::decode(kind, payload).map(SystemEvent::Identity)
            }
            TxKind::StoreDocument => {
                let mut dec = Decoder::new(payload);
                let hash = Digest::from_bytes(dec.array("hash")?);
                let size = dec.u64("size")?;
                dec.finish()?;
                Ok(SystemEvent::StoreDocument { hash, size })
            }
            _ => PollEvent::decode(kind, payload).map(SystemEvent::Poll),
        }
    }
}

pub fn poll_scope(id: PollId) -> String {
    format!("poll-{id}")
}

pub const DOCUMENT_SCOPE: &str = "documents";

#[derive(Debug, Clone)]
pub struct SystemOptions {
    pub params: GroupParams,
    pub proof: ProofConfig,
    pub schedule: CostSchedule,
    /// Seal a block once this many transactions are buffered.
    pub seal_every: usize,
    /// ...or once the oldest buffered transaction is this old.
    pub seal_interval_ms: u64,
}

impl SystemOptions {
    pub fn toy() -> Self {
        SystemOptions {
            params: GroupParams::toy(),
            proof: ProofConfig::default(),
            schedule: CostSchedule::default(),
            seal_every: 16,
            seal_interval_ms: 2000,
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(SystemOptions {
            params: config.group_params()?,
            proof: config.proof_config(),
            schedule: config.schedule()?,
            seal_every: config.seal_every,
            seal_interval_ms: config.seal_interval_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyResult {
    pub verdict: Verdict,
    pub permanent_id: Option<PermanentId>,
    pub report_hash: Option<Digest>,
    pub failed_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteReceipt {
    pub tx_id: u64,
    /// Winning option when this vote closed the poll.
    pub closed_with: Option<usize>,
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub struct VotingSystem {
    registry: Registry,
    polls: PollEngine,
    ledger: Ledger,
    docs: DocStore,
    costs: CostMeter,
    seal_every: usize,
    seal_interval_ms: u64,
    rng: StdRng,
    clock: Clock,
}

impl fmt::Debug for VotingSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VotingSystem")
            .field("group", &self.registry.params().name())
            .field("transactions", &self.ledger.len())
            .field("polls", &self.polls.len())
            .finish_non_exhaustive()
    }
}

impl VotingSystem {
    /// Builds the system on `ledger`, replaying everything it already holds.
    pub fn new(options: SystemOptions, ledger: Ledger, docs: DocStore) -> Result<Self, SystemError> {
        let mut system = VotingSystem {
            registry: Registry::new(options.params, options.proof),
            polls: PollEngine::new(),
            ledger,
            docs,
            costs: CostMeter::new(options.schedule),
            seal_every: options.seal_every.max(1),
            seal_interval_ms: options.seal_interval_ms,
            rng: StdRng::from_os_rng(),
            clock: Box::new(wall_clock_ms),
        };
        system.replay()?;
        Ok(system)
    }

    pub fn in_memory(options: SystemOptions) -> Self {
        Self::new(options, Ledger::new(), DocStore::in_memory()).expect("empty ledger replays")
    }

    /// Opens the persisted state under the configured data directory, or an
    /// in-memory system when none is set.
    pub fn open(config: &ServiceConfig) -> Result<Self, SystemError> {
        let options = SystemOptions::from_config(config)?;
        match &config.data_dir {
            Some(dir) => {
                let ledger = Ledger::open(&dir.join("ledger"))?;
                let docs = DocStore::open(dir.join("docs"))?;
                Self::new(options, ledger, docs)
            }
            None => Ok(Self::in_memory(options)),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = StdRng::seed_from_u64(seed);
        self
    }

    pub fn set_clock(&mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) {
        self.clock = Box::new(clock);
    }

    fn replay(&mut self) -> Result<(), SystemError> {
        let transactions: Vec<Transaction> = self.ledger.transactions().cloned().collect();
        for tx in transactions {
            let fail = |reason: String| SystemError::Replay {
                tx_id: tx.tx_id,
                reason,
            };
            let event = SystemEvent::decode(tx.kind, &tx.payload).map_err(|e| fail(e.to_string()))?;
            self.apply(&event).map_err(fail)?;
            self.charge_for(&event, tx.tx_id).map_err(|e| fail(e.to_string()))?;
        }
        Ok(())
    }

    fn apply(&mut self, event: &SystemEvent) -> Result<(), String> {
        match event {
            SystemEvent::Identity(e) => self.registry.apply(e),
            SystemEvent::Poll(e) => self.polls.apply(e),
            SystemEvent::StoreDocument { .. } => Ok(()),
        }
    }

    /// Scope and operation charged for a recorded event, if any.
    fn charge_for(&self, event: &SystemEvent, tx_id: u64) -> Result<(), SystemError> {
        let charge = |scope: String, op: &str| self.costs.charge(&scope, op, Some(tx_id)).map(drop);
        let unv_scope = |unv: &UnvId| {
            self.registry
                .record_by_unv(unv)
                .map(|r| r.request_id.to_string())
                .ok_or_else(|| SystemError::Internal(format!("no record for {unv}")))
        };
        match event {
            SystemEvent::Identity(e) => match e {
                IdentityEvent::RegisterRequest { request_id, .. } => charge(request_id.to_string(), ops::SEND_REQ)?,
                IdentityEvent::IssueUnvId { request_id, .. } => charge(request_id.to_string(), ops::GEN_KEY)?,
                IdentityEvent::ProofVerified { unv_id, .. } => charge(unv_scope(unv_id)?, ops::VERIFY_PROOF)?,
                IdentityEvent::IssueId { unv_id, .. } => charge(unv_scope(unv_id)?, ops::REG_USER)?,
            },
            SystemEvent::Poll(e) => {
                let op = match e {
                    PollEvent::CreatePoll { .. } => ops::CREATE_POLL,
                    PollEvent::RegisterVoters { .. } => ops::REGISTER_VOTERS,
                    PollEvent::SetOpen { .. } => ops::SET_OPEN,
                    PollEvent::OpenPoll { .. } => ops::OPEN_POLL,
                    PollEvent::CastVote { .. } => ops::CAST_VOTES,
                    PollEvent::ClosePoll { .. } => ops::CLOSE_POLL,
                    PollEvent::PublishResult { .. } => return Ok(()),
                };
                charge(poll_scope(e.poll_id()), op)?;
            }
            SystemEvent::StoreDocument { .. } => charge(DOCUMENT_SCOPE.to_string(), ops::STORE_DOCUMENT)?,
        }
        Ok(())
    }

    /// Appends, applies and charges each event in order; returns the ids.
    fn record(&mut self, events: Vec<SystemEvent>, actor: &str) -> Result<Vec<u64>, SystemError> {
        let now = (self.clock)();
        let mut ids = Vec::with_capacity(events.len());
        for event in events {
            let tx_id = self.ledger.append(NewTransaction {
                kind: event.kind(),
                payload: event.encode(),
                timestamp_ms: now,
                actor: actor.to_string(),
            })?;
            self.apply(&event).map_err(SystemError::Internal)?;
            self.charge_for(&event, tx_id)?;
            ids.push(tx_id);
        }
        if self.ledger.pending_len() >= self.seal_every {
            // The transactions are already durable in the pending log; a
            // failed seal is retried by the next one.
            let _ = self.ledger.seal_block();
        }
        Ok(ids)
    }

    fn registration_scope(&self, session: &SessionId) -> Result<String, SystemError> {
        self.registry
            .resolve_request(session.as_str())
            .map(|r| r.to_string())
            .ok_or(SystemError::Identity(IdentityError::SessionNotFound))
    }

    // Registration.

    pub fn send_request(&mut self, user_info: &[u8], device_credentials: &[u8]) -> Result<(RequestId, [u8; 32]), SystemError> {
        let now = (self.clock)();
        let event = self.registry.send_request(user_info, device_credentials, now, &mut self.rng)?;
        let IdentityEvent::RegisterRequest { request_id, tmp_key, .. } = event else {
            unreachable!()
        };
        self.record(vec![SystemEvent::Identity(event)], &request_id.to_string())?;
        Ok((request_id, tmp_key))
    }

    pub fn issue_unverified_id(&mut self, request_id: RequestId, public_key: &GroupElement) -> Result<UnvId, SystemError> {
        let event = self.registry.issue_unverified_id(request_id, public_key)?;
        let IdentityEvent::IssueUnvId { unv_id, .. } = &event else {
            unreachable!()
        };
        let unv_id = unv_id.clone();
        self.record(vec![SystemEvent::Identity(event)], unv_id.as_str())?;
        Ok(unv_id)
    }

    pub fn begin_proof(&mut self, unv_id: &UnvId) -> Result<SessionId, SystemError> {
        Ok(self.registry.begin_proof(unv_id, &mut self.rng)?)
    }

    pub fn submit_commitments(&mut self, session: &SessionId, commitments: Vec<GroupElement>) -> Result<(), SystemError> {
        Ok(self.registry.submit_commitments(session, commitments)?)
    }

    /// Issues the session's challenges on first call and returns the same
    /// list afterwards.
    pub fn challenge(&mut self, session: &SessionId) -> Result<Vec<Challenge>, SystemError> {
        let existing = self
            .registry
            .session(session)
            .ok_or(IdentityError::SessionNotFound)?
            .transcript
            .challenges
            .clone();
        if !existing.is_empty() {
            return Ok(existing);
        }
        let challenges = self.registry.issue_challenges(session, &mut self.rng)?;
        let scope = self.registration_scope(session)?;
        self.costs.charge(&scope, ops::GEN_CHNG, None)?;
        Ok(challenges)
    }

    pub fn record_answers(&mut self, session: &SessionId, echoed: &[Challenge], answers: Vec<BigUint>) -> Result<(), SystemError> {
        Ok(self.registry.record_answers(session, echoed, answers)?)
    }

    /// Checks the answers (given here or recorded earlier). On success the
    /// report is stored and the permanent id issued.
    pub fn verify(&mut self, session: &SessionId, answers: Option<Vec<BigUint>>) -> Result<VerifyResult, SystemError> {
        let answers = match answers {
            Some(a) => a,
            None => self
                .registry
                .session(session)
                .ok_or(IdentityError::SessionNotFound)?
                .recorded_answers
                .clone()
                .ok_or(IdentityError::SessionNotReady)?,
        };
        let scope = self.registration_scope(session)?;
        match self.registry.verify(session, answers)? {
            VerifyOutcome::Accepted(accepted) => {
                let report_hash = self.docs.put(&accepted.report)?;
                let events = accepted
                    .events(report_hash)
                    .into_iter()
                    .map(SystemEvent::Identity)
                    .collect();
                self.record(events, accepted.unv_id.as_str())?;
                Ok(VerifyResult {
                    verdict: Verdict::Accepted,
                    permanent_id: Some(accepted.permanent_id),
                    report_hash: Some(report_hash),
                    failed_round: None,
                })
            }
            VerifyOutcome::Rejected { failed_round, .. } => {
                self.costs.charge(&scope, ops::VERIFY_PROOF, None)?;
                Ok(VerifyResult {
                    verdict: Verdict::Rejected,
                    permanent_id: None,
                    report_hash: None,
                    failed_round: Some(failed_round),
                })
            }
        }
    }

    pub fn verify_non_interactive(&self, public_key: &GroupElement, context: &[u8], proof: &NiProof) -> bool {
        verify_non_interactive(self.registry.params(), public_key, context, proof)
    }

    /// Checks a request proof made by a verified identity over `context`.
    pub fn authenticate(&self, id: &PermanentId, context: &[u8], proof: &NiProof) -> Result<(), SystemError> {
        let key = self.registry.public_key_of(id).ok_or(SystemError::UnknownIdentity)?;
        if !verify_non_interactive(self.registry.params(), key, context, proof) {
            return Err(SystemError::Unauthenticated);
        }
        Ok(())
    }

    // Polls.

    pub fn create_poll(&mut self, creator: &PermanentId, name: &str, description: &str, options: &[String]) -> Result<PollId, SystemError> {
        let verified = self.registry.is_verified(creator);
        let event = self.polls.create_poll(creator, verified, name, description, options)?;
        let id = event.poll_id();
        self.record(vec![SystemEvent::Poll(event)], creator.as_str())?;
        Ok(id)
    }

    pub fn register_voters(&mut self, poll: PollId, caller: &PermanentId, voters: &[PermanentId]) -> Result<usize, SystemError> {
        let registry = &self.registry;
        let (event, count) = self
            .polls
            .register_voters(poll, caller, voters, |v| registry.is_verified(v))?;
        self.record(vec![SystemEvent::Poll(event)], caller.as_str())?;
        Ok(count)
    }

    pub fn set_open(&mut self, poll: PollId, caller: &PermanentId) -> Result<(), SystemError> {
        let event = self.polls.set_open(poll, caller)?;
        self.record(vec![SystemEvent::Poll(event)], caller.as_str())?;
        Ok(())
    }

    pub fn open_poll(&mut self, poll: PollId, caller: &PermanentId) -> Result<(), SystemError> {
        let event = self.polls.open_poll(poll, caller)?;
        self.record(vec![SystemEvent::Poll(event)], caller.as_str())?;
        Ok(())
    }

    pub fn cast_vote(&mut self, poll: PollId, voter: &PermanentId, choice: usize) -> Result<VoteReceipt, SystemError> {
        let verified = self.registry.is_verified(voter);
        let events = self.polls.cast_vote(poll, voter, verified, choice)?;
        let closed_with = events.iter().find_map(|e| match e {
            PollEvent::PublishResult { winner, .. } => Some(*winner),
            _ => None,
        });
        let ids = self.record(events.into_iter().map(SystemEvent::Poll).collect(), voter.as_str())?;
        Ok(VoteReceipt {
            tx_id: ids[0],
            closed_with,
        })
    }

    pub fn close_poll(&mut self, poll: PollId, caller: &PermanentId) -> Result<usize, SystemError> {
        let events = self.polls.close_poll(poll, caller)?;
        let PollEvent::PublishResult { winner, .. } = events[1] else {
            unreachable!()
        };
        self.record(events.into_iter().map(SystemEvent::Poll).collect(), caller.as_str())?;
        Ok(winner)
    }

    /// Winning option index and label once closed. Charged, never recorded.
    pub fn poll_results(&self, poll: PollId) -> Result<Option<(usize, String)>, SystemError> {
        let result = self.polls.results(poll)?.map(|(i, label)| (i, label.to_string()));
        self.costs.charge(&poll_scope(poll), ops::GET_POLL_RES, None)?;
        Ok(result)
    }

    pub fn poll(&self, poll: PollId) -> Result<&Poll, SystemError> {
        Ok(self.polls.get(poll)?)
    }

    // Documents, ledger and costs.

    pub fn store_document(&mut self, bytes: &[u8]) -> Result<Digest, SystemError> {
        let hash = self.docs.put(bytes)?;
        self.record(
            vec![SystemEvent::StoreDocument {
                hash,
                size: bytes.len() as u64,
            }],
            DOCUMENT_SCOPE,
        )?;
        Ok(hash)
    }

    pub fn document(&self, hash: &Digest) -> Result<Vec<u8>, SystemError> {
        Ok(self.docs.get(hash)?)
    }

    pub fn verify_ledger(&self) -> Result<VerificationReport, SystemError> {
        Ok(self.ledger.verify_persisted()?)
    }

    pub fn transaction(&self, tx_id: u64) -> Result<LocatedTransaction, SystemError> {
        Ok(self.ledger.get_transaction(tx_id)?)
    }

    /// Seals the open buffer if its oldest transaction has waited long
    /// enough. Returns the new block hash when a block was written.
    pub fn seal_if_due(&mut self) -> Result<Option<Digest>, SystemError> {
        let now = (self.clock)();
        match self.ledger.pending_since_ms() {
            Some(since) if now.saturating_sub(since) >= self.seal_interval_ms => Ok(Some(self.ledger.seal_block()?)),
            _ => Ok(None),
        }
    }

    /// Seals whatever is buffered.
    pub fn flush(&mut self) -> Result<Option<Digest>, SystemError> {
        if self.ledger.pending_len() == 0 {
            return Ok(None);
        }
        Ok(Some(self.ledger.seal_block()?))
    }

    /// Accepts a request, unverified, permanent or session id, a poll id
    /// (`7` or `poll-7`) or the document scope.
    pub fn cost_report(&self, scope: &str) -> Result<CostReport, SystemError> {
        let scope = if let Some(request) = self.registry.resolve_request(scope) {
            request.to_string()
        } else if let Ok(id) = scope.parse::<PollId>() {
            poll_scope(id)
        } else {
            scope.to_string()
        };
        Ok(self.costs.report(&scope)?)
    }

    /// Canonical encoding of all state reconstructed from the ledger.
    pub fn state_snapshot(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.bytes("identity", &self.registry.snapshot())
            .bytes("polls", &self.polls.snapshot());
        enc.finish()
    }

    pub fn state_digest(&self) -> Digest {
        Digest::of(&self.state_snapshot())
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn polls(&self) -> &PollEngine {
        &self.polls
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn docs(&self) -> &DocStore {
        &self.docs
    }

    pub fn costs(&self) -> &CostMeter {
        &self.costs
    }

    pub fn params(&self) -> &GroupParams {
        self.registry.params()
    }

    pub fn proof_config(&self) -> ProofConfig {
        self.registry.config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{prove_non_interactive, request_context, Prover};
    use rand_chacha::ChaCha8Rng;

    struct Harness {
        system: VotingSystem,
        rng: ChaCha8Rng,
    }

    impl Harness {
        fn new() -> Self {
            Harness {
                system: VotingSystem::in_memory(SystemOptions::toy()).with_seed(1),
                rng: ChaCha8Rng::seed_from_u64(2),
            }
        }

        fn register(&mut self, who: &str) -> (PermanentId, Prover) {
            let params = self.system.params().clone();
            let mut prover = Prover::generate(&params, &mut self.rng);
            let (req, _) = self.system.send_request(who.as_bytes(), b"device").unwrap();
            let unv = self.system.issue_unverified_id(req, prover.public_key()).unwrap();
            let sid = self.system.begin_proof(&unv).unwrap();
            let rounds = self.system.proof_config().rounds;
            self.system
                .submit_commitments(&sid, prover.commit(&params, rounds, &mut self.rng))
                .unwrap();
            let c = self.system.challenge(&sid).unwrap();
            assert_eq!(self.system.challenge(&sid).unwrap(), c);
            let s = prover.respond(&params, &c).unwrap();
            self.system.record_answers(&sid, &c, s).unwrap();
            let result = self.system.verify(&sid, None).unwrap();
            assert_eq!(result.verdict, Verdict::Accepted);
            (result.permanent_id.unwrap(), prover)
        }
    }

    #[test]
    fn registration_and_poll_costs_follow_schedule() {
        let mut h = Harness::new();
        let (creator, _) = h.register("creator");
        let report = h.system.cost_report("req-0").unwrap();
        let ops_seen: Vec<&str> = report.entries.iter().map(|e| e.operation.as_str()).collect();
        assert_eq!(ops_seen, ["sendReq", "genKey", "genChng", "verifyProof", "regUser"]);
        assert_eq!(report.total, 477012);
        assert_eq!(h.system.cost_report(creator.as_str()).unwrap(), report);

        let voters: Vec<PermanentId> = (0..3).map(|i| h.register(&format!("v{i}")).0).collect();
        let poll = h
            .system
            .create_poll(&creator, "p", "d", &["A".into(), "B".into(), "C".into()])
            .unwrap();
        h.system.register_voters(poll, &creator, &voters).unwrap();
        h.system.open_poll(poll, &creator).unwrap();
        for (v, choice) in voters.iter().zip([0, 1, 1]) {
            h.system.cast_vote(poll, v, choice).unwrap();
        }
        assert_eq!(h.system.poll_results(poll).unwrap(), Some((1, "B".to_string())));
        let report = h.system.cost_report("0").unwrap();
        let gas: Vec<u64> = report.entries.iter().map(|e| e.gas).collect();
        assert_eq!(gas, [215949, 150240, 8981, 19214, 19214, 19214, 7223, 68547]);
    }

    #[test]
    fn rejected_proof_is_charged_but_not_recorded() {
        let mut h = Harness::new();
        let params = h.system.params().clone();
        let mut prover = Prover::generate(&params, &mut h.rng);
        let (req, _) = h.system.send_request(b"x", b"d").unwrap();
        let unv = h.system.issue_unverified_id(req, prover.public_key()).unwrap();
        let sid = h.system.begin_proof(&unv).unwrap();
        h.system.submit_commitments(&sid, prover.commit(&params, 2, &mut h.rng)).unwrap();
        let c = h.system.challenge(&sid).unwrap();
        let mut s = prover.respond(&params, &c).unwrap();
        s[0] = (&s[0] + 1u32) % params.q();
        let before = h.system.ledger().len();
        let result = h.system.verify(&sid, Some(s)).unwrap();
        assert_eq!(result.verdict, Verdict::Rejected);
        assert_eq!(result.failed_round, Some(0));
        assert_eq!(h.system.ledger().len(), before);
        let report = h.system.cost_report(unv.as_str()).unwrap();
        assert_eq!(report.entries.last().unwrap().operation, "verifyProof");
        assert_eq!(report.entries.last().unwrap().tx_id, None);
    }

    #[test]
    fn authentication_binds_identity_and_context() {
        let mut h = Harness::new();
        let (id, prover) = h.register("a");
        let params = h.system.params().clone();
        let ctx = request_context("POST", "/polls", b"{}");
        let proof = prove_non_interactive(&params, &prover, &ctx, 2, &mut h.rng);
        assert!(h.system.authenticate(&id, &ctx, &proof).is_ok());
        let other = request_context("POST", "/polls", b"{\"x\":1}");
        assert!(matches!(
            h.system.authenticate(&id, &other, &proof),
            Err(SystemError::Unauthenticated)
        ));
        let stranger: PermanentId = "00000000000000000000000000000000".parse().unwrap();
        assert!(matches!(
            h.system.authenticate(&stranger, &ctx, &proof),
            Err(SystemError::UnknownIdentity)
        ));
    }

    #[test]
    fn failed_operations_leave_ledger_untouched() {
        let mut h = Harness::new();
        let (creator, _) = h.register("c");
        let len = h.system.ledger().len();
        assert!(h.system.create_poll(&creator, "p", "d", &["A".into()]).is_err());
        assert!(h.system.open_poll(PollId(0), &creator).is_err());
        assert!(h.system.send_request(b"", b"d").is_err());
        assert_eq!(h.system.ledger().len(), len);
    }

    #[test]
    fn replay_reproduces_state_and_costs() {
        let mut h = Harness::new();
        let (creator, _) = h.register("c");
        let (voter, _) = h.register("v");
        let poll = h.system.create_poll(&creator, "p", "", &["A".into(), "B".into()]).unwrap();
        h.system.register_voters(poll, &creator, &[voter.clone()]).unwrap();
        h.system.open_poll(poll, &creator).unwrap();
        h.system.cast_vote(poll, &voter, 1).unwrap();
        h.system.store_document(b"minutes").unwrap();

        let mut copy = Ledger::new();
        for tx in h.system.ledger().transactions() {
            copy.append(NewTransaction {
                kind: tx.kind,
                payload: tx.payload.clone(),
                timestamp_ms: tx.timestamp_ms,
                actor: tx.actor.clone(),
            })
            .unwrap();
        }
        let replayed = VotingSystem::new(SystemOptions::toy(), copy, DocStore::in_memory()).unwrap();
        assert_eq!(replayed.state_snapshot(), h.system.state_snapshot());
        assert_eq!(replayed.poll(poll).unwrap().result, Some(1));
        assert_eq!(
            replayed.cost_report("poll-0").unwrap(),
            h.system.cost_report("poll-0").unwrap()
        );
    }

    #[test]
    fn seals_by_count_and_age() {
        let mut options = SystemOptions::toy();
        options.seal_every = 3;
        options.seal_interval_ms = 100;
        let mut system = VotingSystem::in_memory(options).with_seed(9);
        let now = std::sync::Arc::new(std::sync::atomic::AtomicU64::new(1_000));
        let clock = now.clone();
        system.set_clock(move || clock.load(std::sync::atomic::Ordering::SeqCst));
        for i in 0..4u8 {
            system.send_request(&[i + 1], b"d").unwrap();
        }
        assert_eq!(system.ledger().blocks().len(), 1);
        assert_eq!(system.seal_if_due().unwrap(), None);
        now.store(1_100, std::sync::atomic::Ordering::SeqCst);
        assert!(system.seal_if_due().unwrap().is_some());
        assert_eq!(system.ledger().blocks().len(), 2);
        assert_eq!(system.flush().unwrap(), None);
        assert!(system.verify_ledger().unwrap().ok);
    }

    #[test]
    fn events_decode_by_kind() {
        let ev = SystemEvent::StoreDocument {
            hash: Digest::of(b"x"),
            size: 1,
        };
        assert_eq!(SystemEvent::decode(ev.kind(), &ev.encode()).unwrap(), ev);
        assert!(SystemEvent::decode(TxKind::CastVote, &ev.encode()).is_err());
    }
}
