//! JSON bodies of the HTTP API. Integers travel as decimal strings, group
//! elements and hashes as lowercase hex.

use ballotledger_core::costmeter::CostReport;
use ballotledger_core::identity::{
    Challenge, GroupElement, PermanentId, RequestId, SessionId, UnvId, Verdict,
};
use ballotledger_core::ledger::{LocatedTransaction, VerificationReport};
use ballotledger_core::poll::{Poll, PollId, PollStatus};
use ballotledger_core::Digest;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Header carrying the caller's permanent id.
pub const ID_HEADER: &str = "x-ballot-id";
/// Header carrying the compact non-interactive proof over the request.
pub const PROOF_HEADER: &str = "x-ballot-proof";

/// Serde adapters for numbers carried as decimal strings.
pub mod dec {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    fn parse<T: FromStr, E: de::Error>(s: &str) -> Result<T, E>
    where
        T::Err: Display,
    {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(E::custom(format!("expected a decimal string, got {s:?}")));
        }
        s.parse().map_err(E::custom)
    }

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        parse(&String::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Option::<String>::deserialize(d)?
                .map(|s| parse(&s))
                .transpose()
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for item in v {
                seq.serialize_element(&item.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<String>::deserialize(d)?.iter().map(|s| parse(s)).collect()
        }
    }

    pub mod option_vec {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<Vec<T>>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::vec::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<Vec<T>>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Option::<Vec<String>>::deserialize(d)?
                .map(|v| v.iter().map(|s| parse(s)).collect())
                .transpose()
        }
    }
}

mod request_id {
    use super::RequestId;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &RequestId, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RequestId, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamsView {
    pub group: String,
    pub p: String,
    pub q: String,
    pub g: String,
    #[serde(with = "dec")]
    pub rounds: usize,
    #[serde(with = "dec")]
    pub challenge_bits: u32,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegisterRequest {
    pub user_info: String,
    pub device_credentials: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegisterResponse {
    #[serde(with = "request_id")]
    pub request_id: RequestId,
    pub tmp_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnvIdRequest {
    #[serde(with = "request_id")]
    pub request_id: RequestId,
    pub public_key: GroupElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnvIdResponse {
    pub unv_id: UnvId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRequest {
    pub unv_id: UnvId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionResponse {
    pub session_id: SessionId,
    pub sig_zkp: bool,
    #[serde(with = "dec")]
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitRequest {
    pub session_id: SessionId,
    pub commitments: Vec<GroupElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChallengeResponse {
    pub session_id: SessionId,
    pub challenges: Vec<Challenge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RespondRequest {
    pub session_id: SessionId,
    pub challenges: Vec<Challenge>,
    #[serde(with = "dec::vec")]
    pub answers: Vec<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyRequest {
    pub session_id: SessionId,
    /// Answers recorded through `/register/respond` are used when absent.
    #[serde(default, with = "dec::option_vec", skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<BigUint>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyResponse {
    pub verdict: Verdict,
    pub permanent_id: Option<PermanentId>,
    pub report_hash: Option<Digest>,
    #[serde(with = "dec::option")]
    pub failed_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NiVerifyRequest {
    pub public_key: GroupElement,
    /// Hex-encoded context bytes.
    pub context_tag: String,
    /// Compact proof, `d1,d2;s1,s2`.
    pub proof: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiVerifyResponse {
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatePollRequest {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatePollResponse {
    pub poll_id: PollId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VotersRequest {
    pub voters: Vec<PermanentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VotersResponse {
    #[serde(with = "dec")]
    pub registered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteRequest {
    #[serde(with = "dec")]
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteResponse {
    #[serde(with = "dec")]
    pub tx_id: u64,
    /// Set when this vote completed the electorate and closed the poll.
    pub result: Option<OptionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptionRef {
    #[serde(with = "dec")]
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultsResponse {
    pub poll_id: PollId,
    pub status: PollStatus,
    /// `null` until the poll is closed.
    pub result: Option<OptionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PollView {
    pub poll_id: PollId,
    pub name: String,
    pub description: String,
    pub options: Vec<String>,
    pub creator: PermanentId,
    pub registered_voters: Vec<PermanentId>,
    pub open_to_all: bool,
    pub status: PollStatus,
    /// Identities that have voted, without their choices.
    pub voted: Vec<PermanentId>,
    /// Per-option counts, published once closed.
    #[serde(with = "dec::option_vec")]
    pub counts: Option<Vec<u64>>,
    pub result: Option<OptionRef>,
}

impl From<&Poll> for PollView {
    fn from(p: &Poll) -> Self {
        let closed = p.status == PollStatus::Closed;
        PollView {
            poll_id: p.id,
            name: p.name.clone(),
            description: p.description.clone(),
            options: p.options.clone(),
            creator: p.creator.clone(),
            registered_voters: p.registered_voters.iter().cloned().collect(),
            open_to_all: p.open_to_all,
            status: p.status,
            voted: p.votes.keys().cloned().collect(),
            counts: closed.then(|| p.counts()),
            result: p.result.map(|i| OptionRef {
                index: i,
                label: p.options[i].clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentResponse {
    pub hash: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostEntryView {
    pub operation: String,
    #[serde(with = "dec")]
    pub gas: u64,
    #[serde(with = "dec::option")]
    pub tx_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostReportView {
    pub scope: String,
    pub entries: Vec<CostEntryView>,
    #[serde(with = "dec")]
    pub total: u64,
}

impl From<CostReport> for CostReportView {
    fn from(r: CostReport) -> Self {
        CostReportView {
            scope: r.scope,
            entries: r
                .entries
                .into_iter()
                .map(|e| CostEntryView {
                    operation: e.operation,
                    gas: e.gas,
                    tx_id: e.tx_id,
                })
                .collect(),
            total: r.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerVerifyView {
    pub ok: bool,
    #[serde(with = "dec::option")]
    pub first_bad_height: Option<u64>,
    pub detail: Option<String>,
}

impl From<VerificationReport> for LedgerVerifyView {
    fn from(r: VerificationReport) -> Self {
        LedgerVerifyView {
            ok: r.ok,
            first_bad_height: r.first_bad_height,
            detail: r.detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransactionView {
    #[serde(with = "dec")]
    pub tx_id: u64,
    pub kind: String,
    pub payload: String,
    pub payload_hash: Digest,
    #[serde(with = "dec")]
    pub timestamp: u64,
    pub actor: String,
    #[serde(with = "dec::option")]
    pub height: Option<u64>,
}

impl From<LocatedTransaction> for TransactionView {
    fn from(l: LocatedTransaction) -> Self {
        let t = l.transaction;
        TransactionView {
            tx_id: t.tx_id,
            kind: t.kind.name().to_string(),
            payload: hex::encode(&t.payload),
            payload_hash: t.payload_hash,
            timestamp: t.timestamp_ms,
            actor: t.actor,
            height: l.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateView {
    /// Digest of the canonical snapshot of all ledger-derived state.
    pub digest: Digest,
    #[serde(with = "dec")]
    pub transactions: u64,
    #[serde(with = "dec")]
    pub blocks: u64,
}
