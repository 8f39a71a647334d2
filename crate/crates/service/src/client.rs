//! Async client for the HTTP API, used by the CLI and the bench harness.

use std::time::Duration;

use ballotledger_core::identity::{
    prove_non_interactive, request_context, GroupElement, GroupParams, NiProof, PermanentId, Prover,
    RequestId, SessionId, UnvId,
};
use ballotledger_core::poll::PollId;
use ballotledger_core::Digest;
use num_bigint::BigUint;
use reqwest::header::CONTENT_TYPE;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::wire::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
    #[error("service unreachable at {url}: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::Api { code, .. } => code,
            ClientError::Unreachable { .. } => "ServiceUnreachable",
            ClientError::BadResponse(_) => "BadResponse",
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

/// Signs requests for one verified identity.
#[derive(Debug, Clone)]
pub struct Signer {
    pub id: PermanentId,
    prover: Prover,
    params: GroupParams,
    rounds: usize,
}

impl Signer {
    pub fn new(id: PermanentId, prover: Prover, params: GroupParams, rounds: usize) -> Self {
        Signer {
            id,
            prover,
            params,
            rounds: rounds.max(1),
        }
    }

    /// Compact proof over `method`, `path` and `body`.
    pub fn proof(&self, method: &str, path: &str, body: &[u8]) -> String {
        let context = request_context(method, path, body);
        prove_non_interactive(&self.params, &self.prover, &context, self.rounds, &mut rand::rng()).to_compact()
    }
}

/// Everything exchanged during one interactive registration.
#[derive(Debug, Clone)]
pub struct RegistrationTranscript {
    pub request_id: RequestId,
    pub tmp_key: String,
    pub unv_id: UnvId,
    pub session_id: SessionId,
    pub commitments: Vec<GroupElement>,
    pub challenges: Vec<ballotledger_core::identity::Challenge>,
    pub answers: Vec<BigUint>,
    pub outcome: VerifyResponse,
}

/// Steps of the interactive flow, reported as they complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegistrationStep {
    Requested,
    UnverifiedId,
    SessionStarted,
    Committed,
    Challenged,
    Answered,
    Verified,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> ClientResult<Self> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ClientError::BadResponse(e.to_string()))?;
        Ok(Client {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<Vec<u8>>,
        content_type: &str,
        signer: Option<&Signer>,
    ) -> ClientResult<T> {
        let bytes = self.send_raw(method, path, body, content_type, signer).await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::BadResponse(e.to_string()))
    }

    async fn send_raw(
        &self,
        method: Method,
        path: &str,
        body: Option<Vec<u8>>,
        content_type: &str,
        signer: Option<&Signer>,
    ) -> ClientResult<Vec<u8>> {
        let url = format!("{}{}", self.base, path);
        let mut req = self.http.request(method.clone(), &url);
        if let Some(signer) = signer {
            let proof = signer.proof(method.as_str(), path, body.as_deref().unwrap_or_default());
            req = req
                .header(ID_HEADER, signer.id.as_str())
                .header(PROOF_HEADER, proof);
        }
        if let Some(body) = body {
            req = req.header(CONTENT_TYPE, content_type).body(body);
        }
        let resp = req.send().await.map_err(|e| ClientError::Unreachable {
            url: url.clone(),
            reason: e.to_string(),
        })?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| ClientError::BadResponse(e.to_string()))?;
        if status != StatusCode::OK {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(err) => ClientError::Api {
                    status: status.as_u16(),
                    code: err.error,
                    message: err.message,
                },
                Err(_) => ClientError::BadResponse(format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes))),
            });
        }
        Ok(bytes.to_vec())
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        self.send(Method::GET, path, None, "", None).await
    }

    async fn post<T: DeserializeOwned, B: Serialize>(&self, path: &str, body: &B, signer: Option<&Signer>) -> ClientResult<T> {
        let body = serde_json::to_vec(body).expect("serializable body");
        self.send(Method::POST, path, Some(body), "application/json", signer).await
    }

    pub async fn health(&self) -> ClientResult<Health> {
        self.get("/health").await
    }

    pub async fn params(&self) -> ClientResult<ParamsView> {
        self.get("/params").await
    }

    /// The service's group, reusing the built-in definition when it matches.
    pub async fn group_params(&self) -> ClientResult<(GroupParams, ParamsView)> {
        let view = self.params().await?;
        let hex = |s: &str| {
            BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| ClientError::BadResponse(format!("bad group value {s:?}")))
        };
        let (p, q, g) = (hex(&view.p)?, hex(&view.q)?, hex(&view.g)?);
        let params = match GroupParams::by_name(&view.group) {
            Ok(known) if known.p() == &p && known.q() == &q && known.g().value() == &g => known,
            _ => GroupParams::new(view.group.clone(), p, q, g).map_err(|e| ClientError::BadResponse(e.to_string()))?,
        };
        Ok((params, view))
    }

    pub async fn send_request(&self, user_info: &str, device_credentials: &str) -> ClientResult<RegisterResponse> {
        let body = RegisterRequest {
            user_info: user_info.to_string(),
            device_credentials: device_credentials.to_string(),
        };
        self.post("/register/request", &body, None).await
    }

    pub async fn issue_unv_id(&self, request_id: RequestId, public_key: &GroupElement) -> ClientResult<UnvIdResponse> {
        let body = UnvIdRequest {
            request_id,
            public_key: public_key.clone(),
        };
        self.post("/register/unvid", &body, None).await
    }

    pub async fn begin_session(&self, unv_id: &UnvId) -> ClientResult<SessionResponse> {
        let body = SessionRequest {
            unv_id: unv_id.clone(),
        };
        self.post("/register/session", &body, None).await
    }

    pub async fn commit(&self, session_id: &SessionId, commitments: Vec<GroupElement>) -> ClientResult<Ack> {
        let body = CommitRequest {
            session_id: session_id.clone(),
            commitments,
        };
        self.post("/register/commit", &body, None).await
    }

    pub async fn challenge(&self, session_id: &SessionId) -> ClientResult<ChallengeResponse> {
        self.get(&format!("/register/challenge/{session_id}")).await
    }

    pub async fn respond(&self, body: &RespondRequest) -> ClientResult<Ack> {
        self.post("/register/respond", body, None).await
    }

    pub async fn verify(&self, session_id: &SessionId, answers: Option<Vec<BigUint>>) -> ClientResult<VerifyResponse> {
        let body = VerifyRequest {
            session_id: session_id.clone(),
            answers,
        };
        self.post("/register/verify", &body, None).await
    }

    pub async fn ni_verify(&self, public_key: &GroupElement, context: &[u8], proof: &NiProof) -> ClientResult<bool> {
        let body = NiVerifyRequest {
            public_key: public_key.clone(),
            context_tag: hex::encode(context),
            proof: proof.to_compact(),
        };
        let resp: NiVerifyResponse = self.post("/register/ni-verify", &body, None).await?;
        Ok(resp.valid)
    }

    /// Runs request, unverified id, session, commit, challenge, respond and
    /// verify in order, calling `on_step` after each.
    pub async fn register(
        &self,
        user_info: &str,
        device_credentials: &str,
        prover: &mut Prover,
        params: &GroupParams,
        mut on_step: impl FnMut(RegistrationStep),
    ) -> ClientResult<RegistrationTranscript> {
        let request = self.send_request(user_info, device_credentials).await?;
        on_step(RegistrationStep::Requested);
        let unv = self.issue_unv_id(request.request_id, prover.public_key()).await?;
        on_step(RegistrationStep::UnverifiedId);
        let session = self.begin_session(&unv.unv_id).await?;
        on_step(RegistrationStep::SessionStarted);
        let commitments = prover.commit(params, session.rounds, &mut rand::rng());
        self.commit(&session.session_id, commitments.clone()).await?;
        on_step(RegistrationStep::Committed);
        let challenges = self.challenge(&session.session_id).await?.challenges;
        on_step(RegistrationStep::Challenged);
        let answers = prover
            .respond(params, &challenges)
            .map_err(|e| ClientError::BadResponse(e.to_string()))?;
        self.respond(&RespondRequest {
            session_id: session.session_id.clone(),
            challenges: challenges.clone(),
            answers: answers.clone(),
        })
        .await?;
        on_step(RegistrationStep::Answered);
        let outcome = self.verify(&session.session_id, None).await?;
        on_step(RegistrationStep::Verified);
        Ok(RegistrationTranscript {
            request_id: request.request_id,
            tmp_key: request.tmp_key,
            unv_id: unv.unv_id,
            session_id: session.session_id,
            commitments,
            challenges,
            answers,
            outcome,
        })
    }

    pub async fn create_poll(&self, signer: &Signer, body: &CreatePollRequest) -> ClientResult<CreatePollResponse> {
        self.post("/polls", body, Some(signer)).await
    }

    pub async fn register_voters(&self, signer: &Signer, poll: PollId, voters: &[PermanentId]) -> ClientResult<VotersResponse> {
        let body = VotersRequest {
            voters: voters.to_vec(),
        };
        self.post(&format!("/polls/{poll}/voters"), &body, Some(signer)).await
    }

    pub async fn set_open(&self, signer: &Signer, poll: PollId) -> ClientResult<PollView> {
        self.post(&format!("/polls/{poll}/set-open"), &serde_json::json!({}), Some(signer))
            .await
    }

    pub async fn open_poll(&self, signer: &Signer, poll: PollId) -> ClientResult<PollView> {
        self.post(&format!("/polls/{poll}/open"), &serde_json::json!({}), Some(signer))
            .await
    }

    pub async fn cast_vote(&self, signer: &Signer, poll: PollId, choice: usize) -> ClientResult<VoteResponse> {
        self.post(&format!("/polls/{poll}/votes"), &VoteRequest { choice }, Some(signer))
            .await
    }

    pub async fn close_poll(&self, signer: &Signer, poll: PollId) -> ClientResult<OptionRef> {
        self.post(&format!("/polls/{poll}/close"), &serde_json::json!({}), Some(signer))
            .await
    }

    pub async fn results(&self, poll: PollId) -> ClientResult<ResultsResponse> {
        self.get(&format!("/polls/{poll}/results")).await
    }

    pub async fn poll(&self, poll: PollId) -> ClientResult<PollView> {
        self.get(&format!("/polls/{poll}")).await
    }

    pub async fn put_document(&self, bytes: Vec<u8>) -> ClientResult<Digest> {
        let resp: DocumentResponse = self
            .send(Method::POST, "/documents", Some(bytes), "application/octet-stream", None)
            .await?;
        Ok(resp.hash)
    }

    pub async fn get_document(&self, hash: &Digest) -> ClientResult<Vec<u8>> {
        self.send_raw(Method::GET, &format!("/documents/{hash}"), None, "", None)
            .await
    }

    pub async fn costs(&self, scope: &str) -> ClientResult<CostReportView> {
        self.get(&format!("/costs/{scope}")).await
    }

    pub async fn ledger_verify(&self) -> ClientResult<LedgerVerifyView> {
        self.get("/ledger/verify").await
    }

    pub async fn transaction(&self, tx_id: u64) -> ClientResult<TransactionView> {
        self.get(&format!("/ledger/transactions/{tx_id}")).await
    }

    pub async fn state(&self) -> ClientResult<StateView> {
        self.get("/state").await
    }
}
