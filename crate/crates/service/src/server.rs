//! HTTP server around [`VotingSystem`].
//!
//! One coarse lock guards the system. Reads (results, poll views, costs,
//! ledger queries) share it; anything that appends to the ledger takes it
//! exclusively, so the append and the state change are visible together
//! before the response goes out. Request proofs are checked under the
//! shared lock before the exclusive one is taken.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ballotledger_core::identity::{request_context, NiProof, PermanentId, SessionId};
use ballotledger_core::poll::PollId;
use ballotledger_core::system::SystemError;
use ballotledger_core::{Digest, ServiceConfig, VotingSystem};
use serde::de::DeserializeOwned;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::wire::*;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("cannot listen on {address}: {source}")]
    Bind {
        address: String,
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::System(e) => e.code(),
            ServeError::Bind { .. } | ServeError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    system: RwLock<VotingSystem>,
}

impl AppState {
    pub fn new(system: VotingSystem) -> Arc<Self> {
        Arc::new(AppState {
            system: RwLock::new(system),
        })
    }

    pub fn read(&self) -> std::sync::RwLockReadGuard<'_, VotingSystem> {
        self.system.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> std::sync::RwLockWriteGuard<'_, VotingSystem> {
        self.system.write().unwrap_or_else(|e| e.into_inner())
    }
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "BadRequest".into(),
            message: message.into(),
        }
    }
}

/// HTTP status for an error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "NotFound" | "SessionNotFound" => StatusCode::NOT_FOUND,
        "Unauthenticated" | "UnknownIdentity" => StatusCode::UNAUTHORIZED,
        "NotCreator" | "NotRegistered" | "UnverifiedCreator" => StatusCode::FORBIDDEN,
        "DuplicateRequest" | "SessionExists" | "SessionNotPending" | "NoCommitment"
        | "ChallengesAlreadyIssued" | "SessionNotReady" | "WrongState" | "NoVoters"
        | "PollNotOpen" | "AlreadyVoted" => StatusCode::CONFLICT,
        "LedgerSealed" => StatusCode::SERVICE_UNAVAILABLE,
        "LedgerCorrupt" | "IntegrityError" | "IoError" | "Internal" | "ConfigError" => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<SystemError> for ApiError {
    fn from(e: SystemError) -> Self {
        let code = e.code();
        ApiError {
            status: status_for(code),
            code: code.to_string(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = %self.code, "{}", self.message);
        }
        let body = ErrorBody {
            error: self.code,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn parse_poll(id: &str) -> Result<PollId, ApiError> {
    id.parse().map_err(ApiError::bad_request)
}

/// Resolves the caller from the identity and proof headers.
fn authenticate(state: &AppState, method: &Method, uri: &Uri, headers: &HeaderMap, body: &[u8]) -> Result<PermanentId, ApiError> {
    let header_str = |name: &str| headers.get(name).and_then(|v| v.to_str().ok());
    let unauthenticated = |message: &str| ApiError {
        status: StatusCode::UNAUTHORIZED,
        code: "Unauthenticated".into(),
        message: message.into(),
    };
    let id: PermanentId = header_str(ID_HEADER)
        .ok_or_else(|| unauthenticated("missing identity header"))?
        .parse()
        .map_err(|_| unauthenticated("malformed identity header"))?;
    let proof = header_str(PROOF_HEADER)
        .and_then(NiProof::from_compact)
        .ok_or_else(|| unauthenticated("missing or malformed proof header"))?;
    let context = request_context(method.as_str(), uri.path(), body);
    state.read().authenticate(&id, &context, &proof)?;
    Ok(id)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/params", get(params))
        .route("/register/request", post(register_request))
        .route("/register/unvid", post(register_unvid))
        .route("/register/session", post(register_session))
        .route("/register/commit", post(register_commit))
        .route("/register/challenge/{session}", get(register_challenge))
        .route("/register/respond", post(register_respond))
        .route("/register/verify", post(register_verify))
        .route("/register/ni-verify", post(register_ni_verify))
        .route("/polls", post(create_poll))
        .route("/polls/{id}", get(poll_view))
        .route("/polls/{id}/voters", post(register_voters))
        .route("/polls/{id}/set-open", post(set_open))
        .route("/polls/{id}/open", post(open_poll))
        .route("/polls/{id}/votes", post(cast_vote))
        .route("/polls/{id}/close", post(close_poll))
        .route("/polls/{id}/results", get(poll_results))
        .route("/documents", post(put_document))
        .route("/documents/{hash}", get(get_document))
        .route("/costs/{scope}", get(costs))
        .route("/ledger/verify", get(ledger_verify))
        .route("/ledger/transactions/{id}", get(ledger_transaction))
        .route("/state", get(state_view))
        .with_state(state)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
    })
}

async fn params(State(state): State<Shared>) -> Json<ParamsView> {
    let system = state.read();
    let params = system.params();
    let config = system.proof_config();
    Json(ParamsView {
        group: params.name().to_string(),
        p: params.p().to_str_radix(16),
        q: params.q().to_str_radix(16),
        g: params.g().to_hex(),
        rounds: config.rounds,
        challenge_bits: config.challenge_bits,
        digest: ballotledger_core::digest::DIGEST_ALGORITHM_ID.to_string(),
    })
}

async fn register_request(State(state): State<Shared>, body: Bytes) -> ApiResult<RegisterResponse> {
    let req: RegisterRequest = parse_body(&body)?;
    let (request_id, tmp_key) = state
        .write()
        .send_request(req.user_info.as_bytes(), req.device_credentials.as_bytes())?;
    Ok(Json(RegisterResponse {
        request_id,
        tmp_key: hex::encode(tmp_key),
    }))
}

async fn register_unvid(State(state): State<Shared>, body: Bytes) -> ApiResult<UnvIdResponse> {
    let req: UnvIdRequest = parse_body(&body)?;
    let unv_id = state.write().issue_unverified_id(req.request_id, &req.public_key)?;
    Ok(Json(UnvIdResponse { unv_id }))
}

async fn register_session(State(state): State<Shared>, body: Bytes) -> ApiResult<SessionResponse> {
    let req: SessionRequest = parse_body(&body)?;
    let mut system = state.write();
    let session_id = system.begin_proof(&req.unv_id)?;
    Ok(Json(SessionResponse {
        session_id,
        sig_zkp: true,
        rounds: system.proof_config().rounds,
    }))
}

async fn register_commit(State(state): State<Shared>, body: Bytes) -> ApiResult<Ack> {
    let req: CommitRequest = parse_body(&body)?;
    state.write().submit_commitments(&req.session_id, req.commitments)?;
    Ok(Json(Ack { ok: true }))
}

async fn register_challenge(State(state): State<Shared>, Path(session): Path<String>) -> ApiResult<ChallengeResponse> {
    let session_id: SessionId = session
        .parse()
        .map_err(|_| ApiError::bad_request("malformed session id"))?;
    let challenges = state.write().challenge(&session_id)?;
    Ok(Json(ChallengeResponse {
        session_id,
        challenges,
    }))
}

async fn register_respond(State(state): State<Shared>, body: Bytes) -> ApiResult<Ack> {
    let req: RespondRequest = parse_body(&body)?;
    state
        .write()
        .record_answers(&req.session_id, &req.challenges, req.answers)?;
    Ok(Json(Ack { ok: true }))
}

async fn register_verify(State(state): State<Shared>, body: Bytes) -> ApiResult<VerifyResponse> {
    let req: VerifyRequest = parse_body(&body)?;
    let result = state.write().verify(&req.session_id, req.answers)?;
    Ok(Json(VerifyResponse {
        verdict: result.verdict,
        permanent_id: result.permanent_id,
        report_hash: result.report_hash,
        failed_round: result.failed_round,
    }))
}

async fn register_ni_verify(State(state): State<Shared>, body: Bytes) -> ApiResult<NiVerifyResponse> {
    let req: NiVerifyRequest = parse_body(&body)?;
    let context = hex::decode(&req.context_tag).map_err(|e| ApiError::bad_request(format!("contextTag: {e}")))?;
    let proof = NiProof::from_compact(&req.proof).ok_or_else(|| ApiError::bad_request("malformed proof"))?;
    let valid = state.read().verify_non_interactive(&req.public_key, &context, &proof);
    Ok(Json(NiVerifyResponse { valid }))
}

async fn create_poll(State(state): State<Shared>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> ApiResult<CreatePollResponse> {
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let req: CreatePollRequest = parse_body(&body)?;
    let poll_id = state
        .write()
        .create_poll(&caller, &req.name, &req.description, &req.options)?;
    Ok(Json(CreatePollResponse { poll_id }))
}

async fn poll_view(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<PollView> {
    let id = parse_poll(&id)?;
    let system = state.read();
    Ok(Json(PollView::from(system.poll(id)?)))
}

async fn register_voters(
    State(state): State<Shared>,
    Path(id): Path<String>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<VotersResponse> {
    let id = parse_poll(&id)?;
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let req: VotersRequest = parse_body(&body)?;
    let registered = state.write().register_voters(id, &caller, &req.voters)?;
    Ok(Json(VotersResponse { registered }))
}

async fn set_open(
    State(state): State<Shared>,
    Path(id): Path<String>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<PollView> {
    let id = parse_poll(&id)?;
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let mut system = state.write();
    system.set_open(id, &caller)?;
    Ok(Json(PollView::from(system.poll(id)?)))
}

async fn open_poll(
    State(state): State<Shared>,
    Path(id): Path<String>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<PollView> {
    let id = parse_poll(&id)?;
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let mut system = state.write();
    system.open_poll(id, &caller)?;
    Ok(Json(PollView::from(system.poll(id)?)))
}

async fn cast_vote(
    State(state): State<Shared>,
    Path(id): Path<String>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<VoteResponse> {
    let id = parse_poll(&id)?;
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let req: VoteRequest = parse_body(&body)?;
    let mut system = state.write();
    let receipt = system.cast_vote(id, &caller, req.choice)?;
    let result = match receipt.closed_with {
        Some(index) => Some(OptionRef {
            index,
            label: system.poll(id)?.options[index].clone(),
        }),
        None => None,
    };
    Ok(Json(VoteResponse {
        tx_id: receipt.tx_id,
        result,
    }))
}

async fn close_poll(
    State(state): State<Shared>,
    Path(id): Path<String>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<OptionRef> {
    let id = parse_poll(&id)?;
    let caller = authenticate(&state, &method, &uri, &headers, &body)?;
    let mut system = state.write();
    let index = system.close_poll(id, &caller)?;
    Ok(Json(OptionRef {
        index,
        label: system.poll(id)?.options[index].clone(),
    }))
}

async fn poll_results(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<ResultsResponse> {
    let id = parse_poll(&id)?;
    let system = state.read();
    let result = system.poll_results(id)?;
    Ok(Json(ResultsResponse {
        poll_id: id,
        status: system.poll(id)?.status,
        result: result.map(|(index, label)| OptionRef { index, label }),
    }))
}

async fn put_document(State(state): State<Shared>, body: Bytes) -> ApiResult<DocumentResponse> {
    let hash = state.write().store_document(&body)?;
    Ok(Json(DocumentResponse { hash }))
}

async fn get_document(State(state): State<Shared>, Path(hash): Path<String>) -> Result<Response, ApiError> {
    let hash: Digest = hash
        .parse()
        .map_err(|_| ApiError::bad_request("malformed document hash"))?;
    let bytes = state.read().document(&hash)?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

async fn costs(State(state): State<Shared>, Path(scope): Path<String>) -> ApiResult<CostReportView> {
    Ok(Json(state.read().cost_report(&scope)?.into()))
}

async fn ledger_verify(State(state): State<Shared>) -> ApiResult<LedgerVerifyView> {
    Ok(Json(state.read().verify_ledger()?.into()))
}

async fn ledger_transaction(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<TransactionView> {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::bad_request("malformed transaction id"))?;
    Ok(Json(state.read().transaction(id)?.into()))
}

async fn state_view(State(state): State<Shared>) -> Json<StateView> {
    let system = state.read();
    Json(StateView {
        digest: system.state_digest(),
        transactions: system.ledger().len(),
        blocks: system.ledger().blocks().len() as u64,
    })
}

/// A running server. Dropping it leaves the server running until the
/// runtime shuts down; call [`Running::shutdown`] to stop it cleanly.
#[derive(Debug)]
pub struct Running {
    pub addr: SocketAddr,
    pub state: Shared,
    stop: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    sealer: JoinHandle<()>,
}

impl Running {
    /// Stops accepting requests, waits for in-flight ones and seals any
    /// buffered transactions.
    pub async fn shutdown(mut self) -> Result<(), ServeError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.sealer.abort();
        match (&mut self.server).await {
            Ok(result) => result?,
            Err(e) => return Err(std::io::Error::other(e).into()),
        }
        self.state.write().flush()?;
        Ok(())
    }

    pub async fn wait(mut self) -> Result<(), ServeError> {
        match (&mut self.server).await {
            Ok(result) => result?,
            Err(e) => return Err(std::io::Error::other(e).into()),
        }
        self.sealer.abort();
        self.state.write().flush()?;
        Ok(())
    }
}

/// Opens the system (replaying any existing ledger), binds and starts
/// serving in the background.
pub async fn start(config: &ServiceConfig) -> Result<Running, ServeError> {
    let system = VotingSystem::open(config)?;
    start_with(system, &config.listen_address, config.seal_interval_ms).await
}

pub async fn start_with(system: VotingSystem, listen_address: &str, seal_interval_ms: u64) -> Result<Running, ServeError> {
    let listener = TcpListener::bind(listen_address)
        .await
        .map_err(|source| ServeError::Bind {
            address: listen_address.to_string(),
            source,
        })?;
    let addr = listener.local_addr()?;
    let state = AppState::new(system);

    let tick = Duration::from_millis((seal_interval_ms / 4).clamp(10, 250));
    let sealer_state = state.clone();
    let sealer = tokio::spawn(async move {
        let mut interval = tokio::time::interval(tick);
        loop {
            interval.tick().await;
            if let Err(e) = sealer_state.write().seal_if_due() {
                tracing::error!("sealing block failed: {e}");
            }
        }
    });

    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(state.clone());
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    tracing::info!(%addr, "ballotledger listening");
    Ok(Running {
        addr,
        state,
        stop: Some(stop),
        server,
        sealer,
    })
}

/// Runs until interrupted.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    let running = start(config).await?;
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    running.shutdown().await
}
