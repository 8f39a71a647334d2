//! `ballotledger` command-line client.

mod keystore;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ballotledger_bench::{run_sweep, BenchConfig, BenchError};
use ballotledger_core::config::ConfigError;
use ballotledger_core::identity::{PermanentId, Prover};
use ballotledger_core::ledger::verify_file;
use ballotledger_core::poll::PollId;
use ballotledger_core::{Digest, ServiceConfig};
use ballotledger_service::wire::{CreatePollRequest, RespondRequest};
use ballotledger_service::{start, Client, ClientError, ServeError, Signer};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use keystore::{KeyEntry, Keystore, KeystoreError};

#[derive(Parser)]
#[command(name = "ballotledger", version, about = "Ledger-backed voting with zero-knowledge identities")]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "BALLOTLEDGER_URL", default_value = "http://127.0.0.1:7300")]
    url: String,
    /// Keystore file holding local identities.
    #[arg(long, global = true, env = "BALLOTLEDGER_KEYSTORE", default_value = "ballotledger.keys")]
    keystore: PathBuf,
    /// Encrypts the keystore when set.
    #[arg(long, global = true, env = "BALLOTLEDGER_PASSPHRASE", hide_env_values = true)]
    passphrase: Option<String>,
    /// Local identity name used to sign requests.
    #[arg(long = "as", global = true, env = "BALLOTLEDGER_IDENTITY", default_value = "default")]
    identity: String,
    /// Structured JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identity registration and proofs.
    #[command(subcommand)]
    Id(IdCommand),
    /// Poll lifecycle.
    #[command(subcommand)]
    Poll(PollCommand),
    /// Ledger file checks.
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Content-addressed documents.
    #[command(subcommand)]
    Docstore(DocCommand),
    /// Metered operation costs.
    #[command(subcommand)]
    Costs(CostsCommand),
    /// Load sweeps against a running service.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Runs the HTTP service until interrupted.
    Serve {
        #[arg(long, env = "BALLOTLEDGER_CONFIG")]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IdCommand {
    /// Generates a key, sends a registration request and obtains an
    /// unverified id.
    Register {
        /// Local name; defaults to --as.
        name: Option<String>,
        #[arg(long)]
        user_info: Option<String>,
        #[arg(long, default_value = "cli")]
        device: String,
        /// Also run the interactive proof.
        #[arg(long)]
        prove: bool,
    },
    /// Runs the interactive proof for a registered key and stores the
    /// permanent id.
    Prove {
        name: Option<String>,
        /// Pause before each protocol step.
        #[arg(long)]
        manual: bool,
    },
    /// Lists local identities.
    List,
}

#[derive(Subcommand)]
enum PollCommand {
    Create {
        name: String,
        #[arg(required = true, num_args = 2..)]
        options: Vec<String>,
        #[arg(long, default_value = "")]
        description: String,
    },
    /// Registers voters by permanent id or local name.
    Voters {
        id: PollId,
        #[arg(required = true)]
        voters: Vec<String>,
    },
    SetOpen { id: PollId },
    Open { id: PollId },
    Vote { id: PollId, index: usize },
    Close { id: PollId },
    Results { id: PollId },
    Show { id: PollId },
}

#[derive(Subcommand)]
enum LedgerCommand {
    /// Verifies a ledger file offline.
    Verify { path: PathBuf },
}

#[derive(Subcommand)]
enum DocCommand {
    Put { file: PathBuf },
    Get {
        hash: Digest,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CostsCommand {
    /// Scope is an identity, numeric poll id, or raw scope name.
    Show { scope: String },
}

#[derive(Subcommand)]
enum BenchCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Keystore(#[from] KeystoreError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("ledger verification failed: {0}")]
    LedgerInvalid(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn code(&self) -> &str {
        match self {
            CliError::Client(e) => e.code(),
            CliError::Keystore(e) => e.code(),
            CliError::Bench(e) => e.code(),
            CliError::Serve(e) => e.code(),
            CliError::Config(_) => "InvalidConfig",
            CliError::Usage(_) => "UsageError",
            CliError::LedgerInvalid(_) => "LedgerCorrupt",
            CliError::Io { .. } => "IoError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

type CliResult<T> = Result<T, CliError>;

struct Ctx {
    cli_url: String,
    keystore: PathBuf,
    passphrase: Option<String>,
    identity: String,
    json: bool,
}

impl Ctx {
    fn client(&self) -> CliResult<Client> {
        Ok(Client::new(&self.cli_url)?)
    }

    fn load_keys(&self) -> CliResult<Keystore> {
        Ok(Keystore::load(&self.keystore, self.passphrase.as_deref())?)
    }

    fn save_keys(&self, keys: &Keystore) -> CliResult<()> {
        Ok(keys.save(&self.keystore, self.passphrase.as_deref())?)
    }

    /// Prints `value` as JSON, or `text` otherwise.
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string(value).expect("serializable output"));
        } else {
            println!("{}", text());
        }
    }

    async fn signer(&self, client: &Client) -> CliResult<Signer> {
        let keys = self.load_keys()?;
        let entry = keys.get(&self.identity)?;
        let (params, view) = client.group_params().await?;
        let prover = entry.prover(&params)?;
        let id = entry.permanent_id.clone().ok_or_else(|| {
            CliError::Usage(format!("identity {:?} is not verified; run `id prove`", entry.name))
        })?;
        Ok(Signer::new(id, prover, params, view.rounds))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        cli_url: cli.url,
        keystore: cli.keystore,
        passphrase: cli.passphrase.filter(|p| !p.is_empty()),
        identity: cli.identity,
        json: cli.json,
    };
    let runtime = match &cli.command {
        Command::Serve { .. } => tokio::runtime::Builder::new_multi_thread().enable_all().build(),
        _ => tokio::runtime::Builder::new_current_thread().enable_all().build(),
    }
    .expect("tokio runtime");
    match runtime.block_on(dispatch(&ctx, cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if ctx.json {
                eprintln!("{}", json!({ "error": e.code(), "message": e.to_string() }));
            } else {
                eprintln!("error: {}: {e}", e.code());
            }
            ExitCode::from(e.exit_code())
        }
    }
}

async fn dispatch(ctx: &Ctx, command: Command) -> CliResult<()> {
    match command {
        Command::Id(cmd) => id(ctx, cmd).await,
        Command::Poll(cmd) => poll(ctx, cmd).await,
        Command::Ledger(LedgerCommand::Verify { path }) => ledger_verify(ctx, &path),
        Command::Docstore(cmd) => docstore(ctx, cmd).await,
        Command::Costs(CostsCommand::Show { scope }) => {
            let report = ctx.client()?.costs(&scope).await?;
            ctx.emit(&report, || {
                let mut lines: Vec<String> = report
                    .entries
                    .iter()
                    .map(|e| {
                        let tx = e.tx_id.map_or("-".to_string(), |t| t.to_string());
                        format!("{:<16} {:>10}  tx {tx}", e.operation, e.gas)
                    })
                    .collect();
                lines.push(format!("{:<16} {:>10}", "total", report.total));
                lines.join("\n")
            });
            Ok(())
        }
        Command::Bench(BenchCommand::Run { config, out }) => bench(ctx, &config, &out).await,
        Command::Serve { config } => serve(config.as_deref()).await,
    }
}

async fn id(ctx: &Ctx, cmd: IdCommand) -> CliResult<()> {
    match cmd {
        IdCommand::Register {
            name,
            user_info,
            device,
            prove: then_prove,
        } => {
            let name = name.unwrap_or_else(|| ctx.identity.clone());
            let client = ctx.client()?;
            let mut keys = ctx.load_keys()?;
            if keys.get(&name).is_ok() {
                return Err(KeystoreError::NameTaken(name).into());
            }
            let (params, _) = client.group_params().await?;
            let prover = Prover::generate(&params, &mut rand::rng());
            let mut entry = KeyEntry::new(&name, &params, &prover);
            let request = client
                .send_request(user_info.as_deref().unwrap_or(&name), &device)
                .await?;
            entry.request_id = Some(request.request_id);
            let unv = client.issue_unv_id(request.request_id, prover.public_key()).await?;
            entry.unv_id = Some(unv.unv_id.clone());
            keys.insert(entry)?;
            ctx.save_keys(&keys)?;
            if !then_prove || !ctx.json {
                ctx.emit(
                    &json!({
                        "name": name,
                        "requestId": request.request_id.to_string(),
                        "tmpKey": request.tmp_key,
                        "unvId": unv.unv_id,
                        "publicKey": prover.public_key(),
                    }),
                    || format!("request {}\nunverified id {}", request.request_id, unv.unv_id),
                );
            }
            if then_prove {
                prove(ctx, &client, &name, false).await?;
            }
            Ok(())
        }
        IdCommand::Prove { name, manual } => {
            let name = name.unwrap_or_else(|| ctx.identity.clone());
            prove(ctx, &ctx.client()?, &name, manual).await
        }
        IdCommand::List => {
            let keys = ctx.load_keys()?;
            let rows: Vec<Value> = keys
                .entries()
                .map(|e| {
                    json!({
                        "name": e.name,
                        "group": e.group,
                        "publicKey": e.public_key,
                        "unvId": e.unv_id,
                        "permanentId": e.permanent_id,
                    })
                })
                .collect();
            ctx.emit(&rows, || {
                keys.entries()
                    .map(|e| {
                        let status = match (&e.permanent_id, &e.unv_id) {
                            (Some(p), _) => format!("verified {p}"),
                            (None, Some(u)) => format!("unverified {u}"),
                            (None, None) => "unregistered".to_string(),
                        };
                        format!("{:<16} {:<10} {status}", e.name, e.group)
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            });
            Ok(())
        }
    }
}

fn pause(manual: bool, step: &str) {
    if manual {
        eprint!("next: {step} [enter] ");
        let _ = std::io::stderr().flush();
        let mut line = String::new();
        let _ = std::io::stdin().lock().read_line(&mut line);
    }
}

async fn prove(ctx: &Ctx, client: &Client, name: &str, manual: bool) -> CliResult<()> {
    let mut keys = ctx.load_keys()?;
    let entry = keys.get(name)?.clone();
    let (params, _) = client.group_params().await?;
    let mut prover = entry.prover(&params)?;
    let unv = entry
        .unv_id
        .clone()
        .ok_or_else(|| CliError::Usage(format!("identity {name:?} has no unverified id; run `id register`")))?;
    if let Some(id) = &entry.permanent_id {
        return Err(CliError::Usage(format!("identity {name:?} is already verified as {id}")));
    }

    let text = !ctx.json;
    pause(manual, "open proof session");
    let session = client.begin_session(&unv).await?;
    if text {
        println!("session {} ({} rounds)", session.session_id, session.rounds);
    }
    pause(manual, "send commitments");
    let commitments = prover.commit(&params, session.rounds, &mut rand::rng());
    client.commit(&session.session_id, commitments.clone()).await?;
    if text {
        println!("commitments {}", join(&commitments));
    }
    pause(manual, "request challenges");
    let challenges = client.challenge(&session.session_id).await?.challenges;
    if text {
        println!("challenges {}", join(&challenges));
    }
    pause(manual, "send answers");
    let answers = prover
        .respond(&params, &challenges)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    client
        .respond(&RespondRequest {
            session_id: session.session_id.clone(),
            challenges: challenges.clone(),
            answers: answers.clone(),
        })
        .await?;
    if text {
        println!("answers {}", join(&answers));
    }
    pause(manual, "verify");
    let outcome = client.verify(&session.session_id, None).await?;
    if let Some(id) = &outcome.permanent_id {
        keys.get_mut(name)?.permanent_id = Some(id.clone());
        ctx.save_keys(&keys)?;
    }
    ctx.emit(
        &json!({
            "name": name,
            "sessionId": session.session_id,
            "commitments": commitments,
            "challenges": challenges,
            "answers": answers.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "outcome": outcome,
        }),
        || match (&outcome.permanent_id, outcome.failed_round) {
            (Some(id), _) => format!("verdict accepted\npermanent id {id}"),
            (None, round) => format!("verdict rejected (round {})", round.map_or("-".into(), |r| r.to_string())),
        },
    );
    if outcome.permanent_id.is_none() {
        return Err(CliError::Client(ClientError::Api {
            status: 200,
            code: "ProofRejected".into(),
            message: "the service rejected the proof".into(),
        }));
    }
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Accepts a permanent id or the local name of a verified identity.
fn resolve_voter(keys: &Keystore, arg: &str) -> CliResult<PermanentId> {
    if let Ok(id) = arg.parse::<PermanentId>() {
        return Ok(id);
    }
    let entry = keys
        .get(arg)
        .map_err(|_| CliError::Usage(format!("{arg:?} is neither a permanent id nor a local identity")))?;
    entry
        .permanent_id
        .clone()
        .ok_or_else(|| CliError::Usage(format!("identity {arg:?} is not verified")))
}

async fn poll(ctx: &Ctx, cmd: PollCommand) -> CliResult<()> {
    let client = ctx.client()?;
    match cmd {
        PollCommand::Create {
            name,
            options,
            description,
        } => {
            let signer = ctx.signer(&client).await?;
            let body = CreatePollRequest {
                name,
                description,
                options,
            };
            let created = client.create_poll(&signer, &body).await?;
            ctx.emit(&created, || created.poll_id.to_string());
        }
        PollCommand::Voters { id, voters } => {
            let keys = ctx.load_keys()?;
            let ids = voters
                .iter()
                .map(|v| resolve_voter(&keys, v))
                .collect::<CliResult<Vec<_>>>()?;
            let signer = ctx.signer(&client).await?;
            let resp = client.register_voters(&signer, id, &ids).await?;
            ctx.emit(&resp, || format!("registered {}", resp.registered));
        }
        PollCommand::SetOpen { id } => {
            let signer = ctx.signer(&client).await?;
            let view = client.set_open(&signer, id).await?;
            ctx.emit(&view, || format!("poll {id}: open to all verified users"));
        }
        PollCommand::Open { id } => {
            let signer = ctx.signer(&client).await?;
            let view = client.open_poll(&signer, id).await?;
            ctx.emit(&view, || format!("poll {id}: open"));
        }
        PollCommand::Vote { id, index } => {
            let signer = ctx.signer(&client).await?;
            let resp = client.cast_vote(&signer, id, index).await?;
            ctx.emit(&resp, || match &resp.result {
                Some(r) => format!("recorded as tx {}\npoll closed, winner {} ({})", resp.tx_id, r.label, r.index),
                None => format!("recorded as tx {}", resp.tx_id),
            });
        }
        PollCommand::Close { id } => {
            let signer = ctx.signer(&client).await?;
            let winner = client.close_poll(&signer, id).await?;
            ctx.emit(&winner, || format!("closed, winner {} ({})", winner.label, winner.index));
        }
        PollCommand::Results { id } => {
            let resp = client.results(id).await?;
            ctx.emit(&resp.result, || match &resp.result {
                Some(r) => format!("{} ({})", r.label, r.index),
                None => "pending".to_string(),
            });
        }
        PollCommand::Show { id } => {
            let view = client.poll(id).await?;
            ctx.emit(&view, || {
                let mut lines = vec![
                    format!("poll {} {:?}: {}", view.poll_id, view.status, view.name),
                    format!("options {}", view.options.join(", ")),
                    format!("voted {}/{}", view.voted.len(), view.registered_voters.len()),
                ];
                if let Some(r) = &view.result {
                    lines.push(format!("winner {} ({})", r.label, r.index));
                }
                lines.join("\n")
            });
        }
    }
    Ok(())
}

fn ledger_verify(ctx: &Ctx, path: &Path) -> CliResult<()> {
    let report = verify_file(path).map_err(io_err(path.display().to_string()))?;
    ctx.emit(&report, || {
        if report.ok {
            "ok".to_string()
        } else {
            format!(
                "invalid at height {}: {}",
                report.first_bad_height.map_or("-".into(), |h| h.to_string()),
                report.detail.as_deref().unwrap_or("")
            )
        }
    });
    if report.ok {
        Ok(())
    } else {
        Err(CliError::LedgerInvalid(report.detail.unwrap_or_default()))
    }
}

async fn docstore(ctx: &Ctx, cmd: DocCommand) -> CliResult<()> {
    let client = ctx.client()?;
    match cmd {
        DocCommand::Put { file } => {
            let bytes = std::fs::read(&file).map_err(io_err(file.display().to_string()))?;
            let hash = client.put_document(bytes).await?;
            ctx.emit(&json!({ "hash": hash }), || hash.to_string());
        }
        DocCommand::Get { hash, out } => {
            let bytes = client.get_document(&hash).await?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &bytes).map_err(io_err(path.display().to_string()))?;
                    ctx.emit(&json!({ "hash": hash, "size": bytes.len() }), || {
                        format!("wrote {} bytes to {}", bytes.len(), path.display())
                    });
                }
                None => std::io::stdout()
                    .write_all(&bytes)
                    .map_err(io_err("stdout"))?,
            }
        }
    }
    Ok(())
}

async fn bench(ctx: &Ctx, config: &Path, out: &Path) -> CliResult<()> {
    let config = BenchConfig::load(config)?;
    let report = run_sweep(&config, |cell| {
        eprintln!(
            "rate {:>5} users {:>4}: {:>8.2} tps, {:.4} s avg, {} errors",
            cell.send_rate, cell.users, cell.throughput, cell.avg_latency_secs, cell.errors
        );
    })
    .await?;
    report.write_csv(out)?;
    ctx.emit(&json!({ "cells": report.cells.len(), "out": out }), || {
        format!("{} cells written to {}", report.cells.len(), out.display())
    });
    Ok(())
}

async fn serve(config: Option<&Path>) -> CliResult<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let config = match config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    let running = start(&config).await?;
    println!("listening on http://{}", running.addr);
    let _ = std::io::stdout().flush();
    shutdown_signal().await;
    running.shutdown().await?;
    Ok(())
}

#[cfg(unix)]
async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = signal(SignalKind::terminate()).expect("signal handler");
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
}

#[cfg(not(unix))]
async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

