use std::sync::Arc;
use std::time::Duration;

use ballotledger_core::identity::Prover;
use ballotledger_core::poll::PollId;
use ballotledger_service::wire::CreatePollRequest;
use ballotledger_service::{Client, ClientError, Signer};
use tokio::sync::Semaphore;
use tokio::time::Instant;

use crate::{BenchConfig, BenchError, BenchReport, CellResult, Operation};

/// Identities shared by every cell of a sweep.
pub struct Fixture {
    pub client: Client,
    pub creator: Signer,
    pub voters: Vec<Signer>,
}

fn setup_error(what: &str, e: ClientError) -> BenchError {
    match e {
        ClientError::Unreachable { .. } => BenchError::ServiceUnreachable(e.to_string()),
        other => BenchError::SetupFailed(format!("{what}: {other}")),
    }
}

async fn register(client: &Client, name: &str) -> Result<Signer, BenchError> {
    let (params, view) = client.group_params().await.map_err(|e| setup_error("params", e))?;
    let mut prover = Prover::generate(&params, &mut rand::rng());
    let t = client
        .register(name, "bench", &mut prover, &params, |_| {})
        .await
        .map_err(|e| setup_error("registration", e))?;
    let id = t
        .outcome
        .permanent_id
        .ok_or_else(|| BenchError::SetupFailed(format!("registration of {name} was rejected")))?;
    Ok(Signer::new(id, prover, params, view.rounds))
}

impl Fixture {
    /// Registers a poll creator and `pool` voters. Names carry a random tag
    /// so repeated sweeps against one service do not collide.
    pub async fn provision(client: Client, pool: usize) -> Result<Self, BenchError> {
        client.health().await.map_err(|e| setup_error("health", e))?;
        let tag: u64 = rand::random();
        let creator = register(&client, &format!("bench-{tag:016x}-creator")).await?;
        let mut voters = Vec::with_capacity(pool);
        for i in 0..pool {
            voters.push(register(&client, &format!("bench-{tag:016x}-voter-{i}")).await?);
        }
        Ok(Fixture { client, creator, voters })
    }

    /// Creates `count` polls. For writes, each is opened with the whole
    /// voter pool registered.
    async fn polls(&self, count: u64, operation: Operation) -> Result<Vec<PollId>, BenchError> {
        let ids: Vec<_> = self.voters.iter().map(|v| v.id.clone()).collect();
        let mut polls = Vec::with_capacity(count as usize);
        for i in 0..count {
            let body = CreatePollRequest {
                name: format!("bench-{i}"),
                description: String::new(),
                options: vec!["yes".into(), "no".into()],
            };
            let c = &self.client;
            let poll = c
                .create_poll(&self.creator, &body)
                .await
                .map_err(|e| setup_error("createPoll", e))?
                .poll_id;
            if operation == Operation::Write {
                c.register_voters(&self.creator, poll, &ids)
                    .await
                    .map_err(|e| setup_error("registerVoters", e))?;
                c.set_open(&self.creator, poll).await.map_err(|e| setup_error("setOpen", e))?;
                c.open_poll(&self.creator, poll).await.map_err(|e| setup_error("openPoll", e))?;
            }
            polls.push(poll);
        }
        Ok(polls)
    }
}

/// Voters needed so no voter votes twice in one poll of any cell.
pub fn pool_size(config: &BenchConfig) -> usize {
    if config.operation == Operation::Read {
        return 0;
    }
    config
        .cells()
        .into_iter()
        .map(|(rate, users)| requests_in(rate, config.duration_secs).div_ceil(users))
        .max()
        .unwrap_or(0) as usize
}

fn requests_in(rate: u64, duration_secs: f64) -> u64 {
    (rate as f64 * duration_secs).round() as u64
}

/// Runs one cell against fresh polls.
pub async fn run_cell(
    fixture: &Arc<Fixture>,
    operation: Operation,
    rate: u64,
    users: u64,
    duration_secs: f64,
) -> Result<CellResult, BenchError> {
    let polls = Arc::new(fixture.polls(users, operation).await?);
    let n = requests_in(rate, duration_secs);
    let limit = Arc::new(Semaphore::new(users as usize));
    let start = Instant::now() + Duration::from_millis(20);
    let mut tasks = Vec::with_capacity(n as usize);
    for i in 0..n {
        let scheduled = start + Duration::from_secs_f64(i as f64 / rate as f64);
        let fixture = fixture.clone();
        let polls = polls.clone();
        let limit = limit.clone();
        tasks.push(tokio::spawn(async move {
            tokio::time::sleep_until(scheduled).await;
            let _permit = limit.acquire().await.expect("semaphore open");
            let poll = polls[(i % users) as usize];
            let ok = match operation {
                Operation::Read => fixture.client.results(poll).await.is_ok(),
                Operation::Write => {
                    let voter = &fixture.voters[(i / users) as usize];
                    fixture.client.cast_vote(voter, poll, (i % 2) as usize).await.is_ok()
                }
            };
            let done = Instant::now();
            (ok, done.duration_since(scheduled), done)
        }));
    }
    let mut successes = 0u64;
    let mut errors = 0u64;
    let mut latency = Duration::ZERO;
    let mut last = start;
    for task in tasks {
        let (ok, took, done) = task.await.map_err(|e| BenchError::Io(e.to_string()))?;
        if ok {
            successes += 1;
        } else {
            errors += 1;
        }
        latency += took;
        last = last.max(done);
    }
    let window = duration_secs.max(last.duration_since(start).as_secs_f64());
    Ok(CellResult {
        send_rate: rate,
        users,
        throughput: successes as f64 / window,
        avg_latency_secs: if n == 0 { 0.0 } else { latency.as_secs_f64() / n as f64 },
        errors,
    })
}

/// Provisions identities, then runs every cell in order, reporting each
/// as it finishes.
pub async fn run_sweep(
    config: &BenchConfig,
    mut progress: impl FnMut(&CellResult),
) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let client = Client::new(&config.target).map_err(|e| BenchError::Config(e.to_string()))?;
    let fixture = Arc::new(Fixture::provision(client, pool_size(config)).await?);
    let mut report = BenchReport::default();
    for (rate, users) in config.cells() {
        let cell = run_cell(&fixture, config.operation, rate, users, config.duration_secs).await?;
        progress(&cell);
        report.cells.push(cell);
    }
    Ok(report)
}

/// Lowest send rate at which `users` fails to keep up, i.e. throughput
/// falls below `ratio` of the offered rate.
pub fn saturation_rate(cells: &[CellResult], users: u64, ratio: f64) -> Option<u64> {
    cells
        .iter()
        .filter(|c| c.users == users && c.throughput < ratio * c.send_rate as f64)
        .map(|c| c.send_rate)
        .min()
}
