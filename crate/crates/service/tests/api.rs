use ballotledger_core::identity::{GroupParams, Prover, Verdict};
use ballotledger_core::poll::{PollId, PollStatus};
use ballotledger_core::{Digest, ServiceConfig};
use ballotledger_service::wire::{CreatePollRequest, ID_HEADER, PROOF_HEADER};
use ballotledger_service::{start, Client, ClientError, Running, Signer};

fn toy_config(data_dir: Option<&std::path::Path>) -> ServiceConfig {
    ServiceConfig {
        listen_address: "127.0.0.1:0".into(),
        group: "toy".into(),
        data_dir: data_dir.map(|d| d.to_path_buf()),
        ..ServiceConfig::default()
    }
}

async fn boot(data_dir: Option<&std::path::Path>) -> (Running, Client) {
    let running = start(&toy_config(data_dir)).await.unwrap();
    let client = Client::new(&format!("http://{}", running.addr)).unwrap();
    (running, client)
}

async fn identity(client: &Client, name: &str) -> Signer {
    let (params, view) = client.group_params().await.unwrap();
    let mut prover = Prover::generate(&params, &mut rand::rng());
    let t = client
        .register(name, "device", &mut prover, &params, |_| {})
        .await
        .unwrap();
    assert_eq!(t.outcome.verdict, Verdict::Accepted);
    Signer::new(t.outcome.permanent_id.unwrap(), prover, params, view.rounds)
}

fn api_code<T: std::fmt::Debug>(r: Result<T, ClientError>) -> String {
    r.unwrap_err().code().to_string()
}

#[tokio::test]
async fn health_and_params() {
    let (running, client) = boot(None).await;
    assert_eq!(client.health().await.unwrap().status, "ok");
    let (params, view) = client.group_params().await.unwrap();
    assert_eq!(params, GroupParams::toy());
    assert_eq!((view.p.as_str(), view.q.as_str(), view.g.as_str()), ("17", "b", "2"));
    assert_eq!(view.rounds, 2);
    running.shutdown().await.unwrap();
}

#[tokio::test]
async fn registration_flow_and_errors() {
    let (running, client) = boot(None).await;
    let (params, _) = client.group_params().await.unwrap();
    let mut prover = Prover::generate(&params, &mut rand::rng());

    let req = client.send_request("alice", "phone").await.unwrap();
    assert_eq!(req.tmp_key.len(), 64);
    assert_eq!(api_code(client.send_request("alice", "phone").await), "DuplicateRequest");
    assert_eq!(api_code(client.send_request("", "phone").await), "EmptyUserInfo");
    let one = "1".parse().unwrap();
    assert_eq!(api_code(client.issue_unv_id(req.request_id, &one).await), "BadGroupElement");

    let unv = client.issue_unv_id(req.request_id, prover.public_key()).await.unwrap().unv_id;
    let session = client.begin_session(&unv).await.unwrap();
    assert!(session.sig_zkp);
    assert_eq!(api_code(client.begin_session(&unv).await), "SessionExists");
    assert_eq!(api_code(client.challenge(&session.session_id).await), "NoCommitment");

    let d = prover.commit(&params, 2, &mut rand::rng());
    client.commit(&session.session_id, d).await.unwrap();
    let c = client.challenge(&session.session_id).await.unwrap().challenges;
    assert_eq!(client.challenge(&session.session_id).await.unwrap().challenges, c);
    let s = prover.respond(&params, &c).unwrap();
    let out = client.verify(&session.session_id, Some(s)).await.unwrap();
    assert_eq!(out.verdict, Verdict::Accepted);
    let report = client.get_document(&out.report_hash.unwrap()).await.unwrap();
    assert_eq!(Digest::of(&report), out.report_hash.unwrap());
    assert_eq!(api_code(client.verify(&session.session_id, None).await), "SessionNotReady");

    let costs = client.costs(unv.as_str()).await.unwrap();
    let ops: Vec<&str> = costs.entries.iter().map(|e| e.operation.as_str()).collect();
    assert_eq!(ops, ["sendReq", "genKey", "genChng", "verifyProof", "regUser"]);
    assert_eq!(costs.total, 477012);
    running.shutdown().await.unwrap();
}

#[tokio::test]
async fn poll_lifecycle_over_http() {
    let (running, client) = boot(None).await;
    let creator = identity(&client, "creator").await;
    let voters = [
        identity(&client, "v1").await,
        identity(&client, "v2").await,
        identity(&client, "v3").await,
    ];
    let body = CreatePollRequest {
        name: "lunch".into(),
        description: "where".into(),
        options: vec!["A".into(), "B".into(), "C".into()],
    };
    let poll = client.create_poll(&creator, &body).await.unwrap().poll_id;
    let ids: Vec<_> = voters.iter().map(|v| v.id.clone()).collect();
    assert_eq!(client.register_voters(&creator, poll, &ids).await.unwrap().registered, 3);
    assert_eq!(api_code(client.open_poll(&voters[0], poll).await), "NotCreator");
    client.open_poll(&creator, poll).await.unwrap();
    assert!(client.results(poll).await.unwrap().result.is_none());

    client.cast_vote(&voters[0], poll, 0).await.unwrap();
    assert_eq!(api_code(client.cast_vote(&voters[0], poll, 1).await), "AlreadyVoted");
    client.cast_vote(&voters[1], poll, 1).await.unwrap();
    let last = client.cast_vote(&voters[2], poll, 1).await.unwrap();
    assert_eq!(last.result.unwrap().index, 1);
    let results = client.results(poll).await.unwrap();
    assert_eq!(results.status, PollStatus::Closed);
    assert_eq!(results.result.unwrap().label, "B");
    let view = client.poll(poll).await.unwrap();
    assert_eq!(view.counts, Some(vec![1, 2, 0]));
    assert_eq!(view.voted.len(), 3);

    let tx = client.transaction(last.tx_id).await.unwrap();
    assert_eq!(tx.kind, "CastVote");
    assert_eq!(tx.actor, voters[2].id.as_str());
    assert!(client.ledger_verify().await.unwrap().ok);
    assert_eq!(api_code(client.results(PollId(99)).await), "NotFound");
    running.shutdown().await.unwrap();
}

#[tokio::test]
async fn requests_must_carry_a_matching_proof() {
    let (running, client) = boot(None).await;
    let creator = identity(&client, "creator").await;
    let url = format!("{}/polls", client.base_url());
    let body = br#"{"name":"n","options":["A","B"]}"#.to_vec();
    let http = reqwest::Client::new();
    let post = |id: &str, proof: String, body: Vec<u8>| {
        http.post(&url)
            .header(ID_HEADER, id)
            .header(PROOF_HEADER, proof)
            .header("content-type", "application/json")
            .body(body)
            .send()
    };

    let other_body = proofless_body();
    let proof_for_other = creator.proof("POST", "/polls", &other_body);
    let resp = post(creator.id.as_str(), proof_for_other, body.clone()).await.unwrap();
    assert_eq!(resp.status(), 401);
    assert!(resp.text().await.unwrap().contains("Unauthenticated"));

    let stranger = "0123456789abcdef0123456789abcdef";
    let resp = post(stranger, creator.proof("POST", "/polls", &body), body.clone()).await.unwrap();
    assert_eq!(resp.status(), 401);
    assert!(resp.text().await.unwrap().contains("UnknownIdentity"));

    let resp = http.post(&url).body(body.clone()).send().await.unwrap();
    assert_eq!(resp.status(), 401);

    let before = client.state().await.unwrap().transactions;
    let resp = post(creator.id.as_str(), creator.proof("POST", "/polls", &body), body).await.unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(client.state().await.unwrap().transactions, before + 1);
    running.shutdown().await.unwrap();
}

fn proofless_body() -> Vec<u8> {
    br#"{"name":"m","options":["A","B"]}"#.to_vec()
}

#[tokio::test]
async fn restart_replays_ledger_and_tampering_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let (running, client) = boot(Some(dir.path())).await;
    let creator = identity(&client, "creator").await;
    let body = CreatePollRequest {
        name: "p".into(),
        description: String::new(),
        options: vec!["x".into(), "y".into()],
    };
    let poll = client.create_poll(&creator, &body).await.unwrap().poll_id;
    client.set_open(&creator, poll).await.unwrap();
    client.open_poll(&creator, poll).await.unwrap();
    client.cast_vote(&creator, poll, 1).await.unwrap();
    let doc = client.put_document(b"minutes".to_vec()).await.unwrap();
    let before = client.state().await.unwrap();
    let costs_before = client.costs(&poll.to_string()).await.unwrap();
    running.shutdown().await.unwrap();

    let (running, client) = boot(Some(dir.path())).await;
    assert_eq!(client.state().await.unwrap().digest, before.digest);
    assert_eq!(client.get_document(&doc).await.unwrap(), b"minutes");
    assert_eq!(client.costs(&poll.to_string()).await.unwrap(), costs_before);
    assert!(client.ledger_verify().await.unwrap().ok);
    running.shutdown().await.unwrap();

    let path = dir.path().join("ledger").join("ledger.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x04;
    std::fs::write(&path, bytes).unwrap();
    let err = start(&toy_config(Some(dir.path()))).await.unwrap_err();
    assert_eq!(err.code(), "LedgerCorrupt");
}
