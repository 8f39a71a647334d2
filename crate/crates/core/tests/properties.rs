use ballotledger_core::identity::{
    prove_non_interactive, verify_non_interactive, GroupParams, PermanentId, Prover,
};
use ballotledger_core::ledger::{verify_bytes, Ledger, NewTransaction, TxKind};
use ballotledger_core::poll::PollId;
use ballotledger_core::system::VotingSystem;
use ballotledger_core::ServiceConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
enum Op {
    Create(usize),
    Voter(u64, usize, usize),
    SetOpen(u64, usize),
    Open(u64, usize),
    Vote(u64, usize, usize),
    Close(u64, usize),
    Doc(u8),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..3).prop_map(Op::Create),
        (0u64..3, 0usize..3, 0usize..3).prop_map(|(p, c, v)| Op::Voter(p, c, v)),
        (0u64..3, 0usize..3).prop_map(|(p, c)| Op::SetOpen(p, c)),
        (0u64..3, 0usize..3).prop_map(|(p, c)| Op::Open(p, c)),
        (0u64..3, 0usize..3, 0usize..3).prop_map(|(p, v, c)| Op::Vote(p, v, c)),
        (0u64..3, 0usize..3).prop_map(|(p, c)| Op::Close(p, c)),
        any::<u8>().prop_map(Op::Doc),
    ]
}

fn register(sys: &mut VotingSystem, name: &str, rng: &mut ChaCha20Rng) -> PermanentId {
    let params = sys.params().clone();
    let mut prover = Prover::generate(&params, rng);
    let (req, _) = sys.send_request(name.as_bytes(), b"d").unwrap();
    let unv = sys.issue_unverified_id(req, prover.public_key()).unwrap();
    let session = sys.begin_proof(&unv).unwrap();
    let rounds = sys.proof_config().rounds;
    sys.submit_commitments(&session, prover.commit(&params, rounds, rng)).unwrap();
    let c = sys.challenge(&session).unwrap();
    let s = prover.respond(&params, &c).unwrap();
    sys.verify(&session, Some(s)).unwrap().permanent_id.unwrap()
}

fn apply(sys: &mut VotingSystem, ids: &[PermanentId], op: &Op) -> bool {
    let opts = ["a".to_string(), "b".to_string()];
    match op {
        Op::Create(c) => sys.create_poll(&ids[*c], "p", "", &opts).is_ok(),
        Op::Voter(p, c, v) => sys.register_voters(PollId(*p), &ids[*c], &[ids[*v].clone()]).is_ok(),
        Op::SetOpen(p, c) => sys.set_open(PollId(*p), &ids[*c]).is_ok(),
        Op::Open(p, c) => sys.open_poll(PollId(*p), &ids[*c]).is_ok(),
        Op::Vote(p, v, c) => sys.cast_vote(PollId(*p), &ids[*v], *c).is_ok(),
        Op::Close(p, c) => sys.close_poll(PollId(*p), &ids[*c]).is_ok(),
        Op::Doc(b) => sys.store_document(&[*b, b'x']).is_ok(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reopening_replays_to_identical_state(ops in proptest::collection::vec(op(), 0..40), seal_every in 1usize..10) {
        let dir = tempfile::tempdir().unwrap();
        let config = ServiceConfig {
            group: "toy".into(),
            seal_every,
            data_dir: Some(dir.path().to_path_buf()),
            ..ServiceConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(ops.len() as u64);
        let mut sys = VotingSystem::open(&config).unwrap();
        let ids: Vec<_> = (0..3).map(|i| register(&mut sys, &format!("u{i}"), &mut rng)).collect();
        for op in &ops {
            let before = sys.ledger().len();
            let ok = apply(&mut sys, &ids, op);
            if !ok {
                prop_assert_eq!(sys.ledger().len(), before, "rejected {:?} reached the ledger", op);
            }
        }
        let snapshot = sys.state_snapshot();
        drop(sys);
        let again = VotingSystem::open(&config).unwrap();
        prop_assert_eq!(again.state_snapshot(), snapshot);
        prop_assert!(again.verify_ledger().unwrap().ok);
    }

    #[test]
    fn any_ledger_verifies_and_any_byte_change_is_caught(
        payloads in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 1..40), 1..30),
        seal_mask in any::<u32>(),
        at in any::<prop::sample::Index>(),
        xor in 1u8..=255,
    ) {
        let mut ledger = Ledger::new();
        for (i, payload) in payloads.into_iter().enumerate() {
            ledger.append(NewTransaction {
                kind: TxKind::StoreDocument,
                payload,
                timestamp_ms: i as u64,
                actor: "a".into(),
            }).unwrap();
            if seal_mask & (1 << (i % 32)) != 0 {
                ledger.seal_block().unwrap();
            }
        }
        if ledger.pending_len() > 0 {
            ledger.seal_block().unwrap();
        }
        prop_assert!(ledger.verify_chain().ok);
        let mut bytes = ledger.to_file_bytes();
        prop_assert!(verify_bytes(&bytes).ok);
        let i = at.index(bytes.len());
        bytes[i] ^= xor;
        prop_assert!(!verify_bytes(&bytes).ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn non_interactive_proofs_bind_their_context(seed in any::<u64>(), ctx in "[a-z]{1,12}") {
        let params = GroupParams::production();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let prover = Prover::generate(&params, &mut rng);
        let proof = prove_non_interactive(&params, &prover, ctx.as_bytes(), 2, &mut rng);
        prop_assert!(verify_non_interactive(&params, prover.public_key(), ctx.as_bytes(), &proof));
        let other = format!("{ctx}!");
        prop_assert!(!verify_non_interactive(&params, prover.public_key(), other.as_bytes(), &proof));
    }
}
