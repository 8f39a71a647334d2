//! Append-only, hash-chained transaction log.
//!
//! Every state-changing operation of the system becomes one [`Transaction`].
//! Transactions are buffered and then sealed into [`Block`]s; each block
//! commits to its transactions through `tx_root` and to its predecessor
//! through `prev_hash`, so changing any stored byte breaks verification at
//! the first affected block.
//!
//! ```text
//! tx_hash    = H(canonical(tx))
//! tx_root    = H(tx_hash_0 || tx_hash_1 || ...)
//! block_hash = H(height_be || prev_hash || tx_root)
//! ```

mod file;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{CodecError, Decoder, Encoder};
use crate::digest::Digest;

pub use file::{verify_bytes, verify_file, LedgerStore, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger is sealed for writes")]
    LedgerSealed,
    #[error("transaction payload is empty")]
    EmptyPayload,
    #[error("no buffered transactions to seal")]
    EmptyBuffer,
    #[error("transaction {0} not found")]
    NotFound(u64),
    #[error("ledger corrupt{}: {reason}", height.map_or(String::new(), |h| format!(" at height {h}")))]
    Corrupt { height: Option<u64>, reason: String },
    #[error("ledger i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::LedgerSealed => "LedgerSealed",
            LedgerError::EmptyPayload => "EmptyPayload",
            LedgerError::EmptyBuffer => "EmptyBuffer",
            LedgerError::NotFound(_) => "NotFound",
            LedgerError::Corrupt { .. } => "LedgerCorrupt",
            LedgerError::Io(_) => "IoError",
        }
    }
}

macro_rules! tx_kinds {
    ($($name:ident = $tag:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum TxKind { $($name = $tag),* }

        impl TxKind {
            pub const ALL: &'static [TxKind] = &[$(TxKind::$name),*];

            pub fn tag(self) -> u8 {
                self as u8
            }

            pub fn from_tag(tag: u8) -> Option<Self> {
                match tag {
                    $($tag => Some(TxKind::$name),)*
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self { $(TxKind::$name => stringify!($name)),* }
            }
        }
    };
}

tx_kinds! {
    RegisterRequest = 0,
    IssueUnvId = 1,
    ProofVerified = 2,
    IssueId = 3,
    CreatePoll = 4,
    RegisterVoters = 5,
    SetOpen = 6,
    OpenPoll = 7,
    CastVote = 8,
    ClosePoll = 9,
    PublishResult = 10,
    StoreDocument = 11,
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A transaction before the ledger has numbered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewTransaction {
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub timestamp_ms: u64,
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub tx_id: u64,
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub timestamp_ms: u64,
    pub actor: String,
    pub payload_hash: Digest,
}

impl Transaction {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64("id", self.tx_id)
            .u8("kind", self.kind.tag())
            .u64("ts", self.timestamp_ms)
            .str("actor", &self.actor)
            .bytes("payload", &self.payload)
            .bytes("ph", self.payload_hash.as_bytes());
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut dec = Decoder::new(bytes);
        let tx = Transaction {
            tx_id: dec.u64("id")?,
            kind: TxKind::from_tag(dec.u8("kind")?).ok_or(CodecError::BadValue("kind"))?,
            timestamp_ms: dec.u64("ts")?,
            actor: dec.str("actor")?.to_owned(),
            payload: dec.bytes("payload")?.to_vec(),
            payload_hash: Digest::from_bytes(dec.array("ph")?),
        };
        dec.finish()?;
        Ok(tx)
    }

    /// Digest of the full canonical encoding; this is what `tx_root` commits to.
    pub fn hash(&self) -> Digest {
        Digest::of(&self.encode())
    }

    pub fn payload_hash_ok(&self) -> bool {
        Digest::of(&self.payload) == self.payload_hash
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub tx_root: Digest,
    pub transactions: Vec<Transaction>,
    pub block_hash: Digest,
}

impl Block {
    pub fn compute_tx_root<'a>(tx_hashes: impl IntoIterator<Item = &'a Digest>) -> Digest {
        Digest::of_parts(tx_hashes.into_iter().map(|d| &d.as_bytes()[..]))
    }

    pub fn compute_block_hash(height: u64, prev_hash: &Digest, tx_root: &Digest) -> Digest {
        Digest::of_parts([
            &height.to_be_bytes()[..],
            prev_hash.as_bytes(),
            tx_root.as_bytes(),
        ])
    }

    fn seal(height: u64, prev_hash: Digest, transactions: Vec<Transaction>) -> Self {
        let hashes: Vec<Digest> = transactions.iter().map(Transaction::hash).collect();
        let tx_root = Self::compute_tx_root(&hashes);
        let block_hash = Self::compute_block_hash(height, &prev_hash, &tx_root);
        Block {
            height,
            prev_hash,
            tx_root,
            transactions,
            block_hash,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let txs: Vec<Vec<u8>> = self.transactions.iter().map(Transaction::encode).collect();
        let mut enc = Encoder::new();
        enc.u64("height", self.height)
            .bytes("prev", self.prev_hash.as_bytes())
            .bytes("root", self.tx_root.as_bytes())
            .list("txs", &txs)
            .bytes("hash", self.block_hash.as_bytes());
        enc.finish()
    }

    /// Decodes a block and returns the digest of each raw transaction record
    /// alongside it, so verification hashes exactly the stored bytes.
    pub fn decode(bytes: &[u8]) -> Result<(Self, Vec<Digest>), CodecError> {
        let mut dec = Decoder::new(bytes);
        let height = dec.u64("height")?;
        let prev_hash = Digest::from_bytes(dec.array("prev")?);
        let tx_root = Digest::from_bytes(dec.array("root")?);
        let raw = dec.list("txs")?;
        let block_hash = Digest::from_bytes(dec.array("hash")?);
        dec.finish()?;
        let mut transactions = Vec::with_capacity(raw.len());
        let mut hashes = Vec::with_capacity(raw.len());
        for record in raw {
            transactions.push(Transaction::decode(record)?);
            hashes.push(Digest::of(record));
        }
        Ok((
            Block {
                height,
                prev_hash,
                tx_root,
                transactions,
                block_hash,
            },
            hashes,
        ))
    }

    pub fn first_tx_id(&self) -> Option<u64> {
        self.transactions.first().map(|t| t.tx_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub ok: bool,
    pub first_bad_height: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerificationReport {
    pub fn valid() -> Self {
        VerificationReport {
            ok: true,
            first_bad_height: None,
            detail: None,
        }
    }

    pub fn failed(height: Option<u64>, detail: impl Into<String>) -> Self {
        VerificationReport {
            ok: false,
            first_bad_height: height,
            detail: Some(detail.into()),
        }
    }
}

/// Incremental chain checker shared by the in-memory and on-disk paths.
#[derive(Debug)]
pub(crate) struct ChainCursor {
    height: u64,
    prev_hash: Digest,
    next_tx_id: u64,
}

impl ChainCursor {
    pub(crate) fn new() -> Self {
        ChainCursor {
            height: 0,
            prev_hash: Digest::ZERO,
            next_tx_id: 0,
        }
    }

    pub(crate) fn height(&self) -> u64 {
        self.height
    }

    /// Checks `block` against the chain so far and advances on success.
    pub(crate) fn accept(&mut self, block: &Block, tx_hashes: &[Digest]) -> Result<(), String> {
        if block.height != self.height {
            return Err(format!("height {} out of sequence", block.height));
        }
        if block.prev_hash != self.prev_hash {
            return Err("prev_hash does not link to previous block".into());
        }
        if block.transactions.is_empty() {
            return Err("block holds no transactions".into());
        }
        let mut next = self.next_tx_id;
        for tx in &block.transactions {
            if tx.tx_id != next {
                return Err(format!("tx id {} out of sequence, expected {next}", tx.tx_id));
            }
            if !tx.payload_hash_ok() {
                return Err(format!("payload hash mismatch in tx {}", tx.tx_id));
            }
            next += 1;
        }
        if Block::compute_tx_root(tx_hashes) != block.tx_root {
            return Err("tx_root mismatch".into());
        }
        if Block::compute_block_hash(block.height, &block.prev_hash, &block.tx_root)
            != block.block_hash
        {
            return Err("block_hash mismatch".into());
        }
        self.height += 1;
        self.prev_hash = block.block_hash;
        self.next_tx_id = next;
        Ok(())
    }
}

/// Location of a transaction: sealed into a block, or still buffered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedTransaction {
    pub transaction: Transaction,
    pub height: Option<u64>,
}

/// The ledger proper. Single writer; callers serialize access.
#[derive(Debug, Default)]
pub struct Ledger {
    blocks: Vec<Block>,
    pending: Vec<Transaction>,
    pending_since_ms: Option<u64>,
    next_tx_id: u64,
    read_only: bool,
    store: Option<LedgerStore>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) the persisted ledger in `dir`. Sealed blocks are
    /// verified; acknowledged-but-unsealed transactions come back from the
    /// pending log into the open buffer.
    pub fn open(dir: &std::path::Path) -> Result<Self, LedgerError> {
        let (store, blocks, pending) = LedgerStore::open(dir)?;
        let next_tx_id = pending
            .last()
            .map(|t| t.tx_id + 1)
            .or_else(|| blocks.last().and_then(|b| b.transactions.last()).map(|t| t.tx_id + 1))
            .unwrap_or(0);
        let pending_since_ms = pending.first().map(|t| t.timestamp_ms);
        Ok(Ledger {
            blocks,
            pending,
            pending_since_ms,
            next_tx_id,
            read_only: false,
            store: Some(store),
        })
    }

    pub fn is_persistent(&self) -> bool {
        self.store.is_some()
    }

    pub fn store(&self) -> Option<&LedgerStore> {
        self.store.as_ref()
    }

    /// Closes or reopens the ledger for writes.
    pub fn set_read_only(&mut self, read_only: bool) {
        self.read_only = read_only;
    }

    pub fn append(&mut self, tx: NewTransaction) -> Result<u64, LedgerError> {
        if self.read_only {
            return Err(LedgerError::LedgerSealed);
        }
        if tx.payload.is_empty() {
            return Err(LedgerError::EmptyPayload);
        }
        let tx = Transaction {
            tx_id: self.next_tx_id,
            kind: tx.kind,
            payload_hash: Digest::of(&tx.payload),
            payload: tx.payload,
            timestamp_ms: tx.timestamp_ms,
            actor: tx.actor,
        };
        if let Some(store) = &mut self.store {
            store.append_pending(&tx)?;
        }
        self.pending_since_ms.get_or_insert(tx.timestamp_ms);
        self.next_tx_id += 1;
        let id = tx.tx_id;
        self.pending.push(tx);
        Ok(id)
    }

    pub fn seal_block(&mut self) -> Result<Digest, LedgerError> {
        if self.read_only {
            return Err(LedgerError::LedgerSealed);
        }
        if self.pending.is_empty() {
            return Err(LedgerError::EmptyBuffer);
        }
        let (height, prev) = match self.blocks.last() {
            Some(b) => (b.height + 1, b.block_hash),
            None => (0, Digest::ZERO),
        };
        let block = Block::seal(height, prev, std::mem::take(&mut self.pending));
        if let Some(store) = &mut self.store {
            if let Err(e) = store.write_block(&block) {
                self.pending = block.transactions;
                return Err(e);
            }
        }
        self.pending_since_ms = None;
        let hash = block.block_hash;
        self.blocks.push(block);
        Ok(hash)
    }

    pub fn verify_chain(&self) -> VerificationReport {
        let mut cursor = ChainCursor::new();
        for block in &self.blocks {
            let hashes: Vec<Digest> = block.transactions.iter().map(Transaction::hash).collect();
            if let Err(reason) = cursor.accept(block, &hashes) {
                return VerificationReport::failed(Some(block.height), reason);
            }
        }
        VerificationReport::valid()
    }

    /// Verifies the on-disk bytes when the ledger is persistent, otherwise
    /// the in-memory chain.
    pub fn verify_persisted(&self) -> Result<VerificationReport, LedgerError> {
        match &self.store {
            Some(store) => Ok(verify_file(store.ledger_path())?),
            None => Ok(self.verify_chain()),
        }
    }

    pub fn get_transaction(&self, tx_id: u64) -> Result<LocatedTransaction, LedgerError> {
        if let Some(first) = self.pending.first() {
            if tx_id >= first.tx_id {
                return self
                    .pending
                    .get((tx_id - first.tx_id) as usize)
                    .map(|t| LocatedTransaction {
                        transaction: t.clone(),
                        height: None,
                    })
                    .ok_or(LedgerError::NotFound(tx_id));
            }
        }
        let idx = self
            .blocks
            .partition_point(|b| b.first_tx_id().is_some_and(|first| first <= tx_id));
        let block = idx
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i))
            .ok_or(LedgerError::NotFound(tx_id))?;
        let offset = (tx_id - block.first_tx_id().unwrap_or(0)) as usize;
        block
            .transactions
            .get(offset)
            .map(|t| LocatedTransaction {
                transaction: t.clone(),
                height: Some(block.height),
            })
            .ok_or(LedgerError::NotFound(tx_id))
    }

    /// All transactions in append order, sealed first then buffered.
    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks
            .iter()
            .flat_map(|b| b.transactions.iter())
            .chain(self.pending.iter())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Timestamp of the oldest buffered transaction, if any.
    pub fn pending_since_ms(&self) -> Option<u64> {
        self.pending_since_ms
    }

    pub fn len(&self) -> u64 {
        self.next_tx_id
    }

    pub fn is_empty(&self) -> bool {
        self.next_tx_id == 0
    }

    pub fn tip(&self) -> Digest {
        self.blocks.last().map_or(Digest::ZERO, |b| b.block_hash)
    }

    /// Serializes the sealed chain exactly as the ledger file stores it.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        file::encode_file(&self.blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(payload: &[u8]) -> NewTransaction {
        NewTransaction {
            kind: TxKind::CastVote,
            payload: payload.to_vec(),
            timestamp_ms: 1_700_000_000_000,
            actor: "actor".into(),
        }
    }

    #[test]
    fn first_append_is_zero_and_numbering_is_sequential() {
        let mut ledger = Ledger::new();
        assert_eq!(ledger.append(tx(b"a")).unwrap(), 0);
        for i in 1..41 {
            ledger.append(tx(&[i as u8 + 1])).unwrap();
        }
        assert_eq!(ledger.append(tx(b"z")).unwrap(), 41);
    }

    #[test]
    fn empty_payload_rejected() {
        let mut ledger = Ledger::new();
        assert!(matches!(ledger.append(tx(b"")), Err(LedgerError::EmptyPayload)));
    }

    #[test]
    fn read_only_ledger_refuses_writes() {
        let mut ledger = Ledger::new();
        ledger.append(tx(b"a")).unwrap();
        ledger.set_read_only(true);
        assert!(matches!(ledger.append(tx(b"b")), Err(LedgerError::LedgerSealed)));
        assert!(matches!(ledger.seal_block(), Err(LedgerError::LedgerSealed)));
        ledger.set_read_only(false);
        ledger.seal_block().unwrap();
    }

    #[test]
    fn genesis_block_links_to_zero() {
        let mut ledger = Ledger::new();
        ledger.append(tx(b"a")).unwrap();
        ledger.seal_block().unwrap();
        let genesis = &ledger.blocks()[0];
        assert_eq!(genesis.height, 0);
        assert_eq!(genesis.prev_hash, Digest::ZERO);
    }

    #[test]
    fn sealing_empty_buffer_fails() {
        let mut ledger = Ledger::new();
        assert!(matches!(ledger.seal_block(), Err(LedgerError::EmptyBuffer)));
    }

    #[test]
    fn block_hash_commits_to_height() {
        // Two blocks over identical transaction lists differ only in height
        // and prev_hash; recompute both digests independently with SHA-256
        // over the documented preimage.
        let t = Transaction {
            tx_id: 0,
            kind: TxKind::CreatePoll,
            payload: b"p".to_vec(),
            timestamp_ms: 5,
            actor: "a".into(),
            payload_hash: Digest::of(b"p"),
        };
        let b0 = Block::seal(0, Digest::ZERO, vec![t.clone()]);
        let b1 = Block::seal(1, Digest::ZERO, vec![t.clone()]);
        assert_eq!(b0.tx_root, b1.tx_root);
        assert_ne!(b0.block_hash, b1.block_hash);

        let root = Digest::of(Digest::of(&t.encode()).as_bytes());
        let mut pre0 = 0u64.to_be_bytes().to_vec();
        pre0.extend_from_slice(&[0u8; 32]);
        pre0.extend_from_slice(root.as_bytes());
        let mut pre1 = 1u64.to_be_bytes().to_vec();
        pre1.extend_from_slice(&[0u8; 32]);
        pre1.extend_from_slice(root.as_bytes());
        assert_eq!(b0.block_hash, Digest::of(&pre0));
        assert_eq!(b1.block_hash, Digest::of(&pre1));
    }

    fn ten_block_ledger() -> Ledger {
        let mut ledger = Ledger::new();
        for h in 0..10u8 {
            for i in 0..3u8 {
                ledger.append(tx(&[h, i, 0xAA])).unwrap();
            }
            ledger.seal_block().unwrap();
        }
        ledger
    }

    #[test]
    fn fresh_chain_verifies() {
        assert!(ten_block_ledger().verify_chain().ok);
        let empty = Ledger::new().verify_chain();
        assert!(empty.ok);
        assert_eq!(empty.first_bad_height, None);
    }

    #[test]
    fn payload_bit_flip_reports_its_block() {
        let mut ledger = ten_block_ledger();
        ledger.blocks[4].transactions[1].payload[0] ^= 0x01;
        let report = ledger.verify_chain();
        assert!(!report.ok);
        assert_eq!(report.first_bad_height, Some(4));
    }

    #[test]
    fn exhaustive_payload_bit_flips_all_detected() {
        let base = ten_block_ledger();
        for h in 0..base.blocks.len() {
            for t in 0..base.blocks[h].transactions.len() {
                for byte in 0..base.blocks[h].transactions[t].payload.len() {
                    for bit in 0..8 {
                        let mut ledger = ten_block_ledger();
                        ledger.blocks[h].transactions[t].payload[byte] ^= 1 << bit;
                        let report = ledger.verify_chain();
                        assert!(!report.ok);
                        assert_eq!(report.first_bad_height, Some(h as u64));
                    }
                }
            }
        }
    }

    #[test]
    fn get_transaction_round_trip_and_heights() {
        let mut ledger = Ledger::new();
        let id = ledger.append(tx(b"first")).unwrap();
        let got = ledger.get_transaction(id).unwrap();
        assert_eq!(got.transaction.payload, b"first");
        assert_eq!(got.height, None);
        ledger.seal_block().unwrap();
        for i in 0..4u8 {
            ledger.append(tx(&[i + 1])).unwrap();
        }
        ledger.seal_block().unwrap();
        assert_eq!(ledger.get_transaction(0).unwrap().height, Some(0));
        assert_eq!(ledger.get_transaction(3).unwrap().height, Some(1));
        assert_eq!(ledger.get_transaction(3).unwrap().transaction.payload, vec![3]);
        assert!(matches!(ledger.get_transaction(999), Err(LedgerError::NotFound(999))));
    }

    #[test]
    fn transaction_order_equals_append_order() {
        let ledger = ten_block_ledger();
        let ids: Vec<u64> = ledger.transactions().map(|t| t.tx_id).collect();
        assert_eq!(ids, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn tx_kind_tags_round_trip() {
        for kind in TxKind::ALL {
            assert_eq!(TxKind::from_tag(kind.tag()), Some(*kind));
        }
        assert_eq!(TxKind::from_tag(200), None);
    }
}
