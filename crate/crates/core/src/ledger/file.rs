//! On-disk layout.
//!
//! `ledger.bin` holds a header frame followed by one frame per sealed block;
//! frames are `len:u32be bytes`. `pending.log` holds frames of transactions
//! that were acknowledged but not sealed yet, and is truncated after every
//! successful block write.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Block, ChainCursor, LedgerError, Transaction, VerificationReport};
use crate::codec::{read_frame, write_frame, CodecError, Decoder, Encoder};
use crate::digest::DIGEST_ALGORITHM_ID;

pub const FORMAT_VERSION: u64 = 1;

const LEDGER_FILE: &str = "ledger.bin";
const PENDING_FILE: &str = "pending.log";

fn encode_header() -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u64("formatVersion", FORMAT_VERSION)
        .str("digestAlgorithmId", DIGEST_ALGORITHM_ID);
    enc.finish()
}

fn check_header(frame: &[u8]) -> Result<(), String> {
    fn parse(frame: &[u8]) -> Result<(u64, String), CodecError> {
        let mut dec = Decoder::new(frame);
        let version = dec.u64("formatVersion")?;
        let algo = dec.str("digestAlgorithmId")?.to_owned();
        dec.finish()?;
        Ok((version, algo))
    }
    let (version, algo) = parse(frame).map_err(|e| format!("header: {e}"))?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    if algo != DIGEST_ALGORITHM_ID {
        return Err(format!("unsupported digest algorithm {algo}"));
    }
    Ok(())
}

pub(crate) fn encode_file(blocks: &[Block]) -> Vec<u8> {
    let mut out = Vec::new();
    write_frame(&mut out, &encode_header());
    for block in blocks {
        write_frame(&mut out, &block.encode());
    }
    out
}

type ParseFailure = (Option<u64>, String);

fn parse_chain(bytes: &[u8]) -> Result<Vec<Block>, ParseFailure> {
    let mut input = bytes;
    let header = read_frame(&mut input).map_err(|e| (None, format!("header: {e}")))?;
    check_header(header).map_err(|e| (None, e))?;
    let mut cursor = ChainCursor::new();
    let mut blocks = Vec::new();
    while !input.is_empty() {
        let height = cursor.height();
        let frame = read_frame(&mut input).map_err(|e| (Some(height), e.to_string()))?;
        let (block, hashes) = Block::decode(frame).map_err(|e| (Some(height), e.to_string()))?;
        cursor
            .accept(&block, &hashes)
            .map_err(|reason| (Some(height), reason))?;
        blocks.push(block);
    }
    Ok(blocks)
}

/// Verifies a complete ledger file image.
pub fn verify_bytes(bytes: &[u8]) -> VerificationReport {
    match parse_chain(bytes) {
        Ok(_) => VerificationReport::valid(),
        Err((height, reason)) => VerificationReport::failed(height, reason),
    }
}

pub fn verify_file(path: &Path) -> std::io::Result<VerificationReport> {
    Ok(verify_bytes(&fs::read(path)?))
}

#[derive(Debug)]
pub struct LedgerStore {
    ledger_path: PathBuf,
    ledger: File,
    pending: File,
}

impl LedgerStore {
    pub(crate) fn open(dir: &Path) -> Result<(Self, Vec<Block>, Vec<Transaction>), LedgerError> {
        fs::create_dir_all(dir)?;
        let ledger_path = dir.join(LEDGER_FILE);
        let pending_path = dir.join(PENDING_FILE);

        let existing = match fs::read(&ledger_path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut ledger = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ledger_path)?;
        let blocks = if existing.is_empty() {
            let mut header = Vec::new();
            write_frame(&mut header, &encode_header());
            ledger.write_all(&header)?;
            ledger.sync_data()?;
            Vec::new()
        } else {
            parse_chain(&existing)
                .map_err(|(height, reason)| LedgerError::Corrupt { height, reason })?
        };

        let next_tx_id = blocks
            .last()
            .and_then(|b| b.transactions.last())
            .map_or(0, |t| t.tx_id + 1);
        let pending = load_pending(&pending_path, next_tx_id)?;
        let pending_file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&pending_path)?;

        Ok((
            LedgerStore {
                ledger_path,
                ledger,
                pending: pending_file,
            },
            blocks,
            pending,
        ))
    }

    pub fn ledger_path(&self) -> &Path {
        &self.ledger_path
    }

    pub(crate) fn append_pending(&mut self, tx: &Transaction) -> Result<(), LedgerError> {
        let mut frame = Vec::new();
        write_frame(&mut frame, &tx.encode());
        self.pending.write_all(&frame)?;
        Ok(())
    }

    pub(crate) fn write_block(&mut self, block: &Block) -> Result<(), LedgerError> {
        let mut frame = Vec::new();
        write_frame(&mut frame, &block.encode());
        self.ledger.write_all(&frame)?;
        self.ledger.sync_data()?;
        // Only now is it safe to forget the buffered copies.
        self.pending.set_len(0)?;
        Ok(())
    }
}

fn load_pending(path: &Path, next_tx_id: u64) -> Result<Vec<Transaction>, LedgerError> {
    let bytes = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let corrupt = |reason: String| LedgerError::Corrupt {
        height: None,
        reason: format!("pending log: {reason}"),
    };
    let mut input = bytes.as_slice();
    let mut pending: Vec<Transaction> = Vec::new();
    let mut expected = next_tx_id;
    while !input.is_empty() {
        let before = input.len();
        let frame = match read_frame(&mut input) {
            Ok(frame) => frame,
            Err(CodecError::Truncated(_)) => {
                // A torn tail was never acknowledged to any client.
                let keep = (bytes.len() - before) as u64;
                OpenOptions::new().write(true).open(path)?.set_len(keep)?;
                break;
            }
            Err(e) => return Err(corrupt(e.to_string())),
        };
        let tx = Transaction::decode(frame).map_err(|e| corrupt(e.to_string()))?;
        if !tx.payload_hash_ok() {
            return Err(corrupt(format!("payload hash mismatch in tx {}", tx.tx_id)));
        }
        if tx.tx_id < next_tx_id {
            // Sealed already; the log was not truncated before a crash.
            continue;
        }
        if tx.tx_id != expected {
            return Err(corrupt(format!("tx id {} out of sequence", tx.tx_id)));
        }
        expected += 1;
        pending.push(tx);
    }
    Ok(pending)
}

#[cfg(test)]
mod tests {
    use super::super::{Ledger, NewTransaction, TxKind};
    use super::*;

    fn tx(i: u8) -> NewTransaction {
        NewTransaction {
            kind: TxKind::RegisterVoters,
            payload: vec![i, i.wrapping_mul(7)],
            timestamp_ms: 1000 + i as u64,
            actor: format!("user-{i}"),
        }
    }

    #[test]
    fn reopen_restores_blocks_and_pending() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut ledger = Ledger::open(dir.path()).unwrap();
            for i in 0..5 {
                ledger.append(tx(i)).unwrap();
            }
            ledger.seal_block().unwrap();
            ledger.append(tx(5)).unwrap();
            ledger.append(tx(6)).unwrap();
        }
        let ledger = Ledger::open(dir.path()).unwrap();
        assert_eq!(ledger.blocks().len(), 1);
        assert_eq!(ledger.pending_len(), 2);
        assert_eq!(ledger.len(), 7);
        assert!(ledger.verify_persisted().unwrap().ok);
        let ids: Vec<u64> = ledger.transactions().map(|t| t.tx_id).collect();
        assert_eq!(ids, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn file_image_matches_in_memory_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::open(dir.path()).unwrap();
        for i in 0..3 {
            ledger.append(tx(i)).unwrap();
            ledger.seal_block().unwrap();
        }
        let on_disk = fs::read(dir.path().join(LEDGER_FILE)).unwrap();
        assert_eq!(on_disk, ledger.to_file_bytes());
    }

    #[test]
    fn tampered_file_refuses_to_open() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut ledger = Ledger::open(dir.path()).unwrap();
            ledger.append(tx(1)).unwrap();
            ledger.seal_block().unwrap();
        }
        let path = dir.path().join(LEDGER_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 40;
        bytes[last] ^= 0x10;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            Ledger::open(dir.path()),
            Err(LedgerError::Corrupt { .. })
        ));
    }

    #[test]
    fn torn_pending_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut ledger = Ledger::open(dir.path()).unwrap();
            ledger.append(tx(1)).unwrap();
            ledger.append(tx(2)).unwrap();
        }
        let path = dir.path().join(PENDING_FILE);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let mut ledger = Ledger::open(dir.path()).unwrap();
        assert_eq!(ledger.len(), 1);
        assert_eq!(ledger.append(tx(3)).unwrap(), 1);
        drop(ledger);
        assert_eq!(Ledger::open(dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn header_corruption_fails_without_height() {
        let mut ledger = Ledger::new();
        ledger.append(tx(0)).unwrap();
        ledger.seal_block().unwrap();
        let mut bytes = ledger.to_file_bytes();
        bytes[6] ^= 0x01;
        let report = verify_bytes(&bytes);
        assert!(!report.ok);
        assert_eq!(report.first_bad_height, None);
    }
}
