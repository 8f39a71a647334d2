//! Content-addressed document store.
//!
//! Documents live at `<root>/<h0>/<h1>/<hash>` where `h0`, `h1` are the
//! first two bytes of the digest in hex. Writes go to a temporary file that
//! is renamed into place, so concurrent puts of the same bytes leave one
//! complete copy.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::digest::Digest;

#[derive(Debug, Error)]
pub enum DocStoreError {
    #[error("document must not be empty")]
    EmptyDocument,
    #[error("document {0} not found")]
    NotFound(Digest),
    #[error("stored bytes for {0} do not match their hash")]
    IntegrityError(Digest),
    #[error("docstore i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl DocStoreError {
    pub fn code(&self) -> &'static str {
        match self {
            DocStoreError::EmptyDocument => "EmptyDocument",
            DocStoreError::NotFound(_) => "NotFound",
            DocStoreError::IntegrityError(_) => "IntegrityError",
            DocStoreError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredDocument {
    pub content_hash: Digest,
    pub bytes: Vec<u8>,
    pub stored_at_ms: u64,
}

#[derive(Debug)]
enum Backend {
    Memory(RwLock<HashMap<Digest, (Vec<u8>, u64)>>),
    Disk(PathBuf),
}

#[derive(Debug)]
pub struct DocStore {
    backend: Backend,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// True iff `bytes` hash to `hash`.
pub fn verify(hash: &Digest, bytes: &[u8]) -> bool {
    &Digest::of(bytes) == hash
}

impl DocStore {
    pub fn in_memory() -> Self {
        DocStore {
            backend: Backend::Memory(RwLock::new(HashMap::new())),
        }
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, DocStoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DocStore {
            backend: Backend::Disk(root),
        })
    }

    fn path_for(root: &Path, hash: &Digest) -> PathBuf {
        let hex = hash.to_hex();
        root.join(&hex[0..2]).join(&hex[2..4]).join(hex)
    }

    pub fn put(&self, bytes: &[u8]) -> Result<Digest, DocStoreError> {
        if bytes.is_empty() {
            return Err(DocStoreError::EmptyDocument);
        }
        let hash = Digest::of(bytes);
        match &self.backend {
            Backend::Memory(map) => {
                map.write()
                    .expect("docstore lock")
                    .entry(hash)
                    .or_insert_with(|| (bytes.to_vec(), now_ms()));
            }
            Backend::Disk(root) => {
                let path = Self::path_for(root, &hash);
                if path.exists() {
                    return Ok(hash);
                }
                let dir = path.parent().expect("nested path");
                fs::create_dir_all(dir)?;
                let tmp = dir.join(format!(
                    ".tmp-{}-{}",
                    std::process::id(),
                    TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
                ));
                let mut file = fs::File::create(&tmp)?;
                file.write_all(bytes)?;
                file.sync_data()?;
                drop(file);
                fs::rename(&tmp, &path)?;
            }
        }
        Ok(hash)
    }

    pub fn get_document(&self, hash: &Digest) -> Result<StoredDocument, DocStoreError> {
        let (bytes, stored_at_ms) = match &self.backend {
            Backend::Memory(map) => map
                .read()
                .expect("docstore lock")
                .get(hash)
                .cloned()
                .ok_or(DocStoreError::NotFound(*hash))?,
            Backend::Disk(root) => {
                let path = Self::path_for(root, hash);
                let bytes = match fs::read(&path) {
                    Ok(b) => b,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return Err(DocStoreError::NotFound(*hash))
                    }
                    Err(e) => return Err(e.into()),
                };
                let stored_at = fs::metadata(&path)?
                    .modified()
                    .ok()
                    .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                    .map_or(0, |d| d.as_millis() as u64);
                (bytes, stored_at)
            }
        };
        if !verify(hash, &bytes) {
            return Err(DocStoreError::IntegrityError(*hash));
        }
        Ok(StoredDocument {
            content_hash: *hash,
            bytes,
            stored_at_ms,
        })
    }

    pub fn get(&self, hash: &Digest) -> Result<Vec<u8>, DocStoreError> {
        self.get_document(hash).map(|d| d.bytes)
    }

    pub fn contains(&self, hash: &Digest) -> bool {
        match &self.backend {
            Backend::Memory(map) => map.read().expect("docstore lock").contains_key(hash),
            Backend::Disk(root) => Self::path_for(root, hash).exists(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stores() -> (tempfile::TempDir, Vec<DocStore>) {
        let dir = tempfile::tempdir().unwrap();
        let disk = DocStore::open(dir.path().join("docs")).unwrap();
        (dir, vec![DocStore::in_memory(), disk])
    }

    #[test]
    fn put_is_idempotent_and_round_trips() {
        let (dir, stores) = stores();
        for store in &stores {
            let h1 = store.put(b"report one").unwrap();
            assert_eq!(store.put(b"report one").unwrap(), h1);
            let h2 = store.put(b"report two").unwrap();
            assert_ne!(h1, h2);
            assert_eq!(store.get(&h1).unwrap(), b"report one");
            assert!(matches!(store.put(b""), Err(DocStoreError::EmptyDocument)));
            assert!(matches!(
                store.get(&Digest::of(b"absent")),
                Err(DocStoreError::NotFound(_))
            ));
        }
        let h = Digest::of(b"report one").to_hex();
        let shard = dir.path().join("docs").join(&h[0..2]).join(&h[2..4]);
        let names: Vec<_> = fs::read_dir(shard).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from(h)]);
    }

    #[test]
    fn corruption_detected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        let hash = store.put(b"verification report").unwrap();
        let path = DocStore::path_for(dir.path(), &hash);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(store.get(&hash), Err(DocStoreError::IntegrityError(_))));
    }

    #[test]
    fn verify_examples() {
        let hash = Digest::of(b"abc");
        assert!(verify(&hash, b"abc"));
        assert!(!verify(&hash, b"abb"));
        assert!(!verify(&hash, b""));
    }

    #[test]
    fn distinct_corpus_has_distinct_hashes() {
        let store = DocStore::in_memory();
        let mut seen = std::collections::HashSet::new();
        for i in 0u32..2000 {
            assert!(seen.insert(store.put(&i.to_be_bytes()).unwrap()));
        }
    }

    proptest! {
        #[test]
        fn get_after_put_is_identity(bytes in proptest::collection::vec(any::<u8>(), 1..256)) {
            let store = DocStore::in_memory();
            let hash = store.put(&bytes).unwrap();
            let doc = store.get_document(&hash).unwrap();
            prop_assert_eq!(&doc.bytes, &bytes);
            prop_assert!(verify(&hash, &doc.bytes));
        }
    }
}
