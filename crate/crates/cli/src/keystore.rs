//! Local key storage for CLI identities.
//!
//! The file is one canonical record. Without a passphrase the entry list is
//! stored in the clear; with one, it is sealed with ChaCha20-Poly1305 under
//! an Argon2id-derived key and no secret byte reaches the disk unencrypted.

use std::collections::BTreeMap;
use std::path::Path;

use argon2::Argon2;
use ballotledger_core::codec::{CodecError, Decoder, Encoder};
use ballotledger_core::identity::{GroupElement, GroupParams, PermanentId, Prover, RequestId, UnvId};
use ballotledger_core::Digest;
use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use num_bigint::BigUint;
use rand::RngCore;
use thiserror::Error;

const MAGIC: &str = "ballotledger-keystore";
const VERSION: u8 = 1;
const KDF: &str = "argon2id";
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("keystore is encrypted; set a passphrase")]
    Locked,
    #[error("wrong passphrase or damaged keystore")]
    BadPassphrase,
    #[error("malformed keystore: {0}")]
    Malformed(String),
    #[error("no identity named {0:?} in the keystore")]
    UnknownName(String),
    #[error("an identity named {0:?} already exists")]
    NameTaken(String),
    #[error("identity {name:?} was created for group {expected}, service uses {found}")]
    GroupMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl KeystoreError {
    pub fn code(&self) -> &'static str {
        match self {
            KeystoreError::Locked => "KeystoreLocked",
            KeystoreError::BadPassphrase => "BadPassphrase",
            KeystoreError::Malformed(_) => "KeystoreMalformed",
            KeystoreError::UnknownName(_) => "UnknownKey",
            KeystoreError::NameTaken(_) => "KeyExists",
            KeystoreError::GroupMismatch { .. } => "GroupMismatch",
            KeystoreError::Io(_) => "Io",
        }
    }
}

impl From<CodecError> for KeystoreError {
    fn from(e: CodecError) -> Self {
        KeystoreError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEntry {
    pub name: String,
    pub group: String,
    pub fingerprint: Digest,
    pub secret: BigUint,
    pub public_key: GroupElement,
    pub request_id: Option<RequestId>,
    pub unv_id: Option<UnvId>,
    pub permanent_id: Option<PermanentId>,
}

impl KeyEntry {
    pub fn new(name: &str, params: &GroupParams, prover: &Prover) -> Self {
        KeyEntry {
            name: name.to_string(),
            group: params.name().to_string(),
            fingerprint: params.fingerprint(),
            secret: prover.secret().clone(),
            public_key: prover.public_key().clone(),
            request_id: None,
            unv_id: None,
            permanent_id: None,
        }
    }

    /// Rebuilds the prover, refusing if the service's group differs.
    pub fn prover(&self, params: &GroupParams) -> Result<Prover, KeystoreError> {
        if params.fingerprint() != self.fingerprint {
            return Err(KeystoreError::GroupMismatch {
                name: self.name.clone(),
                expected: format!("{} ({})", self.group, self.fingerprint.truncated_hex(8)),
                found: format!("{} ({})", params.name(), params.fingerprint().truncated_hex(8)),
            });
        }
        let prover = Prover::from_secret(params, self.secret.clone())
            .map_err(|e| KeystoreError::Malformed(e.to_string()))?;
        if prover.public_key() != &self.public_key {
            return Err(KeystoreError::Malformed(format!("{}: public key does not match secret", self.name)));
        }
        Ok(prover)
    }

    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        let request = self.request_id.map(|r| r.to_string());
        enc.str("name", &self.name)
            .str("group", &self.group)
            .bytes("fingerprint", self.fingerprint.as_bytes())
            .bytes("secret", &self.secret.to_bytes_be())
            .bytes("publicKey", &self.public_key.to_bytes())
            .optional("requestId", request.as_deref().map(str::as_bytes))
            .optional("unvId", self.unv_id.as_ref().map(|u| u.as_str().as_bytes()))
            .optional("permanentId", self.permanent_id.as_ref().map(|p| p.as_str().as_bytes()));
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, KeystoreError> {
        let mut dec = Decoder::new(bytes);
        let name = dec.str("name")?.to_string();
        let group = dec.str("group")?.to_string();
        let fingerprint = Digest::from_bytes(dec.array("fingerprint")?);
        let secret = BigUint::from_bytes_be(dec.bytes("secret")?);
        let public_key = GroupElement::from_bytes(dec.bytes("publicKey")?)
            .ok_or_else(|| KeystoreError::Malformed("public key".into()))?;
        let request_id = parse_opt(dec.optional("requestId")?, "requestId")?;
        let unv_id = parse_opt(dec.optional("unvId")?, "unvId")?;
        let permanent_id = parse_opt(dec.optional("permanentId")?, "permanentId")?;
        dec.finish()?;
        Ok(KeyEntry {
            name,
            group,
            fingerprint,
            secret,
            public_key,
            request_id,
            unv_id,
            permanent_id,
        })
    }
}

fn parse_opt<T: std::str::FromStr>(raw: Option<&[u8]>, what: &str) -> Result<Option<T>, KeystoreError> {
    raw.map(|b| {
        std::str::from_utf8(b)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| KeystoreError::Malformed(what.to_string()))
    })
    .transpose()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Keystore {
    entries: BTreeMap<String, KeyEntry>,
}

impl Keystore {
    pub fn get(&self, name: &str) -> Result<&KeyEntry, KeystoreError> {
        self.entries.get(name).ok_or_else(|| KeystoreError::UnknownName(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut KeyEntry, KeystoreError> {
        self.entries.get_mut(name).ok_or_else(|| KeystoreError::UnknownName(name.to_string()))
    }

    pub fn insert(&mut self, entry: KeyEntry) -> Result<(), KeystoreError> {
        if self.entries.contains_key(&entry.name) {
            return Err(KeystoreError::NameTaken(entry.name));
        }
        self.entries.insert(entry.name.clone(), entry);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &KeyEntry> {
        self.entries.values()
    }

    fn body(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.list("entries", self.entries.values().map(KeyEntry::encode));
        enc.finish()
    }

    fn from_body(bytes: &[u8]) -> Result<Self, KeystoreError> {
        let mut dec = Decoder::new(bytes);
        let mut entries = BTreeMap::new();
        for raw in dec.list("entries")? {
            let entry = KeyEntry::decode(raw)?;
            entries.insert(entry.name.clone(), entry);
        }
        dec.finish()?;
        Ok(Keystore { entries })
    }

    pub fn to_bytes(&self, passphrase: Option<&str>) -> Result<Vec<u8>, KeystoreError> {
        let mut enc = Encoder::new();
        enc.str("magic", MAGIC).u8("version", VERSION);
        match passphrase {
            None => {
                enc.bool("sealed", false).bytes("body", &self.body());
            }
            Some(pass) => {
                let mut salt = [0u8; SALT_LEN];
                let mut nonce = [0u8; NONCE_LEN];
                rand::rng().fill_bytes(&mut salt);
                rand::rng().fill_bytes(&mut nonce);
                let cipher = cipher(pass, &salt)?;
                let sealed = cipher
                    .encrypt(Nonce::from_slice(&nonce), self.body().as_slice())
                    .map_err(|_| KeystoreError::Malformed("encryption failed".into()))?;
                enc.bool("sealed", true)
                    .str("kdf", KDF)
                    .bytes("salt", &salt)
                    .bytes("nonce", &nonce)
                    .bytes("body", &sealed);
            }
        }
        Ok(enc.finish())
    }

    pub fn from_bytes(bytes: &[u8], passphrase: Option<&str>) -> Result<Self, KeystoreError> {
        let mut dec = Decoder::new(bytes);
        if dec.str("magic")? != MAGIC {
            return Err(KeystoreError::Malformed("not a keystore".into()));
        }
        let version = dec.u8("version")?;
        if version != VERSION {
            return Err(KeystoreError::Malformed(format!("unsupported version {version}")));
        }
        if !dec.bool("sealed")? {
            let body = dec.bytes("body")?;
            dec.finish()?;
            return Self::from_body(body);
        }
        if dec.str("kdf")? != KDF {
            return Err(KeystoreError::Malformed("unknown key derivation".into()));
        }
        let salt: [u8; SALT_LEN] = dec.array("salt")?;
        let nonce: [u8; NONCE_LEN] = dec.array("nonce")?;
        let sealed = dec.bytes("body")?;
        dec.finish()?;
        let pass = passphrase.ok_or(KeystoreError::Locked)?;
        let body = cipher(pass, &salt)?
            .decrypt(Nonce::from_slice(&nonce), sealed)
            .map_err(|_| KeystoreError::BadPassphrase)?;
        Self::from_body(&body)
    }

    /// A missing file is an empty keystore.
    pub fn load(path: &Path, passphrase: Option<&str>) -> Result<Self, KeystoreError> {
        match std::fs::read(path) {
            Ok(bytes) => Self::from_bytes(&bytes, passphrase),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Keystore::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path, passphrase: Option<&str>) -> Result<(), KeystoreError> {
        let bytes = self.to_bytes(passphrase)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn cipher(passphrase: &str, salt: &[u8]) -> Result<ChaCha20Poly1305, KeystoreError> {
    let mut key = [0u8; 32];
    Argon2::default()
        .hash_password_into(passphrase.as_bytes(), salt, &mut key)
        .map_err(|e| KeystoreError::Malformed(e.to_string()))?;
    Ok(ChaCha20Poly1305::new(Key::from_slice(&key)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Keystore, BigUint) {
        let params = GroupParams::toy();
        let prover = Prover::from_secret(&params, BigUint::from(7u32)).unwrap();
        let mut entry = KeyEntry::new("alice", &params, &prover);
        entry.request_id = Some(RequestId(3));
        entry.unv_id = Some("00112233445566778899aabbccddeeff".parse().unwrap());
        let mut store = Keystore::default();
        store.insert(entry).unwrap();
        let other = Prover::from_secret(&params, BigUint::from(9u32)).unwrap();
        let mut bob = KeyEntry::new("bob", &params, &other);
        bob.permanent_id = Some("ffeeddccbbaa99887766554433221100".parse().unwrap());
        store.insert(bob).unwrap();
        (store, BigUint::from(7u32))
    }

    #[test]
    fn plain_round_trip() {
        let (store, _) = sample();
        let bytes = store.to_bytes(None).unwrap();
        assert_eq!(Keystore::from_bytes(&bytes, None).unwrap(), store);
        assert_eq!(store.to_bytes(None).unwrap(), bytes);
    }

    #[test]
    fn sealed_round_trip_and_failures() {
        let (store, _) = sample();
        let bytes = store.to_bytes(Some("hunter2")).unwrap();
        assert_eq!(Keystore::from_bytes(&bytes, Some("hunter2")).unwrap(), store);
        assert!(matches!(Keystore::from_bytes(&bytes, None), Err(KeystoreError::Locked)));
        assert!(matches!(Keystore::from_bytes(&bytes, Some("nope")), Err(KeystoreError::BadPassphrase)));
        let mut flipped = bytes.clone();
        *flipped.last_mut().unwrap() ^= 1;
        assert!(matches!(Keystore::from_bytes(&flipped, Some("hunter2")), Err(KeystoreError::BadPassphrase)));
    }

    #[test]
    fn sealed_file_never_contains_the_plain_body() {
        let (store, _) = sample();
        let plain = store.body();
        let sealed = store.to_bytes(Some("pw")).unwrap();
        let needle = &plain[..24];
        assert!(!sealed.windows(needle.len()).any(|w| w == needle));
        let secret_field = b"secret";
        assert!(!sealed.windows(secret_field.len()).any(|w| w == secret_field));
    }

    #[test]
    fn group_mismatch_is_refused() {
        let (store, secret) = sample();
        let alice = store.get("alice").unwrap();
        assert_eq!(alice.prover(&GroupParams::toy()).unwrap().secret(), &secret);
        let err = alice.prover(&GroupParams::production()).unwrap_err();
        assert_eq!(err.code(), "GroupMismatch");
    }

    #[test]
    fn names_are_unique_and_missing_file_is_empty() {
        let (mut store, _) = sample();
        let dup = store.get("alice").unwrap().clone();
        assert_eq!(store.insert(dup).unwrap_err().code(), "KeyExists");
        assert_eq!(store.get("carol").unwrap_err().code(), "UnknownKey");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keys").join("store.bin");
        assert_eq!(Keystore::load(&path, None).unwrap(), Keystore::default());
        store.save(&path, Some("pw")).unwrap();
        assert_eq!(Keystore::load(&path, Some("pw")).unwrap(), store);
    }
}
