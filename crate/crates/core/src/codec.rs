//! Canonical byte encoding for everything that gets hashed or persisted.
//!
//! A record is a sequence of fields written in a fixed order:
//!
//! ```text
//! field := key_len:u8 key:[u8] value_len:u32be value:[u8]
//! list  := count:u32be (item_len:u32be item:[u8])*
//! ```
//!
//! Decoding is strict: keys must appear in exactly the order the reader asks
//! for them, every length must be satisfied, and no bytes may be left over.
//! Strictness is what makes the encoding canonical, so that any stored byte
//! string has at most one meaning and re-encoding a decoded value reproduces
//! the input.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated input while reading {0}")]
    Truncated(&'static str),
    #[error("expected field `{expected}`, found `{found}`")]
    UnexpectedKey { expected: &'static str, found: String },
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("invalid value for `{0}`")]
    BadValue(&'static str),
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, key: &str, value: &[u8]) -> &mut Self {
        debug_assert!(key.len() <= u8::MAX as usize);
        self.buf.push(key.len() as u8);
        self.buf.extend_from_slice(key.as_bytes());
        self.buf
            .extend_from_slice(&(value.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(value);
        self
    }

    pub fn u64(&mut self, key: &str, value: u64) -> &mut Self {
        self.bytes(key, &value.to_be_bytes())
    }

    pub fn u128(&mut self, key: &str, value: u128) -> &mut Self {
        self.bytes(key, &value.to_be_bytes())
    }

    pub fn u8(&mut self, key: &str, value: u8) -> &mut Self {
        self.bytes(key, &[value])
    }

    pub fn bool(&mut self, key: &str, value: bool) -> &mut Self {
        self.u8(key, value as u8)
    }

    pub fn str(&mut self, key: &str, value: &str) -> &mut Self {
        self.bytes(key, value.as_bytes())
    }

    pub fn list<I, T>(&mut self, key: &str, items: I) -> &mut Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let mut value = Vec::new();
        let mut count = 0u32;
        for item in items {
            let item = item.as_ref();
            value.extend_from_slice(&(item.len() as u32).to_be_bytes());
            value.extend_from_slice(item);
            count += 1;
        }
        let mut out = count.to_be_bytes().to_vec();
        out.extend_from_slice(&value);
        self.bytes(key, &out)
    }

    pub fn optional(&mut self, key: &str, value: Option<&[u8]>) -> &mut Self {
        self.list(key, value)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

fn take<'a>(input: &mut &'a [u8], n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
    if input.len() < n {
        return Err(CodecError::Truncated(what));
    }
    let (head, tail) = input.split_at(n);
    *input = tail;
    Ok(head)
}

fn take_u32(input: &mut &[u8], what: &'static str) -> Result<usize, CodecError> {
    let raw = take(input, 4, what)?;
    Ok(u32::from_be_bytes(raw.try_into().expect("4 bytes")) as usize)
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }

    pub fn bytes(&mut self, key: &'static str) -> Result<&'a [u8], CodecError> {
        let key_len = take(&mut self.rest, 1, key)?[0] as usize;
        let found = take(&mut self.rest, key_len, key)?;
        if found != key.as_bytes() {
            return Err(CodecError::UnexpectedKey {
                expected: key,
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let len = take_u32(&mut self.rest, key)?;
        take(&mut self.rest, len, key)
    }

    pub fn array<const N: usize>(&mut self, key: &'static str) -> Result<[u8; N], CodecError> {
        self.bytes(key)?
            .try_into()
            .map_err(|_| CodecError::BadValue(key))
    }

    pub fn u64(&mut self, key: &'static str) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.array(key)?))
    }

    pub fn u128(&mut self, key: &'static str) -> Result<u128, CodecError> {
        Ok(u128::from_be_bytes(self.array(key)?))
    }

    pub fn u8(&mut self, key: &'static str) -> Result<u8, CodecError> {
        Ok(self.array::<1>(key)?[0])
    }

    pub fn bool(&mut self, key: &'static str) -> Result<bool, CodecError> {
        match self.u8(key)? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(CodecError::BadValue(key)),
        }
    }

    pub fn str(&mut self, key: &'static str) -> Result<&'a str, CodecError> {
        std::str::from_utf8(self.bytes(key)?).map_err(|_| CodecError::BadValue(key))
    }

    pub fn list(&mut self, key: &'static str) -> Result<Vec<&'a [u8]>, CodecError> {
        let mut value = self.bytes(key)?;
        let count = take_u32(&mut value, key)?;
        // Every item costs at least its 4-byte length prefix.
        if count > value.len() / 4 {
            return Err(CodecError::Truncated(key));
        }
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            let len = take_u32(&mut value, key)?;
            items.push(take(&mut value, len, key)?);
        }
        if !value.is_empty() {
            return Err(CodecError::BadValue(key));
        }
        Ok(items)
    }

    pub fn optional(&mut self, key: &'static str) -> Result<Option<&'a [u8]>, CodecError> {
        let mut items = self.list(key)?;
        match items.len() {
            0 => Ok(None),
            1 => Ok(items.pop()),
            _ => Err(CodecError::BadValue(key)),
        }
    }

    pub fn finish(self) -> Result<(), CodecError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(CodecError::TrailingBytes(self.rest.len()))
        }
    }
}

/// Splits a byte stream of `len:u32be bytes` frames. Used by the ledger file
/// and the pending-transaction log.
pub fn read_frame<'a>(input: &mut &'a [u8]) -> Result<&'a [u8], CodecError> {
    let len = take_u32(input, "frame length")?;
    take(input, len, "frame")
}

pub fn write_frame(out: &mut Vec<u8>, frame: &[u8]) {
    out.extend_from_slice(&(frame.len() as u32).to_be_bytes());
    out.extend_from_slice(frame);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(a: u64, s: &str, items: &[Vec<u8>], opt: Option<&[u8]>) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64("a", a).str("s", s).list("items", items).optional("o", opt);
        enc.finish()
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(
            a in any::<u64>(),
            s in ".{0,12}",
            items in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..6), 0..5),
            opt in proptest::option::of(proptest::collection::vec(any::<u8>(), 0..4)),
        ) {
            let bytes = sample(a, &s, &items, opt.as_deref());
            let mut dec = Decoder::new(&bytes);
            prop_assert_eq!(dec.u64("a").unwrap(), a);
            prop_assert_eq!(dec.str("s").unwrap(), s.as_str());
            let got: Vec<Vec<u8>> = dec.list("items").unwrap().into_iter().map(<[u8]>::to_vec).collect();
            prop_assert_eq!(got, items);
            prop_assert_eq!(dec.optional("o").unwrap().map(<[u8]>::to_vec), opt);
            prop_assert!(dec.finish().is_ok());
        }
    }

    #[test]
    fn wrong_key_order_is_rejected() {
        let bytes = sample(1, "x", &[], None);
        let mut dec = Decoder::new(&bytes);
        assert!(matches!(
            dec.str("s"),
            Err(CodecError::UnexpectedKey { expected: "s", .. })
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = sample(1, "x", &[], None);
        bytes.push(0);
        let mut dec = Decoder::new(&bytes);
        dec.u64("a").unwrap();
        dec.str("s").unwrap();
        dec.list("items").unwrap();
        dec.optional("o").unwrap();
        assert_eq!(dec.finish(), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn truncation_is_rejected() {
        let bytes = sample(7, "hello", &[vec![1, 2, 3]], Some(&[9]));
        for cut in 0..bytes.len() {
            let mut dec = Decoder::new(&bytes[..cut]);
            let ok = dec.u64("a").is_ok()
                && dec.str("s").is_ok()
                && dec.list("items").is_ok()
                && dec.optional("o").is_ok();
            assert!(!ok, "prefix of {cut} bytes decoded");
        }
    }

    #[test]
    fn frames() {
        let mut out = Vec::new();
        write_frame(&mut out, b"one");
        write_frame(&mut out, b"");
        let mut input = out.as_slice();
        assert_eq!(read_frame(&mut input).unwrap(), b"one");
        assert_eq!(read_frame(&mut input).unwrap(), b"");
        assert!(input.is_empty());
        assert!(read_frame(&mut input).is_err());
    }
}
