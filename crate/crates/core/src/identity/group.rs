//! Prime-order subgroup of `Z_p^*` used for Schnorr identification.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::Encoder;
use crate::digest::Digest;

// 2048-bit p = k*q + 1 with a 256-bit prime q, derived deterministically
// from the seed "ballotledger schnorr group v1"; g = 2^((p-1)/q) mod p.
const PRODUCTION_P: &str = "f75c5fdbad1b67ec0b38e063b0234b80b8b91f9dba81732ba0dc113d0009027c00d0dc2a26edb0f06f3b407bc4c60e215d9fd344d11b41e34dfc3908d38e6c44c499140fa4c7b300db5e8fd71ef54fc3ca7aad2beac3bd72205d4578e33fc66647f2941e19f0840be156de8caf57dcf4a685a6a4e25f2b5c2572d9b13e8a876ed647dc841d9340c4193ed62b857845c480fd2a719dda7cadc69bb8dea5cc62c1df9d10434c6937d64281d942d63f5402cfe7b0ca9b1c61358d18a8a239f41519ccedfd00a77ae31208d1e5a45d56c9498ddcf2f6208dc59d3a031cfd2910b51fb006774a68a9c40cb7bca2686557ba070953a1ec63759562fd8488d3c61718a3";
const PRODUCTION_Q: &str = "e630081c75be03394df473161222f485743148201f4a7c5fbe8d7d3b90742099";
const PRODUCTION_G: &str = "9570dae3e7d7d701c2ccd08c5aeafd5add1b1368587030e2fa6569cc606184a5d4a7e0dbfa85117ff4aa58906e81e898c329ddd7d6b521a33bc2251d78925f7a059bcc28ef87d094e0a7520514736c0d643d294128d122aca9081b12d3e395b212f152863e00f395dae496b333902d5b44e5293db6b94fd26459fec711f8f755fb4f2a0104d38494c1c311816c0a159a6e90d165e84367ec989c6c6d286c0a83bd2e29724131e56c1eeb217c8129b289c73387481857a38cb3066a2e8dc722e7903bdd3d67604901571b95c3449fd39b715decb997d8a4ba45db14a37384768185337d6678561a67f8ea3de23d1799838bf84847d8586f1b18377607e4780caa";

const MILLER_RABIN_ROUNDS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("subgroup order does not divide p - 1")]
    OrderDoesNotDivide,
    #[error("generator must satisfy 1 < g < p and g^q = 1 mod p")]
    BadGenerator,
    #[error("subgroup order is not prime")]
    CompositeOrder,
    #[error("unknown group `{0}` (expected `production` or `toy`)")]
    UnknownGroup(String),
}

/// An element of `Z_p^*`, carried as its integer representative.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(BigUint);

impl GroupElement {
    pub fn new(value: BigUint) -> Self {
        GroupElement(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.to_str_radix(16)
    }

    /// Minimal big-endian bytes; this is the stored form.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }

    /// Inverse of [`to_bytes`](Self::to_bytes). Leading zero bytes are
    /// rejected so that every element has exactly one stored form.
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.first() == Some(&0) && bytes.len() > 1 || bytes.is_empty() {
            return None;
        }
        Some(GroupElement(BigUint::from_bytes_be(bytes)))
    }
}

impl From<u64> for GroupElement {
    fn from(v: u64) -> Self {
        GroupElement(BigUint::from(v))
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = self.to_hex();
        if hex.len() > 16 {
            write!(f, "GroupElement({}..)", &hex[..16])
        } else {
            write!(f, "GroupElement({hex})")
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("group elements are lowercase hex")]
pub struct ParseElementError;

impl FromStr for GroupElement {
    type Err = ParseElementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(ParseElementError);
        }
        BigUint::parse_bytes(s.as_bytes(), 16)
            .map(GroupElement)
            .ok_or(ParseElementError)
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Modulus `p`, prime subgroup order `q` with `q | p - 1`, generator `g` of
/// the order-`q` subgroup.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    name: String,
    p: BigUint,
    q: BigUint,
    g: BigUint,
    element_len: usize,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("name", &self.name)
            .field("p_bits", &self.p.bits())
            .field("q_bits", &self.q.bits())
            .finish()
    }
}

impl GroupParams {
    /// Validates and builds a parameter set. The primality of `q` is checked
    /// with Miller-Rabin.
    pub fn new(name: impl Into<String>, p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        if q.is_zero() || p <= BigUint::one() || !((&p - 1u32) % &q).is_zero() {
            return Err(GroupError::OrderDoesNotDivide);
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(GroupError::BadGenerator);
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        if !is_probable_prime(&q, MILLER_RABIN_ROUNDS, &mut rng) {
            return Err(GroupError::CompositeOrder);
        }
        let element_len = (p.bits() as usize).div_ceil(8);
        Ok(GroupParams {
            name: name.into(),
            p,
            q,
            g,
            element_len,
        })
    }

    pub fn production() -> Self {
        let hex = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).expect("constant is hex");
        Self::new("production", hex(PRODUCTION_P), hex(PRODUCTION_Q), hex(PRODUCTION_G))
            .expect("built-in production group is valid")
    }

    /// The brute-forceable group p = 23, q = 11, g = 2.
    pub fn toy() -> Self {
        Self::new("toy", 23u32.into(), 11u32.into(), 2u32.into()).expect("toy group is valid")
    }

    pub fn by_name(name: &str) -> Result<Self, GroupError> {
        match name {
            "production" => Ok(Self::production()),
            "toy" => Ok(Self::toy()),
            other => Err(GroupError::UnknownGroup(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn generator_pow(&self, exponent: &BigUint) -> GroupElement {
        GroupElement(self.g.modpow(exponent, &self.p))
    }

    pub fn pow(&self, base: &GroupElement, exponent: &BigUint) -> GroupElement {
        GroupElement(base.0.modpow(exponent, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    /// `0 < y < p`. Commitments only need to be valid residues.
    pub fn is_residue(&self, y: &GroupElement) -> bool {
        !y.0.is_zero() && y.0 < self.p
    }

    /// Membership in the order-`q` subgroup: `0 < y < p` and `y^q = 1`.
    pub fn contains(&self, y: &GroupElement) -> bool {
        self.is_residue(y) && y.0.modpow(&self.q, &self.p).is_one()
    }

    /// Uniform in `[0, q)`.
    pub fn random_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        random_below(&self.q, rng)
    }

    /// Uniform in `[1, q - 1]`.
    pub fn random_secret<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let x = random_below(&self.q, rng);
            if !x.is_zero() {
                return x;
            }
        }
    }

    /// Fixed-width big-endian encoding (width of `p`), used inside hash
    /// preimages so concatenations stay unambiguous.
    pub fn element_bytes(&self, y: &GroupElement) -> Vec<u8> {
        let raw = y.0.to_bytes_be();
        let mut out = vec![0u8; self.element_len.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    pub fn fingerprint(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.bytes("p", &self.p.to_bytes_be())
            .bytes("q", &self.q.to_bytes_be())
            .bytes("g", &self.g.to_bytes_be());
        Digest::of(enc.as_slice())
    }
}

/// Uniform integer in `[0, bound)` by rejection sampling on the bit length.
pub fn random_below<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits() as usize;
    let nbytes = bits.div_ceil(8);
    let excess = nbytes * 8 - bits;
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xFF >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

const SMALL_PRIMES: [u32; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

/// Miller-Rabin with `rounds` random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let span = n - 3u32;
    'witness: for _ in 0..rounds {
        let a = random_below(&span, rng) + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
