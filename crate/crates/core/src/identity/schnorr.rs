//! Schnorr identification: prove knowledge of `x` with `y = g^x` without
//! revealing it.
//!
//! One round is commit / challenge / answer:
//!
//! ```text
//! prover:   r <- [0, q),  d = g^r
//! verifier: c <- [0, 2^bits)
//! prover:   s = (r + c*x) mod q
//! verifier: g^s == d * y^c  (mod p)
//! ```
//!
//! Every round uses a fresh commitment. Answering two different challenges
//! for the same `d` reveals `x = (s1 - s2) / (c1 - c2) mod q`, which is why
//! a [`Prover`] drops its nonces as soon as it has answered.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::group::{GroupElement, GroupParams};
use crate::codec::{CodecError, Decoder, Encoder};
use crate::digest::Digest;

/// Width of challenges in production.
pub const MAX_CHALLENGE_BITS: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("secret key must lie in [1, q - 1]")]
    BadSecret,
    #[error("challenge list does not match the outstanding commitments")]
    ChallengeMismatch,
}

/// A verifier challenge in `[0, 2^128)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Challenge(pub u128);

impl Challenge {
    pub fn random<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Self {
        assert!((1..=MAX_CHALLENGE_BITS).contains(&bits), "challenge bits out of range");
        Challenge(rng.random::<u128>() >> (MAX_CHALLENGE_BITS - bits))
    }

    pub fn to_biguint(self) -> BigUint {
        BigUint::from(self.0)
    }
}

impl fmt::Debug for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Challenge({})", self.0)
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Challenge {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Challenge)
    }
}

impl Serialize for Challenge {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Challenge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Client-side state. The secret never leaves this struct except through
/// [`Prover::secret`], which exists for the local keystore.
#[derive(Clone)]
pub struct Prover {
    secret: BigUint,
    public_key: GroupElement,
    nonces: Vec<BigUint>,
}

impl fmt::Debug for Prover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Prover")
            .field("public_key", &self.public_key)
            .field("outstanding_rounds", &self.nonces.len())
            .finish_non_exhaustive()
    }
}

impl Prover {
    pub fn generate<R: Rng + ?Sized>(params: &GroupParams, rng: &mut R) -> Self {
        let secret = params.random_secret(rng);
        Self::from_secret(params, secret).expect("sampled in range")
    }

    pub fn from_secret(params: &GroupParams, secret: BigUint) -> Result<Self, ProtocolError> {
        if secret.is_zero() || &secret >= params.q() {
            return Err(ProtocolError::BadSecret);
        }
        let public_key = params.generator_pow(&secret);
        Ok(Prover {
            secret,
            public_key,
            nonces: Vec::new(),
        })
    }

    pub fn public_key(&self) -> &GroupElement {
        &self.public_key
    }

    pub fn secret(&self) -> &BigUint {
        &self.secret
    }

    /// Draws one fresh nonce per round and returns the commitments.
    pub fn commit<R: Rng + ?Sized>(
        &mut self,
        params: &GroupParams,
        rounds: usize,
        rng: &mut R,
    ) -> Vec<GroupElement> {
        let nonces = (0..rounds).map(|_| params.random_scalar(rng)).collect();
        self.commit_with_nonces(params, nonces)
    }

    /// Commits with caller-chosen nonces (reduced mod q).
    pub fn commit_with_nonces(&mut self, params: &GroupParams, nonces: Vec<BigUint>) -> Vec<GroupElement> {
        self.nonces = nonces.into_iter().map(|r| r % params.q()).collect();
        self.nonces.iter().map(|r| params.generator_pow(r)).collect()
    }

    /// Answers `s_i = (r_i + c_i * x) mod q`. The nonces are consumed.
    pub fn respond(&mut self, params: &GroupParams, challenges: &[Challenge]) -> Result<Vec<BigUint>, ProtocolError> {
        if self.nonces.is_empty() || challenges.len() != self.nonces.len() {
            return Err(ProtocolError::ChallengeMismatch);
        }
        let nonces = std::mem::take(&mut self.nonces);
        Ok(nonces
            .iter()
            .zip(challenges)
            .map(|(r, c)| answer(params, r, &self.secret, *c))
            .collect())
    }
}

fn answer(params: &GroupParams, nonce: &BigUint, secret: &BigUint, c: Challenge) -> BigUint {
    (nonce + c.to_biguint() * secret) % params.q()
}

/// The verification equation `g^s == d * y^c (mod p)` for one round.
pub fn verify_round(
    params: &GroupParams,
    public_key: &GroupElement,
    commitment: &GroupElement,
    challenge: Challenge,
    answer: &BigUint,
) -> bool {
    if answer >= params.q() || !params.is_residue(commitment) {
        return false;
    }
    let lhs = params.generator_pow(answer);
    let rhs = params.mul(commitment, &params.pow(public_key, &challenge.to_biguint()));
    lhs == rhs
}

/// `d = g^s * y^(-c)`: a transcript that verifies without knowing `x`.
pub fn simulated_commitment(
    params: &GroupParams,
    public_key: &GroupElement,
    challenge: Challenge,
    answer: &BigUint,
) -> GroupElement {
    let c = challenge.to_biguint() % params.q();
    let neg_c = (params.q() - c) % params.q();
    params.mul(&params.generator_pow(answer), &params.pow(public_key, &neg_c))
}

/// Honest-verifier simulator for one round.
pub fn simulate_round<R: Rng + ?Sized>(
    params: &GroupParams,
    public_key: &GroupElement,
    challenge_bits: u32,
    rng: &mut R,
) -> (GroupElement, Challenge, BigUint) {
    let answer = params.random_scalar(rng);
    let challenge = Challenge::random(challenge_bits, rng);
    let commitment = simulated_commitment(params, public_key, challenge, &answer);
    (commitment, challenge, answer)
}

/// Full record of a k-round run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub commitments: Vec<GroupElement>,
    pub challenges: Vec<Challenge>,
    pub answers: Vec<BigUint>,
}

impl Transcript {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.list("d", self.commitments.iter().map(GroupElement::to_bytes))
            .list("c", self.challenges.iter().map(|c| c.0.to_be_bytes()))
            .list("s", self.answers.iter().map(BigUint::to_bytes_be));
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_into(&mut enc);
        enc.finish()
    }

    pub fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let commitments = dec
            .list("d")?
            .into_iter()
            .map(|b| GroupElement::from_bytes(b).ok_or(CodecError::BadValue("d")))
            .collect::<Result<_, _>>()?;
        let challenges = dec
            .list("c")?
            .into_iter()
            .map(|b| {
                <[u8; 16]>::try_from(b)
                    .map(|a| Challenge(u128::from_be_bytes(a)))
                    .map_err(|_| CodecError::BadValue("c"))
            })
            .collect::<Result<_, _>>()?;
        let answers = dec
            .list("s")?
            .into_iter()
            .map(|b| {
                GroupElement::from_bytes(b)
                    .map(|e| e.value().clone())
                    .ok_or(CodecError::BadValue("s"))
            })
            .collect::<Result<_, _>>()?;
        Ok(Transcript {
            commitments,
            challenges,
            answers,
        })
    }

    /// Index of the first round that fails, if any. Length mismatches and an
    /// empty transcript fail at round 0.
    pub fn first_failing_round(&self, params: &GroupParams, public_key: &GroupElement) -> Option<usize> {
        let k = self.commitments.len();
        if k == 0 || self.challenges.len() != k || self.answers.len() != k {
            return Some(0);
        }
        (0..k).find(|&i| {
            !verify_round(
                params,
                public_key,
                &self.commitments[i],
                self.challenges[i],
                &self.answers[i],
            )
        })
    }
}

/// Non-interactive proof: commitments and answers; the challenges are
/// recomputed from the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NiProof {
    pub commitments: Vec<GroupElement>,
    pub answers: Vec<BigUint>,
}

impl NiProof {
    /// Compact text form `d1,d2;s1,s2` (hex commitments, decimal answers),
    /// suitable for an HTTP header.
    pub fn to_compact(&self) -> String {
        let d: Vec<String> = self.commitments.iter().map(GroupElement::to_hex).collect();
        let s: Vec<String> = self.answers.iter().map(BigUint::to_string).collect();
        format!("{};{}", d.join(","), s.join(","))
    }

    pub fn from_compact(s: &str) -> Option<Self> {
        let (d, a) = s.split_once(';')?;
        let split = |v: &str| -> Vec<String> {
            if v.is_empty() {
                Vec::new()
            } else {
                v.split(',').map(str::to_string).collect()
            }
        };
        let commitments = split(d)
            .iter()
            .map(|h| h.parse().ok())
            .collect::<Option<Vec<GroupElement>>>()?;
        let answers = split(a)
            .iter()
            .map(|v| {
                if v.bytes().all(|b| b.is_ascii_digit()) {
                    BigUint::parse_bytes(v.as_bytes(), 10)
                } else {
                    None
                }
            })
            .collect::<Option<Vec<BigUint>>>()?;
        Some(NiProof {
            commitments,
            answers,
        })
    }
}

/// `c_i = H(g || y || d_1 || ... || d_k || len(ctx) || ctx || i) mod 2^128`,
/// with group elements at the fixed width of `p`.
pub fn fiat_shamir_challenges(
    params: &GroupParams,
    public_key: &GroupElement,
    commitments: &[GroupElement],
    context: &[u8],
) -> Vec<Challenge> {
    let mut prefix = params.element_bytes(&params.g());
    prefix.extend(params.element_bytes(public_key));
    for d in commitments {
        prefix.extend(params.element_bytes(d));
    }
    prefix.extend((context.len() as u64).to_be_bytes());
    prefix.extend_from_slice(context);
    (0..commitments.len() as u32)
        .map(|i| {
            let digest = Digest::of_parts([&prefix[..], &i.to_be_bytes()[..]]);
            let low: [u8; 16] = digest.as_bytes()[16..].try_into().expect("16 bytes");
            Challenge(u128::from_be_bytes(low))
        })
        .collect()
}

pub fn prove_non_interactive<R: Rng + ?Sized>(
    params: &GroupParams,
    prover: &Prover,
    context: &[u8],
    rounds: usize,
    rng: &mut R,
) -> NiProof {
    // A throwaway copy keeps the caller's interactive nonces untouched.
    let mut scratch = Prover {
        secret: prover.secret.clone(),
        public_key: prover.public_key.clone(),
        nonces: Vec::new(),
    };
    let commitments = scratch.commit(params, rounds.max(1), rng);
    let challenges = fiat_shamir_challenges(params, &prover.public_key, &commitments, context);
    let answers = scratch
        .respond(params, &challenges)
        .expect("one challenge per commitment");
    NiProof {
        commitments,
        answers,
    }
}

pub fn verify_non_interactive(
    params: &GroupParams,
    public_key: &GroupElement,
    context: &[u8],
    proof: &NiProof,
) -> bool {
    if proof.commitments.is_empty()
        || proof.commitments.len() != proof.answers.len()
        || !params.contains(public_key)
    {
        return false;
    }
    let challenges = fiat_shamir_challenges(params, public_key, &proof.commitments, context);
    Transcript {
        commitments: proof.commitments.clone(),
        challenges,
        answers: proof.answers.clone(),
    }
    .first_failing_round(params, public_key)
    .is_none()
}
