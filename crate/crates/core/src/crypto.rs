//! Prime-order group, Schnorr signatures and public-key aggregation.
//!
//! The group is Ristretto255, the prime-order quotient of the twisted
//! Edwards curve over 2^255 - 19. Points encode to 32 bytes (compressed
//! Ristretto form), scalars to 32 little-endian bytes. These two encodings
//! are the only inputs ever fed to the protocol hash.
//!
//! Signing follows the subtraction variant: `s = k - e*d` with
//! `e = H(R || M)`, and verification recomputes `R' = s*G + e*Q` and checks
//! `H(R' || M) == e`.

use std::fmt;

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::traits::{Identity, VartimeMultiscalarMul};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mask::Bitmask;

pub use curve25519_dalek::ristretto::RistrettoPoint;
pub use curve25519_dalek::scalar::Scalar;

/// Length of every canonical point or scalar encoding.
pub const ENCODED_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("signing nonce must be non-zero")]
    ZeroNonce,
    #[error("mask covers {mask} keys but {keys} were supplied")]
    LengthMismatch { mask: usize, keys: usize },
    #[error("invalid point encoding")]
    InvalidPoint,
    #[error("invalid scalar encoding")]
    InvalidScalar,
}

/// The fixed generator of the group.
pub fn base_point() -> RistrettoPoint {
    RISTRETTO_BASEPOINT_POINT
}

pub fn identity() -> RistrettoPoint {
    RistrettoPoint::identity()
}

pub fn encode_point(p: &RistrettoPoint) -> [u8; 32] {
    p.compress().to_bytes()
}

pub fn decode_point(bytes: &[u8]) -> Result<RistrettoPoint, CryptoError> {
    CompressedRistretto::from_slice(bytes)
        .map_err(|_| CryptoError::InvalidPoint)?
        .decompress()
        .ok_or(CryptoError::InvalidPoint)
}

pub fn encode_scalar(s: &Scalar) -> [u8; 32] {
    s.to_bytes()
}

/// Decodes a canonical (fully reduced) little-endian scalar.
pub fn decode_scalar(bytes: &[u8]) -> Result<Scalar, CryptoError> {
    let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::InvalidScalar)?;
    Option::from(Scalar::from_canonical_bytes(arr)).ok_or(CryptoError::InvalidScalar)
}

/// Interprets a 32-byte digest as a big-endian integer and reduces it mod q.
pub fn scalar_from_digest(digest: [u8; 32]) -> Scalar {
    let mut le = digest;
    le.reverse();
    Scalar::from_bytes_mod_order(le)
}

/// SHA-256 over the concatenation of `parts`, reduced to a scalar.
pub fn hash_to_scalar(parts: &[&[u8]]) -> Scalar {
    scalar_from_digest(sha256(parts))
}

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Hashes `tag || seed || counter` until the big-endian digest is a
/// canonical non-zero scalar. Fewer than 2^-250 of digests are rejected.
fn rejection_scalar(tag: &[u8], seed: &[&[u8]]) -> Scalar {
    let mut counter: u32 = 0;
    loop {
        let ctr = counter.to_be_bytes();
        let mut parts: Vec<&[u8]> = Vec::with_capacity(seed.len() + 2);
        parts.push(tag);
        parts.extend_from_slice(seed);
        parts.push(&ctr);
        let mut le = sha256(&parts);
        le.reverse();
        if let Some(s) = Option::<Scalar>::from(Scalar::from_canonical_bytes(le)) {
            if s != Scalar::ZERO {
                return s;
            }
        }
        counter += 1;
    }
}

/// A group element used as a public key, ordered by its encoding.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey {
    point: RistrettoPoint,
    bytes: [u8; 32],
}

impl PublicKey {
    pub fn from_point(point: RistrettoPoint) -> Self {
        Self {
            point,
            bytes: encode_point(&point),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        decode_point(bytes).map(Self::from_point)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|_| CryptoError::InvalidPoint)?;
        Self::from_bytes(&raw)
    }

    pub fn point(&self) -> &RistrettoPoint {
        &self.point
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.bytes
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bytes)
    }

    /// First eight hex digits, for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.bytes[..4])
    }
}

impl std::hash::Hash for PublicKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.bytes.hash(state)
    }
}

impl PartialOrd for PublicKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PublicKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bytes.cmp(&other.bytes)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.short())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone)]
pub struct KeyPair {
    secret: Scalar,
    public: PublicKey,
}

impl KeyPair {
    /// Deterministic key derivation from a 32-byte seed.
    pub fn from_seed(seed: &[u8; 32]) -> Self {
        let secret = rejection_scalar(b"stakecosi/keygen", &[seed]);
        Self::from_secret(secret)
    }

    /// Convenience for tests and scenario files: keys named by a label.
    pub fn from_label(label: &str) -> Self {
        Self::from_seed(&sha256(&[b"stakecosi/label", label.as_bytes()]))
    }

    pub fn from_secret(secret: Scalar) -> Self {
        let public = PublicKey::from_point(RistrettoPoint::mul_base(&secret));
        Self { secret, public }
    }

    pub fn secret(&self) -> &Scalar {
        &self.secret
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

pub fn keygen(seed: &[u8; 32]) -> KeyPair {
    KeyPair::from_seed(seed)
}

/// Derives a signing nonce from the secret key and message.
pub fn deterministic_nonce(secret: &Scalar, msg: &[u8]) -> Scalar {
    rejection_scalar(b"stakecosi/nonce", &[secret.as_bytes(), msg])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchnorrSignature {
    pub s: Scalar,
    pub e: Scalar,
}

impl SchnorrSignature {
    pub const ENCODED_LEN: usize = 64;

    /// `s || e`, each as 32 little-endian bytes.
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(self.s.as_bytes());
        out[32..].copy_from_slice(self.e.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 64 {
            return Err(CryptoError::InvalidScalar);
        }
        Ok(Self {
            s: decode_scalar(&bytes[..32])?,
            e: decode_scalar(&bytes[32..])?,
        })
    }
}

impl Serialize for SchnorrSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for SchnorrSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(s).map_err(serde::de::Error::custom)?;
        SchnorrSignature::from_bytes(&raw).map_err(serde::de::Error::custom)
    }
}

fn signature_challenge(r: &RistrettoPoint, msg: &[u8]) -> Scalar {
    hash_to_scalar(&[&encode_point(r), msg])
}

pub fn schnorr_sign(kp: &KeyPair, msg: &[u8], nonce: &Scalar) -> Result<SchnorrSignature, CryptoError> {
    if *nonce == Scalar::ZERO {
        return Err(CryptoError::ZeroNonce);
    }
    let r = RistrettoPoint::mul_base(nonce);
    let e = signature_challenge(&r, msg);
    let s = nonce - e * kp.secret;
    Ok(SchnorrSignature { s, e })
}

/// Signs with a nonce derived from `(secret, msg)`.
pub fn schnorr_sign_deterministic(kp: &KeyPair, msg: &[u8]) -> SchnorrSignature {
    let k = deterministic_nonce(&kp.secret, msg);
    schnorr_sign(kp, msg, &k).expect("derived nonces are non-zero")
}

pub fn schnorr_verify(public: &PublicKey, msg: &[u8], sig: &SchnorrSignature) -> bool {
    // s*G + e*Q
    let rv = RistrettoPoint::vartime_multiscalar_mul([sig.s, sig.e], [RISTRETTO_BASEPOINT_POINT, public.point]);
    signature_challenge(&rv, msg) == sig.e
}

/// Sums the keys whose mask bit is set. An all-clear mask yields the identity.
pub fn aggregate_keys(pubs: &[PublicKey], mask: &Bitmask) -> Result<RistrettoPoint, CryptoError> {
    if mask.len() != pubs.len() {
        return Err(CryptoError::LengthMismatch {
            mask: mask.len(),
            keys: pubs.len(),
        });
    }
    Ok(mask.iter_set().map(|i| pubs[i].point).sum())
}

/// Sum of every key, i.e. the full-group aggregate.
pub fn aggregate_all(pubs: &[PublicKey]) -> RistrettoPoint {
    pubs.iter().map(|p| p.point).sum()
}

/// Hex serde for raw group elements inside protocol messages.
pub mod serde_point {
    use super::*;

    pub fn serialize<S: Serializer>(p: &RistrettoPoint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(encode_point(p)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RistrettoPoint, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(s).map_err(serde::de::Error::custom)?;
        decode_point(&raw).map_err(serde::de::Error::custom)
    }
}

/// Hex serde for scalars inside protocol messages.
pub mod serde_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v.as_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(s).map_err(serde::de::Error::custom)?;
        decode_scalar(&raw).map_err(serde::de::Error::custom)
    }
}
