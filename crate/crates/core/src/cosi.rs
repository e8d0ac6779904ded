//! Four-phase collective signing.
//!
//! Announcement, Commitment, Challenge and Response produce a signature
//! `(V, r, Z)`: `V` is the sum of participant commitments, `r` the sum of
//! participant responses and `Z` the participation bitmask. The challenge
//! binds the aggregate key of the *whole* group, while verification checks
//! `r*G == V + c*A_Z` with `A_Z` summed over the bits of `Z` only.

use curve25519_dalek::ristretto::RistrettoPoint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{
    aggregate_all, aggregate_keys, decode_point, decode_scalar, encode_point, hash_to_scalar, identity, KeyPair,
    PublicKey, Scalar,
};
use crate::mask::Bitmask;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CosiError {
    #[error("commitment index {0} appears twice")]
    DuplicateIndex(usize),
    #[error("commitment index {index} outside group of {group_size}")]
    IndexOutOfRange { index: usize, group_size: usize },
    #[error("only {got} participants, {need} required")]
    InsufficientParticipation { got: usize, need: usize },
    #[error("leader is offline")]
    LeaderOffline,
    #[error("leader index {0} is outside the group")]
    BadLeader(usize),
    #[error("online mask covers {mask} members, group has {group}")]
    MaskLength { mask: usize, group: usize },
}

/// Largest `f` with `3f + 1 <= m`.
pub fn fault_bound(group_size: usize) -> usize {
    group_size.saturating_sub(1) / 3
}

/// Super-majority quorum `m - f`; equals `2f + 1` when `m = 3f + 1`.
pub fn min_participants(group_size: usize) -> usize {
    group_size - fault_bound(group_size)
}

/// The public half of a member's commitment, as sent to the leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commitment {
    pub index: usize,
    pub point: RistrettoPoint,
}

/// A commitment together with the secret scalar behind it.
#[derive(Clone)]
pub struct PendingCommitment {
    pub commitment: Commitment,
    nonce: Scalar,
}

impl PendingCommitment {
    pub fn nonce(&self) -> &Scalar {
        &self.nonce
    }
}

impl std::fmt::Debug for PendingCommitment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PendingCommitment")
            .field("commitment", &self.commitment)
            .finish()
    }
}

/// Derives `v_i` from the member secret and `rng_seed`, never zero.
pub fn make_commitment(member: &KeyPair, index: usize, rng_seed: &[u8]) -> PendingCommitment {
    let mut ctr: u32 = 0;
    let nonce = loop {
        let v = hash_to_scalar(&[
            b"stakecosi/cosi-commit",
            member.secret().as_bytes(),
            rng_seed,
            &ctr.to_be_bytes(),
        ]);
        if v != Scalar::ZERO {
            break v;
        }
        ctr += 1;
    };
    let point = RistrettoPoint::mul_base(&nonce);
    PendingCommitment {
        commitment: Commitment { index, point },
        nonce,
    }
}

pub fn aggregate_commitments(
    commitments: &[Commitment],
    group_size: usize,
) -> Result<(RistrettoPoint, Bitmask), CosiError> {
    let mut mask = Bitmask::new(group_size);
    let mut v = identity();
    for c in commitments {
        if c.index >= group_size {
            return Err(CosiError::IndexOutOfRange {
                index: c.index,
                group_size,
            });
        }
        if mask.get(c.index) {
            return Err(CosiError::DuplicateIndex(c.index));
        }
        mask.set(c.index, true);
        v += c.point;
    }
    Ok((v, mask))
}

/// `c = H(V || A || M)` reduced mod q.
pub fn challenge(v: &RistrettoPoint, a: &RistrettoPoint, msg: &[u8]) -> Scalar {
    hash_to_scalar(&[&encode_point(v), &encode_point(a), msg])
}

/// `r_i = v_i + c * a_i`.
pub fn respond(pending: &PendingCommitment, member: &KeyPair, c: &Scalar) -> Scalar {
    pending.nonce + c * member.secret()
}

pub fn aggregate_responses(responses: &[Scalar]) -> Scalar {
    responses.iter().sum()
}

/// Checks one member's (or one subtree's) share: `r*G == V + c*A`.
pub fn partial_response_valid(
    commitment: &RistrettoPoint,
    key: &RistrettoPoint,
    response: &Scalar,
    c: &Scalar,
) -> bool {
    RistrettoPoint::mul_base(response) == commitment + key * c
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectiveSignature {
    /// Aggregate commitment `V`.
    pub commitment: RistrettoPoint,
    /// Aggregate response `r`.
    pub response: Scalar,
    /// Participation bitmask `Z`.
    pub mask: Bitmask,
}

impl CollectiveSignature {
    /// `encode(V) || encode(r) || mask bytes`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.mask.as_bytes().len());
        out.extend_from_slice(&encode_point(&self.commitment));
        out.extend_from_slice(self.response.as_bytes());
        out.extend_from_slice(self.mask.as_bytes());
        out
    }

    /// Decodes a signature for a group of `group_size` members.
    pub fn from_bytes(group_size: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != 64 + group_size.div_ceil(8) {
            return None;
        }
        Some(Self {
            commitment: decode_point(&bytes[..32]).ok()?,
            response: decode_scalar(&bytes[32..64]).ok()?,
            mask: Bitmask::from_bytes(group_size, &bytes[64..])?,
        })
    }

    pub fn participants(&self) -> usize {
        self.mask.count()
    }
}

#[derive(Serialize, Deserialize)]
struct CollectiveSignatureRepr {
    #[serde(rename = "V")]
    commitment: String,
    r: String,
    #[serde(rename = "Z")]
    mask: Bitmask,
}

impl Serialize for CollectiveSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CollectiveSignatureRepr {
            commitment: hex::encode(encode_point(&self.commitment)),
            r: hex::encode(self.response.as_bytes()),
            mask: self.mask.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CollectiveSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = CollectiveSignatureRepr::deserialize(d)?;
        let v = hex::decode(&r.commitment).map_err(D::Error::custom)?;
        let s = hex::decode(&r.r).map_err(D::Error::custom)?;
        Ok(CollectiveSignature {
            commitment: decode_point(&v).map_err(D::Error::custom)?,
            response: decode_scalar(&s).map_err(D::Error::custom)?,
            mask: r.mask,
        })
    }
}

/// Verifies a collective signature against the full ordered group.
pub fn cosi_verify(sig: &CollectiveSignature, group_pubs: &[PublicKey], msg: &[u8], min_participants: usize) -> bool {
    if sig.mask.len() != group_pubs.len() || sig.mask.count() < min_participants {
        return false;
    }
    let Ok(a_z) = aggregate_keys(group_pubs, &sig.mask) else {
        return false;
    };
    let a = aggregate_all(group_pubs);
    let c = challenge(&sig.commitment, &a, msg);
    partial_response_valid(&sig.commitment, &a_z, &sig.response, &c)
}

/// Runs all four phases in-process: every member set in `online` commits
/// and responds, the member at `leader_index` coordinates.
pub fn run_cosi_round(
    leader_index: usize,
    msg: &[u8],
    online: &Bitmask,
    group: &[KeyPair],
    min_participants: usize,
) -> Result<CollectiveSignature, CosiError> {
    if online.len() != group.len() {
        return Err(CosiError::MaskLength {
            mask: online.len(),
            group: group.len(),
        });
    }
    if leader_index >= group.len() {
        return Err(CosiError::BadLeader(leader_index));
    }
    if !online.get(leader_index) {
        return Err(CosiError::LeaderOffline);
    }
    let got = online.count();
    if got < min_participants {
        return Err(CosiError::InsufficientParticipation {
            got,
            need: min_participants,
        });
    }
    let pubs: Vec<PublicKey> = group.iter().map(|k| *k.public()).collect();
    let a = aggregate_all(&pubs);

    // Announcement + Commitment
    let pending: Vec<PendingCommitment> = online
        .iter_set()
        .map(|i| make_commitment(&group[i], i, &[msg, &(i as u64).to_le_bytes()].concat()))
        .collect();
    let commits: Vec<Commitment> = pending.iter().map(|p| p.commitment).collect();
    let (v, mask) = aggregate_commitments(&commits, group.len())?;

    // Challenge + Response
    let c = challenge(&v, &a, msg);
    let responses: Vec<Scalar> = pending
        .iter()
        .map(|p| respond(p, &group[p.commitment.index], &c))
        .collect();
    let r = aggregate_responses(&responses);
    Ok(CollectiveSignature {
        commitment: v,
        response: r,
        mask,
    })
}
