//! Proof-of-stake slot-leader election combined with two-round collective
//! signing, and a deterministic discrete-event simulator to exercise it.

pub mod bench;
pub mod codec;
pub mod consensus;
pub mod cosi;
pub mod crypto;
pub mod election;
pub mod ledger;
pub mod mask;
pub mod simnet;
pub mod testkit;
pub mod vectors;

pub use codec::Hash32;
pub use cosi::{cosi_verify, CollectiveSignature};
pub use crypto::{KeyPair, PublicKey, Scalar, SchnorrSignature};
pub use mask::Bitmask;
