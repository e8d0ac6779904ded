use serde::{Deserialize, Serialize};

use super::tx::Transaction;
use crate::codec::{Hash32, Writer};
use crate::cosi::CollectiveSignature;
use crate::crypto::PublicKey;

/// Everything a leader proposes: header fields and the ordered transactions.
/// These bytes are what the first collective-signing round signs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockContent {
    pub parent_hash: Hash32,
    pub slot: u64,
    /// Fallback position of `leader` in the slot's schedule.
    pub round: u32,
    pub leader: PublicKey,
    pub transactions: Vec<Transaction>,
}

impl BlockContent {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.parent_hash.0)
            .u64(self.slot)
            .u32(self.round)
            .raw(self.leader.as_bytes());
        w.u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            w.var(&tx.to_bytes());
        }
        w.finish()
    }

    pub fn digest(&self) -> Hash32 {
        Hash32::of(&[&self.to_bytes()])
    }

    pub fn total_fees(&self) -> u64 {
        self.transactions.iter().map(|t| t.fee).sum()
    }
}

/// The message signed in the commit round: content digest followed by the
/// serialized proof-of-acceptance.
pub fn commit_message(content_digest: &Hash32, prepare_sig: &CollectiveSignature) -> Vec<u8> {
    let mut m = content_digest.0.to_vec();
    m.extend_from_slice(&prepare_sig.to_bytes());
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(flatten)]
    pub content: BlockContent,
    pub prepare_sig: CollectiveSignature,
    pub commit_sig: CollectiveSignature,
}

impl Block {
    pub fn slot(&self) -> u64 {
        self.content.slot
    }

    pub fn leader(&self) -> &PublicKey {
        &self.content.leader
    }

    pub fn parent_hash(&self) -> &Hash32 {
        &self.content.parent_hash
    }

    /// Content bytes, then each signature as `u32 mask bits || V || r || Z`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.content.to_bytes());
        for sig in [&self.prepare_sig, &self.commit_sig] {
            w.u32(sig.mask.len() as u32).raw(&sig.to_bytes());
        }
        w.finish()
    }

    pub fn hash(&self) -> Hash32 {
        Hash32::of(&[&self.to_bytes()])
    }
}

pub fn block_hash(block: &Block) -> Hash32 {
    block.hash()
}
