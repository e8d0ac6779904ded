use serde::{Deserialize, Serialize};

use crate::codec::{Hash32, Writer};
use crate::crypto::{schnorr_sign_deterministic, schnorr_verify, KeyPair, PublicKey, SchnorrSignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    /// Moves balance to the recipient's balance.
    Normal,
    /// Moves balance to the recipient's stake.
    Stake,
}

impl TxKind {
    fn tag(self) -> u8 {
        match self {
            TxKind::Normal => 0,
            TxKind::Stake => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub kind: TxKind,
    pub from: PublicKey,
    pub to: PublicKey,
    pub amount: u64,
    pub fee: u64,
    pub nonce: u64,
    pub signature: SchnorrSignature,
}

impl Transaction {
    pub fn signed(kind: TxKind, from: &KeyPair, to: PublicKey, amount: u64, fee: u64, nonce: u64) -> Self {
        let body = body_bytes(kind, from.public(), &to, amount, fee, nonce);
        let signature = schnorr_sign_deterministic(from, &body);
        Self {
            kind,
            from: *from.public(),
            to,
            amount,
            fee,
            nonce,
            signature,
        }
    }

    /// Everything except the signature; this is what gets signed.
    pub fn body_bytes(&self) -> Vec<u8> {
        body_bytes(self.kind, &self.from, &self.to, self.amount, self.fee, self.nonce)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.body_bytes();
        b.extend_from_slice(&self.signature.to_bytes());
        b
    }

    pub fn id(&self) -> Hash32 {
        Hash32::of(&[&self.to_bytes()])
    }

    /// Verifies the sender's signature. Results are memoised per thread by
    /// transaction id, which covers the signature bytes, because the same
    /// transaction is checked by every mempool, proposal and block replay.
    pub fn signature_valid(&self) -> bool {
        let id = self.id();
        if let Some(ok) = SIG_MEMO.with(|m| m.borrow().get(&id).copied()) {
            return ok;
        }
        let ok = schnorr_verify(&self.from, &self.body_bytes(), &self.signature);
        SIG_MEMO.with(|m| {
            let mut m = m.borrow_mut();
            if m.len() >= SIG_MEMO_CAP {
                m.clear();
            }
            m.insert(id, ok);
        });
        ok
    }
}

const SIG_MEMO_CAP: usize = 1 << 16;

thread_local! {
    static SIG_MEMO: std::cell::RefCell<std::collections::HashMap<Hash32, bool>> = Default::default();
}

fn body_bytes(kind: TxKind, from: &PublicKey, to: &PublicKey, amount: u64, fee: u64, nonce: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(kind.tag())
        .raw(from.as_bytes())
        .raw(to.as_bytes())
        .u64(amount)
        .u64(fee)
        .u64(nonce);
    w.finish()
}
