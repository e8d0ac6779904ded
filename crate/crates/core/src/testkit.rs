//! Helpers shared by unit tests, integration tests and benches.

use crate::cosi::{min_participants, run_cosi_round};
use crate::crypto::{KeyPair, PublicKey};
use crate::ledger::{commit_message, Block, BlockContent, Genesis, GenesisAccount, ProtocolParams};
use crate::mask::Bitmask;

/// Named key pairs derived from labels.
#[derive(Debug, Clone)]
pub struct Keyring {
    keys: Vec<KeyPair>,
}

impl Keyring {
    pub fn new(labels: &[&str]) -> Self {
        Self {
            keys: labels.iter().map(|l| KeyPair::from_label(l)).collect(),
        }
    }

    pub fn numbered(prefix: &str, n: usize) -> Self {
        Self {
            keys: (0..n).map(|i| KeyPair::from_label(&format!("{prefix}{i}"))).collect(),
        }
    }

    pub fn key(&self, i: usize) -> &KeyPair {
        &self.keys[i]
    }

    pub fn keys(&self) -> &[KeyPair] {
        &self.keys
    }

    pub fn pubs(&self) -> Vec<PublicKey> {
        self.keys.iter().map(|k| *k.public()).collect()
    }

    /// Genesis with `(balance, stake)` per key, in keyring order.
    pub fn genesis(&self, alloc: &[(u64, u64)], group_size: u32, timeout_ticks: u64) -> Genesis {
        Genesis {
            accounts: self
                .keys
                .iter()
                .zip(alloc)
                .map(|(k, &(balance, stake))| GenesisAccount {
                    pubkey: *k.public(),
                    balance,
                    stake,
                })
                .collect(),
            params: ProtocolParams {
                horizon: crate::ledger::DEFAULT_HORIZON,
                group_size,
                timeout_ticks,
            },
        }
    }
}

/// Runs both signing rounds in-process with every member of `group`.
pub fn seal_block(content: BlockContent, group: &[KeyPair]) -> Block {
    let online = Bitmask::full(group.len());
    let min = min_participants(group.len());
    let prepare_sig = run_cosi_round(0, &content.to_bytes(), &online, group, min).expect("full group reaches quorum");
    let msg = commit_message(&content.digest(), &prepare_sig);
    let commit_sig = run_cosi_round(0, &msg, &online, group, min).expect("full group reaches quorum");
    Block {
        content,
        prepare_sig,
        commit_sig,
    }
}
