//! Criterion benchmarks live in `benches/`; this crate has no library code
//! beyond the fixtures they share.

use stakecosi_core::crypto::KeyPair;
use stakecosi_core::ledger::{Stakeholder, StakeholderList};

pub fn stakeholders(n: usize, stake: u64) -> StakeholderList {
    StakeholderList {
        entries: (0..n)
            .map(|i| Stakeholder {
                pubkey: *KeyPair::from_label(&format!("bench/{i}")).public(),
                stake,
            })
            .collect(),
    }
}
