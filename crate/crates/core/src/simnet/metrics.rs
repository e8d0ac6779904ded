use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::Hash32;

/// One row per slot of the canonical honest chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub committed: bool,
    pub round: Option<u32>,
    pub leader: Option<String>,
    pub latency: Option<u64>,
    pub prepare_participants: Option<usize>,
    pub commit_participants: Option<usize>,
    pub transactions: usize,
    pub hash: Option<Hash32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_slots: u64,
    pub committed_blocks: u64,
    pub skipped_slots: u64,
    pub total_messages: u64,
    pub dropped_messages: u64,
    pub duplicated_messages: u64,
    pub cosi_sessions: u64,
    pub cosi_messages: u64,
    pub messages_per_cosi_round: f64,
    pub leadership: BTreeMap<String, u64>,
    pub fork_count: u64,
    pub finality_violations: u64,
    pub conservation_violations: u64,
    pub honest_chains_identical: bool,
    pub max_observed_delay: u64,
    pub final_tick: u64,
    pub mean_commit_latency: Option<f64>,
    pub trace_digest: Hash32,
    pub slots: Vec<SlotRecord>,
}

impl Metrics {
    /// Per-slot rows as CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "slot",
            "committed",
            "round",
            "leader",
            "latency",
            "prepare_participants",
            "commit_participants",
            "transactions",
            "hash",
        ])
        .expect("in-memory write");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.slots {
            w.write_record([
                r.slot.to_string(),
                r.committed.to_string(),
                opt(r.round.map(|v| v.to_string())),
                opt(r.leader.clone()),
                opt(r.latency.map(|v| v.to_string())),
                opt(r.prepare_participants.map(|v| v.to_string())),
                opt(r.commit_participants.map(|v| v.to_string())),
                r.transactions.to_string(),
                opt(r.hash.map(|h| h.to_hex())),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
    }
}
