//! Deterministic discrete-event network. Every random choice (delays, drops,
//! duplicates, client transactions) comes from a seeded generator, and
//! events run in `(deliver_at, uid)` order, so equal inputs replay exactly.

mod metrics;
mod queue;
pub mod scenario;
mod topology;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use metrics::{Metrics, SlotRecord};
pub use queue::{EventQueue, Payload, SimEvent};
pub use topology::{count_messages, MessageCount, Topology};

use crate::codec::Hash32;
use crate::consensus::{
    Behavior, Directory, EventKind, Message, Node, NodeConfig, NodeId, Outbox, Output, ProtocolEvent, SessionId,
};
use crate::cosi::fault_bound;
use crate::crypto::KeyPair;
use crate::election::{signing_group, Prng};
use crate::ledger::{Block, Chain, Genesis, GenesisError, Transaction, TxKind};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Genesis(#[from] GenesisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultConfig {
    pub min_delay: u64,
    pub max_delay: u64,
    pub drop_probability: f64,
    pub duplicate_probability: f64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            min_delay: 1,
            max_delay: 5,
            drop_probability: 0.0,
            duplicate_probability: 0.0,
        }
    }
}

/// Client transactions injected when each slot starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workload {
    pub tx_per_slot: u32,
    pub stake_fraction: f64,
    pub max_amount: u64,
    pub max_fee: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            tx_per_slot: 2,
            stake_fraction: 0.1,
            max_amount: 5,
            max_fee: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub genesis: Genesis,
    /// One key per genesis account, in the same order.
    pub keys: Vec<KeyPair>,
    pub names: Vec<String>,
    pub behaviors: Vec<Behavior>,
    pub faults: FaultConfig,
    pub topology: Topology,
    pub n_slots: u64,
    pub seed: u64,
    pub workload: Workload,
    pub max_attempts: u32,
    pub max_block_txs: usize,
    /// Hash every processed event into the trace digest.
    pub record_trace: bool,
}

impl SimConfig {
    /// An all-honest network of the given keys with default faults.
    pub fn honest(genesis: Genesis, keys: Vec<KeyPair>, n_slots: u64, seed: u64) -> Self {
        let names = (0..keys.len()).map(|i| format!("n{i}")).collect();
        let behaviors = vec![Behavior::Honest; keys.len()];
        Self {
            genesis,
            keys,
            names,
            behaviors,
            faults: FaultConfig::default(),
            topology: Topology::Flat,
            n_slots,
            seed,
            workload: Workload::default(),
            max_attempts: 4,
            max_block_txs: 16,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        self.genesis.validate()?;
        let n = self.genesis.accounts.len();
        if self.keys.len() != n || self.names.len() != n || self.behaviors.len() != n {
            return bad(format!("expected {n} keys, names and behaviors"));
        }
        for (k, a) in self.keys.iter().zip(&self.genesis.accounts) {
            if *k.public() != a.pubkey {
                return bad(format!("key {} does not match its genesis account", k.public().short()));
            }
        }
        let f = &self.faults;
        if f.max_delay >= self.genesis.params.timeout_ticks {
            return bad(format!(
                "max_delay {} must be below timeout_ticks {}",
                f.max_delay, self.genesis.params.timeout_ticks
            ));
        }
        if f.min_delay > f.max_delay {
            return bad("min_delay exceeds max_delay".into());
        }
        for (name, p) in [
            ("drop_probability", f.drop_probability),
            ("duplicate_probability", f.duplicate_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if f.drop_probability >= 1.0 {
            return bad("drop_probability 1 leaves no delivery bound".into());
        }
        if !(0.0..=1.0).contains(&self.workload.stake_fraction) {
            return bad("stake_fraction must lie in [0, 1]".into());
        }
        if self.topology.branching() == Some(0) {
            return bad("tree branching must be at least 1".into());
        }
        if self.n_slots == 0 || self.max_attempts == 0 {
            return bad("n_slots and max_attempts must be positive".into());
        }
        Ok(())
    }

    /// Non-honest members of the genesis signing group.
    pub fn faulty_signers(&self) -> usize {
        let chain_stake = Chain::new(self.genesis.clone()).map(|c| c.state().stakeholders());
        let Ok(list) = chain_stake else { return 0 };
        let group = signing_group(&list, self.genesis.params.group_size as usize);
        group
            .iter()
            .filter(|pk| {
                self.keys
                    .iter()
                    .position(|k| k.public() == *pk)
                    .is_some_and(|i| !self.behaviors[i].is_honest())
            })
            .count()
    }

    /// Whether more signers misbehave than the group tolerates.
    pub fn liveness_guaranteed(&self) -> bool {
        let m = self.genesis.params.group_size.min(self.genesis.accounts.len() as u32) as usize;
        self.faulty_signers() <= fault_bound(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotOutcome {
    Committed(Box<Block>),
    Skipped,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub metrics: Metrics,
    /// Final chain of every honest node, by node index.
    pub honest_chains: Vec<(usize, Chain)>,
    pub events: Vec<ProtocolEvent>,
}

impl SimOutcome {
    pub fn canonical_chain(&self) -> Option<&Chain> {
        self.honest_chains.iter().map(|(_, c)| c).max_by_key(|c| c.height())
    }
}

/// Detects forks and finality violations across honest appends.
#[derive(Debug, Default)]
struct Monitor {
    first: HashMap<usize, Hash32>,
    heights: HashMap<NodeId, usize>,
    fork_heights: BTreeSet<usize>,
    finality_violations: u64,
    conservation_violations: u64,
}

pub struct Simulation {
    cfg: SimConfig,
    now: u64,
    queue: EventQueue,
    net_rng: Prng,
    wallet_rng: Prng,
    nodes: Vec<Node>,
    honest: Vec<usize>,
    supply: u128,
    monitor: Monitor,
    started: BTreeSet<u64>,
    wallet_nonce: Vec<u64>,
    wallet_budget: Vec<u64>,
    committed: BTreeMap<u64, EventKind>,
    events: Vec<ProtocolEvent>,
    trace: Sha256,
    total_messages: u64,
    dropped: u64,
    duplicated: u64,
    session_msgs: HashMap<SessionId, u64>,
    max_delay_seen: u64,
    tick_limit: u64,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let chain = Chain::new(cfg.genesis.clone())?;
        let supply = chain.state().total_supply();
        let dir = Arc::new(Directory::new(cfg.keys.iter().map(|k| *k.public()).collect()));
        let node_cfg = NodeConfig {
            timeout_ticks: cfg.genesis.params.timeout_ticks,
            max_delay: cfg.faults.max_delay,
            branching: cfg.topology.branching(),
            max_attempts: cfg.max_attempts,
            max_block_txs: cfg.max_block_txs,
            last_slot: cfg.n_slots,
        };
        let nodes: Vec<Node> = cfg
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                Node::new(
                    NodeId(i),
                    k.clone(),
                    cfg.behaviors[i].clone(),
                    node_cfg.clone(),
                    dir.clone(),
                    chain.clone(),
                )
            })
            .collect();
        let honest = (0..nodes.len()).filter(|&i| cfg.behaviors[i].is_honest()).collect();
        let mut queue = EventQueue::new();
        for (i, b) in cfg.behaviors.iter().enumerate() {
            let id = NodeId(i);
            queue.push(0, 0, id, id, Payload::Start);
            if let Behavior::Offline { to: Some(t), .. } = b {
                queue.push(*t, 0, id, id, Payload::Wake);
            }
        }
        let horizon = cfg.genesis.params.horizon as u64;
        let tick_limit = (cfg.n_slots + 2) * (horizon + 1) * cfg.genesis.params.timeout_ticks;
        let wallet_budget = cfg.genesis.accounts.iter().map(|a| a.balance).collect();
        Ok(Self {
            now: 0,
            queue,
            net_rng: Prng::new(cfg.seed),
            wallet_rng: Prng::new(cfg.seed ^ 0x5eed_c11e_47a1_1e75),
            honest,
            supply,
            monitor: Monitor::default(),
            started: BTreeSet::new(),
            wallet_nonce: vec![0; nodes.len()],
            wallet_budget,
            committed: BTreeMap::new(),
            events: Vec::new(),
            trace: Sha256::new(),
            total_messages: 0,
            dropped: 0,
            duplicated: 0,
            session_msgs: HashMap::new(),
            max_delay_seen: 0,
            tick_limit,
            nodes,
            cfg,
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn honest_done_with(&self, slot: u64) -> bool {
        self.honest
            .iter()
            .all(|&i| self.nodes[i].finished() || self.nodes[i].slot() > slot)
    }

    /// Runs until every honest node has moved past `slot`.
    pub fn run_slot(&mut self, slot: u64) -> SlotOutcome {
        while !self.honest_done_with(slot) && self.step() {}
        let block = self
            .honest
            .iter()
            .flat_map(|&i| self.nodes[i].chain().blocks().iter())
            .find(|b| b.slot() == slot);
        match block {
            Some(b) => SlotOutcome::Committed(Box::new(b.clone())),
            None => SlotOutcome::Skipped,
        }
    }

    /// Processes one event. Returns false once the queue is empty or the
    /// tick budget is spent.
    pub fn step(&mut self) -> bool {
        let Some(ev) = self.queue.pop() else { return false };
        if ev.deliver_at > self.tick_limit {
            return false;
        }
        self.now = ev.deliver_at;
        if self.cfg.record_trace {
            let line = serde_json::to_vec(&ev).expect("events serialize");
            self.trace.update(&line);
            self.trace.update(b"\n");
        }
        let i = ev.to.0;
        if self.cfg.behaviors[i].offline_at(self.now) {
            return true;
        }
        if let Payload::Message { .. } = ev.payload {
            self.max_delay_seen = self.max_delay_seen.max(ev.deliver_at - ev.sent_at);
        }
        let mut out = Outbox::new();
        let node = &mut self.nodes[i];
        match ev.payload {
            Payload::Start => node.start(self.now, &mut out),
            Payload::Wake => node.wake(self.now, &mut out),
            Payload::Timer { timer } => node.handle_timer(self.now, timer, &mut out),
            Payload::Message { msg } => node.handle_message(self.now, ev.from, msg, &mut out),
        }
        self.route(ev.to, out);
        true
    }

    fn route(&mut self, from: NodeId, out: Outbox) {
        for o in out.into_vec() {
            match o {
                Output::Send { to, msg } => self.send(from, to, msg),
                Output::Timer { after, timer } => {
                    self.queue
                        .push(self.now + after, self.now, from, from, Payload::Timer { timer });
                }
                Output::Appended {
                    height, hash, supply, ..
                } => self.observe_append(from, height, hash, supply),
                Output::Event(kind) => self.observe_event(from, kind),
            }
        }
    }

    fn send(&mut self, from: NodeId, to: NodeId, msg: Message) {
        if from == to {
            self.queue.push(self.now, self.now, from, to, Payload::Message { msg });
            return;
        }
        self.total_messages += 1;
        if let Some(s) = msg.session() {
            *self.session_msgs.entry(*s).or_default() += 1;
        }
        let f = &self.cfg.faults;
        if f.drop_probability > 0.0 && self.net_rng.next_f64() < f.drop_probability {
            self.dropped += 1;
            return;
        }
        let spread = f.max_delay - f.min_delay + 1;
        let dup = f.duplicate_probability > 0.0 && self.net_rng.next_f64() < f.duplicate_probability;
        let delay = f.min_delay + self.net_rng.below(spread);
        if dup {
            self.duplicated += 1;
            let delay2 = f.min_delay + self.net_rng.below(spread);
            let copy = Payload::Message { msg: msg.clone() };
            self.queue.push(self.now + delay2, self.now, from, to, copy);
        }
        self.queue
            .push(self.now + delay, self.now, from, to, Payload::Message { msg });
    }

    fn observe_append(&mut self, node: NodeId, height: usize, hash: Hash32, supply: u128) {
        if supply != self.supply {
            self.monitor.conservation_violations += 1;
        }
        if !self.cfg.behaviors[node.0].is_honest() {
            return;
        }
        let m = &mut self.monitor;
        let prev = m.heights.insert(node, height).unwrap_or(0);
        if height != prev + 1 {
            m.finality_violations += 1;
        }
        match m.first.get(&height) {
            Some(h) if *h != hash => {
                m.finality_violations += 1;
                m.fork_heights.insert(height);
            }
            Some(_) => {}
            None => {
                m.first.insert(height, hash);
            }
        }
    }

    fn observe_event(&mut self, node: NodeId, kind: EventKind) {
        match &kind {
            EventKind::SlotStarted { slot } if self.started.insert(*slot) => self.inject_workload(),
            EventKind::Committed { slot, .. } => {
                self.committed.entry(*slot).or_insert_with(|| kind.clone());
            }
            _ => {}
        }
        self.events.push(ProtocolEvent {
            tick: self.now,
            node,
            kind,
        });
    }

    fn inject_workload(&mut self) {
        let w = self.cfg.workload.clone();
        let n = self.nodes.len();
        for _ in 0..w.tx_per_slot {
            let amount = 1 + self.wallet_rng.below(w.max_amount.max(1));
            let fee = self.wallet_rng.below(w.max_fee + 1);
            let funded: Vec<usize> = (0..n).filter(|&i| self.wallet_budget[i] >= amount + fee).collect();
            if funded.is_empty() {
                return;
            }
            let from = funded[self.wallet_rng.below(funded.len() as u64) as usize];
            let stake = self.wallet_rng.next_f64() < w.stake_fraction;
            let to = if stake || n == 1 {
                from
            } else {
                let j = self.wallet_rng.below(n as u64 - 1) as usize;
                if j >= from {
                    j + 1
                } else {
                    j
                }
            };
            let kind = if stake { TxKind::Stake } else { TxKind::Normal };
            let key = &self.cfg.keys[from];
            let tx = Transaction::signed(
                kind,
                key,
                *self.cfg.keys[to].public(),
                amount,
                fee,
                self.wallet_nonce[from],
            );
            self.wallet_nonce[from] += 1;
            self.wallet_budget[from] -= amount + fee;
            for node in &mut self.nodes {
                node.submit(tx.clone());
            }
        }
    }

    /// Runs every slot and gathers the results.
    pub fn run(mut self) -> SimOutcome {
        while !self.honest_done_with(self.cfg.n_slots) && self.step() {}
        self.finish()
    }

    pub fn finish(self) -> SimOutcome {
        let honest_chains: Vec<(usize, Chain)> = self
            .honest
            .iter()
            .map(|&i| (i, self.nodes[i].chain().clone()))
            .collect();
        let canonical = honest_chains.iter().map(|(_, c)| c).max_by_key(|c| c.height());
        let identical = honest_chains
            .windows(2)
            .all(|w| w[0].1.block_hashes() == w[1].1.block_hashes());
        // Disagreement between final chains also counts as a fork.
        let mut fork_heights = self.monitor.fork_heights.clone();
        if let Some(c) = canonical {
            for (_, other) in &honest_chains {
                for (h, (a, b)) in c.block_hashes().iter().zip(other.block_hashes()).enumerate() {
                    if a != b {
                        fork_heights.insert(h + 1);
                    }
                }
            }
        }

        let name_of = |pk: &crate::crypto::PublicKey| {
            self.cfg
                .keys
                .iter()
                .position(|k| k.public() == pk)
                .map(|i| self.cfg.names[i].clone())
                .unwrap_or_else(|| pk.short())
        };
        let mut leadership: BTreeMap<String, u64> = self.cfg.names.iter().map(|n| (n.clone(), 0)).collect();
        let mut slots = Vec::new();
        let by_slot: HashMap<u64, &Block> = canonical
            .map(|c| c.blocks().iter().map(|b| (b.slot(), b)).collect())
            .unwrap_or_default();
        let mut latencies = Vec::new();
        for slot in 1..=self.cfg.n_slots {
            let rec = match by_slot.get(&slot) {
                Some(b) => {
                    let leader = name_of(b.leader());
                    *leadership.entry(leader.clone()).or_default() += 1;
                    let latency = match self.committed.get(&slot) {
                        Some(EventKind::Committed { latency, hash, .. }) if *hash == b.hash() => Some(*latency),
                        _ => None,
                    };
                    latencies.extend(latency);
                    SlotRecord {
                        slot,
                        committed: true,
                        round: Some(b.content.round),
                        leader: Some(leader),
                        latency,
                        prepare_participants: Some(b.prepare_sig.participants()),
                        commit_participants: Some(b.commit_sig.participants()),
                        transactions: b.content.transactions.len(),
                        hash: Some(b.hash()),
                    }
                }
                None => SlotRecord {
                    slot,
                    committed: false,
                    round: None,
                    leader: None,
                    latency: None,
                    prepare_participants: None,
                    commit_participants: None,
                    transactions: 0,
                    hash: None,
                },
            };
            slots.push(rec);
        }
        let committed_blocks = slots.iter().filter(|s| s.committed).count() as u64;
        let cosi_messages: u64 = self.session_msgs.values().sum();
        let cosi_sessions = self.session_msgs.len() as u64;
        let metrics = Metrics {
            n_slots: self.cfg.n_slots,
            committed_blocks,
            skipped_slots: self.cfg.n_slots - committed_blocks,
            total_messages: self.total_messages,
            dropped_messages: self.dropped,
            duplicated_messages: self.duplicated,
            cosi_sessions,
            cosi_messages,
            messages_per_cosi_round: if cosi_sessions == 0 {
                0.0
            } else {
                cosi_messages as f64 / cosi_sessions as f64
            },
            leadership,
            fork_count: fork_heights.len() as u64,
            finality_violations: self.monitor.finality_violations,
            conservation_violations: self.monitor.conservation_violations,
            honest_chains_identical: identical,
            max_observed_delay: self.max_delay_seen,
            final_tick: self.now,
            mean_commit_latency: (!latencies.is_empty())
                .then(|| latencies.iter().sum::<u64>() as f64 / latencies.len() as f64),
            trace_digest: Hash32(self.trace.finalize().into()),
            slots,
        };
        SimOutcome {
            metrics,
            honest_chains,
            events: self.events,
        }
    }
}

/// Builds and runs a simulation in one call.
pub fn run_simulation(cfg: SimConfig) -> Result<SimOutcome, SimError> {
    Ok(Simulation::new(cfg)?.run())
}
