//! Per-slot protocol: propose, two signing rounds, finalize, broadcast, and
//! rotation to the next scheduled leader on timeout.

mod message;
mod node;
pub use node::Directory;
pub mod session;

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use message::{Announce, Announcement, Message, Timer};
pub use node::{Behavior, Node, NodeConfig};
pub use session::{CosiEngine, Phase, Review, Roster, SessionFailure, SessionId, SessionOutcome};

use crate::codec::Hash32;
use crate::cosi::{min_participants, CollectiveSignature};
use crate::crypto::{KeyPair, PublicKey};
use crate::election::{ElectionView, LeaderSchedule};
use crate::ledger::{apply_content, BlockContent, Chain, LedgerState, Transaction};

/// A block awaiting its signatures.
pub type Proposal = BlockContent;

/// The prepare-round collective signature over a proposal.
pub type AcceptanceProof = CollectiveSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("node is not the scheduled leader")]
    NotLeader,
    #[error("every leader in the schedule timed out")]
    ScheduleExhausted,
    #[error("proposal leader is not scheduled for this round")]
    WrongLeader,
    #[error("proposal content invalid: {0}")]
    BadContent(String),
}

/// Where a node stands within one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotContext {
    pub slot: u64,
    pub schedule: LeaderSchedule,
    pub fallback_index: u32,
    pub group: Vec<PublicKey>,
    pub min_participants: usize,
    pub timeout_ticks: u64,
}

impl SlotContext {
    pub fn new(slot: u64, view: &ElectionView, timeout_ticks: u64) -> Self {
        Self {
            slot,
            schedule: view.schedule.clone(),
            fallback_index: 0,
            group: view.group.clone(),
            min_participants: min_participants(view.group.len()),
            timeout_ticks,
        }
    }

    pub fn leader(&self) -> &PublicKey {
        &self.schedule.leaders[self.fallback_index as usize]
    }
}

/// Hands the slot to the next leader in the schedule.
pub fn handle_timeout(ctx: SlotContext) -> Result<SlotContext, ConsensusError> {
    let next = ctx.fallback_index + 1;
    if next as usize >= ctx.schedule.len() {
        return Err(ConsensusError::ScheduleExhausted);
    }
    Ok(SlotContext {
        fallback_index: next,
        ..ctx
    })
}

/// FIFO transaction pool, deduplicated by transaction id.
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    queue: VecDeque<Transaction>,
    ids: HashSet<Hash32>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tx: Transaction) -> bool {
        if !self.ids.insert(tx.id()) {
            return false;
        }
        self.queue.push_back(tx);
        true
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.queue.iter()
    }

    /// Drops transactions whose nonce is already used in `state`.
    pub fn prune(&mut self, state: &LedgerState) {
        let ids = &mut self.ids;
        self.queue.retain(|tx| {
            let keep = tx.nonce >= state.next_nonce(&tx.from);
            if !keep {
                ids.remove(&tx.id());
            }
            keep
        });
    }
}

/// Builds the block the current leader proposes on top of the tip.
pub fn propose_block(
    chain: &Chain,
    mempool: &Mempool,
    ctx: &SlotContext,
    leader: &KeyPair,
    max_txs: usize,
) -> Result<Proposal, ConsensusError> {
    if ctx.leader() != leader.public() {
        return Err(ConsensusError::NotLeader);
    }
    let mut state = chain.state().clone();
    let mut transactions = Vec::new();
    for tx in mempool.iter() {
        if transactions.len() == max_txs {
            break;
        }
        if state.apply_transaction(tx).is_ok() {
            transactions.push(tx.clone());
        }
    }
    Ok(BlockContent {
        parent_hash: chain.tip_hash(),
        slot: ctx.slot,
        round: ctx.fallback_index,
        leader: *leader.public(),
        transactions,
    })
}

/// Checks the proposer and the content against the local chain.
pub fn validate_proposal(chain: &Chain, proposal: &Proposal, ctx: &SlotContext) -> Result<(), ConsensusError> {
    if proposal.slot != ctx.slot || proposal.round != ctx.fallback_index || proposal.leader != *ctx.leader() {
        return Err(ConsensusError::WrongLeader);
    }
    if proposal.parent_hash != chain.tip_hash() {
        return Err(ConsensusError::BadContent("parent is not the tip".into()));
    }
    if proposal.slot <= chain.tip_slot() {
        return Err(ConsensusError::BadContent("slot does not advance".into()));
    }
    apply_content(chain.state(), proposal.leader, &proposal.transactions)
        .map(|_| ())
        .map_err(|e| ConsensusError::BadContent(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    SlotStarted {
        slot: u64,
    },
    Proposal {
        slot: u64,
        round: u32,
        digest: Hash32,
        txs: usize,
    },
    PrepareComplete {
        slot: u64,
        round: u32,
        participants: usize,
    },
    Committed {
        slot: u64,
        round: u32,
        hash: Hash32,
        prepare: usize,
        commit: usize,
        latency: u64,
    },
    Timeout {
        slot: u64,
        round: u32,
    },
    Skipped {
        slot: u64,
    },
}

/// A structured protocol event, one JSON line in the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtocolEvent {
    pub tick: u64,
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub enum Output {
    Send {
        to: NodeId,
        msg: Message,
    },
    Timer {
        after: u64,
        timer: Timer,
    },
    /// The node appended a block at `height` (1-based).
    Appended {
        height: usize,
        hash: Hash32,
        slot: u64,
        supply: u128,
    },
    Event(EventKind),
}

/// Collects what a node or engine wants done, in emission order.
#[derive(Debug, Default)]
pub struct Outbox {
    items: Vec<Output>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, to: NodeId, msg: Message) {
        self.items.push(Output::Send { to, msg });
    }

    pub fn timer(&mut self, after: u64, timer: Timer) {
        self.items.push(Output::Timer { after, timer });
    }

    pub fn push(&mut self, o: Output) {
        self.items.push(o);
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn drain(&mut self) -> std::vec::Drain<'_, Output> {
        self.items.drain(..)
    }

    pub fn into_vec(self) -> Vec<Output> {
        self.items
    }
}
