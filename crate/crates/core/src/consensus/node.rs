use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::message::{Announce, Announcement, Message, Timer};
use super::session::{CosiEngine, Phase, Review, Roster, SessionFailure, SessionId, SessionOutcome};
use super::{
    handle_timeout, propose_block, validate_proposal, ConsensusError, EventKind, Mempool, NodeId, Outbox, Output,
    SlotContext,
};
use crate::codec::Hash32;
use crate::cosi::cosi_verify;
use crate::crypto::{KeyPair, PublicKey};
use crate::election::ElectionView;
use crate::ledger::{commit_message, Block, BlockContent, Chain, Transaction, TxKind};
use crate::mask::Bitmask;

const SYNC_BATCH: usize = 32;
const BUFFER_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    /// Unreachable from tick `from` until tick `to` (forever when absent).
    Offline {
        from: u64,
        to: Option<u64>,
    },
    /// Sends conflicting proposals to the two halves of the group and
    /// signs anything it is asked to.
    EquivocatingLeader,
    /// Never proposes; otherwise honest.
    SilentLeader,
}

impl Behavior {
    pub fn is_honest(&self) -> bool {
        matches!(self, Behavior::Honest)
    }

    pub fn offline_at(&self, tick: u64) -> bool {
        match *self {
            Behavior::Offline { from, to } => tick >= from && to.is_none_or(|t| tick < t),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeConfig {
    pub timeout_ticks: u64,
    /// The network's delivery bound, known to every node.
    pub max_delay: u64,
    /// `None` runs flat signing rounds.
    pub branching: Option<usize>,
    pub max_attempts: u32,
    pub max_block_txs: usize,
    pub last_slot: u64,
}

impl NodeConfig {
    fn hop_window(&self) -> u64 {
        2 * self.max_delay + 1
    }

    fn grace(&self) -> u64 {
        2 * self.max_delay
    }
}

/// Public keys of every node, indexed by [`NodeId`].
#[derive(Debug, Clone)]
pub struct Directory {
    keys: Vec<PublicKey>,
    index: HashMap<PublicKey, NodeId>,
}

impl Directory {
    pub fn new(keys: Vec<PublicKey>) -> Self {
        let index = keys.iter().enumerate().map(|(i, k)| (*k, NodeId(i))).collect();
        Self { keys, index }
    }

    pub fn id_of(&self, pk: &PublicKey) -> Option<NodeId> {
        self.index.get(pk).copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.keys.len()).map(NodeId)
    }
}

/// A proposal this node is driving through the signing rounds.
struct LeaderRun {
    payload: Arc<Announcement>,
    digest: Hash32,
    phase: Phase,
    attempt: u32,
    excluded: Bitmask,
    announce_to: Option<Vec<usize>>,
    broadcast_to: Vec<NodeId>,
}

pub struct Node {
    id: NodeId,
    key: KeyPair,
    behavior: Behavior,
    cfg: NodeConfig,
    dir: Arc<Directory>,
    chain: Chain,
    view: ElectionView,
    mempool: Mempool,
    slot: u64,
    round: u32,
    slot_entered_at: u64,
    finished: bool,
    lock: Option<Hash32>,
    engine: CosiEngine,
    runs: Vec<LeaderRun>,
    buffered: Vec<(NodeId, Message)>,
    replay: bool,
}

impl Node {
    pub fn new(
        id: NodeId,
        key: KeyPair,
        behavior: Behavior,
        cfg: NodeConfig,
        dir: Arc<Directory>,
        chain: Chain,
    ) -> Self {
        let view = ElectionView::derive(&chain).expect("validated genesis carries stake");
        let engine = CosiEngine::new(id, key.clone(), cfg.hop_window());
        Self {
            id,
            key,
            behavior,
            cfg,
            dir,
            chain,
            view,
            mempool: Mempool::new(),
            slot: 0,
            round: 0,
            slot_entered_at: 0,
            finished: false,
            lock: None,
            engine,
            runs: Vec::new(),
            buffered: Vec::new(),
            replay: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn view(&self) -> &ElectionView {
        &self.view
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn submit(&mut self, tx: Transaction) {
        if tx.nonce >= self.chain.state().next_nonce(&tx.from) {
            self.mempool.push(tx);
        }
    }

    pub fn context(&self) -> SlotContext {
        SlotContext {
            fallback_index: self.round,
            ..SlotContext::new(self.slot, &self.view, self.cfg.timeout_ticks)
        }
    }

    pub fn start(&mut self, now: u64, out: &mut Outbox) {
        self.enter(now, 1, 0, out);
        self.flush(now, out);
    }

    /// Back from an outage: restart the current round and ask for blocks.
    pub fn wake(&mut self, now: u64, out: &mut Outbox) {
        if !self.finished {
            self.enter(now, self.slot.max(1), self.round, out);
        }
        self.broadcast(
            Message::SyncRequest {
                height: self.chain.height(),
            },
            out,
        );
        self.flush(now, out);
    }

    pub fn handle_message(&mut self, now: u64, from: NodeId, msg: Message, out: &mut Outbox) {
        self.dispatch(now, from, msg, out);
        self.flush(now, out);
    }

    pub fn handle_timer(&mut self, now: u64, timer: Timer, out: &mut Outbox) {
        match timer {
            Timer::Round { slot, round } => {
                if self.finished || (slot, round) != (self.slot, self.round) {
                    return;
                }
                match handle_timeout(self.context()) {
                    Ok(next) => {
                        out.push(Output::Event(EventKind::Timeout { slot, round }));
                        self.enter(now, slot, next.fallback_index, out);
                    }
                    Err(ConsensusError::ScheduleExhausted) => {
                        out.push(Output::Event(EventKind::Skipped { slot }));
                        self.enter(now, slot + 1, 0, out);
                    }
                    Err(_) => unreachable!("handle_timeout only reports exhaustion"),
                }
                self.broadcast(
                    Message::SyncRequest {
                        height: self.chain.height(),
                    },
                    out,
                );
            }
            Timer::Propose { slot, round } => {
                if !self.finished && (slot, round) == (self.slot, self.round) {
                    self.propose(out);
                }
            }
            t @ (Timer::Collect { .. } | Timer::Respond { .. }) => {
                if let Some(o) = self.engine.on_timer(&t, out) {
                    self.on_outcome(now, o, out);
                }
            }
        }
        self.flush(now, out);
    }

    fn flush(&mut self, now: u64, out: &mut Outbox) {
        while self.replay {
            self.replay = false;
            let pending = std::mem::take(&mut self.buffered);
            for (from, msg) in pending {
                self.dispatch(now, from, msg, out);
            }
        }
    }

    fn enter(&mut self, now: u64, slot: u64, round: u32, out: &mut Outbox) {
        let new_slot = slot != self.slot;
        self.slot = slot;
        self.round = round;
        self.lock = None;
        self.runs.clear();
        if slot > self.cfg.last_slot {
            self.finished = true;
            self.engine.clear();
            self.buffered.clear();
            return;
        }
        self.engine.retain(|s| s.slot == slot && s.round == round);
        if new_slot {
            self.slot_entered_at = now;
            out.push(Output::Event(EventKind::SlotStarted { slot }));
        }
        out.timer(self.cfg.timeout_ticks, Timer::Round { slot, round });
        let leader = self.view.schedule.leaders[round as usize];
        if leader == *self.key.public() && !matches!(self.behavior, Behavior::SilentLeader) {
            out.timer(self.cfg.grace(), Timer::Propose { slot, round });
        }
        self.replay = !self.buffered.is_empty();
    }

    fn broadcast(&self, msg: Message, out: &mut Outbox) {
        for id in self.dir.ids().filter(|&i| i != self.id) {
            out.send(id, msg.clone());
        }
    }

    fn dispatch(&mut self, now: u64, from: NodeId, msg: Message, out: &mut Outbox) {
        match msg {
            Message::Announce(a) => self.on_announce(from, a, out),
            Message::CommitUp {
                session,
                to_pos,
                from_pos,
                point,
                mask,
            } => {
                if let Some(o) = self.engine.on_commit_up(session, to_pos, from_pos, point, mask, out) {
                    self.on_outcome(now, o, out);
                }
            }
            Message::Challenge {
                session,
                to_pos,
                point,
                mask,
            } => {
                self.engine.on_challenge(session, to_pos, point, mask, out);
            }
            Message::ResponseUp {
                session,
                to_pos,
                from_pos,
                response,
                missing,
            } => {
                if let Some(o) = self
                    .engine
                    .on_response_up(session, to_pos, from_pos, response, missing, out)
                {
                    self.on_outcome(now, o, out);
                }
            }
            Message::Block { block } => {
                self.accept_block(now, from, &block, true, out);
            }
            Message::SyncRequest { height } => {
                let blocks = self.chain.blocks();
                if blocks.len() > height {
                    let end = (height + SYNC_BATCH).min(blocks.len());
                    let batch = blocks[height..end].iter().cloned().map(Arc::new).collect();
                    out.send(from, Message::SyncResponse { blocks: batch });
                }
            }
            Message::SyncResponse { blocks } => {
                for b in &blocks {
                    if !self.chain.contains(&b.hash()) && !self.accept_block(now, from, b, false, out) {
                        break;
                    }
                }
            }
        }
    }

    fn on_announce(&mut self, from: NodeId, a: Announce, out: &mut Outbox) {
        if self.finished {
            return;
        }
        let here = (self.slot, self.round);
        let there = (a.session.slot, a.session.round);
        if there < here {
            return;
        }
        if there > here {
            if a.session.slot > self.slot && !self.chain.contains(&a.payload.content.parent_hash) {
                out.send(
                    from,
                    Message::SyncRequest {
                        height: self.chain.height(),
                    },
                );
            }
            if self.buffered.len() < BUFFER_CAP {
                self.buffered.push((from, Message::Announce(a)));
            }
            return;
        }
        let review = self.review(&a);
        self.engine.on_announce(&a, review, out);
    }

    fn review(&mut self, a: &Announce) -> Review {
        let content = &a.payload.content;
        let message = match (a.session.phase, &a.payload.prepare_sig) {
            (Phase::Commit, Some(ps)) => commit_message(&content.digest(), ps),
            _ => content.to_bytes(),
        };
        let accept = self.vote(a);
        Review { message, accept }
    }

    fn vote(&mut self, a: &Announce) -> bool {
        let content = &a.payload.content;
        let digest = content.digest();
        if a.session.digest != digest || !self.roster_matches(&a.roster, a.session.round) {
            return false;
        }
        if validate_proposal(&self.chain, content, &self.context()).is_err() {
            return false;
        }
        if a.session.phase == Phase::Commit {
            let Some(ps) = &a.payload.prepare_sig else { return false };
            if !cosi_verify(ps, &self.view.group, &content.to_bytes(), self.view.min_participants) {
                return false;
            }
        }
        if matches!(self.behavior, Behavior::EquivocatingLeader) {
            return true;
        }
        match self.lock {
            Some(h) => h == digest,
            None => {
                let excluded = a.to_pos > 0 && a.excluded.get(a.to_pos - 1);
                if !excluded {
                    self.lock = Some(digest);
                }
                true
            }
        }
    }

    fn roster_matches(&self, roster: &Roster, round: u32) -> bool {
        let leader = self.view.schedule.leaders.get(round as usize);
        roster.group == self.view.group
            && leader.and_then(|l| self.dir.id_of(l)) == Some(roster.root)
            && roster
                .group
                .iter()
                .zip(&roster.members)
                .all(|(k, id)| self.dir.id_of(k) == Some(*id))
    }

    fn roster(&self) -> Arc<Roster> {
        let members = self
            .view
            .group
            .iter()
            .map(|k| self.dir.id_of(k).expect("every stakeholder runs a node"))
            .collect();
        Arc::new(Roster::new(
            self.view.group.clone(),
            members,
            self.id,
            self.cfg.branching,
        ))
    }

    fn propose(&mut self, out: &mut Outbox) {
        let ctx = self.context();
        let Ok(content) = propose_block(&self.chain, &self.mempool, &ctx, &self.key, self.cfg.max_block_txs) else {
            return;
        };
        let roster = self.roster();
        let others: Vec<NodeId> = self.dir.ids().filter(|&i| i != self.id).collect();
        let m = roster.group.len();
        self.runs.clear();
        let alt = match self.behavior {
            Behavior::EquivocatingLeader => self.conflicting(&content).filter(|_| roster.children(0).len() >= 2),
            _ => None,
        };
        match alt {
            None => {
                self.runs.push(new_run(content, Bitmask::new(m), None, others));
            }
            Some(alt) => {
                let children: Vec<usize> = roster.children(0).collect();
                let (left, right) = children.split_at(children.len() / 2);
                let in_left = |id: NodeId| {
                    let member = roster.members.iter().position(|&n| n == id);
                    match member {
                        Some(i) => left.iter().any(|&c| roster.in_subtree(i + 1, c)),
                        None => id.0.is_multiple_of(2),
                    }
                };
                let (to_a, to_b): (Vec<NodeId>, Vec<NodeId>) = others.iter().partition(|&&id| in_left(id));
                self.runs
                    .push(new_run(content, Bitmask::new(m), Some(left.to_vec()), to_a));
                self.runs
                    .push(new_run(alt, Bitmask::new(m), Some(right.to_vec()), to_b));
            }
        }
        for i in 0..self.runs.len() {
            let r = &self.runs[i];
            out.push(Output::Event(EventKind::Proposal {
                slot: self.slot,
                round: self.round,
                digest: r.digest,
                txs: r.payload.content.transactions.len(),
            }));
            self.start_session(i, &roster, out);
        }
    }

    /// A second block for the same slot that differs from `content`.
    fn conflicting(&self, content: &BlockContent) -> Option<BlockContent> {
        let mut alt = content.clone();
        if alt.transactions.pop().is_some() {
            return Some(alt);
        }
        let me = *self.key.public();
        let state = self.chain.state();
        if state.balance(&me) == 0 {
            return None;
        }
        alt.transactions.push(Transaction::signed(
            TxKind::Normal,
            &self.key,
            me,
            1,
            0,
            state.next_nonce(&me),
        ));
        Some(alt)
    }

    fn session_of(&self, run: &LeaderRun) -> SessionId {
        SessionId {
            slot: self.slot,
            round: self.round,
            phase: run.phase,
            attempt: run.attempt,
            digest: run.digest,
        }
    }

    fn start_session(&mut self, i: usize, roster: &Arc<Roster>, out: &mut Outbox) {
        let run = &self.runs[i];
        let session = self.session_of(run);
        let message = match (&run.phase, &run.payload.prepare_sig) {
            (Phase::Commit, Some(ps)) => commit_message(&run.digest, ps),
            _ => run.payload.content.to_bytes(),
        };
        self.engine.start_root(
            session,
            roster.clone(),
            run.payload.clone(),
            message,
            run.excluded.clone(),
            self.view.min_participants,
            run.announce_to.clone(),
            out,
        );
    }

    fn on_outcome(&mut self, now: u64, o: SessionOutcome, out: &mut Outbox) {
        let Some(i) = self.runs.iter().position(|r| self.session_of(r) == o.session) else {
            return;
        };
        let roster = self.roster();
        match o.result {
            Ok(sig) => match self.runs[i].phase {
                Phase::Prepare => {
                    out.push(Output::Event(EventKind::PrepareComplete {
                        slot: self.slot,
                        round: self.round,
                        participants: sig.participants(),
                    }));
                    let run = &mut self.runs[i];
                    let content = run.payload.content.clone();
                    run.payload = Arc::new(Announcement {
                        content,
                        prepare_sig: Some(sig),
                    });
                    run.phase = Phase::Commit;
                    run.attempt = 0;
                    run.excluded = Bitmask::new(roster.group.len());
                    self.start_session(i, &roster, out);
                }
                Phase::Commit => {
                    let run = self.runs.remove(i);
                    let prepare_sig = run.payload.prepare_sig.clone().expect("commit follows prepare");
                    let block = Block {
                        content: run.payload.content.clone(),
                        prepare_sig,
                        commit_sig: sig,
                    };
                    self.finalize(now, block, run.broadcast_to, out);
                }
            },
            Err(failure) => {
                let min = self.view.min_participants;
                let run = &mut self.runs[i];
                if let SessionFailure::Missing(m) = failure {
                    run.excluded = run.excluded.union(&m);
                    if run.excluded.len() - run.excluded.count() < min {
                        run.excluded = Bitmask::new(run.excluded.len());
                    }
                }
                run.attempt += 1;
                if run.attempt < self.cfg.max_attempts {
                    self.start_session(i, &roster, out);
                } else {
                    self.runs.remove(i);
                }
            }
        }
    }

    fn finalize(&mut self, now: u64, block: Block, targets: Vec<NodeId>, out: &mut Outbox) {
        let hash = block.hash();
        let (slot, round) = (block.slot(), block.content.round);
        let (prepare, commit) = (block.prepare_sig.participants(), block.commit_sig.participants());
        let latency = now - self.slot_entered_at;
        let block = Arc::new(block);
        for id in targets {
            out.send(id, Message::Block { block: block.clone() });
        }
        if self.accept_block(now, self.id, &block, false, out) {
            out.push(Output::Event(EventKind::Committed {
                slot,
                round,
                hash,
                prepare,
                commit,
                latency,
            }));
        }
    }

    /// Appends `block` if it extends the tip and validates.
    fn accept_block(&mut self, now: u64, from: NodeId, block: &Arc<Block>, echo: bool, out: &mut Outbox) -> bool {
        let hash = block.hash();
        if self.chain.contains(&hash) {
            return false;
        }
        if block.content.parent_hash != self.chain.tip_hash() {
            if block.slot() > self.chain.tip_slot() && from != self.id {
                out.send(
                    from,
                    Message::SyncRequest {
                        height: self.chain.height(),
                    },
                );
            }
            return false;
        }
        let leaders = &self.view.schedule.leaders;
        if self
            .chain
            .apply_block((**block).clone(), leaders, &self.view.group)
            .is_err()
        {
            return false;
        }
        out.push(Output::Appended {
            height: self.chain.height(),
            hash,
            slot: block.slot(),
            supply: self.chain.state().total_supply(),
        });
        self.mempool.prune(self.chain.state());
        self.view = ElectionView::derive(&self.chain).expect("stake never decreases");
        if echo && self.behavior.is_honest() {
            for id in self.dir.ids().filter(|&i| i != self.id && i != from) {
                out.send(id, Message::Block { block: block.clone() });
            }
        }
        let next = self.slot.max(block.slot() + 1);
        if !self.finished || next <= self.cfg.last_slot {
            self.enter(now, next, 0, out);
        }
        true
    }
}

fn new_run(
    content: BlockContent,
    excluded: Bitmask,
    announce_to: Option<Vec<usize>>,
    broadcast_to: Vec<NodeId>,
) -> LeaderRun {
    let digest = content.digest();
    LeaderRun {
        payload: Arc::new(Announcement {
            content,
            prepare_sig: None,
        }),
        digest,
        phase: Phase::Prepare,
        attempt: 0,
        excluded,
        announce_to,
        broadcast_to,
    }
}
