//! Tree-structured collective signing, driven by messages and timers.
//!
//! Position 0 is the coordinator and position `i + 1` holds group member
//! `i`. The parent of position `p` is `(p - 1) / b` and its children are
//! `b*p + 1 ..= b*p + b`, so a flat round is the same tree with `b = m`.
//! Every internal position aggregates commitments and responses of its
//! subtree and checks each child's share before passing it up.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use curve25519_dalek::ristretto::RistrettoPoint;
use serde::{Deserialize, Serialize};

use super::message::{Announce, Announcement, Message, Timer};
use super::{NodeId, Outbox};
use crate::codec::{Hash32, Writer};
use crate::cosi::{
    challenge, make_commitment, partial_response_valid, respond, CollectiveSignature, PendingCommitment,
};
use crate::crypto::{aggregate_all, aggregate_keys, identity, KeyPair, PublicKey, Scalar};
use crate::mask::Bitmask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prepare,
    Commit,
}

/// Identifies one signing attempt. Nonces are derived per session and a
/// member answers any given session at most once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionId {
    pub slot: u64,
    pub round: u32,
    pub phase: Phase,
    pub attempt: u32,
    pub digest: Hash32,
}

impl SessionId {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.slot)
            .u32(self.round)
            .u8(self.phase as u8)
            .u32(self.attempt)
            .raw(&self.digest.0);
        w.finish()
    }
}

/// The signing group laid out on a tree, with the node hosting each position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Roster {
    pub group: Vec<PublicKey>,
    pub members: Vec<NodeId>,
    pub root: NodeId,
    pub branching: usize,
}

impl Roster {
    /// `branching = None` lays the group out flat under the coordinator.
    pub fn new(group: Vec<PublicKey>, members: Vec<NodeId>, root: NodeId, branching: Option<usize>) -> Self {
        let branching = branching.unwrap_or(group.len()).max(1);
        Self {
            group,
            members,
            root,
            branching,
        }
    }

    pub fn positions(&self) -> usize {
        self.group.len() + 1
    }

    pub fn node_at(&self, pos: usize) -> NodeId {
        if pos == 0 {
            self.root
        } else {
            self.members[pos - 1]
        }
    }

    pub fn parent(&self, pos: usize) -> usize {
        (pos - 1) / self.branching
    }

    pub fn children(&self, pos: usize) -> std::ops::Range<usize> {
        let n = self.positions();
        let lo = (self.branching * pos + 1).min(n);
        lo..(lo + self.branching).min(n)
    }

    /// Hops from `pos` down to its deepest descendant.
    pub fn height(&self, pos: usize) -> u64 {
        let mut h = 0;
        let mut p = pos;
        while self.branching * p + 1 < self.positions() {
            p = self.branching * p + 1;
            h += 1;
        }
        h
    }

    pub fn depth(&self, mut pos: usize) -> u64 {
        let mut d = 0;
        while pos != 0 {
            pos = self.parent(pos);
            d += 1;
        }
        d
    }

    pub fn in_subtree(&self, mut pos: usize, top: usize) -> bool {
        loop {
            if pos == top {
                return true;
            }
            if pos == 0 || pos < top {
                return false;
            }
            pos = self.parent(pos);
        }
    }

    /// Group indices hosted inside the subtree rooted at `top`.
    pub fn subtree_mask(&self, top: usize) -> Bitmask {
        let mut m = Bitmask::new(self.group.len());
        for pos in 1..self.positions() {
            if self.in_subtree(pos, top) {
                m.set(pos - 1, true);
            }
        }
        m
    }
}

/// A member's verdict on an announcement: the bytes to sign, and whether
/// it is willing to sign them.
#[derive(Debug, Clone)]
pub struct Review {
    pub message: Vec<u8>,
    pub accept: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionFailure {
    /// Too few commitments reached the coordinator.
    Insufficient { got: usize, need: usize },
    /// Members that committed but whose responses were lost or invalid.
    Missing(Bitmask),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub session: SessionId,
    pub result: Result<CollectiveSignature, SessionFailure>,
}

/// Aggregation state common to the coordinator and internal members.
struct Aggregation {
    roster: Arc<Roster>,
    full_key: RistrettoPoint,
    message: Vec<u8>,
    children: Vec<usize>,
    reports: BTreeMap<usize, (RistrettoPoint, Bitmask)>,
    commit_closed: bool,
    v: RistrettoPoint,
    z: Bitmask,
    c: Option<Scalar>,
    included: Vec<usize>,
    responses: BTreeMap<usize, (Scalar, Bitmask)>,
    response_closed: bool,
}

impl Aggregation {
    fn new(roster: Arc<Roster>, message: Vec<u8>, children: Vec<usize>) -> Self {
        let full_key = aggregate_all(&roster.group);
        let m = roster.group.len();
        Self {
            roster,
            full_key,
            message,
            children,
            reports: BTreeMap::new(),
            commit_closed: false,
            v: identity(),
            z: Bitmask::new(m),
            c: None,
            included: Vec::new(),
            responses: BTreeMap::new(),
            response_closed: false,
        }
    }

    fn accept_report(&mut self, from_pos: usize, point: RistrettoPoint, mask: Bitmask) -> bool {
        if self.commit_closed || !self.children.contains(&from_pos) || self.reports.contains_key(&from_pos) {
            return false;
        }
        if mask.len() != self.roster.group.len() || !mask.is_subset_of(&self.roster.subtree_mask(from_pos)) {
            return false;
        }
        self.reports.insert(from_pos, (point, mask));
        true
    }

    fn all_reported(&self) -> bool {
        self.reports.len() == self.children.len()
    }

    /// Folds child reports into `(v, z)` on top of any own commitment.
    fn close_commit(&mut self) {
        self.commit_closed = true;
        for (pos, (p, m)) in &self.reports {
            if m.count() > 0 {
                self.v += p;
                self.z = self.z.union(m);
                self.included.push(*pos);
            }
        }
    }

    fn accept_response(&mut self, from_pos: usize, r: Scalar, missing: Bitmask) -> bool {
        if self.c.is_none() || self.response_closed || !self.included.contains(&from_pos) {
            return false;
        }
        if self.responses.contains_key(&from_pos) || missing.len() != self.roster.group.len() {
            return false;
        }
        self.responses.insert(from_pos, (r, missing));
        true
    }

    fn all_responded(&self) -> bool {
        self.responses.len() == self.included.len()
    }

    /// Sums child responses, checking each complete share and blaming the
    /// whole child subtree when its share is absent or wrong.
    fn close_response(&mut self, own: Scalar) -> (Scalar, Bitmask) {
        self.response_closed = true;
        let c = self.c.expect("challenge set before responses");
        let mut total = own;
        let mut missing = Bitmask::new(self.roster.group.len());
        for pos in &self.included {
            let (point, mask) = &self.reports[pos];
            match self.responses.get(pos) {
                None => missing = missing.union(mask),
                Some((r, m)) if m.count() > 0 => {
                    missing = missing.union(m);
                    total += r;
                }
                Some((r, _)) => {
                    let key = aggregate_keys(&self.roster.group, mask).expect("mask length checked");
                    if partial_response_valid(point, &key, r, &c) {
                        total += r;
                    } else {
                        missing = missing.union(mask);
                    }
                }
            }
        }
        (total, missing)
    }
}

struct MemberState {
    agg: Aggregation,
    own: Option<PendingCommitment>,
}

struct RootState {
    agg: Aggregation,
    min: usize,
}

/// Per-node signing engine. It holds no clock and performs no I/O: every
/// call appends sends and timer requests to an [`Outbox`].
pub struct CosiEngine {
    me: NodeId,
    key: KeyPair,
    hop_window: u64,
    members: HashMap<(SessionId, usize), MemberState>,
    roots: HashMap<SessionId, RootState>,
}

impl CosiEngine {
    /// `hop_window` bounds one round trip between neighbours in ticks.
    pub fn new(me: NodeId, key: KeyPair, hop_window: u64) -> Self {
        Self {
            me,
            key,
            hop_window,
            members: HashMap::new(),
            roots: HashMap::new(),
        }
    }

    pub fn active_sessions(&self) -> usize {
        self.roots.len() + self.members.len()
    }

    pub fn retain(&mut self, keep: impl Fn(&SessionId) -> bool) {
        self.members.retain(|(s, _), _| keep(s));
        self.roots.retain(|s, _| keep(s));
    }

    pub fn clear(&mut self) {
        self.members.clear();
        self.roots.clear();
    }

    /// Starts coordinating `session`. `announce_to` restricts which children
    /// of the root hear about it; `None` means all of them.
    #[allow(clippy::too_many_arguments)]
    pub fn start_root(
        &mut self,
        session: SessionId,
        roster: Arc<Roster>,
        payload: Arc<Announcement>,
        message: Vec<u8>,
        excluded: Bitmask,
        min: usize,
        announce_to: Option<Vec<usize>>,
        out: &mut Outbox,
    ) {
        let children = announce_to.unwrap_or_else(|| roster.children(0).collect());
        for &c in &children {
            let a = Announce {
                session,
                roster: roster.clone(),
                to_pos: c,
                excluded: excluded.clone(),
                payload: payload.clone(),
            };
            out.send(roster.node_at(c), Message::Announce(a));
        }
        let window = self.hop_window * roster.height(0);
        let agg = Aggregation::new(roster, message, children);
        self.roots.insert(session, RootState { agg, min });
        out.timer(window, Timer::Collect { session, pos: 0 });
    }

    pub fn on_announce(&mut self, a: &Announce, review: Review, out: &mut Outbox) {
        let roster = &a.roster;
        if a.to_pos == 0 || a.to_pos >= roster.positions() || roster.node_at(a.to_pos) != self.me {
            return;
        }
        let key = (a.session, a.to_pos);
        if self.members.contains_key(&key) {
            return;
        }
        let children: Vec<usize> = roster.children(a.to_pos).collect();
        for &c in &children {
            let fwd = Announce { to_pos: c, ..a.clone() };
            out.send(roster.node_at(c), Message::Announce(fwd));
        }
        let index = a.to_pos - 1;
        let own = (review.accept && !a.excluded.get(index) && roster.group[index] == *self.key.public()).then(|| {
            make_commitment(
                &self.key,
                index,
                &[a.session.to_bytes(), (index as u64).to_le_bytes().to_vec()].concat(),
            )
        });
        let leaf = children.is_empty();
        let window = self.hop_window * roster.height(a.to_pos);
        let mut agg = Aggregation::new(roster.clone(), review.message, children);
        if let Some(p) = &own {
            agg.v = p.commitment.point;
            agg.z.set(index, true);
        }
        self.members.insert(key, MemberState { agg, own });
        if leaf {
            self.close_member_commit(a.session, a.to_pos, out);
        } else {
            out.timer(
                window,
                Timer::Collect {
                    session: a.session,
                    pos: a.to_pos,
                },
            );
        }
    }

    pub fn on_commit_up(
        &mut self,
        session: SessionId,
        to_pos: usize,
        from_pos: usize,
        point: RistrettoPoint,
        mask: Bitmask,
        out: &mut Outbox,
    ) -> Option<SessionOutcome> {
        if to_pos == 0 {
            let st = self.roots.get_mut(&session)?;
            if st.agg.accept_report(from_pos, point, mask) && st.agg.all_reported() {
                return self.close_root_commit(session, out);
            }
        } else {
            let st = self.members.get_mut(&(session, to_pos))?;
            if st.agg.accept_report(from_pos, point, mask) && st.agg.all_reported() {
                self.close_member_commit(session, to_pos, out);
            }
        }
        None
    }

    pub fn on_challenge(&mut self, session: SessionId, to_pos: usize, v: RistrettoPoint, z: Bitmask, out: &mut Outbox) {
        let hop = self.hop_window;
        let Some(st) = self.members.get_mut(&(session, to_pos)) else {
            return;
        };
        let agg = &mut st.agg;
        if !agg.commit_closed || agg.c.is_some() || z.len() != agg.roster.group.len() {
            return;
        }
        let c = challenge(&v, &agg.full_key, &agg.message);
        agg.c = Some(c);
        // Children the coordinator left out of Z are dropped from this round.
        agg.included.retain(|p| agg.reports[p].1.is_subset_of(&z));
        for &p in &agg.included {
            let msg = Message::Challenge {
                session,
                to_pos: p,
                point: v,
                mask: z.clone(),
            };
            out.send(agg.roster.node_at(p), msg);
        }
        if agg.included.is_empty() {
            self.close_member_response(session, to_pos, out);
        } else {
            let window = hop * agg.roster.height(to_pos);
            out.timer(window, Timer::Respond { session, pos: to_pos });
        }
    }

    pub fn on_response_up(
        &mut self,
        session: SessionId,
        to_pos: usize,
        from_pos: usize,
        r: Scalar,
        missing: Bitmask,
        out: &mut Outbox,
    ) -> Option<SessionOutcome> {
        if to_pos == 0 {
            let st = self.roots.get_mut(&session)?;
            if st.agg.accept_response(from_pos, r, missing) && st.agg.all_responded() {
                return self.close_root_response(session);
            }
        } else {
            let st = self.members.get_mut(&(session, to_pos))?;
            if st.agg.accept_response(from_pos, r, missing) && st.agg.all_responded() {
                self.close_member_response(session, to_pos, out);
            }
        }
        None
    }

    pub fn on_timer(&mut self, timer: &Timer, out: &mut Outbox) -> Option<SessionOutcome> {
        match *timer {
            Timer::Collect { session, pos: 0 } => {
                if self.roots.get(&session).is_some_and(|s| !s.agg.commit_closed) {
                    return self.close_root_commit(session, out);
                }
            }
            Timer::Collect { session, pos } => {
                if self.members.get(&(session, pos)).is_some_and(|s| !s.agg.commit_closed) {
                    self.close_member_commit(session, pos, out);
                }
            }
            Timer::Respond { session, pos: 0 } => {
                if self.roots.get(&session).is_some_and(|s| !s.agg.response_closed) {
                    return self.close_root_response(session);
                }
            }
            Timer::Respond { session, pos }
                if self
                    .members
                    .get(&(session, pos))
                    .is_some_and(|s| !s.agg.response_closed) =>
            {
                self.close_member_response(session, pos, out);
            }
            _ => {}
        }
        None
    }

    fn close_member_commit(&mut self, session: SessionId, pos: usize, out: &mut Outbox) {
        let st = self.members.get_mut(&(session, pos)).expect("member state exists");
        st.agg.close_commit();
        let parent = st.agg.roster.parent(pos);
        let msg = Message::CommitUp {
            session,
            to_pos: parent,
            from_pos: pos,
            point: st.agg.v,
            mask: st.agg.z.clone(),
        };
        out.send(st.agg.roster.node_at(parent), msg);
    }

    fn close_member_response(&mut self, session: SessionId, pos: usize, out: &mut Outbox) {
        let st = self.members.get_mut(&(session, pos)).expect("member state exists");
        let c = st.agg.c.expect("challenge set");
        let own = match &st.own {
            Some(p) => respond(p, &self.key, &c),
            None => Scalar::ZERO,
        };
        let (r, missing) = st.agg.close_response(own);
        let parent = st.agg.roster.parent(pos);
        let msg = Message::ResponseUp {
            session,
            to_pos: parent,
            from_pos: pos,
            response: r,
            missing,
        };
        out.send(st.agg.roster.node_at(parent), msg);
    }

    fn close_root_commit(&mut self, session: SessionId, out: &mut Outbox) -> Option<SessionOutcome> {
        let st = self.roots.get_mut(&session).expect("root state exists");
        st.agg.close_commit();
        let got = st.agg.z.count();
        if got < st.min {
            let need = st.min;
            self.roots.remove(&session);
            return Some(SessionOutcome {
                session,
                result: Err(SessionFailure::Insufficient { got, need }),
            });
        }
        let agg = &mut st.agg;
        agg.c = Some(challenge(&agg.v, &agg.full_key, &agg.message));
        for &p in &agg.included {
            let msg = Message::Challenge {
                session,
                to_pos: p,
                point: agg.v,
                mask: agg.z.clone(),
            };
            out.send(agg.roster.node_at(p), msg);
        }
        let window = self.hop_window * agg.roster.height(0);
        out.timer(window, Timer::Respond { session, pos: 0 });
        None
    }

    fn close_root_response(&mut self, session: SessionId) -> Option<SessionOutcome> {
        let mut st = self.roots.remove(&session)?;
        let (r, missing) = st.agg.close_response(Scalar::ZERO);
        let result = if missing.count() == 0 {
            Ok(CollectiveSignature {
                commitment: st.agg.v,
                response: r,
                mask: st.agg.z.clone(),
            })
        } else {
            Err(SessionFailure::Missing(missing))
        };
        Some(SessionOutcome { session, result })
    }
}
