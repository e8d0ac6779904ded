//! Message accounting for a single signing round in isolation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::queue::{EventQueue, Payload};
use crate::codec::Hash32;
use crate::consensus::{Announcement, CosiEngine, Message, NodeId, Outbox, Output, Phase, Review, Roster, SessionId};
use crate::cosi::cosi_verify;
use crate::crypto::KeyPair;
use crate::ledger::BlockContent;
use crate::mask::Bitmask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Flat,
    Tree {
        branching: usize,
    },
}

impl Topology {
    pub fn branching(&self) -> Option<usize> {
        match *self {
            Topology::Flat => None,
            Topology::Tree { branching } => Some(branching),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MessageCount {
    pub group_size: usize,
    pub total: u64,
    /// Messages sent or received by the coordinator.
    pub leader_adjacent: u64,
    /// Ticks from the first announcement to the finished signature.
    pub latency_ticks: u64,
}

/// Runs one full signing round (all members honest, every hop one tick)
/// and counts the messages on the wire.
pub fn count_messages(topology: Topology, group_size: usize) -> MessageCount {
    assert!(group_size >= 1, "group needs at least one member");
    let root_key = KeyPair::from_label("topology/coordinator");
    let keys: Vec<KeyPair> = (0..group_size)
        .map(|i| KeyPair::from_label(&format!("topology/member{i}")))
        .collect();
    let group: Vec<_> = keys.iter().map(|k| *k.public()).collect();
    let root = NodeId(0);
    let members: Vec<NodeId> = (1..=group_size).map(NodeId).collect();
    let roster = Arc::new(Roster::new(group.clone(), members, root, topology.branching()));

    let hop_window = 3;
    let mut engines: Vec<CosiEngine> = std::iter::once(CosiEngine::new(root, root_key.clone(), hop_window))
        .chain(
            keys.iter()
                .enumerate()
                .map(|(i, k)| CosiEngine::new(NodeId(i + 1), k.clone(), hop_window)),
        )
        .collect();

    let content = BlockContent {
        parent_hash: Hash32::ZERO,
        slot: 1,
        round: 0,
        leader: *root_key.public(),
        transactions: Vec::new(),
    };
    let message = content.to_bytes();
    let session = SessionId {
        slot: 1,
        round: 0,
        phase: Phase::Prepare,
        attempt: 0,
        digest: content.digest(),
    };
    let payload = Arc::new(Announcement {
        content,
        prepare_sig: None,
    });

    let mut queue = EventQueue::new();
    let mut count = MessageCount {
        group_size,
        total: 0,
        leader_adjacent: 0,
        latency_ticks: 0,
    };
    let mut out = Outbox::new();
    engines[0].start_root(
        session,
        roster,
        payload,
        message.clone(),
        Bitmask::new(group_size),
        group_size,
        None,
        &mut out,
    );
    let mut from = root;
    let mut now = 0;
    loop {
        for o in out.drain() {
            match o {
                Output::Send { to, msg } => {
                    count.total += 1;
                    if from == root || to == root {
                        count.leader_adjacent += 1;
                    }
                    queue.push(now + 1, now, from, to, Payload::Message { msg });
                }
                Output::Timer { after, timer } => {
                    queue.push(now + after, now, from, from, Payload::Timer { timer });
                }
                _ => {}
            }
        }
        let ev = queue.pop().expect("round finishes before the queue drains");
        now = ev.deliver_at;
        from = ev.to;
        let engine = &mut engines[ev.to.0];
        let outcome = match ev.payload {
            Payload::Message {
                msg: Message::Announce(a),
            } => {
                engine.on_announce(
                    &a,
                    Review {
                        message: message.clone(),
                        accept: true,
                    },
                    &mut out,
                );
                None
            }
            Payload::Message {
                msg:
                    Message::CommitUp {
                        session,
                        to_pos,
                        from_pos,
                        point,
                        mask,
                    },
            } => engine.on_commit_up(session, to_pos, from_pos, point, mask, &mut out),
            Payload::Message {
                msg:
                    Message::Challenge {
                        session,
                        to_pos,
                        point,
                        mask,
                    },
            } => {
                engine.on_challenge(session, to_pos, point, mask, &mut out);
                None
            }
            Payload::Message {
                msg:
                    Message::ResponseUp {
                        session,
                        to_pos,
                        from_pos,
                        response,
                        missing,
                    },
            } => engine.on_response_up(session, to_pos, from_pos, response, missing, &mut out),
            Payload::Timer { timer } => engine.on_timer(&timer, &mut out),
            _ => None,
        };
        if let Some(o) = outcome {
            let sig = o.result.expect("fault-free round succeeds");
            assert!(cosi_verify(&sig, &group, &message, group_size));
            count.latency_ticks = now;
            return count;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_four_is_four_round_trips() {
        let c = count_messages(Topology::Flat, 4);
        assert_eq!((c.total, c.leader_adjacent, c.latency_ticks), (16, 16, 4));
    }

    #[test]
    fn binary_tree_of_seven() {
        // Oracle: 7 parent edges, 4 messages each; 2 edges touch the root;
        // depth 3 so each of the 4 phases crosses 3 hops.
        let c = count_messages(Topology::Tree { branching: 2 }, 7);
        assert_eq!((c.total, c.leader_adjacent, c.latency_ticks), (28, 8, 12));
        assert!(c.leader_adjacent < count_messages(Topology::Flat, 7).leader_adjacent);
    }

    #[test]
    fn single_member_same_everywhere() {
        let flat = count_messages(Topology::Flat, 1);
        for b in 1..4 {
            let tree = count_messages(Topology::Tree { branching: b }, 1);
            assert_eq!((tree.total, tree.leader_adjacent), (flat.total, flat.leader_adjacent));
        }
        assert_eq!(flat.total, 4);
    }
}
