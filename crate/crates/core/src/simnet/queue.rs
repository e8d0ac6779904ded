use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::consensus::{Message, NodeId, Timer};

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Start,
    Wake,
    Timer { timer: Timer },
    Message { msg: Message },
}

/// One scheduled delivery. Events run in `(deliver_at, uid)` order.
#[derive(Debug, Clone, Serialize)]
pub struct SimEvent {
    pub deliver_at: u64,
    pub uid: u64,
    pub sent_at: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub payload: Payload,
}

impl SimEvent {
    fn key(&self) -> (u64, u64) {
        (self.deliver_at, self.uid)
    }
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Min-queue of events; uids are assigned in push order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    next_uid: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, deliver_at: u64, sent_at: u64, from: NodeId, to: NodeId, payload: Payload) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        self.heap.push(Reverse(SimEvent {
            deliver_at,
            uid,
            sent_at,
            from,
            to,
            payload,
        }));
        uid
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse(e)| e.deliver_at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
