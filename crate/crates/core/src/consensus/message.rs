use std::sync::Arc;

use curve25519_dalek::ristretto::RistrettoPoint;
use serde::Serialize;

use super::session::{Roster, SessionId};
use crate::cosi::CollectiveSignature;
use crate::crypto::{serde_point, serde_scalar, Scalar};
use crate::ledger::{Block, BlockContent};
use crate::mask::Bitmask;

/// What the coordinator asks the group to sign. The commit round carries
/// the prepare signature it builds on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Announcement {
    pub content: BlockContent,
    pub prepare_sig: Option<CollectiveSignature>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Announce {
    pub session: SessionId,
    pub roster: Arc<Roster>,
    pub to_pos: usize,
    /// Members told not to commit in this attempt.
    pub excluded: Bitmask,
    pub payload: Arc<Announcement>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Announce(Announce),
    CommitUp {
        session: SessionId,
        to_pos: usize,
        from_pos: usize,
        #[serde(with = "serde_point")]
        point: RistrettoPoint,
        mask: Bitmask,
    },
    Challenge {
        session: SessionId,
        to_pos: usize,
        #[serde(with = "serde_point")]
        point: RistrettoPoint,
        mask: Bitmask,
    },
    ResponseUp {
        session: SessionId,
        to_pos: usize,
        from_pos: usize,
        #[serde(with = "serde_scalar")]
        response: Scalar,
        missing: Bitmask,
    },
    Block {
        block: Arc<Block>,
    },
    SyncRequest {
        height: usize,
    },
    SyncResponse {
        blocks: Vec<Arc<Block>>,
    },
}

impl Message {
    pub fn session(&self) -> Option<&SessionId> {
        match self {
            Message::Announce(a) => Some(&a.session),
            Message::CommitUp { session, .. }
            | Message::Challenge { session, .. }
            | Message::ResponseUp { session, .. } => Some(session),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Announce(_) => "announce",
            Message::CommitUp { .. } => "commit",
            Message::Challenge { .. } => "challenge",
            Message::ResponseUp { .. } => "response",
            Message::Block { .. } => "block",
            Message::SyncRequest { .. } => "sync_request",
            Message::SyncResponse { .. } => "sync_response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Timer {
    /// The fallback timeout of a slot round.
    Round {
        slot: u64,
        round: u32,
    },
    /// The leader's grace period before proposing.
    Propose {
        slot: u64,
        round: u32,
    },
    Collect {
        session: SessionId,
        pos: usize,
    },
    Respond {
        session: SessionId,
        pos: usize,
    },
}
