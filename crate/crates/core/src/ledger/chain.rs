use thiserror::Error;

use super::block::{commit_message, Block};
use super::genesis::{Genesis, GenesisError};
use super::state::{LedgerState, Stakeholder, StakeholderList, TxError};
use super::tx::TxKind;
use crate::codec::Hash32;
use crate::cosi::{cosi_verify, min_participants};
use crate::crypto::PublicKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("parent hash does not match the chain tip")]
    BadParent,
    #[error("slot {got} does not follow tip slot {tip}")]
    BadSlot { tip: u64, got: u64 },
    #[error("leader is not scheduled for round {round}")]
    WrongLeader { round: u32 },
    #[error("transaction {index} invalid: {source}")]
    BadTransaction { index: usize, source: TxError },
    #[error("prepare signature does not verify")]
    BadPrepareSig,
    #[error("commit signature does not verify")]
    BadCommitSig,
}

/// A genesis configuration followed by committed blocks, with the derived
/// account table.
#[derive(Debug, Clone)]
pub struct Chain {
    genesis: Genesis,
    genesis_hash: Hash32,
    blocks: Vec<Block>,
    hashes: Vec<Hash32>,
    state: LedgerState,
}

impl Chain {
    pub fn new(genesis: Genesis) -> Result<Self, GenesisError> {
        genesis.validate()?;
        let state = genesis_state(&genesis);
        let genesis_hash = genesis.hash();
        Ok(Self {
            genesis,
            genesis_hash,
            blocks: Vec::new(),
            hashes: Vec::new(),
            state,
        })
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn genesis_hash(&self) -> Hash32 {
        self.genesis_hash
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_hashes(&self) -> &[Hash32] {
        &self.hashes
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    /// Number of committed blocks, genesis excluded.
    pub fn height(&self) -> usize {
        self.blocks.len()
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.hashes.last().copied().unwrap_or(self.genesis_hash)
    }

    /// Genesis occupies slot 0.
    pub fn tip_slot(&self) -> u64 {
        self.blocks.last().map_or(0, |b| b.slot())
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.hashes.contains(hash)
    }

    /// Checks `block` against the tip, the slot's leader schedule and the
    /// signing group, returning the post-block account table.
    pub fn validate_block(
        &self,
        block: &Block,
        schedule: &[PublicKey],
        group: &[PublicKey],
    ) -> Result<LedgerState, BlockError> {
        let c = &block.content;
        if c.parent_hash != self.tip_hash() {
            return Err(BlockError::BadParent);
        }
        if c.slot <= self.tip_slot() {
            return Err(BlockError::BadSlot {
                tip: self.tip_slot(),
                got: c.slot,
            });
        }
        if schedule.get(c.round as usize) != Some(&c.leader) {
            return Err(BlockError::WrongLeader { round: c.round });
        }
        let state = apply_content(&self.state, c.leader, &c.transactions)?;
        let min = min_participants(group.len());
        if !cosi_verify(&block.prepare_sig, group, &c.to_bytes(), min) {
            return Err(BlockError::BadPrepareSig);
        }
        let msg = commit_message(&c.digest(), &block.prepare_sig);
        if !cosi_verify(&block.commit_sig, group, &msg, min) {
            return Err(BlockError::BadCommitSig);
        }
        Ok(state)
    }

    pub fn apply_block(&mut self, block: Block, schedule: &[PublicKey], group: &[PublicKey]) -> Result<(), BlockError> {
        let state = self.validate_block(&block, schedule, group)?;
        self.push_validated(block, state);
        Ok(())
    }

    fn push_validated(&mut self, block: Block, state: LedgerState) {
        self.hashes.push(block.hash());
        self.blocks.push(block);
        self.state = state;
    }

    /// One JSON object per block, newline-terminated.
    pub fn dump_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&serde_json::to_string(b).expect("blocks serialize"));
            out.push('\n');
        }
        out
    }
}

fn genesis_state(genesis: &Genesis) -> LedgerState {
    let mut st = LedgerState::default();
    for a in &genesis.accounts {
        st.allocate(a.pubkey, a.balance, a.stake);
    }
    st
}

/// Applies transactions in order, then pays the leader the summed fees.
pub fn apply_content(
    state: &LedgerState,
    leader: PublicKey,
    txs: &[super::tx::Transaction],
) -> Result<LedgerState, BlockError> {
    let mut next = state.clone();
    let mut fees: u64 = 0;
    for (index, tx) in txs.iter().enumerate() {
        next.apply_transaction(tx)
            .map_err(|source| BlockError::BadTransaction { index, source })?;
        fees += tx.fee;
    }
    next.credit(leader, fees);
    Ok(next)
}

/// Recomputes the account table from genesis without signature checks.
pub fn replay_state(genesis: &Genesis, blocks: &[Block]) -> Result<LedgerState, BlockError> {
    let mut st = genesis_state(genesis);
    for b in blocks {
        st = apply_content(&st, b.content.leader, &b.content.transactions)?;
    }
    Ok(st)
}

/// Parses genesis allocations and every stake transaction from the start of
/// the chain. Independent of the cached order kept in [`LedgerState`].
pub fn compute_stakeholders(chain: &Chain) -> StakeholderList {
    let mut entries: Vec<Stakeholder> = Vec::new();
    let mut bump = |pk: PublicKey, amount: u64| {
        if amount == 0 {
            return;
        }
        match entries.iter_mut().find(|s| s.pubkey == pk) {
            Some(s) => s.stake += amount,
            None => entries.push(Stakeholder {
                pubkey: pk,
                stake: amount,
            }),
        }
    };
    for a in &chain.genesis().accounts {
        bump(a.pubkey, a.stake);
    }
    for b in chain.blocks() {
        for tx in &b.content.transactions {
            if tx.kind == TxKind::Stake {
                bump(tx.to, tx.amount);
            }
        }
    }
    StakeholderList { entries }
}
