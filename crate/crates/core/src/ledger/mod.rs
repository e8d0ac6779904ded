//! Accounts, transactions, blocks and chain validation.

mod block;
mod chain;
mod genesis;
mod state;
mod tx;

pub use block::{block_hash, commit_message, Block, BlockContent};
pub use chain::{apply_content, compute_stakeholders, replay_state, BlockError, Chain};
pub use genesis::{Genesis, GenesisAccount, GenesisError, ProtocolParams, DEFAULT_HORIZON};
pub use state::{Account, LedgerState, Stakeholder, StakeholderList, TxError};
pub use tx::{Transaction, TxKind};
