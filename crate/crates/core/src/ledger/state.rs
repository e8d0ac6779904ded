use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tx::{Transaction, TxKind};
use crate::crypto::PublicKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("transaction signature does not verify")]
    BadSignature,
    #[error("expected nonce {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("needs {needed} coins, sender holds {available}")]
    InsufficientBalance { needed: u128, available: u64 },
    #[error("amount must be at least one coin")]
    ZeroAmount,
    #[error("recipient total would overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub pubkey: PublicKey,
    pub balance: u64,
    pub stake: u64,
    /// Next expected transaction nonce.
    pub nonce: u64,
}

impl Account {
    pub fn new(pubkey: PublicKey) -> Self {
        Self {
            pubkey,
            balance: 0,
            stake: 0,
            nonce: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub pubkey: PublicKey,
    pub stake: u64,
}

/// Stakeholders in first-appearance order with their current stake.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StakeholderList {
    pub entries: Vec<Stakeholder>,
}

impl StakeholderList {
    /// `L`, the total number of staked coins.
    pub fn total_stake(&self) -> u64 {
        self.entries.iter().map(|s| s.stake).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Account table plus the order in which stakeholders first appeared.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerState {
    accounts: BTreeMap<PublicKey, Account>,
    stake_order: Vec<PublicKey>,
}

impl LedgerState {
    pub fn account(&self, pk: &PublicKey) -> Option<&Account> {
        self.accounts.get(pk)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn balance(&self, pk: &PublicKey) -> u64 {
        self.accounts.get(pk).map_or(0, |a| a.balance)
    }

    pub fn stake(&self, pk: &PublicKey) -> u64 {
        self.accounts.get(pk).map_or(0, |a| a.stake)
    }

    pub fn next_nonce(&self, pk: &PublicKey) -> u64 {
        self.accounts.get(pk).map_or(0, |a| a.nonce)
    }

    /// Σ(balance + stake) over every account.
    pub fn total_supply(&self) -> u128 {
        self.accounts
            .values()
            .map(|a| a.balance as u128 + a.stake as u128)
            .sum()
    }

    /// Credits an allocation; used for genesis.
    pub(crate) fn allocate(&mut self, pk: PublicKey, balance: u64, stake: u64) {
        let acct = self.accounts.entry(pk).or_insert_with(|| Account::new(pk));
        acct.balance += balance;
        self.add_stake(pk, stake);
    }

    fn add_stake(&mut self, pk: PublicKey, amount: u64) {
        if amount == 0 {
            return;
        }
        let acct = self.accounts.entry(pk).or_insert_with(|| Account::new(pk));
        if acct.stake == 0 {
            self.stake_order.push(pk);
        }
        acct.stake += amount;
    }

    pub(crate) fn credit(&mut self, pk: PublicKey, amount: u64) {
        let acct = self.accounts.entry(pk).or_insert_with(|| Account::new(pk));
        acct.balance += amount;
    }

    pub fn validate_transaction(&self, tx: &Transaction) -> Result<(), TxError> {
        if tx.amount == 0 {
            return Err(TxError::ZeroAmount);
        }
        if !tx.signature_valid() {
            return Err(TxError::BadSignature);
        }
        let expected = self.next_nonce(&tx.from);
        if tx.nonce != expected {
            return Err(TxError::BadNonce {
                expected,
                got: tx.nonce,
            });
        }
        let needed = tx.amount as u128 + tx.fee as u128;
        let available = self.balance(&tx.from);
        if needed > available as u128 {
            return Err(TxError::InsufficientBalance { needed, available });
        }
        // A self-transfer is debited first, so only foreign recipients can overflow.
        if tx.to != tx.from {
            let current = match tx.kind {
                TxKind::Normal => self.balance(&tx.to),
                TxKind::Stake => self.stake(&tx.to),
            };
            current.checked_add(tx.amount).ok_or(TxError::Overflow)?;
        }
        Ok(())
    }

    /// Validates and applies; fees are withheld for the block's leader.
    pub fn apply_transaction(&mut self, tx: &Transaction) -> Result<(), TxError> {
        self.validate_transaction(tx)?;
        let sender = self.accounts.get_mut(&tx.from).expect("validated sender exists");
        sender.balance -= tx.amount + tx.fee;
        sender.nonce += 1;
        match tx.kind {
            TxKind::Normal => self.credit(tx.to, tx.amount),
            TxKind::Stake => self.add_stake(tx.to, tx.amount),
        }
        Ok(())
    }

    /// The cached stakeholder order with current stakes.
    pub fn stakeholders(&self) -> StakeholderList {
        StakeholderList {
            entries: self
                .stake_order
                .iter()
                .map(|pk| Stakeholder {
                    pubkey: *pk,
                    stake: self.stake(pk),
                })
                .collect(),
        }
    }
}
