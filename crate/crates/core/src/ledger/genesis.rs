use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Hash32, Writer};
use crate::crypto::PublicKey;

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("cannot read genesis file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed genesis file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("account {0} listed twice")]
    DuplicateAccount(Box<PublicKey>),
    #[error("no account holds stake")]
    NoStake,
    #[error("{0} must be at least 1")]
    ZeroParam(&'static str),
}

pub const DEFAULT_HORIZON: u32 = 64;

fn default_horizon() -> u32 {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of fallback leaders derived per slot.
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    /// Maximum signing-group size `M`.
    pub group_size: u32,
    /// Logical ticks a leader gets before the next fallback takes over.
    pub timeout_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisAccount {
    pub pubkey: PublicKey,
    pub balance: u64,
    pub stake: u64,
}

/// Initial allocations and protocol parameters. Carries no signatures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    pub accounts: Vec<GenesisAccount>,
    pub params: ProtocolParams,
}

impl Genesis {
    pub fn from_json(s: &str) -> Result<Self, GenesisError> {
        let g: Genesis = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GenesisError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        let mut seen = BTreeSet::new();
        for a in &self.accounts {
            if !seen.insert(a.pubkey) {
                return Err(GenesisError::DuplicateAccount(Box::new(a.pubkey)));
            }
        }
        if self.accounts.iter().all(|a| a.stake == 0) {
            return Err(GenesisError::NoStake);
        }
        if self.params.horizon == 0 {
            return Err(GenesisError::ZeroParam("horizon"));
        }
        if self.params.group_size == 0 {
            return Err(GenesisError::ZeroParam("group_size"));
        }
        if self.params.timeout_ticks == 0 {
            return Err(GenesisError::ZeroParam("timeout_ticks"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(b"stakecosi/genesis");
        w.u32(self.accounts.len() as u32);
        for a in &self.accounts {
            w.raw(a.pubkey.as_bytes()).u64(a.balance).u64(a.stake);
        }
        w.u32(self.params.horizon)
            .u32(self.params.group_size)
            .u64(self.params.timeout_ticks);
        w.finish()
    }

    pub fn hash(&self) -> Hash32 {
        Hash32::of(&[&self.to_bytes()])
    }
}
