//! Deterministic slot-leader election.
//!
//! Every honest node derives the same leaders from the chain alone:
//!
//! 1. the common seed is the hash of the chain tip;
//! 2. a SplitMix64 stream seeded with the first 8 seed bytes (big-endian)
//!    scatters each staked coin into a memory map of `L = Σ S_i` cells,
//!    redrawing whenever a cell is already taken;
//! 3. a second stream, seeded with the seed read as a 256-bit big-endian
//!    integer modulo `L`, picks map cells for the current leader and its
//!    fallbacks.
//!
//! The memory-map fill is a coupon-collector process: expect about
//! `L ln L` draws, which is fine for desk-scale stake totals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Hash32;
use crate::cosi::min_participants;
use crate::crypto::PublicKey;
use crate::ledger::{Chain, StakeholderList};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElectionError {
    #[error("no stake in the system, no election possible")]
    NoStake,
}

/// SplitMix64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `1..=range` by rejection sampling.
    ///
    /// Panics if `range` is zero.
    pub fn next_in_range(&mut self, range: u64) -> u64 {
        assert!(range >= 1, "range must be non-empty");
        let limit = range as u128 * ((1u128 << 64) / range as u128);
        loop {
            let u = self.next_u64();
            if (u as u128) < limit {
                return u % range + 1;
            }
        }
    }

    /// Uniform draw from `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_in_range(n) - 1
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn next_in_range(prng: &mut Prng, range: u64) -> u64 {
    prng.next_in_range(range)
}

/// Hash of the last committed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommonSeed(pub Hash32);

impl CommonSeed {
    /// First eight bytes, big-endian; seeds the memory-map stream.
    pub fn map_seed(&self) -> u64 {
        u64::from_be_bytes(self.0 .0[..8].try_into().expect("8 bytes"))
    }

    /// The whole seed as a big-endian integer modulo `range`.
    pub fn reduce(&self, range: u64) -> u64 {
        assert!(range >= 1);
        let m = range as u128;
        self.0 .0.iter().fold(0u128, |acc, &b| (acc * 256 + b as u128) % m) as u64
    }
}

pub fn common_seed(chain: &Chain) -> CommonSeed {
    CommonSeed(chain.tip_hash())
}

/// One cell per staked coin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMap {
    pub cells: Vec<PublicKey>,
}

impl MemoryMap {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count(&self, pk: &PublicKey) -> usize {
        self.cells.iter().filter(|c| *c == pk).count()
    }
}

pub fn build_memory_map(stakeholders: &StakeholderList, cs: &CommonSeed) -> Result<MemoryMap, ElectionError> {
    let total = stakeholders.total_stake();
    if total == 0 {
        return Err(ElectionError::NoStake);
    }
    let mut prng = Prng::new(cs.map_seed());
    let mut cells: Vec<Option<PublicKey>> = vec![None; total as usize];
    for holder in &stakeholders.entries {
        for _ in 0..holder.stake {
            loop {
                let idx = prng.next_in_range(total) as usize - 1;
                if cells[idx].is_none() {
                    cells[idx] = Some(holder.pubkey);
                    break;
                }
            }
        }
    }
    Ok(MemoryMap {
        cells: cells.into_iter().map(|c| c.expect("every cell filled")).collect(),
    })
}

/// The leader for the current slot followed by its fallbacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderSchedule {
    pub leaders: Vec<PublicKey>,
}

impl LeaderSchedule {
    pub fn leader(&self, round: usize) -> Option<&PublicKey> {
        self.leaders.get(round)
    }

    pub fn len(&self) -> usize {
        self.leaders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaders.is_empty()
    }
}

/// Panics on an empty map; [`build_memory_map`] never returns one.
pub fn leader_schedule(map: &MemoryMap, cs: &CommonSeed, horizon: usize) -> LeaderSchedule {
    let total = map.len() as u64;
    let mut prng = Prng::new(cs.reduce(total));
    let leaders = (0..horizon)
        .map(|_| map.cells[prng.next_in_range(total) as usize - 1])
        .collect();
    LeaderSchedule { leaders }
}

/// Top `group_size` stakeholders by stake; ties keep appearance order.
/// The returned order fixes bitmask positions.
pub fn signing_group(stakeholders: &StakeholderList, group_size: usize) -> Vec<PublicKey> {
    let mut ranked: Vec<(usize, &crate::ledger::Stakeholder)> = stakeholders.entries.iter().enumerate().collect();
    ranked.sort_by(|(ia, a), (ib, b)| b.stake.cmp(&a.stake).then(ia.cmp(ib)));
    ranked.into_iter().take(group_size).map(|(_, s)| s.pubkey).collect()
}

/// Everything a node derives from its chain tip for the next slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionView {
    pub tip: Hash32,
    pub seed: CommonSeed,
    pub stakeholders: StakeholderList,
    pub schedule: LeaderSchedule,
    pub group: Vec<PublicKey>,
    pub min_participants: usize,
}

impl ElectionView {
    pub fn derive(chain: &Chain) -> Result<Self, ElectionError> {
        let params = chain.genesis().params;
        let stakeholders = chain.state().stakeholders();
        let seed = common_seed(chain);
        let map = build_memory_map(&stakeholders, &seed)?;
        let schedule = leader_schedule(&map, &seed, params.horizon as usize);
        let group = signing_group(&stakeholders, params.group_size as usize);
        let min_participants = min_participants(group.len());
        Ok(Self {
            tip: chain.tip_hash(),
            seed,
            stakeholders,
            schedule,
            group,
            min_participants,
        })
    }

    pub fn group_index(&self, pk: &PublicKey) -> Option<usize> {
        self.group.iter().position(|g| g == pk)
    }
}
