//! Golden vectors for the election pipeline: PRNG outputs, memory maps and
//! leader schedules for fixed seeds and stake lists.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::Hash32;
use crate::crypto::{KeyPair, PublicKey};
use crate::election::{build_memory_map, leader_schedule, CommonSeed, ElectionError, Prng};
use crate::ledger::{Stakeholder, StakeholderList};

pub const ELECTION_FILE: &str = "election_vectors.json";
pub const PRNG_FILE: &str = "prng_vectors.json";

/// Marker recorded when the stake total is zero.
pub const NO_ELECTION: &str = "no election possible";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub label: String,
    pub pubkey: PublicKey,
    pub stake: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionVector {
    pub name: String,
    pub cs: Hash32,
    pub stakeholders: Vec<HolderSpec>,
    pub total_stake: u64,
    pub map_seed: u64,
    pub schedule_seed: Option<u64>,
    /// Cell owners as positions in `stakeholders`.
    pub expected_map: Vec<usize>,
    pub expected_schedule: Vec<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrngVector {
    pub seed: u64,
    pub outputs: Vec<u64>,
    pub range: u64,
    pub range_outputs: Vec<u64>,
}

/// The bytes `00 01 .. 1f`, used as the seed of every fixture.
pub fn fixture_seed() -> CommonSeed {
    let mut b = [0u8; 32];
    for (i, x) in b.iter_mut().enumerate() {
        *x = i as u8;
    }
    CommonSeed(Hash32(b))
}

pub fn election_vector(name: &str, stakes: &[u64], cs: &CommonSeed, horizon: usize) -> ElectionVector {
    let holders: Vec<HolderSpec> = stakes
        .iter()
        .enumerate()
        .map(|(i, &stake)| {
            let label = format!("{name}/{i}");
            HolderSpec {
                pubkey: *KeyPair::from_label(&label).public(),
                label,
                stake,
            }
        })
        .collect();
    let list = StakeholderList {
        entries: holders
            .iter()
            .filter(|h| h.stake > 0)
            .map(|h| Stakeholder {
                pubkey: h.pubkey,
                stake: h.stake,
            })
            .collect(),
    };
    let position = |pk: &PublicKey| holders.iter().position(|h| h.pubkey == *pk).expect("known holder");
    let total = list.total_stake();
    let mut v = ElectionVector {
        name: name.to_string(),
        cs: cs.0,
        stakeholders: holders.clone(),
        total_stake: total,
        map_seed: cs.map_seed(),
        schedule_seed: None,
        expected_map: Vec::new(),
        expected_schedule: Vec::new(),
        note: None,
    };
    match build_memory_map(&list, cs) {
        Ok(map) => {
            let sched = leader_schedule(&map, cs, horizon);
            v.schedule_seed = Some(cs.reduce(total));
            v.expected_map = map.cells.iter().map(position).collect();
            v.expected_schedule = sched.leaders.iter().map(position).collect();
        }
        Err(ElectionError::NoStake) => v.note = Some(NO_ELECTION.to_string()),
    }
    v
}

pub fn election_vectors() -> Vec<ElectionVector> {
    let cs = fixture_seed();
    vec![
        election_vector("three", &[3, 2, 1], &cs, 16),
        election_vector("two", &[2, 1], &cs, 16),
        election_vector("single", &[4], &cs, 4),
        election_vector("empty", &[0, 0], &cs, 4),
    ]
}

pub fn prng_vectors() -> Vec<PrngVector> {
    [(1234567u64, 7u64), (0, 1), (u64::MAX, 1000)]
        .into_iter()
        .map(|(seed, range)| {
            let mut p = Prng::new(seed);
            let outputs = (0..5).map(|_| p.next_u64()).collect();
            let mut p = Prng::new(seed);
            let range_outputs = (0..12).map(|_| p.next_in_range(range)).collect();
            PrngVector {
                seed,
                outputs,
                range,
                range_outputs,
            }
        })
        .collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("vectors serialize");
    s.push('\n');
    s
}

pub fn election_vectors_json() -> String {
    pretty(&election_vectors())
}

pub fn prng_vectors_json() -> String {
    pretty(&prng_vectors())
}

/// Writes both vector files into `dir`, creating it if needed.
pub fn write_vectors(dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (ELECTION_FILE, election_vectors_json()),
        (PRNG_FILE, prng_vectors_json()),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
