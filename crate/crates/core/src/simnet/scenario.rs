//! Scenario files and run reports.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FaultConfig, Metrics, SimConfig, SimError, SimOutcome, Simulation, Topology, Workload};
use crate::consensus::Behavior;
use crate::crypto::KeyPair;
use crate::ledger::{Genesis, GenesisAccount, ProtocolParams, DEFAULT_HORIZON};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub balance: u64,
    pub stake: u64,
    #[serde(default = "honest")]
    pub behavior: Behavior,
}

fn honest() -> Behavior {
    Behavior::Honest
}

fn default_horizon() -> u32 {
    DEFAULT_HORIZON
}

fn default_attempts() -> u32 {
    4
}

fn default_block_txs() -> usize {
    16
}

/// Checks beyond the safety properties that every run must satisfy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Assertions {
    pub min_committed: Option<u64>,
    pub max_committed: Option<u64>,
    pub max_skipped: Option<u64>,
    /// Every committed block carries exactly this many signers per round.
    pub commit_participants: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub fault_config: FaultConfig,
    pub n_slots: u64,
    pub seed: u64,
    #[serde(default)]
    pub topology: Topology,
    pub group_size: u32,
    pub timeout_ticks: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_block_txs")]
    pub max_block_txs: usize,
    #[serde(default)]
    pub assertions: Assertions,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Node keys come from their names, so a scenario pins its genesis.
    pub fn keys(&self) -> Vec<KeyPair> {
        self.nodes.iter().map(|n| KeyPair::from_label(&n.name)).collect()
    }

    pub fn genesis(&self) -> Genesis {
        let keys = self.keys();
        Genesis {
            accounts: self
                .nodes
                .iter()
                .zip(&keys)
                .map(|(n, k)| GenesisAccount {
                    pubkey: *k.public(),
                    balance: n.balance,
                    stake: n.stake,
                })
                .collect(),
            params: ProtocolParams {
                horizon: self.horizon,
                group_size: self.group_size,
                timeout_ticks: self.timeout_ticks,
            },
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            genesis: self.genesis(),
            keys: self.keys(),
            names: self.nodes.iter().map(|n| n.name.clone()).collect(),
            behaviors: self.nodes.iter().map(|n| n.behavior.clone()).collect(),
            faults: self.fault_config.clone(),
            topology: self.topology,
            n_slots: self.n_slots,
            seed: self.seed,
            workload: self.workload.clone(),
            max_attempts: self.max_attempts,
            max_block_txs: self.max_block_txs,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub liveness_guaranteed: bool,
    pub checks: Vec<Check>,
    pub skipped_checks: Vec<String>,
    pub metrics: Metrics,
    pub runtime_ms: f64,
}

/// Runs a scenario and grades it.
pub fn run_scenario(scenario: &Scenario) -> Result<(RunReport, SimOutcome), ScenarioError> {
    let cfg = scenario.sim_config();
    let live = cfg.liveness_guaranteed();
    let started = Instant::now();
    let outcome = Simulation::new(cfg)?.run();
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = evaluate(scenario, live, &outcome, runtime_ms);
    Ok((report, outcome))
}

fn evaluate(scenario: &Scenario, live: bool, outcome: &SimOutcome, runtime_ms: f64) -> RunReport {
    let m = &outcome.metrics;
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    };
    check("no_fork", m.fork_count == 0, format!("fork count {}", m.fork_count));
    check(
        "finality",
        m.finality_violations == 0,
        format!("{} violations", m.finality_violations),
    );
    check(
        "conservation",
        m.conservation_violations == 0,
        format!("{} violations", m.conservation_violations),
    );
    check("honest_chains_identical", m.honest_chains_identical, String::new());

    let a = &scenario.assertions;
    if let Some(max) = a.max_committed {
        check(
            "max_committed",
            m.committed_blocks <= max,
            format!("{} committed", m.committed_blocks),
        );
    }
    let mut liveness = Vec::new();
    if let Some(min) = a.min_committed {
        liveness.push((
            "min_committed",
            m.committed_blocks >= min,
            format!("{} committed", m.committed_blocks),
        ));
    }
    if let Some(max) = a.max_skipped {
        liveness.push((
            "max_skipped",
            m.skipped_slots <= max,
            format!("{} skipped", m.skipped_slots),
        ));
    }
    if let Some(p) = a.commit_participants {
        let ok = m
            .slots
            .iter()
            .filter(|s| s.committed)
            .all(|s| s.prepare_participants == Some(p) && s.commit_participants == Some(p));
        liveness.push(("commit_participants", ok, format!("expected {p} signers per round")));
    }
    for (name, passed, detail) in liveness {
        if live {
            check(name, passed, detail);
        } else {
            skipped.push(name.to_string());
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    RunReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        passed,
        liveness_guaranteed: live,
        checks,
        skipped_checks: skipped,
        metrics: m.clone(),
        runtime_ms,
    }
}
