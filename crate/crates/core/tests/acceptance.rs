//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use common::*;
use stakecosi_core::bench::{run_cosi_bench, shape_ok, PUBLISHED_ED25519_MS};
use stakecosi_core::consensus::Behavior;
use stakecosi_core::cosi::{challenge, cosi_verify, min_participants, run_cosi_round, CollectiveSignature};
use stakecosi_core::crypto::{aggregate_all, base_point, sha256, KeyPair, PublicKey, RistrettoPoint};
use stakecosi_core::election::{build_memory_map, leader_schedule, CommonSeed, ElectionView, Prng};
use stakecosi_core::ledger::{replay_state, Stakeholder, StakeholderList};
use stakecosi_core::mask::Bitmask;
use stakecosi_core::simnet::scenario::{run_scenario, Scenario};
use stakecosi_core::simnet::SimOutcome;
use stakecosi_core::vectors::{election_vector, fixture_seed};
use stakecosi_core::Hash32;

type Verdict = Result<String, String>;

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_dir().join(format!("{name}.json"))).expect("scenario parses")
}

fn all_scenarios() -> Vec<Scenario> {
    let mut paths: Vec<_> = std::fs::read_dir(scenario_dir())
        .expect("scenario directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Scenario::load(p).expect("scenario parses"))
        .collect()
}

fn run(s: &Scenario) -> SimOutcome {
    run_scenario(s).expect("scenario runs").1
}

fn safety_problems(name: &str, out: &SimOutcome) -> Vec<String> {
    let m = &out.metrics;
    let mut bad = Vec::new();
    if m.fork_count != 0 {
        bad.push(format!("{name}: {} forks", m.fork_count));
    }
    if !m.honest_chains_identical {
        bad.push(format!("{name}: honest chains differ"));
    }
    let dumps: Vec<String> = out.honest_chains.iter().map(|(_, c)| c.dump_jsonl()).collect();
    if dumps.windows(2).any(|w| w[0] != w[1]) {
        bad.push(format!("{name}: honest chain bytes differ"));
    }
    bad
}

fn verdict(problems: Vec<String>, ok: String) -> Verdict {
    if problems.is_empty() {
        Ok(ok)
    } else {
        Err(problems.join("; "))
    }
}

/// Property cases: random seeds, loss up to 10%, and up to f equivocators.
fn random_adversarial_scenario(
    seed: u64,
    drop: f64,
    dup: f64,
    seven: bool,
    equivocators: usize,
    first: usize,
) -> Scenario {
    let mut s = if seven {
        load("equivocators_f2")
    } else {
        load("equivocators_f1")
    };
    let n = s.nodes.len();
    for node in &mut s.nodes {
        node.behavior = Behavior::Honest;
    }
    for k in 0..equivocators {
        s.nodes[(first + k * 3) % n].behavior = Behavior::EquivocatingLeader;
    }
    s.name = format!("prop-{seed:x}");
    s.seed = seed;
    s.n_slots = 8;
    s.fault_config.drop_probability = drop;
    s.fault_config.duplicate_probability = dup;
    s.assertions = Default::default();
    s
}

struct Suite {
    /// Every outcome produced by criteria 1 and 7, for criteria 2 and 10.
    runs: Vec<(String, SimOutcome)>,
}

impl Suite {
    fn safety(&mut self) -> Verdict {
        let started = Instant::now();
        let mut problems = Vec::new();
        for name in [
            "happy_path",
            "offline_leader",
            "equivocators_f1",
            "equivocators_f2",
            "drop10",
        ] {
            let out = run(&load(name));
            problems.extend(safety_problems(name, &out));
            self.runs.push((name.to_string(), out));
        }
        let mut runner = TestRunner::new_with_rng(
            Config {
                cases: 16,
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        );
        let strategy = (any::<u64>(), 0.0..=0.10f64, 0.0..=0.05f64, any::<bool>(), 0usize..7);
        let extra = std::cell::RefCell::new(Vec::new());
        let result = runner.run(&strategy, |(seed, drop, dup, seven, first)| {
            let f = if seven { 2 } else { 1 };
            let s = random_adversarial_scenario(seed, drop, dup, seven, f, first);
            let out = run(&s);
            let bad = safety_problems(&s.name, &out);
            extra.borrow_mut().push((s.name.clone(), out));
            prop_assert!(bad.is_empty(), "{}", bad.join("; "));
            Ok(())
        });
        if let Err(e) = result {
            problems.push(e.to_string());
        }
        let extra = extra.into_inner();
        let cases = extra.len();
        self.runs.extend(extra);
        let secs = started.elapsed().as_secs_f64();
        if secs >= 60.0 {
            problems.push(format!("took {secs:.1}s"));
        }
        verdict(
            problems,
            format!("5 scenarios + {cases} property cases, 0 forks, {secs:.1}s"),
        )
    }

    fn finality(&self) -> Verdict {
        let bad: Vec<String> = self
            .runs
            .iter()
            .filter(|(_, o)| o.metrics.finality_violations != 0)
            .map(|(n, o)| format!("{n}: {} violations", o.metrics.finality_violations))
            .collect();
        verdict(bad, format!("{} runs, 0 replaced blocks", self.runs.len()))
    }

    fn threshold_edge(&mut self) -> Verdict {
        let mut problems = Vec::new();
        let four_f = {
            let mut s = load("offline_leader");
            s.name = "f1_offline".into();
            s.nodes[0].behavior = Behavior::Honest;
            s.nodes[2].behavior = Behavior::Offline { from: 0, to: None };
            s
        };
        for (s, m, f) in [(four_f, 4, 1), (load("f_offline"), 7, 2)] {
            let out = run(&s);
            let met = &out.metrics;
            if met.committed_blocks != s.n_slots {
                problems.push(format!("{}: {}/{} committed", s.name, met.committed_blocks, s.n_slots));
            }
            let chain = out.canonical_chain().expect("honest node");
            if chain
                .blocks()
                .iter()
                .any(|b| b.prepare_sig.participants() != m - f || b.commit_sig.participants() != m - f)
            {
                problems.push(format!("{}: popcount differs from {}", s.name, m - f));
            }
            problems.extend(safety_problems(&s.name, &out));
            self.runs.push((s.name.clone(), out));
        }
        let seven_f1 = {
            let mut s = load("f_offline");
            s.name = "f2_plus_one_offline".into();
            s.n_slots = 3;
            s.horizon = 6;
            s.nodes[6].behavior = Behavior::Offline { from: 0, to: None };
            s
        };
        for s in [load("f_plus_one_offline"), seven_f1] {
            let out = run(&s);
            if out.metrics.committed_blocks != 0 {
                problems.push(format!("{}: {} committed", s.name, out.metrics.committed_blocks));
            }
            problems.extend(safety_problems(&s.name, &out));
            if out.metrics.finality_violations != 0 || out.metrics.conservation_violations != 0 {
                problems.push(format!("{}: safety monitor fired", s.name));
            }
            self.runs.push((s.name.clone(), out));
        }
        verdict(
            problems,
            "m=4,7: f offline commit every slot with m-f signers; f+1 offline commit nothing".into(),
        )
    }

    fn conservation(&mut self) -> Verdict {
        for s in all_scenarios() {
            if !self.runs.iter().any(|(n, _)| *n == s.name) {
                let out = run(&s);
                self.runs.push((s.name.clone(), out));
            }
        }
        let mut problems = Vec::new();
        let mut blocks = 0;
        for (name, out) in &self.runs {
            if out.metrics.conservation_violations != 0 {
                problems.push(format!(
                    "{name}: monitor counted {}",
                    out.metrics.conservation_violations
                ));
            }
            for (_, chain) in &out.honest_chains {
                let genesis = chain.genesis();
                let initial: u128 = genesis
                    .accounts
                    .iter()
                    .map(|a| a.balance as u128 + a.stake as u128)
                    .sum();
                for k in 0..=chain.height() {
                    let supply = replay_state(genesis, &chain.blocks()[..k])
                        .expect("replay")
                        .total_supply();
                    if supply != initial {
                        problems.push(format!("{name}: supply {supply} != {initial} after {k} blocks"));
                    }
                }
                blocks += chain.height();
            }
        }
        verdict(
            problems,
            format!("{} runs, {blocks} block prefixes replayed", self.runs.len()),
        )
    }
}

fn stakeholders(stakes: &[(PublicKey, u64)]) -> StakeholderList {
    StakeholderList {
        entries: stakes
            .iter()
            .map(|&(pubkey, stake)| Stakeholder { pubkey, stake })
            .collect(),
    }
}

/// Slot leader for each `CS_i = SHA-256(i)`, `i = 0..n`.
fn elect(list: &StakeholderList, n: u64) -> Vec<PublicKey> {
    (0..n)
        .map(|i| {
            let cs = CommonSeed(Hash32(sha256(&[&i.to_be_bytes()])));
            let map = build_memory_map(list, &cs).expect("stake present");
            leader_schedule(&map, &cs, 1).leaders[0]
        })
        .collect()
}

fn within_3_sigma(k: usize, n: usize, p: f64) -> (bool, f64) {
    let (n, k) = (n as f64, k as f64);
    let sd = (n * p * (1.0 - p)).sqrt();
    ((k - n * p).abs() <= 3.0 * sd, (k - n * p) / sd)
}

fn stake_proportionality() -> Verdict {
    let started = Instant::now();
    let keys: Vec<PublicKey> = ["A", "B", "C"]
        .iter()
        .map(|l| *KeyPair::from_label(l).public())
        .collect();
    let stakes = [90u64, 9, 1];
    let list = stakeholders(&keys.iter().copied().zip(stakes).collect::<Vec<_>>());
    let leaders = elect(&list, 10_000);
    let secs = started.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    let mut detail = Vec::new();
    for (pk, s) in keys.iter().zip(stakes) {
        let k = leaders.iter().filter(|l| *l == pk).count();
        let (ok, z) = within_3_sigma(k, leaders.len(), s as f64 / 100.0);
        detail.push(format!("{k} (z={z:+.2})"));
        if !ok {
            problems.push(format!("share {k} for stake {s} off by {z:.2} sd"));
        }
    }
    if secs >= 10.0 {
        problems.push(format!("took {secs:.1}s"));
    }
    verdict(problems, format!("A/B/C led {} in {secs:.2}s", detail.join(", ")))
}

fn sybil_resistance() -> Verdict {
    let sybils: Vec<(PublicKey, u64)> = (0..50)
        .map(|i| (*KeyPair::from_label(&format!("sybil/{i}")).public(), 1))
        .collect();
    let whale = *KeyPair::from_label("whale").public();
    let mut entries = sybils.clone();
    entries.push((whale, 50));
    let leaders = elect(&stakeholders(&entries), 10_000);
    let n = leaders.len();
    let w = leaders.iter().filter(|l| **l == whale).count();
    let s = n - w;
    let (ok_w, zw) = within_3_sigma(w, n, 0.5);
    let (ok_s, zs) = within_3_sigma(s, n, 0.5);
    let detail = format!("50 one-stake keys led {s} (z={zs:+.2}), one 50-stake key led {w} (z={zw:+.2})");
    if ok_w && ok_s {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Verdict {
    let mut problems = Vec::new();
    let scenarios = all_scenarios();
    for s in &scenarios {
        let (a, b) = (run(s), run(s));
        if a.metrics != b.metrics {
            problems.push(format!("{}: metrics differ", s.name));
        }
        if a.events != b.events {
            problems.push(format!("{}: event logs differ", s.name));
        }
        let dump = |o: &SimOutcome| {
            o.honest_chains
                .iter()
                .map(|(i, c)| (*i, c.dump_jsonl()))
                .collect::<Vec<_>>()
        };
        if dump(&a) != dump(&b) {
            problems.push(format!("{}: chains differ", s.name));
        }
        let schedules = |o: &SimOutcome| {
            o.honest_chains
                .iter()
                .map(|(_, c)| ElectionView::derive(c).ok().map(|v| v.schedule))
                .collect::<Vec<_>>()
        };
        if schedules(&a) != schedules(&b) {
            problems.push(format!("{}: schedules differ", s.name));
        }
    }
    verdict(problems, format!("{} scenarios run twice, identical", scenarios.len()))
}

fn cosi_algebra() -> Verdict {
    let mut rng = Prng::new(0xC051);
    let mut problems = Vec::new();
    let mut groups: Vec<Vec<KeyPair>> = Vec::new();
    for m in 1..=16usize {
        groups.push((0..m).map(|i| KeyPair::from_label(&format!("ac6/{m}/{i}"))).collect());
    }
    let mut signed: Vec<(usize, CollectiveSignature, Vec<u8>)> = Vec::new();
    for round in 0..1000u64 {
        let m = 1 + rng.below(16) as usize;
        let group = &groups[m - 1];
        let pubs: Vec<PublicKey> = group.iter().map(|k| *k.public()).collect();
        let min = min_participants(m);
        let leader = rng.below(m as u64) as usize;
        let mut online = Bitmask::new(m);
        online.set(leader, true);
        let extra = min + rng.below((m - min + 1) as u64) as usize;
        while online.count() < extra {
            online.set(rng.below(m as u64) as usize, true);
        }
        let msg = round.to_be_bytes().to_vec();
        let sig = match run_cosi_round(leader, &msg, &online, group, min) {
            Ok(sig) => sig,
            Err(e) => {
                problems.push(format!("round {round}: {e}"));
                continue;
            }
        };
        let a_z: RistrettoPoint = pubs
            .iter()
            .enumerate()
            .filter(|(i, _)| online.get(*i))
            .map(|(_, p)| *p.point())
            .sum();
        let c = challenge(&sig.commitment, &aggregate_all(&pubs), &msg);
        let algebra = base_point() * sig.response == sig.commitment + a_z * c;
        if !algebra || !cosi_verify(&sig, &pubs, &msg, min) || sig.mask != online {
            problems.push(format!("round {round} (m={m}) failed"));
        }
        signed.push((m, sig, msg));
    }
    let mut rejected = 0;
    for _ in 0..100 {
        let (m, sig, msg) = &signed[rng.below(signed.len() as u64) as usize];
        let pubs: Vec<PublicKey> = groups[m - 1].iter().map(|k| *k.public()).collect();
        let mut bytes = sig.to_bytes();
        let bit = rng.below((512 + m) as u64) as usize;
        bytes[bit / 8] ^= 1 << (bit % 8);
        let ok = CollectiveSignature::from_bytes(*m, &bytes)
            .is_some_and(|s| cosi_verify(&s, &pubs, msg, min_participants(*m)));
        if ok {
            problems.push(format!("bit {bit} flip (m={m}) still verifies"));
        } else {
            rejected += 1;
        }
    }
    verdict(
        problems,
        format!("{} rounds verified, {rejected}/100 corruptions rejected", signed.len()),
    )
}

fn golden_vectors() -> Verdict {
    let cs = fixture_seed();
    let v = election_vector("three", &[3, 2, 1], &cs, 16);
    let map = hand_map(&[3, 2, 1], &cs.0 .0);
    let schedule = hand_schedule(&map, &cs.0 .0, 16);
    let detail = format!("map {:?}, schedule {:?}", v.expected_map, v.expected_schedule);
    if v.expected_map == map && v.expected_schedule == schedule && map == PY_THREE_MAP && schedule == PY_THREE_SCHEDULE
    {
        Ok(detail)
    } else {
        Err(format!("{detail} vs hand-stepped {map:?}, {schedule:?}"))
    }
}

fn bench_shape() -> Verdict {
    let counts: Vec<usize> = PUBLISHED_ED25519_MS.iter().map(|(n, _)| *n).collect();
    let rows = run_cosi_bench(&counts, 3);
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}: {:.1} ms (published {:.1} ms)",
                r.signers,
                r.mean_ms,
                r.published_ms.unwrap_or(f64::NAN)
            )
        })
        .collect();
    if shape_ok(&rows) {
        Ok(table.join(", "))
    } else {
        Err(format!(
            "not strictly increasing and sub-quadratic: {}",
            table.join(", ")
        ))
    }
}

fn main() {
    let mut suite = Suite { runs: Vec::new() };
    // Finality and conservation reuse the runs of the safety and threshold criteria.
    let mut criteria: Vec<(&str, Verdict)> = vec![
        ("1 safety/no-fork", suite.safety()),
        ("7 threshold edge", suite.threshold_edge()),
        ("2 immediate finality", suite.finality()),
        ("3 stake proportionality", stake_proportionality()),
        ("4 sybil resistance", sybil_resistance()),
        ("5 determinism", determinism()),
        ("6 cosi algebra", cosi_algebra()),
        ("8 election golden vectors", golden_vectors()),
        ("9 signing time shape", bench_shape()),
        ("10 ledger conservation", suite.conservation()),
    ];
    criteria.sort_by_key(|(name, _)| name.split(' ').next().and_then(|n| n.parse::<u32>().ok()));
    let mut failed = 0;
    for (name, v) in &criteria {
        match v {
            Ok(d) => println!("PASS AC{name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL AC{name}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
