//! Election golden vectors, checked three ways: against values frozen from
//! the Python reference in `tests/oracle/`, against a from-scratch SplitMix64
//! stepped here, and against the committed fixture files.

mod common;

use std::path::PathBuf;

use common::*;
use stakecosi_core::vectors::{
    election_vectors, election_vectors_json, prng_vectors, prng_vectors_json, write_vectors, ElectionVector,
    ELECTION_FILE, NO_ELECTION, PRNG_FILE,
};

fn vector(name: &str) -> ElectionVector {
    election_vectors().into_iter().find(|v| v.name == name).unwrap()
}

#[test]
fn prng_matches_python_reference_and_hand_stepper() {
    let v = &prng_vectors()[0];
    assert_eq!(v.seed, 1234567);
    assert_eq!(v.outputs, PY_SPLITMIX_1234567);
    assert_eq!(v.range_outputs, PY_RANGE7_1234567);
    for v in prng_vectors() {
        let mut s = Stepper(v.seed as u128);
        let outs: Vec<u64> = (0..5).map(|_| s.next()).collect();
        assert_eq!(outs, v.outputs);
        let mut s = Stepper(v.seed as u128);
        let outs: Vec<u64> = (0..12).map(|_| s.in_range(v.range)).collect();
        assert_eq!(outs, v.range_outputs);
    }
}

#[test]
fn three_stakeholder_fixture_matches_references() {
    let v = vector("three");
    assert_eq!(v.total_stake, 6);
    assert_eq!(v.expected_map, PY_THREE_MAP);
    assert_eq!(v.expected_schedule, PY_THREE_SCHEDULE);
    assert_eq!(v.expected_map, hand_map(&[3, 2, 1], &v.cs.0));
    assert_eq!(v.expected_schedule, hand_schedule(&v.expected_map, &v.cs.0, 16));
    // Oracle: 0x000102..1f mod 6 = 1.
    assert_eq!(v.schedule_seed, Some(1));
    assert_eq!(v.map_seed, 0x0001_0203_0405_0607);
}

#[test]
fn two_stakeholder_fixture_matches_references() {
    let v = vector("two");
    assert_eq!(v.expected_map, PY_TWO_MAP);
    assert_eq!(v.expected_schedule, PY_TWO_SCHEDULE);
    assert_eq!(
        v.expected_schedule,
        hand_schedule(&hand_map(&[2, 1], &v.cs.0), &v.cs.0, 16)
    );
}

#[test]
fn single_holder_owns_every_cell() {
    let v = vector("single");
    assert_eq!(v.expected_map, vec![0; 4]);
    assert_eq!(v.expected_schedule, vec![0; 4]);
}

#[test]
fn empty_stake_records_marker() {
    let v = vector("empty");
    assert_eq!(v.total_stake, 0);
    assert_eq!(v.note.as_deref(), Some(NO_ELECTION));
    assert!(v.expected_map.is_empty() && v.expected_schedule.is_empty());
    assert_eq!(v.schedule_seed, None);
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn committed_fixtures_are_current() {
    let dir = fixtures();
    if std::env::var_os("UPDATE_VECTORS").is_some() {
        write_vectors(&dir).unwrap();
    }
    let election = std::fs::read_to_string(dir.join(ELECTION_FILE)).unwrap();
    let prng = std::fs::read_to_string(dir.join(PRNG_FILE)).unwrap();
    assert_eq!(election, election_vectors_json());
    assert_eq!(prng, prng_vectors_json());
}

#[test]
fn generation_is_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_vectors(a.path()).unwrap();
    write_vectors(b.path()).unwrap();
    for name in [ELECTION_FILE, PRNG_FILE] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}
