//! Signing-time micro-benchmark: fresh keys per signer, one full collective
//! signing round, then verification.

use std::time::Instant;

use serde::Serialize;

use crate::cosi::{cosi_verify, min_participants, run_cosi_round};
use crate::crypto::{sha256, KeyPair, PublicKey};
use crate::mask::Bitmask;

/// Published Edwards 25519 means in milliseconds, measured on a 2.8 GHz
/// AMD Phenom II. Shown next to local numbers for context only.
pub const PUBLISHED_ED25519_MS: [(usize, f64); 3] = [(10, 28.9), (50, 242.9), (100, 512.3)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub signers: usize,
    pub reps: usize,
    pub mean_ms: f64,
    pub published_ms: Option<f64>,
}

/// One timed repetition. `rep` varies the keys and message.
pub fn signing_round(signers: usize, rep: u64) -> bool {
    let keys: Vec<KeyPair> = (0..signers)
        .map(|i| KeyPair::from_seed(&sha256(&[b"bench", &rep.to_le_bytes(), &(i as u64).to_le_bytes()])))
        .collect();
    let pubs: Vec<PublicKey> = keys.iter().map(|k| *k.public()).collect();
    let msg = rep.to_le_bytes();
    let min = min_participants(signers);
    let sig = run_cosi_round(0, &msg, &Bitmask::full(signers), &keys, min).expect("all signers online");
    cosi_verify(&sig, &pubs, &msg, min)
}

pub fn run_cosi_bench(signer_counts: &[usize], reps: usize) -> Vec<BenchRow> {
    signer_counts
        .iter()
        .map(|&signers| {
            let reps = reps.max(1);
            let start = Instant::now();
            for rep in 0..reps {
                assert!(signing_round(signers, rep as u64), "benchmark signature must verify");
            }
            let mean_ms = start.elapsed().as_secs_f64() * 1e3 / reps as f64;
            let published_ms = PUBLISHED_ED25519_MS
                .iter()
                .find(|(n, _)| *n == signers)
                .map(|(_, ms)| *ms);
            BenchRow {
                signers,
                reps,
                mean_ms,
                published_ms,
            }
        })
        .collect()
}

/// Strictly increasing means whose growth stays below the square of the
/// signer-count ratio between consecutive rows.
pub fn shape_ok(rows: &[BenchRow]) -> bool {
    rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let ratio = b.signers as f64 / a.signers as f64;
        b.mean_ms > a.mean_ms && b.mean_ms / a.mean_ms < ratio * ratio
    })
}
