//! Independent election oracle shared by the integration tests.
#![allow(dead_code)]

/// Output of `python3 tests/oracle/election_oracle.py`.
pub const PY_SPLITMIX_1234567: [u64; 5] = [
    6457827717110365317,
    3203168211198807973,
    9817491932198370423,
    4593380528125082431,
    16408922859458223821,
];
pub const PY_RANGE7_1234567: [u64; 12] = [2, 3, 4, 4, 7, 5, 6, 3, 7, 7, 1, 5];
pub const PY_THREE_MAP: [usize; 6] = [0, 1, 2, 1, 0, 0];
pub const PY_THREE_SCHEDULE: [usize; 16] = [0, 1, 0, 0, 1, 2, 1, 1, 0, 0, 1, 0, 2, 0, 0, 0];
pub const PY_TWO_MAP: [usize; 3] = [0, 0, 1];
pub const PY_TWO_SCHEDULE: [usize; 16] = [1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1];

/// SplitMix64 written out with explicit wrapping in u128.
pub struct Stepper(pub u128);

impl Stepper {
    const M: u128 = 1 << 64;

    pub fn next(&mut self) -> u64 {
        self.0 = (self.0 + 0x9E37_79B9_7F4A_7C15) % Self::M;
        let mut z = self.0;
        z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) % Self::M;
        z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) % Self::M;
        (z ^ (z >> 31)) as u64
    }

    pub fn in_range(&mut self, l: u64) -> u64 {
        let limit = l as u128 * (Self::M / l as u128);
        loop {
            let u = self.next() as u128;
            if u < limit {
                return (u % l as u128) as u64 + 1;
            }
        }
    }
}

pub fn hand_map(stakes: &[u64], cs: &[u8; 32]) -> Vec<usize> {
    let l: u64 = stakes.iter().sum();
    let seed = cs[..8].iter().fold(0u128, |acc, b| acc * 256 + *b as u128);
    let mut s = Stepper(seed);
    let mut cells = vec![usize::MAX; l as usize];
    for (owner, &stake) in stakes.iter().enumerate() {
        for _ in 0..stake {
            loop {
                let i = s.in_range(l) as usize - 1;
                if cells[i] == usize::MAX {
                    cells[i] = owner;
                    break;
                }
            }
        }
    }
    cells
}

pub fn hand_schedule(cells: &[usize], cs: &[u8; 32], horizon: usize) -> Vec<usize> {
    let l = cells.len() as u128;
    let seed = cs.iter().fold(0u128, |acc, b| (acc * 256 + *b as u128) % l);
    let mut s = Stepper(seed);
    (0..horizon).map(|_| cells[s.in_range(l as u64) as usize - 1]).collect()
}
