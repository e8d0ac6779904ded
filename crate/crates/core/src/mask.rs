//! Participation bitmask: one bit per signing-group position.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bit `i` lives in byte `i / 8` at bit position `i % 8` (little-endian bit
/// order); trailing pad bits are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bitmask {
    len: usize,
    bytes: Vec<u8>,
}

impl Bitmask {
    /// All-clear mask of `len` bits.
    pub fn new(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Self::new(len);
        for i in 0..len {
            m.set(i, true);
        }
        m
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut m = Self::new(len);
        for &i in indices {
            m.set(i, true);
        }
        m
    }

    /// Rebuilds a mask from its byte encoding; pad bits must be clear.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let m = Self {
            len,
            bytes: bytes.to_vec(),
        };
        if !len.is_multiple_of(8) {
            let last = *m.bytes.last()?;
            if last >> (len % 8) != 0 {
                return None;
            }
        }
        Some(m)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    /// Panics if `i` is out of range.
    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len, "bit {i} out of range for mask of {}", self.len);
        if on {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn count(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Bitwise OR; both masks must have equal length.
    pub fn union(&self, other: &Bitmask) -> Bitmask {
        assert_eq!(self.len, other.len);
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a | b).collect();
        Bitmask { len: self.len, bytes }
    }

    pub fn intersection(&self, other: &Bitmask) -> Bitmask {
        assert_eq!(self.len, other.len);
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a & b).collect();
        Bitmask { len: self.len, bytes }
    }

    pub fn difference(&self, other: &Bitmask) -> Bitmask {
        assert_eq!(self.len, other.len);
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a & !b).collect();
        Bitmask { len: self.len, bytes }
    }

    pub fn is_subset_of(&self, other: &Bitmask) -> bool {
        self.len == other.len && self.difference(other).count() == 0
    }
}

/// Renders bits in position order, e.g. `1000` for bit 0 of four.
impl fmt::Display for Bitmask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitmask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitmask({self})")
    }
}

impl Serialize for Bitmask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bitmask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut m = Bitmask::new(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => m.set(i, true),
                '0' => {}
                _ => return Err(serde::de::Error::custom("bitmask must be a string of 0/1")),
            }
        }
        Ok(m)
    }
}
