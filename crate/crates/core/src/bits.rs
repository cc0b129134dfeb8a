//! Bit strings and Elias-gamma self-delimiting integers.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use thiserror::Error;

/// A finite string over {0,1}. Each element is 0 or 1.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<u8>);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid bit character {found:?} at offset {offset}")]
pub struct BitsParseError {
    pub offset: usize,
    pub found: char,
}

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    /// Panics if any element is not 0 or 1.
    pub fn from_vec(v: Vec<u8>) -> Self {
        assert!(v.iter().all(|&b| b <= 1), "bit values must be 0 or 1");
        Bits(v)
    }

    pub fn zeros(n: usize) -> Self {
        Bits(vec![0; n])
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_uint(value: u64, len: usize) -> Self {
        Bits((0..len).rev().map(|i| ((value >> i) & 1) as u8).collect())
    }

    pub fn to_uint(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn extend_from_slice(&mut self, bits: &[u8]) {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        self.0.extend_from_slice(bits);
    }

    pub fn concat(parts: &[&[u8]]) -> Self {
        let mut v = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            v.extend_from_slice(p);
        }
        Bits(v)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    /// Offset of the first occurrence of `needle`, if any.
    pub fn find(&self, needle: &[u8]) -> Option<usize> {
        if needle.is_empty() {
            return Some(0);
        }
        self.0.windows(needle.len()).position(|w| w == needle)
    }
}

impl Deref for Bits {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<&[u8]> for Bits {
    fn from(s: &[u8]) -> Self {
        Bits::from_vec(s.to_vec())
    }
}

impl FromStr for Bits {
    type Err = BitsParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(offset, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                found => Err(BitsParseError { offset, found }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

/// Convenience for tests and literals; panics on non-binary input.
pub fn bits(s: &str) -> Bits {
    s.parse().expect("literal bit string")
}

/// Appends the Elias-gamma code of `value` (which must be ≥ 1).
pub fn gamma_encode(value: u64, out: &mut Bits) {
    assert!(value >= 1, "Elias gamma is defined for positive integers");
    let width = 64 - value.leading_zeros() as usize;
    for _ in 1..width {
        out.push(0);
    }
    out.extend_from_slice(&Bits::from_uint(value, width));
}

pub fn gamma_len(value: u64) -> usize {
    let width = 64 - value.leading_zeros() as usize;
    2 * width - 1
}

/// Sequential reader over a bit slice.
pub struct BitReader<'a> {
    bits: &'a [u8],
    pos: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadError {
    #[error("unexpected end of input at bit {0}")]
    Truncated(usize),
    #[error("gamma code at bit {0} exceeds 63 bits")]
    Overflow(usize),
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [u8]) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> &'a [u8] {
        &self.bits[self.pos..]
    }

    pub fn read_gamma(&mut self) -> Result<u64, ReadError> {
        let start = self.pos;
        let mut zeros = 0usize;
        loop {
            match self.bits.get(self.pos) {
                None => return Err(ReadError::Truncated(start)),
                Some(0) => {
                    zeros += 1;
                    self.pos += 1;
                    if zeros > 62 {
                        return Err(ReadError::Overflow(start));
                    }
                }
                Some(_) => break,
            }
        }
        let end = self.pos + zeros + 1;
        if end > self.bits.len() {
            return Err(ReadError::Truncated(start));
        }
        let value = self.bits[self.pos..end].iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        self.pos = end;
        Ok(value)
    }

    pub fn read_bits(&mut self, len: usize) -> Result<&'a [u8], ReadError> {
        if self.pos + len > self.bits.len() {
            return Err(ReadError::Truncated(self.pos));
        }
        let out = &self.bits[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}
