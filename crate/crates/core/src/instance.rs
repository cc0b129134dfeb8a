//! Self-delimiting encoding of a list of string pairs followed by a payload.
//!
//! Layout: `gamma(m+1)`, then for each of the `2m` strings `gamma(len+1)`
//! followed by its bits, then the payload, which runs to the end. Every bit
//! string either parses uniquely or fails to parse.

use thiserror::Error;

use crate::bits::{gamma_encode, BitReader, Bits, ReadError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("truncated instance: {0}")]
    Truncated(#[from] ReadError),
    #[error("pair {0} has an empty left-hand side")]
    EmptyLeft(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Pair = (Bits, Bits);

pub fn encode_pairs(pairs: &[Pair], payload: &[u8]) -> Bits {
    let mut out = Bits::new();
    gamma_encode(pairs.len() as u64 + 1, &mut out);
    for (g, h) in pairs {
        for s in [g, h] {
            gamma_encode(s.len() as u64 + 1, &mut out);
            out.extend_from_slice(s);
        }
    }
    out.extend_from_slice(payload);
    out
}

/// Parsed pair list, and the offset where the payload starts.
pub fn decode_pairs(bits: &[u8]) -> Result<(Vec<Pair>, usize), InstanceError> {
    let mut r = BitReader::new(bits);
    let m = r.read_gamma()? - 1;
    let mut pairs = Vec::new();
    for _ in 0..m {
        let mut side = || -> Result<Bits, ReadError> {
            let len = r.read_gamma()? - 1;
            let len = usize::try_from(len).map_err(|_| ReadError::Truncated(r.position()))?;
            Ok(Bits::from(r.read_bits(len)?))
        };
        let g = side()?;
        let h = side()?;
        pairs.push((g, h));
    }
    Ok((pairs, r.position()))
}
