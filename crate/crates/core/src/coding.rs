//! Fixed-length binary codes for compiler alphabets.
//!
//! Every code has the shape `001 d1 1 d2 1 … dm 1 11`, where `d1..dm` are the
//! bits of `salt + index`. Zeros between the delimiters are isolated, so
//! `00` occurs in a concatenation of codes only at code boundaries. That is
//! what makes codes self-aligning (no code occurs at a non-aligned offset and
//! no proper suffix of a code is a prefix of another code). None of the raw
//! payload blocks `1`, `10`, `100`, `000` is a prefix of a code either.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

/// Index of a symbol in a [`CodeTable`] alphabet.
pub type SymbolId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("alphabet needs at least 3 symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("payload length bound must be at least 1")]
    ZeroLength,
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(String),
    #[error("no salt window of {window} values avoids the given strings ({bad} code values blocked)")]
    NoSaltWindow { window: usize, bad: usize },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("bit length {len} is not a multiple of the code length {code_len}")]
    Misaligned { len: usize, code_len: usize },
    #[error("chunk at offset {0} is not a code")]
    NotACode(usize),
    #[error("malformed code table: {0}")]
    Malformed(String),
}

/// One of the payload blocks `1`, `10`, `100`, `000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    One,
    OneZero,
    OneZeroZero,
    ZeroZeroZero,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::One, Block::OneZero, Block::OneZeroZero, Block::ZeroZeroZero];

    pub fn bits(self) -> &'static [u8] {
        match self {
            Block::One => &[1],
            Block::OneZero => &[1, 0],
            Block::OneZeroZero => &[1, 0, 0],
            Block::ZeroZeroZero => &[0, 0, 0],
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Splits `x` into blocks from {1, 10, 100, 000}. The decomposition is
/// unique when it exists; it exists iff the leading run of zeros has a
/// length divisible by 3.
pub fn block_decompose(x: &[u8]) -> Option<Vec<Block>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if x[i] == 1 {
            // A 1 followed by k zeros: the 1 absorbs k mod 3 of them.
            let zeros = x[i + 1..].iter().take_while(|&&b| b == 0).count();
            out.push(match zeros % 3 {
                0 => Block::One,
                1 => Block::OneZero,
                _ => Block::OneZeroZero,
            });
            i += 1 + zeros % 3;
            for _ in 0..zeros / 3 {
                out.push(Block::ZeroZeroZero);
            }
            i += 3 * (zeros / 3);
        } else {
            if x.len() < i + 3 || x[i..i + 3] != [0, 0, 0] {
                return None;
            }
            out.push(Block::ZeroZeroZero);
            i += 3;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    alphabet: Vec<String>,
    data_bits: usize,
    salt: u64,
    codes: Vec<Bits>,
    index: HashMap<String, SymbolId>,
}

#[derive(Serialize, Deserialize)]
struct CodeTableDoc {
    alphabet: Vec<String>,
    l: usize,
    salt: u64,
    codes: Vec<String>,
}

/// Number of data bits for an alphabet of `symbols` symbols and payload
/// bound `n`: the least `m` with `2^m ≥ symbols·(2n+3)`.
pub fn data_bits_for(symbols: usize, n: usize) -> usize {
    let need = (symbols * (2 * n + 2) + symbols) as u64;
    (64 - (need - 1).leading_zeros()) as usize
}

fn code_for(value: u64, m: usize) -> Bits {
    let mut out = Bits::from_vec(vec![0, 0, 1]);
    for i in (0..m).rev() {
        out.push(((value >> i) & 1) as u8);
        out.push(1);
    }
    out.extend_from_slice(&[1, 1]);
    out
}

/// If `w[at..at + 2m + 5]` has the code shape, the value it carries.
fn code_value_at(w: &[u8], at: usize, m: usize) -> Option<u64> {
    let l = 2 * m + 5;
    let c = w.get(at..at + l)?;
    if c[..3] != [0, 0, 1] || c[l - 2..] != [1, 1] {
        return None;
    }
    let mut value = 0u64;
    for i in 0..m {
        if c[4 + 2 * i] != 1 {
            return None;
        }
        value = (value << 1) | c[3 + 2 * i] as u64;
    }
    Some(value)
}

/// Builds a table for `alphabet` sized for payloads up to `n` bits.
///
/// With a non-empty `avoid`, the salt is the first window start at or after
/// `salt_seed` (cyclically) such that no code of the table occurs in any of
/// the avoided strings. Existence is guaranteed while the avoided strings
/// total at most `2n` bits.
pub fn build_code_table<S: AsRef<str>>(
    alphabet: &[S],
    n: usize,
    avoid: &[Bits],
    salt_seed: u64,
) -> Result<CodeTable, CodingError> {
    let k = alphabet.len();
    if k < 3 {
        return Err(CodingError::AlphabetTooSmall(k));
    }
    if n == 0 {
        return Err(CodingError::ZeroLength);
    }
    let m = data_bits_for(k, n);
    let range = (1u64 << m) - k as u64;

    let mut bad: HashSet<u64> = HashSet::new();
    for w in avoid {
        for at in 0..w.len() {
            if let Some(v) = code_value_at(w, at, m) {
                bad.insert(v);
            }
        }
    }

    let first = salt_seed % range;
    let salt = (0..range)
        .map(|i| (first + i) % range)
        .find(|&s| (s..s + k as u64).all(|v| !bad.contains(&v)))
        .ok_or(CodingError::NoSaltWindow { window: k, bad: bad.len() })?;

    CodeTable::from_parts(alphabet.iter().map(|s| s.as_ref().to_string()).collect(), m, salt)
}

impl CodeTable {
    fn from_parts(alphabet: Vec<String>, m: usize, salt: u64) -> Result<CodeTable, CodingError> {
        let mut index = HashMap::new();
        for (i, s) in alphabet.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(CodingError::DuplicateSymbol(s.clone()));
            }
        }
        if salt + alphabet.len() as u64 > (1u64 << m) {
            return Err(CodingError::Malformed(format!(
                "salt {salt} leaves no room for {} codes of {m} data bits",
                alphabet.len()
            )));
        }
        let codes = (0..alphabet.len()).map(|i| code_for(salt + i as u64, m)).collect();
        Ok(CodeTable { alphabet, data_bits: m, salt, codes, index })
    }

    /// Code length `l`.
    pub fn code_len(&self) -> usize {
        2 * self.data_bits + 5
    }

    pub fn data_bits(&self) -> usize {
        self.data_bits
    }

    pub fn salt(&self) -> u64 {
        self.salt
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn codes(&self) -> &[Bits] {
        &self.codes
    }

    pub fn id(&self, symbol: &str) -> Result<SymbolId, CodingError> {
        self.index.get(symbol).copied().ok_or_else(|| CodingError::UnknownSymbol(symbol.to_string()))
    }

    pub fn code(&self, id: SymbolId) -> &Bits {
        &self.codes[id]
    }

    /// Code of a named symbol.
    pub fn code_of(&self, symbol: &str) -> Result<&Bits, CodingError> {
        Ok(&self.codes[self.id(symbol)?])
    }

    /// Concatenated codes of `w`.
    pub fn encode<S: AsRef<str>>(&self, w: &[S]) -> Result<Bits, CodingError> {
        let mut out = Bits::new();
        for s in w {
            out.extend_from_slice(self.code_of(s.as_ref())?);
        }
        Ok(out)
    }

    pub fn encode_ids(&self, w: &[SymbolId]) -> Bits {
        let mut out = Bits::new();
        for &id in w {
            out.extend_from_slice(&self.codes[id]);
        }
        out
    }

    /// Symbol id of a single code, if `chunk` is one.
    pub fn lookup(&self, chunk: &[u8]) -> Option<SymbolId> {
        if chunk.len() != self.code_len() {
            return None;
        }
        let v = code_value_at(chunk, 0, self.data_bits)?;
        let id = v.checked_sub(self.salt)? as usize;
        (id < self.alphabet.len()).then_some(id)
    }

    pub fn decode_ids(&self, bits: &[u8]) -> Result<Vec<SymbolId>, CodingError> {
        let l = self.code_len();
        if !bits.len().is_multiple_of(l) {
            return Err(CodingError::Misaligned { len: bits.len(), code_len: l });
        }
        bits.chunks(l).enumerate().map(|(i, c)| self.lookup(c).ok_or(CodingError::NotACode(i * l))).collect()
    }

    pub fn decode(&self, bits: &[u8]) -> Result<Vec<String>, CodingError> {
        Ok(self.decode_ids(bits)?.into_iter().map(|id| self.alphabet[id].clone()).collect())
    }

    /// First occurrence of any code in `w`: `(offset, symbol)`.
    pub fn find_code(&self, w: &[u8]) -> Option<(usize, SymbolId)> {
        let l = self.code_len();
        (0..w.len().saturating_sub(l - 1)).find_map(|at| {
            let id = self.lookup(&w[at..at + l])?;
            Some((at, id))
        })
    }

    pub fn to_json(&self) -> String {
        let doc = CodeTableDoc {
            alphabet: self.alphabet.clone(),
            l: self.code_len(),
            salt: self.salt,
            codes: self.codes.iter().map(|c| c.to_string()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("code table serializes")
    }

    pub fn from_json(text: &str) -> Result<CodeTable, CodingError> {
        let doc: CodeTableDoc =
            serde_json::from_str(text).map_err(|e| CodingError::Malformed(e.to_string()))?;
        if doc.l < 7 || doc.l.is_multiple_of(2) {
            return Err(CodingError::Malformed(format!("code length {}", doc.l)));
        }
        let table = CodeTable::from_parts(doc.alphabet, (doc.l - 5) / 2, doc.salt)?;
        let listed: Vec<String> = table.codes.iter().map(|c| c.to_string()).collect();
        if listed != doc.codes {
            return Err(CodingError::Malformed("codes do not match alphabet, length and salt".into()));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail(String),
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    /// All codes share one length.
    pub prop1: Check,
    /// No code occurs in `x` or `y`.
    pub prop2: Check,
    /// A nonempty suffix of a code that is a prefix of a code is the whole
    /// code, and both codes coincide.
    pub prop3: Check,
    /// `x` and `y` split into blocks, and no block is a prefix of a code.
    pub prop4: Check,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        [&self.prop1, &self.prop2, &self.prop3, &self.prop4].iter().all(|c| c.passed())
    }
}

/// The structural half of property 4: no block is a prefix of a code.
pub fn blocks_not_code_prefixes(table: &CodeTable) -> Check {
    match Block::ALL
        .iter()
        .find_map(|b| table.codes().iter().find(|c| c.starts_with(b.bits())).map(|c| (b, c)))
    {
        Some((b, c)) => Check::Fail(format!("block {b} is a prefix of code {c}")),
        None => Check::Pass,
    }
}

/// Checks the four coding properties literally, by enumeration.
pub fn verify_properties(table: &CodeTable, x: &[u8], y: &[u8]) -> PropertyReport {
    let codes = table.codes();
    let prop1 = match codes.iter().find(|c| c.len() != codes[0].len()) {
        None => Check::Pass,
        Some(c) => Check::Fail(format!("code {c} has length {} != {}", c.len(), codes[0].len())),
    };

    let mut prop2 = Check::Pass;
    'outer: for (name, s) in [("x", x), ("y", y)] {
        for (id, c) in codes.iter().enumerate() {
            if let Some(at) = Bits::from(s).find(c) {
                prop2 = Check::Fail(format!(
                    "code of {:?} occurs in {name} at offset {at}",
                    table.alphabet()[id]
                ));
                break 'outer;
            }
        }
    }

    let mut prop3 = Check::Pass;
    'p3: for (i, u) in codes.iter().enumerate() {
        for (j, v) in codes.iter().enumerate() {
            for len in 1..=u.len().min(v.len()) {
                let z = &u[u.len() - len..];
                if v.starts_with(z) && !(len == u.len() && i == j) {
                    prop3 =
                        Check::Fail(format!("suffix {} of code {i} is a prefix of code {j}", Bits::from(z)));
                    break 'p3;
                }
            }
        }
    }

    let mut prop4 = Check::Pass;
    for (name, s) in [("x", x), ("y", y)] {
        if block_decompose(s).is_none() {
            prop4 = Check::Fail(format!("{name} = {} has no block decomposition", Bits::from(s)));
            break;
        }
    }
    if prop4.passed() {
        prop4 = blocks_not_code_prefixes(table);
    }

    PropertyReport { prop1, prop2, prop3, prop4 }
}
