//! Edge-marked tiles, the machine → tileset compiler and the tiling function.
//!
//! A row is the sequence of north edges of the last placed tile row (the
//! bottom row is bare south edges). A square grows one tile row at a time,
//! and only while the next row is forced: exactly one row of tiles fits on
//! top of the current one.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::bits::{gamma_encode, BitReader, Bits, ReadError};
use crate::machine::{Configuration, Machine, Move, StateId, Sym};

pub type EdgeSym = usize;
pub type Row = Vec<EdgeSym>;

/// Blank edge.
pub const EMPTY: &str = ".";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub north: EdgeSym,
    pub east: EdgeSym,
    pub south: EdgeSym,
    pub west: EdgeSym,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TilingError {
    #[error("edge symbol {0} out of range")]
    BadSymbol(usize),
    #[error("tile {0} repeats an earlier tile")]
    DuplicateTile(usize),
    #[error("tileset has no edge symbols")]
    NoSymbols,
    #[error("duplicate symbol name {0:?}")]
    DuplicateName(String),
    #[error("unknown symbol {0:?}")]
    UnknownName(String),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("row of {len} bits is not a whole number of {width}-bit symbols")]
    RaggedRow { len: usize, width: usize },
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSet {
    symbols: Vec<String>,
    tiles: Vec<Tile>,
    by_south: HashMap<EdgeSym, Vec<usize>>,
}

impl TileSet {
    pub fn new(symbols: Vec<String>, tiles: Vec<Tile>) -> Result<TileSet, TilingError> {
        if symbols.is_empty() {
            return Err(TilingError::NoSymbols);
        }
        let mut names = HashSet::new();
        for s in &symbols {
            if !names.insert(s) {
                return Err(TilingError::DuplicateName(s.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut by_south: HashMap<EdgeSym, Vec<usize>> = HashMap::new();
        for (i, t) in tiles.iter().enumerate() {
            for e in [t.north, t.east, t.south, t.west] {
                if e >= symbols.len() {
                    return Err(TilingError::BadSymbol(e));
                }
            }
            if !seen.insert(*t) {
                return Err(TilingError::DuplicateTile(i));
            }
            by_south.entry(t.south).or_default().push(i);
        }
        Ok(TileSet { symbols, tiles, by_south })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn symbol(&self, name: &str) -> Option<EdgeSym> {
        self.symbols.iter().position(|s| s == name)
    }

    pub fn name(&self, e: EdgeSym) -> &str {
        &self.symbols[e]
    }

    pub fn row_names(&self, row: &[EdgeSym]) -> Vec<&str> {
        row.iter().map(|&e| self.name(e)).collect()
    }

    fn above(&self, south: EdgeSym) -> &[usize] {
        self.by_south.get(&south).map_or(&[], |v| v)
    }
}

/// Counts completions of columns `j..` given the west edge, saturating at
/// `cap + 1`, then enumerates up to `cap + 1` rows of tile indices.
pub fn next_rows(ts: &TileSet, row: &[EdgeSym], cap: usize) -> Vec<Vec<usize>> {
    let n = row.len();
    let k = ts.symbols.len();
    let limit = cap + 1;
    // count[j][w] = completions of columns j.. when column j must have west edge w.
    let mut count = vec![vec![0usize; k]; n + 1];
    count[n].iter_mut().for_each(|c| *c = 1);
    for j in (0..n).rev() {
        for &t in ts.above(row[j]) {
            let tile = ts.tiles[t];
            let add = count[j + 1][tile.east];
            let c = &mut count[j][tile.west];
            *c = (*c + add).min(limit);
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn walk(
        ts: &TileSet,
        row: &[EdgeSym],
        count: &[Vec<usize>],
        west: Option<EdgeSym>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) {
        let j = cur.len();
        if j == row.len() {
            out.push(cur.clone());
            return;
        }
        for &t in ts.above(row[j]) {
            if out.len() >= limit {
                return;
            }
            let tile = ts.tiles[t];
            if west.is_some_and(|w| w != tile.west) || count[j + 1][tile.east] == 0 {
                continue;
            }
            cur.push(t);
            walk(ts, row, count, Some(tile.east), cur, out, limit);
            cur.pop();
        }
    }
    walk(ts, row, &count, None, &mut cur, &mut out, limit);
    out
}

/// Same rows as [`next_rows`], enumerated right to left (for cross-checks).
pub fn next_rows_rev(ts: &TileSet, row: &[EdgeSym], cap: usize) -> Vec<Vec<usize>> {
    let mirrored = TileSet {
        symbols: ts.symbols.clone(),
        tiles: ts.tiles.iter().map(|t| Tile { east: t.west, west: t.east, ..*t }).collect(),
        by_south: ts.by_south.clone(),
    };
    let rev: Vec<EdgeSym> = row.iter().rev().copied().collect();
    next_rows(&mirrored, &rev, cap)
        .into_iter()
        .map(|mut r| {
            r.reverse();
            r
        })
        .collect()
}

pub fn north_of(ts: &TileSet, tiles: &[usize]) -> Row {
    tiles.iter().map(|&t| ts.tiles[t].north).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TileOutcome {
    Completed {
        top: Row,
    },
    /// No row fits. Rows are numbered from 1 = the bottom boundary row.
    Stalled {
        row: usize,
    },
    AmbiguousRow {
        row: usize,
    },
}

/// Places `height` forced rows on `bottom`, recording every row.
pub fn tile_closure_rows(ts: &TileSet, bottom: &[EdgeSym], height: usize) -> (TileOutcome, Vec<Row>) {
    let mut rows = vec![bottom.to_vec()];
    for placed in 0..height {
        let next = next_rows(ts, rows.last().expect("nonempty"), 1);
        match next.len() {
            0 => return (TileOutcome::Stalled { row: placed + 2 }, rows),
            1 => rows.push(north_of(ts, &next[0])),
            _ => return (TileOutcome::AmbiguousRow { row: placed + 2 }, rows),
        }
    }
    let top = rows.last().expect("nonempty").clone();
    (TileOutcome::Completed { top }, rows)
}

pub fn tile_closure(ts: &TileSet, bottom: &[EdgeSym], height: usize) -> TileOutcome {
    tile_closure_rows(ts, bottom, height).0
}

/// A machine compiled to tiles, with what is needed to build bottom rows and
/// read configurations back.
#[derive(Debug, Clone)]
pub struct TilingCompilation {
    pub tileset: TileSet,
    pub machine: Machine,
    /// `(state, tape symbol)` behind every pair symbol.
    pairs: HashMap<EdgeSym, (StateId, Sym)>,
    start_pairs: [EdgeSym; 3],
    tape: [EdgeSym; 3],
    dollar: EdgeSym,
    hash: EdgeSym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Variant {
    Start,
    Plain,
    From(Move),
}

fn variant_name(m: &Machine, q: StateId, v: Variant) -> String {
    let base = m.state_name(q);
    match v {
        Variant::Start | Variant::Plain => base.to_string(),
        Variant::From(Move::L) => format!("{base}<"),
        Variant::From(Move::R) => format!("{base}>"),
    }
}

struct Builder {
    symbols: Vec<String>,
    index: HashMap<String, EdgeSym>,
    tiles: Vec<Tile>,
}

impl Builder {
    fn sym(&mut self, name: &str) -> EdgeSym {
        if let Some(&e) = self.index.get(name) {
            return e;
        }
        self.symbols.push(name.to_string());
        self.index.insert(name.to_string(), self.symbols.len() - 1);
        self.symbols.len() - 1
    }

    fn tile(&mut self, n: &str, e: &str, s: &str, w: &str) {
        let t = Tile { north: self.sym(n), east: self.sym(e), south: self.sym(s), west: self.sym(w) };
        if !self.tiles.contains(&t) {
            self.tiles.push(t);
        }
    }
}

fn pair_name(state: &str, a: Sym) -> String {
    format!("({state},{a})")
}

/// Compiles `m` with direction-split states.
pub fn compile_tileset(m: &Machine) -> TilingCompilation {
    compile_tiles(m, true)
}

/// Compiles `m` with one edge symbol per state. Rows stop being forced as
/// soon as some state is entered by both left and right moves.
pub fn compile_tileset_unsplit(m: &Machine) -> TilingCompilation {
    compile_tiles(m, false)
}

fn compile_tiles(m: &Machine, split: bool) -> TilingCompilation {
    let mut b = Builder { symbols: Vec::new(), index: HashMap::new(), tiles: Vec::new() };
    for s in [EMPTY, "$", "#", "0", "1", "B"] {
        b.sym(s);
    }
    let e = EMPTY;

    // Which (state, variant) pairs can carry the head.
    let mut variants: Vec<(StateId, Variant)> = vec![(m.start(), Variant::Start)];
    for (_, _, ins) in m.instructions() {
        let v = if split { Variant::From(ins.dir) } else { Variant::Plain };
        if !variants.contains(&(ins.next, v)) {
            variants.push((ins.next, v));
        }
    }
    if !split {
        // The start state and a plain re-entry share one symbol.
        variants.retain(|&(q, v)| !(v == Variant::Plain && q == m.start()));
    }

    // Family 1 and 4.
    for a in Sym::ALL {
        b.tile(a.name(), e, a.name(), e);
    }
    b.tile("$", e, "$", "$");
    b.tile("#", "#", "#", e);

    let mut pairs = HashMap::new();
    for &(q, v) in &variants {
        let name = variant_name(m, q, v);
        for a in Sym::ALL {
            let p = pair_name(&name, a);
            let id = b.sym(&p);
            pairs.insert(id, (q, a));
            if q == m.halt() {
                b.tile(&p, e, &p, e);
                continue;
            }
            let Some(ins) = m.instr(q, a) else { continue };
            let next = variant_name(
                m,
                ins.next,
                if split {
                    Variant::From(ins.dir)
                } else if ins.next == m.start() {
                    Variant::Start
                } else {
                    Variant::Plain
                },
            );
            match ins.dir {
                Move::R => b.tile(ins.write.name(), &next, &p, e),
                Move::L => b.tile(ins.write.name(), e, &p, &next),
            }
        }
    }
    // Families 2 and 3: the neighbour that receives the head.
    for (_, _, ins) in m.instructions() {
        let v = if split {
            Variant::From(ins.dir)
        } else if ins.next == m.start() {
            Variant::Start
        } else {
            Variant::Plain
        };
        let next = variant_name(m, ins.next, v);
        for c in Sym::ALL {
            let p = pair_name(&next, c);
            match ins.dir {
                Move::R => b.tile(&p, e, c.name(), &next),
                Move::L => b.tile(&p, &next, c.name(), e),
            }
        }
    }

    let start = variant_name(m, m.start(), Variant::Start);
    let start_pairs = Sym::ALL.map(|a| b.sym(&pair_name(&start, a)));
    let tape = Sym::ALL.map(|a| b.sym(a.name()));
    let (dollar, hash) = (b.sym("$"), b.sym("#"));
    TilingCompilation {
        tileset: TileSet::new(b.symbols, b.tiles).expect("compiled tiles are well-formed"),
        machine: m.clone(),
        pairs,
        start_pairs,
        tape,
        dollar,
        hash,
    }
}

/// Width of the square for an `n`-bit input: `n^2 + 2`.
pub fn square_width(n: usize) -> usize {
    n * n + 2
}

impl TilingCompilation {
    /// `$ (s,x1) x2 … xn B^(n(n-1)) #`.
    pub fn bottom_row(&self, x: &[u8]) -> Row {
        assert!(!x.is_empty(), "bottom row needs a nonempty input");
        let n = x.len();
        let mut row = vec![self.dollar, self.start_pairs[Sym::from_bit(x[0]).index()]];
        row.extend(x[1..].iter().map(|&b| self.tape[Sym::from_bit(b).index()]));
        row.extend(std::iter::repeat_n(self.tape[Sym::Blank.index()], n * (n - 1)));
        row.push(self.hash);
        row
    }

    /// Tape, head column and state shown by a row, if it is a configuration
    /// row (`$`, one pair symbol among tape symbols, `#`).
    pub fn row_view(&self, row: &[EdgeSym]) -> Option<(Vec<Sym>, usize, StateId)> {
        let (&first, rest) = row.split_first()?;
        let (&last, cells) = rest.split_last()?;
        if first != self.dollar || last != self.hash {
            return None;
        }
        let mut tape = Vec::with_capacity(cells.len());
        let mut head = None;
        for (i, &e) in cells.iter().enumerate() {
            if let Some(&(q, a)) = self.pairs.get(&e) {
                if head.replace((i, q)).is_some() {
                    return None;
                }
                tape.push(a);
            } else {
                tape.push(*Sym::ALL.iter().find(|a| self.tape[a.index()] == e)?);
            }
        }
        let (h, q) = head?;
        Some((tape, h, q))
    }

    /// The configuration row for `c` on an `n`-bit square.
    pub fn matches_configuration(&self, row: &[EdgeSym], c: &Configuration) -> bool {
        match self.row_view(row) {
            Some((tape, head, q)) => {
                head == c.head && q == c.state && tape.iter().enumerate().all(|(i, &a)| a == c.cell(i))
            }
            None => false,
        }
    }

    /// First `n` tape cells of a halted top row.
    pub fn decode_top(&self, top: &[EdgeSym], n: usize) -> Option<Bits> {
        let (tape, _, q) = self.row_view(top)?;
        if q != self.machine.halt() {
            return None;
        }
        tape.iter().take(n).map(|a| a.bit()).collect::<Option<Vec<u8>>>().map(Bits::from_vec)
    }

    /// Runs the square for input `x` and decodes the output.
    pub fn run(&self, x: &[u8]) -> (TileOutcome, Option<Bits>) {
        let bottom = self.bottom_row(x);
        let out = tile_closure(&self.tileset, &bottom, bottom.len());
        let y = match &out {
            TileOutcome::Completed { top } => self.decode_top(top, x.len()),
            _ => None,
        };
        (out, y)
    }
}

/// Bits per row symbol for a tileset of `k` edge symbols.
pub fn row_symbol_width(k: usize) -> usize {
    (usize::BITS - (k.max(2) - 1).leading_zeros()) as usize
}

/// Pure-string form: `gamma(k)`, `gamma(t+1)`, each tile as four
/// `gamma(id+1)` (N E S W), then the row with fixed-width symbol ids.
pub fn serialize_tiling(ts: &TileSet, row: &[EdgeSym]) -> Bits {
    let mut out = Bits::new();
    gamma_encode(ts.symbols.len() as u64, &mut out);
    gamma_encode(ts.tiles.len() as u64 + 1, &mut out);
    for t in &ts.tiles {
        for e in [t.north, t.east, t.south, t.west] {
            gamma_encode(e as u64 + 1, &mut out);
        }
    }
    encode_row(ts.symbols.len(), row, &mut out);
    out
}

fn encode_row(k: usize, row: &[EdgeSym], out: &mut Bits) {
    let w = row_symbol_width(k);
    for &e in row {
        out.extend_from_slice(&Bits::from_uint(e as u64, w));
    }
}

/// Parsed tileset (symbols named by their ids), row, and row offset.
pub fn parse_tiling(bits: &[u8]) -> Result<(TileSet, Row, usize), TilingError> {
    let mut r = BitReader::new(bits);
    let k = r.read_gamma()?;
    let t = r.read_gamma()? - 1;
    // Every tile takes at least four bits.
    if t > bits.len() as u64 {
        return Err(ReadError::Truncated(r.position()).into());
    }
    let mut id = || -> Result<EdgeSym, TilingError> {
        let v = r.read_gamma()? - 1;
        if v >= k {
            return Err(TilingError::BadSymbol(v as usize));
        }
        Ok(v as usize)
    };
    let mut tiles = Vec::with_capacity(t as usize);
    for _ in 0..t {
        tiles.push(Tile { north: id()?, east: id()?, south: id()?, west: id()? });
    }
    let at = r.position();
    if k > bits.len() as u64 {
        return Err(TilingError::BadSymbol(k as usize));
    }
    let k = k as usize;
    let w = row_symbol_width(k);
    let rest = &bits[at..];
    if !rest.len().is_multiple_of(w) {
        return Err(TilingError::RaggedRow { len: rest.len(), width: w });
    }
    let row = rest
        .chunks(w)
        .map(|c| {
            let v = Bits::from(c).to_uint() as usize;
            if v < k {
                Ok(v)
            } else {
                Err(TilingError::BadSymbol(v))
            }
        })
        .collect::<Result<Row, _>>()?;
    let ts = TileSet::new((0..k).map(|i| i.to_string()).collect(), tiles)?;
    Ok((ts, row, at))
}

/// The tiling function: total and length-preserving.
pub fn tiling_f(input: &[u8]) -> Bits {
    let Ok((ts, row, at)) = parse_tiling(input) else {
        return Bits::from(input);
    };
    match tile_closure(&ts, &row, row.len()) {
        TileOutcome::Completed { top } => {
            let mut out = Bits::from(&input[..at]);
            encode_row(ts.symbols.len(), &top, &mut out);
            out
        }
        _ => Bits::from(input),
    }
}

/// `TILES v1` text: symbol names, tiles as `N E S W`, then the row.
pub fn to_tiles_text(ts: &TileSet, row: &[EdgeSym]) -> String {
    let mut out = format!("TILES v1\nsymbols: {}\n", ts.symbols.len());
    for s in &ts.symbols {
        out.push_str(s);
        out.push('\n');
    }
    out.push_str(&format!("tiles: {}\n", ts.tiles.len()));
    for t in &ts.tiles {
        out.push_str(&ts.row_names(&[t.north, t.east, t.south, t.west]).join(" "));
        out.push('\n');
    }
    out.push_str(&format!("row: {}\n", ts.row_names(row).join(" ")));
    out
}

pub fn parse_tiles_text(text: &str) -> Result<(TileSet, Row), TilingError> {
    let err = |line: usize, message: &str| TilingError::Text { line, message: message.to_string() };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));

    let (ln, l) = next("header")?;
    if l != "TILES v1" {
        return Err(err(ln, "expected `TILES v1`"));
    }
    let count = |ln: usize, l: &str, key: &str| -> Result<usize, TilingError> {
        l.strip_prefix(key)
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| err(ln, &format!("expected `{key} <count>`")))
    };
    let (ln, l) = next("symbol count")?;
    let k = count(ln, l, "symbols:")?;
    let mut symbols = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln, l) = next("symbol")?;
        if l.split_whitespace().count() != 1 {
            return Err(err(ln, "symbol names are single tokens"));
        }
        symbols.push(l.to_string());
    }
    let lookup = |ln: usize, name: &str| {
        symbols.iter().position(|s| s == name).ok_or_else(|| err(ln, &format!("unknown symbol {name:?}")))
    };
    let (ln, l) = next("tile count")?;
    let t = count(ln, l, "tiles:")?;
    let mut tiles = Vec::with_capacity(t);
    for _ in 0..t {
        let (ln, l) = next("tile")?;
        let e: Vec<&str> = l.split_whitespace().collect();
        if e.len() != 4 {
            return Err(err(ln, "a tile is `N E S W`"));
        }
        tiles.push(Tile {
            north: lookup(ln, e[0])?,
            east: lookup(ln, e[1])?,
            south: lookup(ln, e[2])?,
            west: lookup(ln, e[3])?,
        });
    }
    let (ln, l) = next("row")?;
    let row = l
        .strip_prefix("row:")
        .ok_or_else(|| err(ln, "expected `row: <symbols>`"))?
        .split_whitespace()
        .map(|s| lookup(ln, s))
        .collect::<Result<Row, _>>()?;
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected trailing content"));
    }
    Ok((TileSet::new(symbols, tiles)?, row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::machine::{library_machine, parse_machine, run, trace};
    use proptest::prelude::*;

    fn compiled(name: &str) -> TilingCompilation {
        compile_tileset(&library_machine(name).unwrap())
    }

    fn brute_rows(ts: &TileSet, row: &[EdgeSym]) -> HashSet<Vec<usize>> {
        let mut rows: Vec<Vec<usize>> = vec![vec![]];
        for &s in row {
            let mut next = Vec::new();
            for r in &rows {
                for (i, t) in ts.tiles().iter().enumerate() {
                    if t.south == s && r.last().is_none_or(|&p| ts.tiles()[p].east == t.west) {
                        let mut r = r.clone();
                        r.push(i);
                        next.push(r);
                    }
                }
            }
            rows = next;
        }
        rows.into_iter().collect()
    }

    #[test]
    fn bottom_rows() {
        let c = compiled("id");
        assert_eq!(c.bottom_row(&bits("10")).len(), 6);
        assert_eq!(c.tileset.row_names(&c.bottom_row(&bits("1"))), ["$", "(s,1)", "#"]);
        assert_eq!(c.bottom_row(&bits("101")).len(), 11);
    }

    #[test]
    fn id_tile_count() {
        // copies 3, $ and #, head tiles 3, receiving tiles 3, halt copies 3.
        let c = compiled("id");
        assert_eq!(c.tileset.tiles().len(), 3 + 2 + 3 + 3 + 3);
    }

    #[test]
    fn one_tile_per_head_pair() {
        for name in crate::machine::LIBRARY_NAMES {
            let c = compiled(name);
            let ts = &c.tileset;
            for (&e, &(q, _)) in &c.pairs {
                let above = ts.tiles().iter().filter(|t| t.south == e).count();
                if q == c.machine.halt() {
                    let t = ts.tiles().iter().find(|t| t.south == e).unwrap();
                    assert_eq!((above, t.north), (1, e));
                } else {
                    assert_eq!(above, 1, "{name} {}", ts.name(e));
                }
            }
        }
    }

    #[test]
    fn id_first_row() {
        let c = compiled("id");
        let ts = &c.tileset;
        let rows = next_rows(ts, &c.bottom_row(&bits("10")), 5);
        let brute = brute_rows(ts, &c.bottom_row(&bits("10")));
        assert_eq!(rows.len(), 1);
        assert_eq!(brute, rows.iter().cloned().collect());
        assert_eq!(ts.row_names(&north_of(ts, &rows[0])), ["$", "1", "(h>,0)", "B", "B", "#"]);
        assert_eq!(
            tile_closure(ts, &c.bottom_row(&bits("10")), 6),
            TileOutcome::Completed { top: north_of(ts, &rows[0]) }
        );
    }

    #[test]
    fn corrupted_tileset_is_ambiguous() {
        let c = compiled("id");
        let ts = &c.tileset;
        let mut tiles = ts.tiles().to_vec();
        let s1 = ts.symbol("(s,1)").unwrap();
        // A second instruction for (s,1): write 0 instead.
        let t = *tiles.iter().find(|t| t.south == s1).unwrap();
        tiles.push(Tile { north: ts.symbol("0").unwrap(), ..t });
        let bad = TileSet::new(ts.symbols().to_vec(), tiles).unwrap();
        assert_eq!(next_rows(&bad, &c.bottom_row(&bits("10")), 1).len(), 2);
        assert_eq!(tile_closure(&bad, &c.bottom_row(&bits("10")), 6), TileOutcome::AmbiguousRow { row: 2 });
    }

    #[test]
    fn rows_follow_the_machine() {
        for name in ["id", "not", "rot-pair", "parity-mark"] {
            let c = compiled(name);
            // One tape cell cannot hold a head that halts at cell 1.
            for n in 2..=4 {
                for v in 0..1u64 << n {
                    let x = Bits::from_uint(v, n);
                    let bottom = c.bottom_row(&x);
                    let (out, rows) = tile_closure_rows(&c.tileset, &bottom, bottom.len());
                    let configs = trace(&c.machine, &x, 1000).unwrap();
                    for (i, cfg) in configs.iter().enumerate().take(rows.len()) {
                        assert!(c.matches_configuration(&rows[i], cfg), "{name} {x} row {i}");
                    }
                    let TileOutcome::Completed { top } = out else { panic!("{name} on {x}: {out:?}") };
                    assert_eq!(c.decode_top(&top, n).as_ref(), run(&c.machine, &x, 1000).output());
                }
            }
        }
    }

    #[test]
    fn splitting_restores_forced_rows() {
        let m = parse_machine(crate::suites::BOUNCE).unwrap();
        let x = bits("011");
        let unsplit = compile_tileset_unsplit(&m);
        assert!(matches!(unsplit.run(&x).0, TileOutcome::AmbiguousRow { .. }));
        let split = compile_tileset(&m);
        assert_eq!(split.run(&x).1.as_ref(), run(&m, &x, 100).output());
    }

    #[test]
    fn single_cell_square_stalls() {
        let c = compiled("id");
        assert_eq!(c.run(&bits("1")).0, TileOutcome::Stalled { row: 2 });
    }

    #[test]
    fn not_function() {
        let c = compiled("not");
        let x = bits("101");
        let inst = serialize_tiling(&c.tileset, &c.bottom_row(&x));
        let out = tiling_f(&inst);
        assert_eq!(out.len(), inst.len());
        let (_, top, _) = parse_tiling(&out).unwrap();
        assert_eq!(c.decode_top(&top, 3), Some(bits("010")));
    }

    #[test]
    fn text_round_trip() {
        let c = compiled("not");
        let row = c.bottom_row(&bits("10"));
        let text = to_tiles_text(&c.tileset, &row);
        let (ts, r) = parse_tiles_text(&text).unwrap();
        assert_eq!((&ts, &r), (&c.tileset, &row));
        assert!(parse_tiles_text("TILES v1\nsymbols: 1\na\ntiles: 1\na a a b\nrow: a\n").is_err());
    }

    #[test]
    fn garbage_is_identity() {
        let w = bits("0000000");
        assert_eq!(tiling_f(&w), w);
    }

    fn arb_tiling() -> impl Strategy<Value = (TileSet, Row)> {
        (2usize..5).prop_flat_map(|k| {
            let tile = (0..k, 0..k, 0..k, 0..k).prop_map(|(n, e, s, w)| Tile {
                north: n,
                east: e,
                south: s,
                west: w,
            });
            (proptest::collection::hash_set(tile, 0..12), proptest::collection::vec(0..k, 0..7)).prop_map(
                move |(tiles, row)| {
                    let ts =
                        TileSet::new((0..k).map(|i| i.to_string()).collect(), tiles.into_iter().collect())
                            .unwrap();
                    (ts, row)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn row_enumeration_agrees((ts, row) in arb_tiling()) {
            let brute = brute_rows(&ts, &row);
            let fwd: HashSet<_> = next_rows(&ts, &row, 1000).into_iter().collect();
            let rev: HashSet<_> = next_rows_rev(&ts, &row, 1000).into_iter().collect();
            prop_assert_eq!(&fwd, &brute);
            prop_assert_eq!(&rev, &brute);
            prop_assert_eq!(next_rows(&ts, &row, 1).len(), brute.len().min(2));
        }

        #[test]
        fn tiling_f_preserves_length((ts, row) in arb_tiling()) {
            let w = serialize_tiling(&ts, &row);
            prop_assert_eq!(tiling_f(&w).len(), w.len());
            let (back, r, _) = parse_tiling(&w).unwrap();
            prop_assert_eq!((back.tiles(), r), (ts.tiles(), row));
        }

        #[test]
        fn tiling_f_total(w in proptest::collection::vec(0u8..2, 0..128)) {
            let w = Bits::from_vec(w);
            prop_assert_eq!(tiling_f(&w).len(), w.len());
        }
    }
}
