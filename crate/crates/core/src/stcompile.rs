//! Turing machine → semi-Thue compiler.
//!
//! Configurations are written `$ tape[..i] q tape[i..] $` in codes. The
//! compiled system has three parts:
//!
//! * R1 converts the raw payload into codes, block by block, and parks the
//!   start state behind the left marker;
//! * R2 simulates the machine;
//! * R3 fires when the halt state sits at cell 1 and emits the tape back as
//!   raw bits, scanning right and deleting trailing blanks.
//!
//! Terminal form is `$ y $` with `y` raw.

use std::ops::Range;

use thiserror::Error;

use crate::bits::Bits;
use crate::closure::{det_closure_with, ClosureOutcome, DeterminismPolicy, Shortcuts};
use crate::coding::{block_decompose, build_code_table, Block, CodeTable, CodingError, SymbolId};
use crate::instance::Pair;
use crate::machine::{Machine, Move, Sym};
use crate::semithue::{serialize_instance, RewriteSystem};

pub const MARKER: &str = "$";
pub const SHUTTLE_RIGHT: &str = "s1";
pub const SHUTTLE_LEFT: &str = "s2";
pub const SCANNER: &str = "k";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StError {
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error("payload {0} is not a concatenation of the blocks 1, 10, 100, 000")]
    Undecomposable(Bits),
    #[error("payload is empty")]
    EmptyPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Convert,
    Simulate,
    Decode,
}

#[derive(Debug, Clone)]
pub struct StCompilation {
    pub system: RewriteSystem,
    pub table: CodeTable,
    pub machine: Machine,
    r1: Range<usize>,
    r2: Range<usize>,
}

fn state_symbol(m: &Machine, q: usize) -> String {
    format!("q:{}", m.state_name(q))
}

/// Alphabet of the compiled system: tape symbols, marker, internal states,
/// then machine states (as `q:<name>`).
pub fn st_alphabet(m: &Machine) -> Vec<String> {
    let mut a: Vec<String> =
        ["0", "1", "B", MARKER, SHUTTLE_RIGHT, SHUTTLE_LEFT, SCANNER].iter().map(|s| s.to_string()).collect();
    a.extend((0..m.num_states()).map(|q| state_symbol(m, q)));
    a
}

struct Emitter<'a> {
    table: &'a CodeTable,
    rules: Vec<Pair>,
}

/// Piece of a rule side: a coded symbol or raw bits.
enum Tok<'a> {
    C(SymbolId),
    Raw(&'a [u8]),
}

impl Emitter<'_> {
    fn side(&self, toks: &[Tok]) -> Bits {
        let mut out = Bits::new();
        for t in toks {
            match t {
                Tok::C(id) => out.extend_from_slice(self.table.code(*id)),
                Tok::Raw(b) => out.extend_from_slice(b),
            }
        }
        out
    }

    fn rule(&mut self, lhs: &[Tok], rhs: &[Tok]) {
        let r = (self.side(lhs), self.side(rhs));
        if !self.rules.contains(&r) {
            self.rules.push(r);
        }
    }
}

/// Compiles `m` for payloads of up to `n` bits.
pub fn compile_semithue(m: &Machine, n: usize, salt_seed: u64) -> Result<StCompilation, StError> {
    let table = build_code_table(&st_alphabet(m), n, &[], salt_seed)?;
    let id = |s: &str| table.id(s).expect("symbol in alphabet");
    let tape = |a: Sym| id(a.name());
    let dollar = id(MARKER);
    let s1 = id(SHUTTLE_RIGHT);
    let s2 = id(SHUTTLE_LEFT);
    let k = id(SCANNER);
    let q = |p: usize| id(&state_symbol(m, p));
    let start = q(m.start());
    let halt = q(m.halt());

    let mut e = Emitter { table: &table, rules: Vec::new() };
    use Tok::{Raw, C};

    // R1
    let coded =
        |u: Block| -> Vec<Tok<'static>> { u.bits().iter().map(|&b| C(tape(Sym::from_bit(b)))).collect() };
    for u in Block::ALL {
        let cu = coded(u);
        let mut rhs = vec![C(dollar)];
        rhs.extend(coded(u));
        rhs.push(C(s1));
        e.rule(&[C(start), Raw(u.bits())], &rhs);

        let mut rhs = coded(u);
        rhs.push(C(s1));
        e.rule(&[C(s1), Raw(u.bits())], &rhs);

        let mut lhs = coded(u);
        lhs.extend([C(s1), C(dollar)]);
        let mut rhs = vec![C(s2)];
        rhs.extend(coded(u));
        rhs.push(C(dollar));
        e.rule(&lhs, &rhs);

        let mut lhs = coded(u);
        lhs.push(C(s2));
        let mut rhs = vec![C(s2)];
        rhs.extend(cu);
        e.rule(&lhs, &rhs);

        e.rule(&[C(dollar), C(s2)], &[C(dollar), C(start)]);
    }
    let r1 = 0..e.rules.len();

    // R2
    for (p, a, ins) in m.instructions() {
        if p == m.halt() {
            continue;
        }
        let (qa, b, next) = (tape(a), tape(ins.write), q(ins.next));
        match ins.dir {
            Move::R => {
                for c in Sym::ALL {
                    e.rule(&[C(q(p)), C(qa), C(tape(c))], &[C(b), C(next), C(tape(c))]);
                }
                e.rule(&[C(q(p)), C(qa), C(dollar)], &[C(b), C(next), C(tape(Sym::Blank)), C(dollar)]);
            }
            Move::L => {
                for d in Sym::ALL {
                    e.rule(&[C(tape(d)), C(q(p)), C(qa)], &[C(next), C(tape(d)), C(b)]);
                }
            }
        }
    }
    let r2 = r1.end..e.rules.len();

    // R3
    for b in [0u8, 1] {
        let bit = [b];
        e.rule(&[C(dollar), C(tape(Sym::from_bit(b))), C(halt)], &[C(dollar), Raw(&bit), C(k)]);
        e.rule(&[C(k), C(tape(Sym::from_bit(b)))], &[Raw(&bit), C(k)]);
    }
    e.rule(&[C(k), C(tape(Sym::Blank))], &[C(k)]);
    e.rule(&[C(k), C(dollar)], &[C(dollar)]);

    let rules = e.rules;
    Ok(StCompilation {
        system: RewriteSystem::new(rules).expect("compiled rules have nonempty left sides"),
        table,
        machine: m.clone(),
        r1,
        r2,
    })
}

impl StCompilation {
    pub fn phase(&self, rule: usize) -> Phase {
        if self.r1.contains(&rule) {
            Phase::Convert
        } else if self.r2.contains(&rule) {
            Phase::Simulate
        } else {
            Phase::Decode
        }
    }

    pub fn phase_sizes(&self) -> (usize, usize, usize) {
        (self.r1.len(), self.r2.len(), self.system.len() - self.r2.end)
    }

    fn code(&self, s: &str) -> &Bits {
        self.table.code_of(s).expect("symbol in alphabet")
    }

    /// `start · x · $`, all but `x` coded.
    pub fn encode_input(&self, x: &[u8]) -> Result<Bits, StError> {
        if x.is_empty() {
            return Err(StError::EmptyPayload);
        }
        if block_decompose(x).is_none() {
            return Err(StError::Undecomposable(Bits::from(x)));
        }
        let start = state_symbol(&self.machine, self.machine.start());
        Ok(Bits::concat(&[self.code(&start), x, self.code(MARKER)]))
    }

    /// `y` from a terminal `$ y $` with `y` code-free.
    pub fn decode_output(&self, w: &[u8]) -> Option<Bits> {
        let d = self.code(MARKER);
        let l = d.len();
        if w.len() < 2 * l || !w.starts_with(d) || !w.ends_with(d) {
            return None;
        }
        let y = &w[l..w.len() - l];
        if self.table.find_code(y).is_some() {
            return None;
        }
        Some(Bits::from(y))
    }

    /// `$ y $`, the terminal form for output `y`.
    pub fn encode_output(&self, y: &[u8]) -> Bits {
        let d = self.code(MARKER);
        Bits::concat(&[d, y, d])
    }

    /// The full semi-Thue function instance for payload `x`.
    pub fn instance(&self, x: &[u8]) -> Result<Bits, StError> {
        Ok(serialize_instance(&self.system, &self.encode_input(x)?))
    }

    /// Smallest lookahead that separates the block choices of R1 for every
    /// payload. A wrong choice at the last raw block eats into the right
    /// marker; what is left of that code (`1 d 1 d … 1 1 1`) still splits into
    /// blocks, one per `1`, so the wrong branch can live for up to `l - 2`
    /// more steps before it sticks.
    pub fn lookahead_depth(&self) -> u32 {
        self.table.code_len() as u32 + 1
    }

    pub fn policy(&self) -> DeterminismPolicy {
        DeterminismPolicy::lookahead(self.lookahead_depth())
    }

    /// Runs the compiled system on `x` as the function does: budget
    /// `st_budget`, and stuck strings of the input length count as goals
    /// during lookahead. The trace is recorded.
    pub fn run(&self, x: &[u8], policy: &DeterminismPolicy) -> Result<ClosureOutcome, StError> {
        let w = self.encode_input(x)?;
        let opts = Shortcuts {
            record_trace: true,
            detect_cycles: false,
            target_len: Some(w.len()),
            goal_aware: true,
        };
        Ok(det_closure_with(&self.system, &w, st_budget(w.len()), policy, opts))
    }
}

pub fn st_encode_input(c: &StCompilation, x: &[u8]) -> Result<Bits, StError> {
    c.encode_input(x)
}

pub fn st_decode_output(c: &StCompilation, w: &[u8]) -> Option<Bits> {
    c.decode_output(w)
}

/// `N^2 + 4N + 2`.
pub fn st_budget(n: usize) -> u64 {
    crate::semithue::staf_budget(n)
}
