//! Post correspondence: the yield relation, its deterministic closure, the
//! Post tag function, and the machine → pair list compiler.
//!
//! A pair `(u, v)` takes `x` to `y` when `u·y = x·v`: strip `u` from the
//! front of `x·v`. A compiled list keeps a configuration as a rotation of the
//! tape with the end marker `B` in it; copying pairs rotate one cell from the
//! front to the back, transition pairs fire when the state (right moves) or
//! the cell left of it (left moves) reaches the front.

use thiserror::Error;

use crate::bits::Bits;
use crate::closure::{
    close_payload, det_closure, ClosureOutcome, DeterminismPolicy, EvalNote, FunctionEval, StepRelation,
    Successor,
};
use crate::coding::{build_code_table, CodeTable, CodingError, SymbolId};
use crate::instance::{decode_pairs, encode_pairs, InstanceError, Pair};
use crate::machine::{Machine, Move, Sym};
use crate::semithue::{pair_text, parse_pair_text, ParseError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairError {
    #[error("pair {0} has an empty first component")]
    EmptyU(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairList {
    pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YieldStep {
    pub pair_index: usize,
    pub result: Bits,
}

impl PairList {
    pub fn new(pairs: Vec<Pair>) -> Result<PairList, PairError> {
        if let Some(i) = pairs.iter().position(|(u, _)| u.is_empty()) {
            return Err(PairError::EmptyU(i));
        }
        Ok(PairList { pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(x·v)` without its prefix `u`, if `u` is a prefix of `x·v`.
    pub fn apply(&self, x: &[u8], i: usize) -> Option<Bits> {
        let (u, v) = self.pairs.get(i)?;
        let k = u.len().min(x.len());
        if x[..k] != u[..k] {
            return None;
        }
        if u.len() > x.len() {
            let rest = &u[x.len()..];
            if !v.starts_with(rest) {
                return None;
            }
            return Some(Bits::from(&v[rest.len()..]));
        }
        Some(Bits::concat(&[&x[u.len()..], v]))
    }

    pub fn yield_successors(&self, x: &[u8]) -> Vec<YieldStep> {
        (0..self.pairs.len())
            .filter_map(|i| self.apply(x, i).map(|result| YieldStep { pair_index: i, result }))
            .collect()
    }
}

impl StepRelation for PairList {
    fn successors(&self, w: &[u8], out: &mut Vec<Successor>) {
        for s in self.yield_successors(w) {
            out.push(Successor { rule: s.pair_index, pos: 0, result: s.result });
        }
    }

    fn length_deltas(&self) -> (usize, usize) {
        self.pairs.iter().fold((0, 0), |(s, g), (u, v)| {
            (s.max(u.len().saturating_sub(v.len())), g.max(v.len().saturating_sub(u.len())))
        })
    }
}

pub fn pcp_det_closure(g: &PairList, x: &[u8], budget: u64, policy: &DeterminismPolicy) -> ClosureOutcome {
    det_closure(g, x, budget, policy)
}

/// Replays `indices` as yield steps from `x`.
pub fn verify_witness(g: &PairList, x: &[u8], indices: &[usize]) -> bool {
    let mut cur = Bits::from(x);
    for &i in indices {
        match g.apply(&cur, i) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    true
}

pub fn serialize_pcp(g: &PairList, payload: &[u8]) -> Bits {
    encode_pairs(&g.pairs, payload)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PcpParseError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Text(#[from] ParseError),
}

pub fn parse_pcp(bits: &[u8]) -> Result<(PairList, Bits), PcpParseError> {
    let (pairs, at) = decode_pairs(bits)?;
    Ok((PairList::new(pairs)?, Bits::from(&bits[at..])))
}

/// `|x|^4`.
pub fn ptf_budget(payload_len: usize) -> u64 {
    (payload_len as u64).saturating_pow(4)
}

pub fn ptf_eval(input: &[u8], policy: &DeterminismPolicy) -> FunctionEval {
    let (pairs, at) = match decode_pairs(input) {
        Ok(p) => p,
        Err(e) => return FunctionEval::identity(input, EvalNote::Unparsed(e.to_string())),
    };
    let g = match PairList::new(pairs) {
        Ok(g) => g,
        Err(e) => return FunctionEval::identity(input, EvalNote::Unparsed(e.to_string())),
    };
    close_payload(&g, input, at, ptf_budget(input.len() - at), policy, false)
}

/// The Post tag function: total and length-preserving.
pub fn ptf(input: &[u8], policy: &DeterminismPolicy) -> Bits {
    ptf_eval(input, policy).output
}

pub fn to_pcp_text(g: &PairList, payload: &[u8]) -> String {
    pair_text("PCP v1", "pairs", &g.pairs, payload)
}

pub fn parse_pcp_text(text: &str) -> Result<(PairList, Bits), PcpParseError> {
    let (pairs, payload) = parse_pair_text(text, "PCP v1", "pairs")?;
    Ok((PairList::new(pairs)?, payload))
}

/// End marker (the blank past the tape).
pub const END: &str = "B";
/// A blank written inside the tape.
pub const CELL_BLANK: &str = "_";

#[derive(Debug, Clone)]
pub struct PcpCompilation {
    pub pairs: PairList,
    pub table: CodeTable,
    pub machine: Machine,
}

fn state_symbol(m: &Machine, q: usize) -> String {
    format!("q:{}", m.state_name(q))
}

pub fn pcp_alphabet(m: &Machine) -> Vec<String> {
    let mut a: Vec<String> = ["0", "1", END, CELL_BLANK].iter().map(|s| s.to_string()).collect();
    a.extend((0..m.num_states()).map(|q| state_symbol(m, q)));
    a
}

/// Compiles `m` for payloads of up to `n` bits.
pub fn compile_pcp(m: &Machine, n: usize, salt_seed: u64) -> Result<PcpCompilation, CodingError> {
    let table = build_code_table(&pcp_alphabet(m), n, &[], salt_seed)?;
    let id = |s: &str| table.id(s).expect("symbol in alphabet");
    let end = id(END);
    // A tape cell: bits as themselves, blanks as the in-tape blank.
    let cell = |a: Sym| match a {
        Sym::Blank => id(CELL_BLANK),
        _ => id(a.name()),
    };
    let cells = [Sym::Zero, Sym::One, Sym::Blank].map(cell);
    let q = |p: usize| id(&state_symbol(m, p));

    let mut pairs: Vec<Pair> = Vec::new();
    let mut push = |u: &[SymbolId], v: &[SymbolId]| {
        pairs.push((table.encode_ids(u), table.encode_ids(v)));
    };
    for c in cells.iter().chain([&end]) {
        push(&[*c], &[*c]);
    }
    for (p, a, ins) in m.instructions() {
        if p == m.halt() {
            continue;
        }
        let (qp, next, b) = (q(p), q(ins.next), cell(ins.write));
        // Reading a blank means either an in-tape blank or the end marker.
        let read = if a == Sym::Blank { vec![cell(a), end] } else { vec![cell(a)] };
        for r in read {
            let at_end = r == end;
            match ins.dir {
                Move::R if at_end => push(&[qp, end], &[b, next, end]),
                Move::R => push(&[qp, r], &[b, next]),
                Move::L => {
                    for &c in &cells {
                        if !at_end {
                            push(&[c, qp, r], &[next, c, b]);
                        } else if ins.write == Sym::Blank {
                            // A blank written past the end is no new cell.
                            push(&[c, qp, end], &[next, c, end]);
                        } else {
                            push(&[c, qp, end], &[next, c, b, end]);
                        }
                    }
                }
            }
        }
    }
    Ok(PcpCompilation {
        pairs: PairList::new(pairs).expect("compiled pairs have nonempty u"),
        table,
        machine: m.clone(),
    })
}

impl PcpCompilation {
    /// `s x B`, all coded.
    pub fn encode_input(&self, x: &[u8]) -> Bits {
        let mut ids = vec![self.id(&state_symbol(&self.machine, self.machine.start()))];
        ids.extend(x.iter().map(|&b| self.id(if b == 1 { "1" } else { "0" })));
        ids.push(self.id(END));
        self.table.encode_ids(&ids)
    }

    fn id(&self, s: &str) -> SymbolId {
        self.table.id(s).expect("symbol in alphabet")
    }

    /// The tape of a halted rotation `h …right… B …left…`, trailing blanks
    /// stripped; `None` unless `w` has exactly that shape and bits only.
    pub fn decode_output(&self, w: &[u8]) -> Option<Bits> {
        let ids = self.table.decode_ids(w).ok()?;
        let halt = self.id(&state_symbol(&self.machine, self.machine.halt()));
        let end = self.id(END);
        let (&first, rest) = ids.split_first()?;
        if first != halt || rest.iter().filter(|&&s| s == end).count() != 1 {
            return None;
        }
        let split = rest.iter().position(|&s| s == end)?;
        let mut tape: Vec<SymbolId> = rest[split + 1..].to_vec();
        tape.extend_from_slice(&rest[..split]);
        let blank = self.id(CELL_BLANK);
        while tape.last() == Some(&blank) {
            tape.pop();
        }
        let (zero, one) = (self.id("0"), self.id("1"));
        tape.iter()
            .map(|&s| match s {
                s if s == zero => Some(0),
                s if s == one => Some(1),
                _ => None,
            })
            .collect::<Option<Vec<u8>>>()
            .map(Bits::from_vec)
    }

    pub fn instance(&self, x: &[u8]) -> Bits {
        serialize_pcp(&self.pairs, &self.encode_input(x))
    }

    /// Closure with the function's budget `|s x B|^4`.
    pub fn run(&self, x: &[u8], policy: &DeterminismPolicy) -> ClosureOutcome {
        let w = self.encode_input(x);
        pcp_det_closure(&self.pairs, &w, ptf_budget(w.len()), policy)
    }

    pub fn is_transition(&self, pair: usize) -> bool {
        let (u, v) = &self.pairs.pairs[pair];
        !(u == v && u.len() == self.table.code_len())
    }
}

pub fn pcp_encode_input(c: &PcpCompilation, x: &[u8]) -> Bits {
    c.encode_input(x)
}

pub fn pcp_decode_output(c: &PcpCompilation, w: &[u8]) -> Option<Bits> {
    c.decode_output(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::closure::{NotTerminalReason, StepOutcome};
    use crate::machine::{library_machine, run};
    use proptest::prelude::*;

    fn list(p: &[(&str, &str)]) -> PairList {
        PairList::new(p.iter().map(|(u, v)| (bits(u), bits(v))).collect()).unwrap()
    }

    fn compiled(name: &str) -> PcpCompilation {
        compile_pcp(&library_machine(name).unwrap(), 6, 0).unwrap()
    }

    #[test]
    fn yield_examples() {
        assert_eq!(list(&[("0", "0")]).yield_successors(&bits("01"))[0].result, bits("10"));
        assert_eq!(list(&[("01", "11")]).yield_successors(&bits("01"))[0].result, bits("11"));
        assert!(list(&[("0110", "1")]).yield_successors(&bits("01")).is_empty());
        // u runs past x into v.
        assert_eq!(list(&[("011", "10")]).yield_successors(&bits("01"))[0].result, bits("0"));
    }

    #[test]
    fn rotation_never_terminates() {
        let g = list(&[("0", "0"), ("1", "1")]);
        let out = pcp_det_closure(&g, &bits("0110"), 4, &DeterminismPolicy::paper_pcp());
        assert!(matches!(
            out,
            ClosureOutcome::NotTerminal { reason: NotTerminalReason::BudgetExceeded, steps: 4, .. }
        ));
        assert_eq!(out.trace()[3].result, bits("0110"));
    }

    #[test]
    fn two_live_branches_are_ambiguous() {
        let g = list(&[("0", "0"), ("0", "00")]);
        let out = pcp_det_closure(&g, &bits("0"), 10, &DeterminismPolicy::paper_pcp());
        assert!(matches!(out, ClosureOutcome::NotTerminal { reason: NotTerminalReason::Ambiguous, .. }));
    }

    #[test]
    fn family_counts() {
        for name in crate::machine::LIBRARY_NAMES {
            let c = compiled(name);
            let m = &c.machine;
            let mut want = 4;
            for (q, a, ins) in m.instructions() {
                if q == m.halt() {
                    continue;
                }
                let reads = if a == Sym::Blank { 2 } else { 1 };
                want += match ins.dir {
                    Move::R => reads,
                    Move::L => 3 * reads,
                };
            }
            assert_eq!(c.pairs.len(), want, "{name}");
        }
    }

    #[test]
    fn left_moves_fork_once() {
        let c = compiled("not");
        // not on 1: r0 reads the end marker and moves left; that pair competes
        // with rotating the blank in front of r0.
        let mut w = c.encode_input(&bits("1"));
        let policy = DeterminismPolicy::paper_pcp();
        let mut forks = 0;
        for _ in 0..200 {
            let succ = c.pairs.yield_successors(&w);
            match succ.len() {
                0 => break,
                1 => {}
                2 => {
                    forks += 1;
                    let rotation = succ.iter().find(|s| !c.is_transition(s.pair_index)).unwrap();
                    assert!(c.pairs.yield_successors(&rotation.result).is_empty());
                }
                k => panic!("{k} successors"),
            }
            let StepOutcome::Unique { next, rule, .. } = crate::closure::det_step(&c.pairs, &w, &policy)
            else {
                panic!("not unique")
            };
            if succ.len() == 2 {
                assert!(c.is_transition(rule));
            }
            w = next;
        }
        assert_eq!(forks, 1);
        assert_eq!(c.decode_output(&w), Some(bits("0")));
    }

    #[test]
    fn end_to_end() {
        for name in crate::machine::LIBRARY_NAMES {
            let c = compiled(name);
            for n in 1..=5 {
                for v in 0..1u64 << n {
                    let x = Bits::from_uint(v, n);
                    let out = c.run(&x, &DeterminismPolicy::paper_pcp());
                    let y = out.terminal().and_then(|t| c.decode_output(t));
                    assert_eq!(y.as_ref(), run(&c.machine, &x, 1000).output(), "{name} {x}");
                    let idx: Vec<usize> = out.trace().iter().map(|s| s.rule).collect();
                    assert!(verify_witness(&c.pairs, &c.encode_input(&x), &idx));
                }
            }
        }
    }

    #[test]
    fn rotations_per_machine_step() {
        let c = compiled("rot-pair");
        let x = bits("10110");
        let out = c.run(&x, &DeterminismPolicy::paper_pcp());
        let cells = c.encode_input(&x).len() / c.table.code_len();
        let mut since = 0;
        for s in out.trace() {
            since += 1;
            if c.is_transition(s.rule) {
                // Tape plus marker, never more than one lap.
                assert!(since <= cells + 1, "{since}");
                since = 0;
            }
        }
    }

    #[test]
    fn ptf_pipeline() {
        let c = compiled("not");
        let x = bits("101");
        let inst = c.instance(&x);
        let out = ptf_eval(&inst, &DeterminismPolicy::paper_pcp());
        assert_eq!(out.output.len(), inst.len());
        let (_, y) = parse_pcp(&out.output).unwrap();
        assert_eq!(c.decode_output(&y), Some(bits("010")));
        assert_eq!(ptf(&out.output, &DeterminismPolicy::paper_pcp()), out.output);
    }

    #[test]
    fn io_forms() {
        let c = compiled("not");
        let l = c.table.code_len();
        assert_eq!(c.encode_input(&bits("101")).len(), 5 * l);
        assert_eq!(c.decode_output(&c.encode_input(&bits("101"))), None);
    }

    #[test]
    fn witnesses() {
        let g = list(&[("0", "0"), ("1", "1")]);
        assert!(verify_witness(&g, &bits("01"), &[]));
        assert!(verify_witness(&g, &bits("01"), &[0, 1]));
        assert!(!verify_witness(&g, &bits("01"), &[1]));
    }

    #[test]
    fn text_format() {
        let g = list(&[("0", ""), ("1", "10")]);
        let text = to_pcp_text(&g, &bits("01"));
        assert!(text.starts_with("PCP v1\npairs: 2\n"));
        assert_eq!(parse_pcp_text(&text).unwrap(), (g, bits("01")));
        assert!(parse_pcp_text("PCP v1\npairs: 1\n- 1\ninput: 0\n").is_err());
    }

    proptest! {
        #[test]
        fn apply_matches_definition(
            pairs in proptest::collection::vec((proptest::collection::vec(0u8..2, 1..5), proptest::collection::vec(0u8..2, 0..5)), 1..5),
            x in proptest::collection::vec(0u8..2, 0..8),
        ) {
            let g = PairList::new(pairs.into_iter().map(|(u, v)| (Bits::from_vec(u), Bits::from_vec(v))).collect()).unwrap();
            for s in g.yield_successors(&x) {
                let (u, v) = &g.pairs()[s.pair_index];
                prop_assert_eq!(Bits::concat(&[u, &s.result]), Bits::concat(&[&x, v]));
            }
        }

        #[test]
        fn ptf_total_and_idempotent(w in proptest::collection::vec(0u8..2, 0..96)) {
            let w = Bits::from_vec(w);
            let p = DeterminismPolicy::paper_pcp();
            let once = ptf(&w, &p);
            prop_assert_eq!(once.len(), w.len());
            prop_assert_eq!(ptf(&once, &p), once);
        }
    }
}
