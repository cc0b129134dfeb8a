//! Semi-Thue rewriting over {0,1} and the accessibility function built on it.

use std::fmt;

use thiserror::Error;

use crate::bits::Bits;
use crate::closure::{
    self, close_payload, ClosureOutcome, DeterminismPolicy, EvalNote, FunctionEval, StepOutcome,
    StepRelation, Successor,
};
use crate::instance::{decode_pairs, encode_pairs, InstanceError, Pair};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule {0} has an empty left-hand side")]
    EmptyLhs(usize),
}

/// Ordered list of rewriting rules `lhs -> rhs`.
#[derive(Clone)]
pub struct RewriteSystem {
    rules: Vec<Pair>,
    trie: Trie,
}

impl fmt::Debug for RewriteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rules.iter().map(|(g, h)| format!("{g} -> {h}"))).finish()
    }
}

impl PartialEq for RewriteSystem {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Eq for RewriteSystem {}

/// Binary trie over left-hand sides.
#[derive(Clone, Default)]
struct Trie {
    children: Vec<[u32; 2]>,
    ends: Vec<Vec<usize>>,
}

impl Trie {
    fn build(rules: &[Pair]) -> Trie {
        let mut t = Trie { children: vec![[0; 2]], ends: vec![Vec::new()] };
        for (i, (lhs, _)) in rules.iter().enumerate() {
            let mut node = 0usize;
            for &b in lhs.iter() {
                let next = t.children[node][b as usize];
                node = if next == 0 {
                    t.children.push([0; 2]);
                    t.ends.push(Vec::new());
                    let id = t.children.len() - 1;
                    t.children[node][b as usize] = id as u32;
                    id
                } else {
                    next as usize
                };
            }
            t.ends[node].push(i);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub rule_index: usize,
    pub position: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("rule {} does not occur at position {}", .0.rule_index, .0.position)]
pub struct InvalidMatch(pub Match);

impl RewriteSystem {
    pub fn new(rules: Vec<Pair>) -> Result<RewriteSystem, RuleError> {
        if let Some(i) = rules.iter().position(|(g, _)| g.is_empty()) {
            return Err(RuleError::EmptyLhs(i));
        }
        let trie = Trie::build(&rules);
        Ok(RewriteSystem { rules, trie })
    }

    pub fn rules(&self) -> &[Pair] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every occurrence of every left-hand side, ordered by position, then
    /// rule index.
    pub fn find_matches(&self, w: &[u8]) -> Vec<Match> {
        let mut out = Vec::new();
        let mut here = Vec::new();
        for pos in 0..w.len() {
            here.clear();
            let mut node = 0usize;
            for &b in &w[pos..] {
                let next = self.trie.children[node][b as usize];
                if next == 0 {
                    break;
                }
                node = next as usize;
                here.extend_from_slice(&self.trie.ends[node]);
            }
            here.sort_unstable();
            out.extend(here.iter().map(|&rule_index| Match { rule_index, position: pos }));
        }
        out
    }

    pub fn apply_match(&self, w: &[u8], m: Match) -> Result<Bits, InvalidMatch> {
        let (lhs, rhs) = self.rules.get(m.rule_index).ok_or(InvalidMatch(m))?;
        if w.get(m.position..m.position + lhs.len()) != Some(&lhs[..]) {
            return Err(InvalidMatch(m));
        }
        Ok(Bits::concat(&[&w[..m.position], rhs, &w[m.position + lhs.len()..]]))
    }

    pub fn det_step(&self, w: &[u8], policy: &DeterminismPolicy) -> StepOutcome {
        closure::det_step(self, w, policy)
    }

    pub fn det_closure(&self, w: &[u8], budget: u64, policy: &DeterminismPolicy) -> ClosureOutcome {
        closure::det_closure(self, w, budget, policy)
    }
}

impl StepRelation for RewriteSystem {
    fn successors(&self, w: &[u8], out: &mut Vec<Successor>) {
        for m in self.find_matches(w) {
            let result = self.apply_match(w, m).expect("match found by scan");
            out.push(Successor { rule: m.rule_index, pos: m.position, result });
        }
    }

    fn length_deltas(&self) -> (usize, usize) {
        self.rules.iter().fold((0, 0), |(s, g), (lhs, rhs)| {
            (s.max(lhs.len().saturating_sub(rhs.len())), g.max(rhs.len().saturating_sub(lhs.len())))
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
}

/// Pure-string form of `(system, payload)`.
pub fn serialize_instance(sys: &RewriteSystem, payload: &[u8]) -> Bits {
    encode_pairs(&sys.rules, payload)
}

pub fn parse_instance(bits: &[u8]) -> Result<(RewriteSystem, Bits), ParseError> {
    let (pairs, at) = decode_pairs(bits)?;
    Ok((RewriteSystem::new(pairs)?, Bits::from(&bits[at..])))
}

/// `|x|^2 + 4|x| + 2`.
pub fn staf_budget(payload_len: usize) -> u64 {
    let n = payload_len as u64;
    n * n + 4 * n + 2
}

/// The semi-Thue accessibility function, with the reason for its value.
pub fn staf_eval(input: &[u8], policy: &DeterminismPolicy) -> FunctionEval {
    let (pairs, at) = match decode_pairs(input) {
        Ok(p) => p,
        Err(e) => return FunctionEval::identity(input, EvalNote::Unparsed(e.to_string())),
    };
    let sys = match RewriteSystem::new(pairs) {
        Ok(s) => s,
        Err(e) => return FunctionEval::identity(input, EvalNote::Unparsed(e.to_string())),
    };
    close_payload(&sys, input, at, staf_budget(input.len() - at), policy, true)
}

/// The semi-Thue accessibility function: total and length-preserving.
pub fn staf(input: &[u8], policy: &DeterminismPolicy) -> Bits {
    staf_eval(input, policy).output
}

fn side_text(s: &Bits) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s.to_string()
    }
}

fn parse_side(tok: &str, line: usize) -> Result<Bits, ParseError> {
    if tok == "-" {
        return Ok(Bits::new());
    }
    tok.parse().map_err(|e| ParseError::Text { line, message: format!("{e}") })
}

/// Shared reader for the `STS v1` and `PCP v1` text formats.
pub(crate) fn parse_pair_text(
    text: &str,
    header: &str,
    count_key: &str,
) -> Result<(Vec<Pair>, Bits), ParseError> {
    let err = |line: usize, message: String| ParseError::Text { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, first) = lines.next().ok_or_else(|| err(1, format!("expected `{header}`")))?;
    if first != header {
        return Err(err(ln, format!("expected `{header}`")));
    }
    let (ln, count_line) = lines.next().ok_or_else(|| err(ln + 1, format!("expected `{count_key}: <m>`")))?;
    let count: usize = count_line
        .strip_prefix(count_key)
        .and_then(|r| r.strip_prefix(':'))
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| err(ln, format!("expected `{count_key}: <m>`")))?;

    let mut pairs = Vec::new();
    let mut last = ln;
    for _ in 0..count {
        let (ln, l) = lines.next().ok_or_else(|| err(last + 1, format!("expected {count} {count_key}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(err(ln, "expected two 0/1 strings (use - for empty)".into()));
        }
        pairs.push((parse_side(toks[0], ln)?, parse_side(toks[1], ln)?));
        last = ln;
    }
    let (ln, input_line) = lines.next().ok_or_else(|| err(last + 1, "expected `input: <bits>`".into()))?;
    let payload =
        input_line.strip_prefix("input:").ok_or_else(|| err(ln, "expected `input: <bits>`".into()))?.trim();
    let payload = if payload.is_empty() { Bits::new() } else { parse_side(payload, ln)? };
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected trailing content".into()));
    }
    Ok((pairs, payload))
}

pub(crate) fn pair_text(header: &str, count_key: &str, pairs: &[Pair], payload: &[u8]) -> String {
    let mut out = format!("{header}\n{count_key}: {}\n", pairs.len());
    for (g, h) in pairs {
        out.push_str(&format!("{} {}\n", side_text(g), side_text(h)));
    }
    out.push_str(&format!("input: {}\n", Bits::from(payload)));
    out
}

/// Renders the `STS v1` text format.
pub fn to_sts_text(sys: &RewriteSystem, payload: &[u8]) -> String {
    pair_text("STS v1", "rules", &sys.rules, payload)
}

pub fn parse_sts_text(text: &str) -> Result<(RewriteSystem, Bits), ParseError> {
    let (pairs, payload) = parse_pair_text(text, "STS v1", "rules")?;
    Ok((RewriteSystem::new(pairs)?, payload))
}
