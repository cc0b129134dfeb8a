//! Deterministic closure of a one-step relation under a chosen notion of
//! determinism.
//!
//! A step is deterministic under `Strict` when exactly one rule application
//! exists. Under `Lookahead(d)`, successors from which every derivation gets
//! stuck within `d - 1` further steps are discarded first, and the step is
//! deterministic when exactly one distinct successor survives.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;

/// Lookahead searches expanding more nodes than this for a single step
/// report `BranchOverflow`.
pub const LOOKAHEAD_NODE_LIMIT: usize = 4096;

/// One application of a rule: which rule, where, and the resulting string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub rule: usize,
    pub pos: usize,
    pub result: Bits,
}

/// A one-step relation on bit strings.
pub trait StepRelation {
    /// Appends every rule application on `w` to `out`, in a fixed order.
    fn successors(&self, w: &[u8], out: &mut Vec<Successor>);

    /// Largest decrease and increase of string length in a single step.
    fn length_deltas(&self) -> (usize, usize);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Lookahead(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterminismPolicy {
    pub mode: Mode,
    /// A string with more rule applications than this overflows.
    pub max_branch: usize,
}

impl DeterminismPolicy {
    pub const DEFAULT_MAX_BRANCH: usize = 64;

    pub fn strict() -> Self {
        DeterminismPolicy { mode: Mode::Strict, max_branch: Self::DEFAULT_MAX_BRANCH }
    }

    /// Panics if `depth` is 0.
    pub fn lookahead(depth: u32) -> Self {
        assert!(depth >= 1, "lookahead depth must be at least 1");
        DeterminismPolicy { mode: Mode::Lookahead(depth), max_branch: Self::DEFAULT_MAX_BRANCH }
    }

    /// One step of lookahead with at most two competing applications.
    pub fn paper_pcp() -> Self {
        DeterminismPolicy { mode: Mode::Lookahead(1), max_branch: 2 }
    }
}

impl Default for DeterminismPolicy {
    fn default() -> Self {
        Self::lookahead(8)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown semantics {0:?}; expected strict, lookahead:D (D >= 1) or paper-pcp")]
pub struct PolicyParseError(pub String);

impl FromStr for DeterminismPolicy {
    type Err = PolicyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Self::strict()),
            "paper-pcp" => Ok(Self::paper_pcp()),
            _ => match s.strip_prefix("lookahead:").map(str::parse::<u32>) {
                Some(Ok(d)) if d >= 1 => Ok(Self::lookahead(d)),
                _ => Err(PolicyParseError(s.to_string())),
            },
        }
    }
}

impl fmt::Display for DeterminismPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mode, self.max_branch) {
            (Mode::Strict, _) => f.write_str("strict"),
            (Mode::Lookahead(1), 2) => f.write_str("paper-pcp"),
            (Mode::Lookahead(d), Self::DEFAULT_MAX_BRANCH) => write!(f, "lookahead:{d}"),
            (Mode::Lookahead(d), b) => write!(f, "lookahead:{d}/branch:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Unique { next: Bits, rule: usize, pos: usize },
    Stuck,
    Ambiguous(usize),
    BranchOverflow,
}

struct Overflow;

struct Lookahead<'a, R: ?Sized> {
    rel: &'a R,
    max_branch: usize,
    accept_len: Option<usize>,
    nodes: usize,
    buf: Vec<Successor>,
}

impl<R: StepRelation + ?Sized> Lookahead<'_, R> {
    /// Distinct successors of `w`, first application wins.
    fn expand(&mut self, w: &[u8]) -> Result<Vec<Successor>, Overflow> {
        self.buf.clear();
        self.rel.successors(w, &mut self.buf);
        if self.buf.len() > self.max_branch {
            return Err(Overflow);
        }
        let mut out: Vec<Successor> = Vec::with_capacity(self.buf.len());
        for s in self.buf.drain(..) {
            if !out.iter().any(|o| o.result == s.result) {
                out.push(s);
            }
        }
        Ok(out)
    }

    /// True iff every derivation from `w` gets stuck within `horizon` steps
    /// (at a string other than an accepted terminal).
    fn dies(&mut self, w: &[u8], horizon: u32) -> Result<bool, Overflow> {
        self.nodes += 1;
        if self.nodes > LOOKAHEAD_NODE_LIMIT {
            return Err(Overflow);
        }
        let next = self.expand(w)?;
        if next.is_empty() {
            return Ok(self.accept_len != Some(w.len()));
        }
        if horizon == 0 {
            return Ok(false);
        }
        for s in next {
            if !self.dies(&s.result, horizon - 1)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One deterministic step from `w`.
pub fn det_step<R: StepRelation + ?Sized>(rel: &R, w: &[u8], policy: &DeterminismPolicy) -> StepOutcome {
    det_step_toward(rel, w, policy, None)
}

/// Like [`det_step`], but lookahead does not count a stuck string of length
/// `accept_len` as a dead end: that is exactly the terminal the caller is
/// looking for.
pub fn det_step_toward<R: StepRelation + ?Sized>(
    rel: &R,
    w: &[u8],
    policy: &DeterminismPolicy,
    accept_len: Option<usize>,
) -> StepOutcome {
    match policy.mode {
        Mode::Strict => {
            let mut succ = Vec::new();
            rel.successors(w, &mut succ);
            match succ.len() {
                0 => StepOutcome::Stuck,
                1 => {
                    let s = succ.pop().expect("one successor");
                    StepOutcome::Unique { next: s.result, rule: s.rule, pos: s.pos }
                }
                k => StepOutcome::Ambiguous(k),
            }
        }
        Mode::Lookahead(depth) => {
            let mut la =
                Lookahead { rel, max_branch: policy.max_branch, accept_len, nodes: 0, buf: Vec::new() };
            let Ok(mut distinct) = la.expand(w) else {
                return StepOutcome::BranchOverflow;
            };
            let total = distinct.len();
            if total > 1 {
                let mut live = Vec::with_capacity(total);
                for s in distinct {
                    match la.dies(&s.result, depth - 1) {
                        Err(Overflow) => return StepOutcome::BranchOverflow,
                        Ok(true) => {}
                        Ok(false) => live.push(s),
                    }
                }
                distinct = live;
                if distinct.len() != 1 {
                    return StepOutcome::Ambiguous(total);
                }
            }
            match distinct.pop() {
                None => StepOutcome::Stuck,
                Some(s) => StepOutcome::Unique { next: s.result, rule: s.rule, pos: s.pos },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub step: u64,
    pub rule: usize,
    pub pos: usize,
    pub len_after: usize,
    #[serde(skip)]
    pub result: Bits,
}

impl TraceStep {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace step serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotTerminalReason {
    Ambiguous,
    BudgetExceeded,
    BranchOverflow,
}

impl fmt::Display for NotTerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NotTerminalReason::Ambiguous => "ambiguous",
            NotTerminalReason::BudgetExceeded => "budget exceeded",
            NotTerminalReason::BranchOverflow => "branch overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosureOutcome {
    Terminal {
        result: Bits,
        steps: u64,
        trace: Vec<TraceStep>,
    },
    NotTerminal {
        reason: NotTerminalReason,
        /// Unique steps taken before giving up.
        steps: u64,
        trace: Vec<TraceStep>,
    },
}

impl ClosureOutcome {
    pub fn terminal(&self) -> Option<&Bits> {
        match self {
            ClosureOutcome::Terminal { result, .. } => Some(result),
            _ => None,
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            ClosureOutcome::Terminal { steps, .. } | ClosureOutcome::NotTerminal { steps, .. } => *steps,
        }
    }

    pub fn trace(&self) -> &[TraceStep] {
        match self {
            ClosureOutcome::Terminal { trace, .. } | ClosureOutcome::NotTerminal { trace, .. } => trace,
        }
    }
}

/// Options for function evaluation. Cycle detection and length pruning only
/// stop hopeless runs sooner. A target length also makes lookahead treat
/// stuck strings of that length as goals rather than dead ends.
#[derive(Debug, Clone, Copy, Default)]
pub struct Shortcuts {
    pub record_trace: bool,
    /// Stop once a deterministic run revisits a string (it loops forever).
    pub detect_cycles: bool,
    /// Length of an acceptable terminal. Runs stop once none is reachable in
    /// the remaining budget.
    pub target_len: Option<usize>,
    /// Whether lookahead counts a stuck string of `target_len` as a goal.
    pub goal_aware: bool,
}

impl Shortcuts {
    pub fn full_trace() -> Self {
        Shortcuts { record_trace: true, ..Default::default() }
    }

    pub fn for_function(target_len: usize, goal_aware: bool) -> Self {
        Shortcuts { record_trace: false, detect_cycles: true, target_len: Some(target_len), goal_aware }
    }
}

/// Iterates deterministic steps from `w` until a stuck string, a
/// non-deterministic step, or `budget` steps.
pub fn det_closure<R: StepRelation + ?Sized>(
    rel: &R,
    w: &[u8],
    budget: u64,
    policy: &DeterminismPolicy,
) -> ClosureOutcome {
    det_closure_with(rel, w, budget, policy, Shortcuts::full_trace())
}

pub fn det_closure_with<R: StepRelation + ?Sized>(
    rel: &R,
    w: &[u8],
    budget: u64,
    policy: &DeterminismPolicy,
    opts: Shortcuts,
) -> ClosureOutcome {
    let (shrink, grow) = rel.length_deltas();
    let mut cur = Bits::from(w);
    let mut trace = Vec::new();
    let mut steps = 0u64;
    // Brent cycle detection.
    let mut checkpoint = cur.clone();
    let mut power = 1u64;
    let mut lam = 0u64;

    let give_up = |reason, steps, trace| ClosureOutcome::NotTerminal { reason, steps, trace };

    loop {
        if let Some(target) = opts.target_len {
            let left = (budget - steps) as u128;
            let len = cur.len() as u128;
            let target = target as u128;
            if len > target + left * (shrink as u128) || len + left * (grow as u128) < target {
                return give_up(NotTerminalReason::BudgetExceeded, steps, trace);
            }
        }
        match det_step_toward(rel, &cur, policy, opts.target_len.filter(|_| opts.goal_aware)) {
            StepOutcome::Stuck => return ClosureOutcome::Terminal { result: cur, steps, trace },
            StepOutcome::Ambiguous(_) => return give_up(NotTerminalReason::Ambiguous, steps, trace),
            StepOutcome::BranchOverflow => return give_up(NotTerminalReason::BranchOverflow, steps, trace),
            StepOutcome::Unique { next, rule, pos } => {
                if steps == budget {
                    return give_up(NotTerminalReason::BudgetExceeded, steps, trace);
                }
                steps += 1;
                if opts.record_trace {
                    trace.push(TraceStep {
                        step: steps,
                        rule,
                        pos,
                        len_after: next.len(),
                        result: next.clone(),
                    });
                }
                cur = next;
                if opts.detect_cycles {
                    if cur == checkpoint {
                        return give_up(NotTerminalReason::BudgetExceeded, steps, trace);
                    }
                    lam += 1;
                    if lam == power {
                        checkpoint = cur.clone();
                        power *= 2;
                        lam = 0;
                    }
                }
            }
        }
    }
}

/// How a function evaluation ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalNote {
    /// The input is not an instance.
    Unparsed(String),
    /// The closure reached a terminal string of the right length.
    Mapped {
        steps: u64,
    },
    /// The closure reached a terminal string of a different length.
    LengthMismatch {
        steps: u64,
        len: usize,
    },
    NotTerminal {
        reason: NotTerminalReason,
        steps: u64,
    },
}

impl fmt::Display for EvalNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalNote::Unparsed(why) => write!(f, "not an instance ({why}); output = input"),
            EvalNote::Mapped { steps } => write!(f, "terminal after {steps} steps"),
            EvalNote::LengthMismatch { steps, len } => {
                write!(f, "terminal after {steps} steps with length {len}; output = input")
            }
            EvalNote::NotTerminal { reason, steps } => {
                write!(f, "{reason} at step {}; output = input", steps + 1)
            }
        }
    }
}

/// Result of evaluating one of the one-way functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionEval {
    pub output: Bits,
    pub note: EvalNote,
}

impl FunctionEval {
    pub fn identity(input: &[u8], note: EvalNote) -> Self {
        FunctionEval { output: Bits::from(input), note }
    }
}

/// Shared tail of the semi-Thue and Post functions: close the payload and
/// splice a same-length terminal string back behind the system prefix.
pub(crate) fn close_payload<R: StepRelation + ?Sized>(
    rel: &R,
    input: &[u8],
    payload_at: usize,
    budget: u64,
    policy: &DeterminismPolicy,
    goal_aware: bool,
) -> FunctionEval {
    let x = &input[payload_at..];
    let opts = Shortcuts::for_function(x.len(), goal_aware);
    let outcome = det_closure_with(rel, x, budget, policy, opts);
    match outcome {
        ClosureOutcome::Terminal { result, steps, .. } => {
            if result.len() == x.len() {
                let mut output = Bits::from(&input[..payload_at]);
                output.extend_from_slice(&result);
                FunctionEval { output, note: EvalNote::Mapped { steps } }
            } else {
                FunctionEval::identity(input, EvalNote::LengthMismatch { steps, len: result.len() })
            }
        }
        ClosureOutcome::NotTerminal { reason, steps, .. } => {
            FunctionEval::identity(input, EvalNote::NotTerminal { reason, steps })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;

    /// Explicit finite relation for exercising the engine.
    struct Table(Vec<(&'static str, Vec<&'static str>)>);

    impl StepRelation for Table {
        fn successors(&self, w: &[u8], out: &mut Vec<Successor>) {
            let w = Bits::from(w).to_string();
            if let Some((_, next)) = self.0.iter().find(|(k, _)| *k == w) {
                for (i, n) in next.iter().enumerate() {
                    out.push(Successor { rule: i, pos: 0, result: bits(n) });
                }
            }
        }

        fn length_deltas(&self) -> (usize, usize) {
            (8, 8)
        }
    }

    #[test]
    fn policy_text_round_trip() {
        for s in ["strict", "lookahead:8", "lookahead:1", "paper-pcp"] {
            assert_eq!(s.parse::<DeterminismPolicy>().unwrap().to_string(), s);
        }
        assert!("lookahead:0".parse::<DeterminismPolicy>().is_err());
        assert!("fuzzy".parse::<DeterminismPolicy>().is_err());
    }

    #[test]
    fn lookahead_prunes_branch_dying_later() {
        // 0 -> {1, 00}; 1 -> 11 (then stuck); 00 -> 000 -> 0000 -> ...
        let rel = Table(vec![
            ("0", vec!["1", "00"]),
            ("1", vec!["11"]),
            ("00", vec!["000"]),
            ("000", vec!["0000"]),
            ("0000", vec!["00000"]),
        ]);
        let w = bits("0");
        assert_eq!(det_step(&rel, &w, &DeterminismPolicy::strict()), StepOutcome::Ambiguous(2));
        // "1" is not stuck itself, so one step of lookahead cannot prune it.
        assert_eq!(det_step(&rel, &w, &DeterminismPolicy::lookahead(1)), StepOutcome::Ambiguous(2));
        assert_eq!(
            det_step(&rel, &w, &DeterminismPolicy::lookahead(2)),
            StepOutcome::Unique { next: bits("00"), rule: 1, pos: 0 }
        );
    }

    #[test]
    fn duplicate_successors_collapse_under_lookahead() {
        let rel = Table(vec![("0", vec!["1", "1"])]);
        let w = bits("0");
        assert_eq!(det_step(&rel, &w, &DeterminismPolicy::strict()), StepOutcome::Ambiguous(2));
        assert!(matches!(
            det_step(&rel, &w, &DeterminismPolicy::lookahead(1)),
            StepOutcome::Unique { rule: 0, .. }
        ));
    }

    #[test]
    fn branch_cap() {
        let rel = Table(vec![("0", vec!["1", "10", "11"])]);
        assert_eq!(det_step(&rel, &bits("0"), &DeterminismPolicy::paper_pcp()), StepOutcome::BranchOverflow);
    }

    #[test]
    fn cycles_stop_function_runs_early() {
        let rel = Table(vec![("01", vec!["10"]), ("10", vec!["01"])]);
        let p = DeterminismPolicy::strict();
        let full = det_closure(&rel, &bits("01"), 1000, &p);
        assert!(matches!(
            full,
            ClosureOutcome::NotTerminal { reason: NotTerminalReason::BudgetExceeded, steps: 1000, .. }
        ));
        let quick = det_closure_with(&rel, &bits("01"), 1000, &p, Shortcuts::for_function(2, false));
        assert!(matches!(
            quick,
            ClosureOutcome::NotTerminal { reason: NotTerminalReason::BudgetExceeded, .. }
        ));
        assert!(quick.steps() < 10);
    }

    #[test]
    fn notes_render() {
        let n = EvalNote::NotTerminal { reason: NotTerminalReason::Ambiguous, steps: 0 };
        assert_eq!(n.to_string(), "ambiguous at step 1; output = input");
    }
}
