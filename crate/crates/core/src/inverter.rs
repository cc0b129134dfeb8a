//! Brute-force inversion of staf / ptf / tiling_f, a reverse-rewriting
//! ancestor search, and the forward-vs-inverse cost experiment.
//!
//! Attempts are counted as if candidates were tried one by one in
//! lexicographic order: a hit at rank `i` costs `i + 1` attempts however many
//! workers searched in parallel, and the least hit is the one reported.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;
use crate::closure::DeterminismPolicy;
use crate::coding::CodingError;
use crate::instance::decode_pairs;
use crate::machine::Machine;
use crate::pcp::{compile_pcp, ptf, serialize_pcp, PcpCompilation};
use crate::sampler::{rng_from_seed, uniform_bits, DefaultUniform};
use crate::semithue::{serialize_instance, staf, RewriteSystem};
use crate::stcompile::{compile_semithue, StCompilation, StError};
use crate::tiling::{compile_tileset, parse_tiling, serialize_tiling, tiling_f, TilingCompilation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FnKind {
    Staf,
    Ptf,
    Tiling,
}

impl FnKind {
    pub const ALL: [FnKind; 3] = [FnKind::Staf, FnKind::Ptf, FnKind::Tiling];

    /// `tiling` has no determinism knob and ignores `policy`.
    pub fn eval(self, input: &[u8], policy: &DeterminismPolicy) -> Bits {
        match self {
            FnKind::Staf => staf(input, policy),
            FnKind::Ptf => ptf(input, policy),
            FnKind::Tiling => tiling_f(input),
        }
    }

    /// Length of the system part, if `input` parses at all.
    pub fn payload_offset(self, input: &[u8]) -> Option<usize> {
        match self {
            FnKind::Staf | FnKind::Ptf => decode_pairs(input).ok().map(|(_, at)| at),
            FnKind::Tiling => parse_tiling(input).ok().map(|(_, _, at)| at),
        }
    }

    /// The customary policy: paper-faithful for ptf, the default lookahead
    /// otherwise.
    pub fn default_policy(self) -> DeterminismPolicy {
        match self {
            FnKind::Ptf => DeterminismPolicy::paper_pcp(),
            _ => DeterminismPolicy::default(),
        }
    }

    pub fn backend(self) -> &'static str {
        match self {
            FnKind::Staf => "semithue",
            FnKind::Ptf => "pcp",
            FnKind::Tiling => "tiling",
        }
    }
}

impl fmt::Display for FnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FnKind::Staf => "staf",
            FnKind::Ptf => "ptf",
            FnKind::Tiling => "tiling",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown function kind {0:?} (expected staf, ptf or tiling)")]
pub struct UnknownKind(String);

impl FromStr for FnKind {
    type Err = UnknownKind;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "staf" | "semithue" => Ok(FnKind::Staf),
            "ptf" | "pcp" => Ok(FnKind::Ptf),
            "tiling" | "tiling_f" => Ok(FnKind::Tiling),
            _ => Err(UnknownKind(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inversion {
    Found { preimage: Bits, attempts: u64 },
    NotFound { attempts: u64 },
    LimitExceeded { attempts: u64 },
}

impl Inversion {
    pub fn attempts(&self) -> u64 {
        match self {
            Inversion::Found { attempts, .. }
            | Inversion::NotFound { attempts }
            | Inversion::LimitExceeded { attempts } => *attempts,
        }
    }

    pub fn preimage(&self) -> Option<&Bits> {
        match self {
            Inversion::Found { preimage, .. } => Some(preimage),
            _ => None,
        }
    }
}

/// The `i`-th bit string of length `len` in lexicographic order.
pub fn nth_string(i: u64, len: usize) -> Bits {
    Bits::from_vec((0..len).rev().map(|k| i.checked_shr(k as u32).map_or(0, |v| (v & 1) as u8)).collect())
}

/// Least `i < min(count, limit)` with `hit(i)`, searched in parallel chunks.
fn least_hit<F>(count: u64, limit: u64, hit: F) -> Inversion
where
    F: Fn(u64) -> Option<Bits> + Sync,
{
    let end = count.min(limit);
    let chunk = 64 * rayon::current_num_threads() as u64;
    let mut start = 0;
    while start < end {
        let stop = (start + chunk).min(end);
        let found =
            (start..stop).into_par_iter().filter_map(|i| hit(i).map(|p| (i, p))).min_by_key(|(i, _)| *i);
        if let Some((i, preimage)) = found {
            return Inversion::Found { preimage, attempts: i + 1 };
        }
        start = stop;
    }
    if count > limit {
        Inversion::LimitExceeded { attempts: end }
    } else {
        Inversion::NotFound { attempts: end }
    }
}

/// Search payloads `x'` of the target's payload length, keeping the system
/// part fixed, for `f(system · x') = target`.
///
/// An unparseable target is its own (only) preimage and is returned with
/// zero attempts. Panics if `limit == 0`.
pub fn brute_invert(kind: FnKind, target: &[u8], policy: &DeterminismPolicy, limit: u64) -> Inversion {
    assert!(limit >= 1, "limit must be positive");
    let Some(at) = kind.payload_offset(target) else {
        return Inversion::Found { preimage: Bits::from(target), attempts: 0 };
    };
    let len = target.len() - at;
    let count = if len >= 64 { u64::MAX } else { 1u64 << len };
    least_hit(count, limit, |i| {
        let mut w = Bits::from(&target[..at]);
        w.extend_from_slice(&nth_string(i, len));
        (kind.eval(&w, policy)[..] == *target).then_some(w)
    })
}

/// A machine compiled for one of the three functions at a fixed input length.
#[derive(Debug, Clone)]
pub enum CompiledFunction {
    Staf(StCompilation),
    Ptf(PcpCompilation),
    Tiling(TilingCompilation),
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Semithue(#[from] StError),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

impl CompiledFunction {
    pub fn compile(kind: FnKind, m: &Machine, n: usize, salt_seed: u64) -> Result<Self, CompileError> {
        Ok(match kind {
            FnKind::Staf => CompiledFunction::Staf(compile_semithue(m, n, salt_seed)?),
            FnKind::Ptf => CompiledFunction::Ptf(compile_pcp(m, n, salt_seed)?),
            FnKind::Tiling => CompiledFunction::Tiling(compile_tileset(m)),
        })
    }

    pub fn kind(&self) -> FnKind {
        match self {
            CompiledFunction::Staf(_) => FnKind::Staf,
            CompiledFunction::Ptf(_) => FnKind::Ptf,
            CompiledFunction::Tiling(_) => FnKind::Tiling,
        }
    }

    /// The policy under which the compiled function computes the machine.
    pub fn policy(&self) -> DeterminismPolicy {
        match self {
            CompiledFunction::Staf(c) => c.policy(),
            CompiledFunction::Ptf(_) => DeterminismPolicy::paper_pcp(),
            CompiledFunction::Tiling(_) => DeterminismPolicy::strict(),
        }
    }

    /// The pure-string instance for machine input `x`; `None` when `x` has
    /// no encoding (semi-Thue payloads must decompose into blocks).
    pub fn instance(&self, x: &[u8]) -> Option<Bits> {
        match self {
            CompiledFunction::Staf(c) => c.instance(x).ok(),
            CompiledFunction::Ptf(c) => Some(c.instance(x)),
            CompiledFunction::Tiling(c) => Some(serialize_tiling(&c.tileset, &c.bottom_row(x))),
        }
    }

    /// The machine output carried by a function value, if it has one.
    pub fn decode(&self, w: &[u8], n: usize) -> Option<Bits> {
        match self {
            CompiledFunction::Staf(c) => {
                let (_, at) = decode_pairs(w).ok()?;
                c.decode_output(&w[at..])
            }
            CompiledFunction::Ptf(c) => {
                let (_, at) = decode_pairs(w).ok()?;
                c.decode_output(&w[at..])
            }
            CompiledFunction::Tiling(c) => {
                let (_, row, _) = parse_tiling(w).ok()?;
                c.decode_top(&row, n)
            }
        }
    }

    pub fn eval(&self, w: &[u8], policy: &DeterminismPolicy) -> Bits {
        self.kind().eval(w, policy)
    }

    /// `f(instance(x))`.
    pub fn forward(&self, x: &[u8], policy: &DeterminismPolicy) -> Option<Bits> {
        Some(self.eval(&self.instance(x)?, policy))
    }
}

/// Search machine inputs `x ∈ {0,1}^n` in lexicographic order for
/// `f(instance(x)) = target`. Inputs without an encoding still cost an
/// attempt.
pub fn invert_compiled(
    c: &CompiledFunction,
    n: usize,
    target: &[u8],
    policy: &DeterminismPolicy,
    limit: u64,
) -> Inversion {
    assert!(limit >= 1, "limit must be positive");
    assert!(n < 64, "input length too large to enumerate");
    least_hit(1u64 << n, limit, |i| {
        let x = nth_string(i, n);
        (c.forward(&x, policy)?[..] == *target).then_some(x)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ancestors {
    pub strings: BTreeSet<Bits>,
    /// True when the cap stopped the search early.
    pub truncated: bool,
}

/// Every string that rewrites to `y` in at most `budget` steps, found by
/// applying rules right to left; stops once `cap` strings are known.
pub fn backward_search(sys: &RewriteSystem, y: &[u8], budget: u64, cap: usize) -> Ancestors {
    let mut strings = BTreeSet::from([Bits::from(y)]);
    let mut frontier = VecDeque::from([(Bits::from(y), 0u64)]);
    while let Some((w, d)) = frontier.pop_front() {
        if d == budget {
            continue;
        }
        for (g, h) in sys.rules() {
            if h.len() > w.len() {
                continue;
            }
            for p in 0..=w.len() - h.len() {
                if &w[p..p + h.len()] != h.as_slice() {
                    continue;
                }
                let mut a = Bits::from(&w[..p]);
                a.extend_from_slice(g);
                a.extend_from_slice(&w[p + h.len()..]);
                if strings.contains(&a) {
                    continue;
                }
                if strings.len() >= cap {
                    return Ancestors { strings, truncated: true };
                }
                strings.insert(a.clone());
                frontier.push_back((a, d + 1));
            }
        }
    }
    Ancestors { strings, truncated: false }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: FnKind,
    pub machine_name: String,
    pub machine: Machine,
    pub ns: Vec<usize>,
    /// Random targets per `(n, policy)`.
    pub targets: usize,
    /// Sampled instances for the identity rate, per `(n, policy)`.
    pub identity_samples: usize,
    pub policies: Vec<DeterminismPolicy>,
    pub seed: u64,
    pub limit: u64,
    pub sampler: DefaultUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub kind: FnKind,
    pub machine: String,
    pub n: usize,
    pub seed: u64,
    /// Mean wall time of one forward evaluation, in microseconds.
    pub forward_us: f64,
    /// Mean inversion attempts over the targets.
    pub attempts: f64,
    /// Fraction of targets whose preimage was recovered.
    pub found: f64,
    /// Fraction of sampled instances on which the function is the identity.
    pub identity_rate: f64,
    pub policy: String,
}

pub const CSV_HEADER: &str = "kind,machine,n,seed,forward_us,attempts,found,identity_rate,policy";

impl ExperimentRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.4},{:.4},{}",
            self.kind,
            self.machine,
            self.n,
            self.seed,
            self.forward_us,
            self.attempts,
            self.found,
            self.identity_rate,
            self.policy
        )
    }
}

pub fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Random instance of `kind` drawn from the default uniform distribution.
pub fn sample_instance<R: Rng + ?Sized>(kind: FnKind, d: &DefaultUniform, rng: &mut R) -> Bits {
    match kind {
        FnKind::Staf => {
            let s = d.sample_sts_instance(rng);
            serialize_instance(&s.system, &s.u)
        }
        FnKind::Ptf => {
            let s = d.sample_pcp_instance(rng);
            serialize_pcp(&s.pairs, &s.u)
        }
        FnKind::Tiling => {
            let (ts, row) = d.sample_tiling_instance(rng);
            serialize_tiling(&ts, &row)
        }
    }
}

/// For each `n` and policy: time forward evaluation on random inputs,
/// invert their images, and measure the identity rate on sampled instances.
/// Targets come from uniformly random inputs that have an encoding.
pub fn owf_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>, CompileError> {
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let c = CompiledFunction::compile(cfg.kind, &cfg.machine, n, cfg.seed)?;
        for policy in &cfg.policies {
            let mut rng = rng_from_seed(cfg.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut forward_total = 0.0;
            let mut attempts = 0u64;
            let mut found = 0usize;
            let mut done = 0usize;
            while done < cfg.targets {
                let x = uniform_bits(&mut rng, n);
                let Some(w) = c.instance(&x) else { continue };
                let t = Instant::now();
                let y = c.eval(&w, policy);
                forward_total += t.elapsed().as_secs_f64() * 1e6;
                let inv = invert_compiled(&c, n, &y, policy, cfg.limit);
                attempts += inv.attempts();
                found += inv.preimage().is_some() as usize;
                done += 1;
            }
            let identity = (0..cfg.identity_samples)
                .filter(|_| {
                    let w = sample_instance(cfg.kind, &cfg.sampler, &mut rng);
                    cfg.kind.eval(&w, policy) == w
                })
                .count();
            let per = |v: f64, k: usize| if k == 0 { 0.0 } else { v / k as f64 };
            rows.push(ExperimentRow {
                kind: cfg.kind,
                machine: cfg.machine_name.clone(),
                n,
                seed: cfg.seed,
                forward_us: per(forward_total, cfg.targets),
                attempts: per(attempts as f64, cfg.targets),
                found: per(found as f64, cfg.targets),
                identity_rate: per(identity as f64, cfg.identity_samples),
                policy: policy.to_string(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::machine::library_machine;

    fn rs(rules: &[(&str, &str)]) -> RewriteSystem {
        RewriteSystem::new(rules.iter().map(|(g, h)| (bits(g), bits(h))).collect()).unwrap()
    }

    #[test]
    fn lexicographic_strings() {
        assert_eq!(nth_string(0, 3), bits("000"));
        assert_eq!(nth_string(5, 3), bits("101"));
        assert_eq!(nth_string(0, 0), bits(""));
    }

    #[test]
    fn not_preimage_via_pcp() {
        let m = library_machine("not").unwrap();
        let c = CompiledFunction::compile(FnKind::Ptf, &m, 4, 0).unwrap();
        let p = c.policy();
        let y = c.forward(&bits("1010"), &p).unwrap();
        assert_eq!(c.decode(&y, 4), Some(bits("0101")));
        let inv = invert_compiled(&c, 4, &y, &p, 16);
        assert_eq!(inv, Inversion::Found { preimage: bits("1010"), attempts: 11 });
    }

    #[test]
    fn not_preimage_via_semithue() {
        let m = library_machine("not").unwrap();
        let c = CompiledFunction::compile(FnKind::Staf, &m, 4, 0).unwrap();
        let p = c.policy();
        let y = c.forward(&bits("1010"), &p).unwrap();
        assert_eq!(c.decode(&y, 4), Some(bits("0101")));
        assert_eq!(invert_compiled(&c, 4, &y, &p, 16).preimage(), Some(&bits("1010")));
        // only 0 or 3 leading zeros encode
        assert_eq!(c.instance(&bits("0101")), None);
    }

    #[test]
    fn garbage_is_its_own_preimage() {
        let t = bits("0");
        for k in FnKind::ALL {
            let inv = brute_invert(k, &t, &k.default_policy(), 5);
            assert_eq!(inv, Inversion::Found { preimage: t.clone(), attempts: 0 });
        }
    }

    #[test]
    fn raw_payload_search_is_sound() {
        let sys = rs(&[("01", "10")]);
        let target = serialize_instance(&sys, &bits("1100"));
        let p = DeterminismPolicy::strict();
        let inv = brute_invert(FnKind::Staf, &target, &p, 1 << 4);
        let w = inv.preimage().unwrap();
        assert_eq!(staf(w, &p), target);
        // nothing lexicographically smaller maps to the target
        let at = target.len() - 4;
        for i in 0..inv.attempts() - 1 {
            let mut c = Bits::from(&target[..at]);
            c.extend_from_slice(&nth_string(i, 4));
            assert_ne!(staf(&c, &p), target);
        }
    }

    #[test]
    fn limit_exceeded() {
        let m = library_machine("not").unwrap();
        let c = CompiledFunction::compile(FnKind::Ptf, &m, 12, 0).unwrap();
        let p = c.policy();
        let y = c.forward(&bits("111111111111"), &p).unwrap();
        assert_eq!(invert_compiled(&c, 12, &y, &p, 1), Inversion::LimitExceeded { attempts: 1 });
        let raw = brute_invert(FnKind::Ptf, &y, &p, 1);
        assert_eq!(raw, Inversion::LimitExceeded { attempts: 1 });
    }

    #[test]
    fn parallel_result_is_deterministic() {
        let m = library_machine("not").unwrap();
        let c = CompiledFunction::compile(FnKind::Tiling, &m, 5, 0).unwrap();
        let p = c.policy();
        let y = c.forward(&bits("01101"), &p).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| invert_compiled(&c, 5, &y, &p, 32));
        let b = four.install(|| invert_compiled(&c, 5, &y, &p, 32));
        assert_eq!(a, b);
        assert_eq!(a, Inversion::Found { preimage: bits("01101"), attempts: 14 });
    }

    /// Nondeterministic forward oracle: does `x` rewrite to `y` in <= k steps?
    fn reaches(sys: &RewriteSystem, x: &Bits, y: &Bits, k: u64) -> bool {
        let mut seen = BTreeSet::from([x.clone()]);
        let mut layer = vec![x.clone()];
        for _ in 0..=k {
            if layer.contains(y) {
                return true;
            }
            let mut next = Vec::new();
            for w in &layer {
                for m in sys.find_matches(w) {
                    let v = sys.apply_match(w, m).unwrap();
                    if seen.insert(v.clone()) {
                        next.push(v);
                    }
                }
            }
            layer = next;
        }
        false
    }

    #[test]
    fn backward_basics() {
        let a = backward_search(&rs(&[("0", "1")]), &bits("1"), 1, 100);
        assert!(a.strings.contains(&bits("0")));
        let e = backward_search(&rs(&[]), &bits("0110"), 5, 100);
        assert_eq!(e.strings, BTreeSet::from([bits("0110")]));
        let capped = backward_search(&rs(&[("0", "00")]), &bits("0000"), 10, 3);
        assert!(capped.truncated && capped.strings.len() == 3);
    }

    #[test]
    fn backward_agrees_with_forward() {
        let mut rng = rng_from_seed(9);
        let d = DefaultUniform::new(4, 3);
        for _ in 0..30 {
            let rules = (0..2).map(|_| (d.sample_string(&mut rng), d.sample_string(&mut rng))).collect();
            let sys = RewriteSystem::new(rules).unwrap();
            let y = uniform_bits(&mut rng, 4);
            let back = backward_search(&sys, &y, 3, usize::MAX);
            for len in 0..=8 {
                for i in 0..1u64 << len {
                    let x = nth_string(i, len);
                    assert_eq!(back.strings.contains(&x), reaches(&sys, &x, &y, 3), "{sys:?} {x} -> {y}");
                }
            }
        }
    }

    #[test]
    fn experiment_rows() {
        let cfg = ExperimentConfig {
            kind: FnKind::Ptf,
            machine_name: "not".into(),
            machine: library_machine("not").unwrap(),
            ns: vec![3, 4],
            targets: 4,
            identity_samples: 20,
            policies: vec![DeterminismPolicy::paper_pcp()],
            seed: 1,
            limit: 1 << 10,
            sampler: DefaultUniform::new(8, 8),
        };
        let rows = owf_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.found, 1.0);
            assert!((0.0..=1.0).contains(&r.identity_rate));
            assert!(r.attempts >= 1.0 && r.attempts <= (1u64 << r.n) as f64);
        }
        let csv = to_csv(&rows);
        assert!(csv.starts_with("kind,machine,n,seed,forward_us,attempts,found,identity_rate,policy\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
