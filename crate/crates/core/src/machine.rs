//! Deterministic single-tape Turing machines over {0,1,B}.
//!
//! The tape is semi-infinite with cell 0 leftmost; moving left from cell 0
//! crashes the run. The runner here is the reference oracle every compiled
//! system is checked against.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::bits::Bits;

/// Tape symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Zero,
    One,
    Blank,
}

impl Sym {
    pub const ALL: [Sym; 3] = [Sym::Zero, Sym::One, Sym::Blank];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bit(b: u8) -> Sym {
        if b == 0 {
            Sym::Zero
        } else {
            Sym::One
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            Sym::Zero => Some(0),
            Sym::One => Some(1),
            Sym::Blank => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sym::Zero => "0",
            Sym::One => "1",
            Sym::Blank => "B",
        }
    }

    fn parse(tok: &str) -> Option<Sym> {
        match tok {
            "0" => Some(Sym::Zero),
            "1" => Some(Sym::One),
            "B" => Some(Sym::Blank),
            _ => None,
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    L,
    R,
}

pub type StateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instr {
    pub next: StateId,
    pub write: Sym,
    pub dir: Move,
}

/// A total deterministic machine: every non-halting state has an instruction
/// for each of the three symbols, and the halting state has none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    states: Vec<String>,
    start: StateId,
    halt: StateId,
    table: Vec<Option<[Instr; 3]>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("partial transition table: no instruction for ({state}, {symbol})")]
    PartialTable { state: String, symbol: Sym },
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("duplicate instruction for ({state}, {symbol}) at line {line}")]
    Duplicate { state: String, symbol: Sym, line: usize },
    #[error("halting state {0:?} has outgoing instructions")]
    HaltHasInstructions(String),
    #[error("start and halt states must differ")]
    StartIsHalt,
    #[error("unknown library machine {0:?}")]
    UnknownLibraryMachine(String),
}

impl Machine {
    /// Builds a machine from an explicit table. `table[q]` must be `None`
    /// exactly for the halting state.
    pub fn new(
        states: Vec<String>,
        start: StateId,
        halt: StateId,
        table: Vec<Option<[Instr; 3]>>,
    ) -> Result<Machine, MachineError> {
        assert_eq!(states.len(), table.len());
        if start == halt {
            return Err(MachineError::StartIsHalt);
        }
        for (q, row) in table.iter().enumerate() {
            match row {
                Some(_) if q == halt => return Err(MachineError::HaltHasInstructions(states[q].clone())),
                None if q != halt => {
                    return Err(MachineError::PartialTable { state: states[q].clone(), symbol: Sym::Zero })
                }
                Some(row) => {
                    if let Some(bad) = row.iter().find(|i| i.next >= states.len()) {
                        return Err(MachineError::UnknownState(format!("#{}", bad.next)));
                    }
                }
                None => {}
            }
        }
        Ok(Machine { states, start, halt, table })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn halt(&self) -> StateId {
        self.halt
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Instruction for `(q, a)`; `None` iff `q` is the halting state.
    pub fn instr(&self, q: StateId, a: Sym) -> Option<Instr> {
        self.table[q].map(|row| row[a.index()])
    }

    /// All `(q, a, instr)` triples in state/symbol order.
    pub fn instructions(&self) -> impl Iterator<Item = (StateId, Sym, Instr)> + '_ {
        self.table.iter().enumerate().flat_map(|(q, row)| {
            row.iter().flat_map(move |r| Sym::ALL.into_iter().map(move |a| (q, a, r[a.index()])))
        })
    }

    /// Renders the machine in the `TM v1` text format.
    pub fn to_text(&self) -> String {
        let mut out =
            format!("TM v1\nstart: {}\nhalt: {}\n", self.states[self.start], self.states[self.halt]);
        for (q, a, i) in self.instructions() {
            let dir = match i.dir {
                Move::L => "L",
                Move::R => "R",
            };
            out.push_str(&format!(
                "{} {} -> {} {} {}\n",
                self.states[q], a, self.states[i.next], i.write, dir
            ));
        }
        out
    }
}

/// Parses the `TM v1` text format.
pub fn parse_machine(text: &str) -> Result<Machine, MachineError> {
    let syntax = |line: usize, column: usize, message: &str| MachineError::Syntax {
        line,
        column,
        message: message.to_string(),
    };

    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, StateId> = HashMap::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> StateId {
        *ids.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };

    let mut seen_header = false;
    let mut start: Option<String> = None;
    let mut halt: Option<String> = None;
    // (from, sym, to, write, dir, line)
    let mut rules: Vec<(String, Sym, String, Sym, Move, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let content = line.trim();
        if !seen_header {
            if content != "TM v1" {
                return Err(syntax(lineno, indent + 1, "expected header `TM v1`"));
            }
            seen_header = true;
            continue;
        }
        if let Some(rest) = content.strip_prefix("start:") {
            let name = rest.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax(lineno, indent + 7, "expected a single state name"));
            }
            start = Some(name.to_string());
            continue;
        }
        if let Some(rest) = content.strip_prefix("halt:") {
            let name = rest.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax(lineno, indent + 6, "expected a single state name"));
            }
            halt = Some(name.to_string());
            continue;
        }

        // Column of each token, 1-based.
        let mut toks = Vec::new();
        let mut col = 0;
        for tok in line.split(' ') {
            if !tok.is_empty() {
                toks.push((col + 1, tok.trim()));
            }
            col += tok.len() + 1;
        }
        if toks.len() != 6 {
            return Err(syntax(lineno, indent + 1, "expected `<q> <a> -> <p> <b> <L|R>`"));
        }
        let sym = |(c, t): (usize, &str)| {
            Sym::parse(t).ok_or_else(|| syntax(lineno, c, "expected tape symbol 0, 1 or B"))
        };
        let a = sym(toks[1])?;
        if toks[2].1 != "->" {
            return Err(syntax(lineno, toks[2].0, "expected `->`"));
        }
        let b = sym(toks[4])?;
        let dir = match toks[5].1 {
            "L" => Move::L,
            "R" => Move::R,
            _ => return Err(syntax(lineno, toks[5].0, "expected move L or R")),
        };
        rules.push((toks[0].1.to_string(), a, toks[3].1.to_string(), b, dir, lineno));
    }

    if !seen_header {
        return Err(syntax(1, 1, "expected header `TM v1`"));
    }
    let start = start.ok_or_else(|| syntax(1, 1, "missing `start:` line"))?;
    let halt = halt.ok_or_else(|| syntax(1, 1, "missing `halt:` line"))?;
    if start == halt {
        return Err(MachineError::StartIsHalt);
    }

    let start_id = intern(&start, &mut names);
    let halt_id = intern(&halt, &mut names);
    for (from, ..) in &rules {
        intern(from, &mut names);
    }
    for (_, _, to, ..) in &rules {
        intern(to, &mut names);
    }
    let id = |name: &str| names.iter().position(|n| n == name).expect("interned");

    let mut rows: Vec<[Option<Instr>; 3]> = vec![[None; 3]; names.len()];
    for (from, a, to, write, dir, line) in &rules {
        let q = id(from);
        if q == halt_id {
            return Err(MachineError::HaltHasInstructions(halt.clone()));
        }
        let slot = &mut rows[q][a.index()];
        if slot.is_some() {
            return Err(MachineError::Duplicate { state: from.clone(), symbol: *a, line: *line });
        }
        *slot = Some(Instr { next: id(to), write: *write, dir: *dir });
    }

    // The start state must do something; a start that only appears in the
    // header is a dangling reference.
    if rows[start_id].iter().all(Option::is_none) {
        return Err(MachineError::UnknownState(start));
    }

    let mut table = Vec::with_capacity(names.len());
    for (q, row) in rows.iter().enumerate() {
        if q == halt_id {
            table.push(None);
            continue;
        }
        let mut full = [Instr { next: 0, write: Sym::Blank, dir: Move::R }; 3];
        for a in Sym::ALL {
            full[a.index()] = row[a.index()]
                .ok_or_else(|| MachineError::PartialTable { state: names[q].clone(), symbol: a })?;
        }
        table.push(Some(full));
    }
    Machine::new(names, start_id, halt_id, table)
}

pub const LIBRARY_NAMES: [&str; 4] = ["id", "not", "rot-pair", "parity-mark"];

/// Source text of a library machine.
pub fn library_source(name: &str) -> Option<&'static str> {
    match name {
        "id" => Some(include_str!("../machines/id.tm")),
        "not" => Some(include_str!("../machines/not.tm")),
        "rot-pair" => Some(include_str!("../machines/rot-pair.tm")),
        "parity-mark" => Some(include_str!("../machines/parity-mark.tm")),
        _ => None,
    }
}

/// Length-preserving sample machines. Each halts in state `h` with the head
/// on cell 1 and leaves no non-blank symbol past the input.
pub fn library_machine(name: &str) -> Result<Machine, MachineError> {
    let src = library_source(name).ok_or_else(|| MachineError::UnknownLibraryMachine(name.to_string()))?;
    parse_machine(src)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    /// Explicit tape region; cells past the end are blank.
    pub tape: Vec<Sym>,
    pub head: usize,
    pub state: StateId,
    pub steps: u64,
}

impl Configuration {
    pub fn initial(m: &Machine, input: &[u8]) -> Configuration {
        Configuration {
            tape: input.iter().map(|&b| Sym::from_bit(b)).collect(),
            head: 0,
            state: m.start,
            steps: 0,
        }
    }

    pub fn read(&self) -> Sym {
        self.tape.get(self.head).copied().unwrap_or(Sym::Blank)
    }

    /// Cell `i`, blank past the explicit region.
    pub fn cell(&self, i: usize) -> Sym {
        self.tape.get(i).copied().unwrap_or(Sym::Blank)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Crash {
    LeftOffTape,
    StepFromHalt,
}

impl fmt::Display for Crash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Crash::LeftOffTape => f.write_str("left off tape"),
            Crash::StepFromHalt => f.write_str("step from halting state"),
        }
    }
}

/// Applies one instruction.
pub fn step(m: &Machine, c: &Configuration) -> Result<Configuration, Crash> {
    let instr = m.instr(c.state, c.read()).ok_or(Crash::StepFromHalt)?;
    if instr.dir == Move::L && c.head == 0 {
        return Err(Crash::LeftOffTape);
    }
    let mut tape = c.tape.clone();
    if c.head == tape.len() {
        tape.push(instr.write);
    } else {
        tape[c.head] = instr.write;
    }
    let head = match instr.dir {
        Move::L => c.head - 1,
        Move::R => c.head + 1,
    };
    Ok(Configuration { tape, head, state: instr.next, steps: c.steps + 1 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunResult {
    Halted { output: Bits, head: usize, steps: u64 },
    BudgetExceeded,
    Crashed(String),
}

impl RunResult {
    pub fn output(&self) -> Option<&Bits> {
        match self {
            RunResult::Halted { output, .. } => Some(output),
            _ => None,
        }
    }

    pub fn steps(&self) -> Option<u64> {
        match self {
            RunResult::Halted { steps, .. } => Some(*steps),
            _ => None,
        }
    }
}

/// Runs `m` on `input` for at most `budget` steps. The output is cells
/// `0..input.len()` at halt; a blank inside that region is reported as a crash.
pub fn run(m: &Machine, input: &[u8], budget: u64) -> RunResult {
    let mut c = Configuration::initial(m, input);
    loop {
        if c.state == m.halt {
            let mut output = Bits::new();
            for i in 0..input.len() {
                match c.cell(i).bit() {
                    Some(b) => output.push(b),
                    None => return RunResult::Crashed(format!("blank in output cell {i}")),
                }
            }
            return RunResult::Halted { output, head: c.head, steps: c.steps };
        }
        if c.steps >= budget {
            return RunResult::BudgetExceeded;
        }
        c = match step(m, &c) {
            Ok(next) => next,
            Err(crash) => return RunResult::Crashed(crash.to_string()),
        };
    }
}

/// Every configuration from the initial one up to halt (inclusive), or
/// `None` if the run crashes or exceeds `budget`.
pub fn trace(m: &Machine, input: &[u8], budget: u64) -> Option<Vec<Configuration>> {
    let mut c = Configuration::initial(m, input);
    let mut out = vec![c.clone()];
    while c.state != m.halt {
        if c.steps >= budget {
            return None;
        }
        c = step(m, &c).ok()?;
        out.push(c.clone());
    }
    Some(out)
}
