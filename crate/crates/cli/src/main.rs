//! `owflab`: compile machines into tilings, semi-Thue systems and PCP pair
//! lists, evaluate the derived functions, sample instances, invert, and run
//! the verification suites.
//!
//! Exit codes: 0 success (identity outputs included), 1 a verification
//! suite failed, 2 usage, parse or I/O error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use owflab_core::bits::Bits;
use owflab_core::closure::{det_closure_with, DeterminismPolicy, FunctionEval, Shortcuts};
use owflab_core::inverter::{
    brute_invert, invert_compiled, owf_experiment, sample_instance, to_csv, CompiledFunction,
    ExperimentConfig, FnKind, Inversion,
};
use owflab_core::machine::{library_machine, parse_machine, Machine, LIBRARY_NAMES};
use owflab_core::pcp::{
    parse_pcp, parse_pcp_text, ptf_budget, ptf_eval, serialize_pcp, to_pcp_text, PairList,
};
use owflab_core::sampler::{rng_from_seed, DefaultUniform};
use owflab_core::semithue::{
    parse_instance, parse_sts_text, serialize_instance, staf_budget, staf_eval, to_sts_text, RewriteSystem,
};
use owflab_core::suites::{any_failed, coding_suite, determinism_suite, format_table, lemma_suite};
use owflab_core::tiling::{
    parse_tiles_text, parse_tiling, serialize_tiling, tile_closure_rows, tiling_f, to_tiles_text,
    TileOutcome, TileSet,
};

#[derive(Parser)]
#[command(
    name = "owflab",
    version,
    about = "Machine-to-puzzle compilers and the one-way functions built on them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a machine for one backend and write the system and its code table.
    Compile(CompileArgs),
    /// Evaluate staf / tiling_f / ptf on an instance file.
    Eval(EvalArgs),
    /// Run an invariant suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Draw random instances from the default uniform distribution.
    Sample(SampleArgs),
    /// Brute-force a preimage.
    Invert(InvertArgs),
    /// Forward-vs-inverse cost experiment, written as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Semithue,
    Tiling,
    Pcp,
}

impl Backend {
    fn kind(self) -> FnKind {
        match self {
            Backend::Semithue => FnKind::Staf,
            Backend::Tiling => FnKind::Tiling,
            Backend::Pcp => FnKind::Ptf,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Backend::Semithue => "sts",
            Backend::Tiling => "tiles",
            Backend::Pcp => "pcp",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Coding,
    Lemma,
    Determinism,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    /// Machine file (TM v1), or a library name: id, not, rot-pair, parity-mark.
    #[arg(long)]
    machine: String,
    /// Input length the code table is sized for.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    salt_seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write `instance.<ext>` carrying this machine input.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    /// Instance in the backend's v1 text format, or a pure bit string.
    #[arg(long)]
    instance: PathBuf,
    /// strict, lookahead:D or paper-pcp [default: lookahead:8, paper-pcp for pcp].
    #[arg(long)]
    semantics: Option<DeterminismPolicy>,
    /// Write the derivation as JSON lines (tiling: one line per row).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Machine file or library name (unused by the determinism suite).
    #[arg(long, default_value = "not")]
    machine: String,
    /// Largest input length (lemma), or the length `n` (coding).
    #[arg(long, default_value_t = 5)]
    n_max: usize,
    /// Random trials for the coding suite.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Truncation {
    /// Largest integer drawn (integers have weight 1/n^2).
    #[arg(long, default_value_t = 1 << 16)]
    max_int: u64,
    /// Longest string drawn (lengths have weight 1/l^2).
    #[arg(long, default_value_t = 64)]
    max_len: usize,
}

impl Truncation {
    fn sampler(&self) -> Result<DefaultUniform, CliError> {
        if self.max_int == 0 || self.max_len == 0 {
            return Err(CliError::Usage("--max-int and --max-len must be positive".into()));
        }
        Ok(DefaultUniform::new(self.max_int, self.max_len))
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    truncation: Truncation,
    /// Write `sample_NNNN.<ext>` files here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    /// Target instance file: searches payloads of the same length.
    #[arg(long, conflicts_with_all = ["machine", "from_input"])]
    instance: Option<PathBuf>,
    /// Machine file or library name: searches machine inputs instead.
    #[arg(long, requires = "from_input")]
    machine: Option<String>,
    /// Machine input whose image is the target.
    #[arg(long, requires = "machine")]
    from_input: Option<String>,
    #[arg(long, default_value_t = 0)]
    salt_seed: u64,
    /// Override the evaluation semantics.
    #[arg(long)]
    semantics: Option<DeterminismPolicy>,
    /// Maximum candidates tried.
    #[arg(long, default_value_t = 1 << 20)]
    limit: u64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    #[arg(long, default_value = "not")]
    machine: String,
    /// Input lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 6, 8])]
    ns: Vec<usize>,
    /// Random targets per length and semantics.
    #[arg(long, default_value_t = 20)]
    targets: usize,
    /// Sampled instances for the identity rate.
    #[arg(long, default_value_t = 200)]
    identity_samples: usize,
    /// Semantics to compare, comma separated [default: the compiled system's own].
    #[arg(long, value_delimiter = ',')]
    semantics: Vec<DeterminismPolicy>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1 << 20)]
    limit: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    truncation: Truncation,
    /// CSV destination [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn load_machine(spec: &str) -> Result<Machine, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        return parse_machine(&read(path)?).map_err(|e| CliError::Parse(format!("{spec}: {e}")));
    }
    if LIBRARY_NAMES.contains(&spec) {
        return library_machine(spec).map_err(|e| CliError::Parse(e.to_string()));
    }
    Err(CliError::Usage(format!(
        "{spec}: no such file, and not a library machine ({})",
        LIBRARY_NAMES.join(", ")
    )))
}

fn parse_bits(s: &str) -> Result<Bits, CliError> {
    let t: String = s.split_whitespace().collect();
    if !t.chars().all(|c| c == '0' || c == '1') {
        return Err(CliError::Usage(format!("{s:?} is not a bit string")));
    }
    Ok(Bits::from_vec(t.bytes().map(|b| b - b'0').collect()))
}

fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn default_policy(b: Backend) -> DeterminismPolicy {
    b.kind().default_policy()
}

fn compile(a: CompileArgs) -> Result<ExitCode, CliError> {
    let m = load_machine(&a.machine)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let input = a.input.as_deref().map(parse_bits).transpose()?;
    if let Some(x) = &input {
        if x.len() != a.n {
            return Err(CliError::Usage(format!("--input has {} bits, --n is {}", x.len(), a.n)));
        }
    }
    let c = CompiledFunction::compile(a.backend.kind(), &m, a.n, a.salt_seed)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let ext = a.backend.extension();
    let empty = Bits::new();
    let (system, instance) = match &c {
        CompiledFunction::Staf(st) => {
            let (r1, r2, r3) = st.phase_sizes();
            println!(
                "semithue: {} rules (R1 {r1}, R2 {r2}, R3 {r3}); code length {}; evaluate with --semantics {}",
                st.system.len(),
                st.table.code_len(),
                st.policy()
            );
            write(&a.out.join("codes.json"), &st.table.to_json())?;
            let inst = match &input {
                Some(x) => Some(to_sts_text(
                    &st.system,
                    &st.encode_input(x).map_err(|e| CliError::Usage(e.to_string()))?,
                )),
                None => None,
            };
            (to_sts_text(&st.system, &empty), inst)
        }
        CompiledFunction::Ptf(pc) => {
            println!("pcp: {} pairs; code length {}", pc.pairs.len(), pc.table.code_len());
            write(&a.out.join("codes.json"), &pc.table.to_json())?;
            let inst = input.as_ref().map(|x| to_pcp_text(&pc.pairs, &pc.encode_input(x)));
            (to_pcp_text(&pc.pairs, &empty), inst)
        }
        CompiledFunction::Tiling(tc) => {
            println!(
                "tiling: {} tiles over {} edge symbols; square width {}",
                tc.tileset.tiles().len(),
                tc.tileset.symbols().len(),
                owflab_core::tiling::square_width(a.n)
            );
            let inst = input.as_ref().map(|x| to_tiles_text(&tc.tileset, &tc.bottom_row(x)));
            (to_tiles_text(&tc.tileset, &[]), inst)
        }
    };
    write(&a.out.join(format!("system.{ext}")), &system)?;
    if let Some(text) = instance {
        write(&a.out.join(format!("instance.{ext}")), &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

/// A parsed instance of any backend, kept with its text form's metadata.
enum Parsed {
    Sts(RewriteSystem, Bits),
    Pcp(PairList, Bits),
    Tiles(TileSet, Vec<usize>),
}

enum Input {
    /// Text form; outputs are printed as text again.
    Text(Parsed),
    /// Pure bit string.
    Bits(Bits),
    /// Neither: the function is the identity on it.
    Garbage(String, String),
}

fn looks_like_bits(s: &str) -> bool {
    let t = s.trim();
    !t.is_empty() && t.chars().all(|c| c == '0' || c == '1' || c.is_whitespace())
}

fn read_instance(b: Backend, path: &Path) -> Result<Input, CliError> {
    let text = read(path)?;
    if looks_like_bits(&text) {
        return parse_bits(&text).map(Input::Bits);
    }
    let parsed = match b {
        Backend::Semithue => parse_sts_text(&text).map(|(s, u)| Parsed::Sts(s, u)).map_err(|e| e.to_string()),
        Backend::Pcp => parse_pcp_text(&text).map(|(g, u)| Parsed::Pcp(g, u)).map_err(|e| e.to_string()),
        Backend::Tiling => {
            parse_tiles_text(&text).map(|(t, r)| Parsed::Tiles(t, r)).map_err(|e| e.to_string())
        }
    };
    Ok(match parsed {
        Ok(p) => Input::Text(p),
        Err(why) => Input::Garbage(text, why),
    })
}

fn pure(p: &Parsed) -> Bits {
    match p {
        Parsed::Sts(s, u) => serialize_instance(s, u),
        Parsed::Pcp(g, u) => serialize_pcp(g, u),
        Parsed::Tiles(t, r) => serialize_tiling(t, r),
    }
}

/// Text form of `out`, an output of the function on `p`'s pure form.
fn text_of_output(p: &Parsed, out: &[u8]) -> String {
    match p {
        Parsed::Sts(s, _) => {
            let (_, u) = parse_instance(out).expect("outputs of staf parse");
            to_sts_text(s, &u)
        }
        Parsed::Pcp(g, _) => {
            let (_, u) = parse_pcp(out).expect("outputs of ptf parse");
            to_pcp_text(g, &u)
        }
        Parsed::Tiles(t, _) => {
            let (_, row, _) = parse_tiling(out).expect("outputs of tiling_f parse");
            to_tiles_text(t, &row)
        }
    }
}

/// The function value and a note on how it came about.
fn evaluate(b: Backend, w: &[u8], policy: &DeterminismPolicy) -> (Bits, String) {
    let FunctionEval { output, note } = match b {
        Backend::Semithue => staf_eval(w, policy),
        Backend::Pcp => ptf_eval(w, policy),
        Backend::Tiling => {
            let Ok((ts, row, _)) = parse_tiling(w) else {
                return (Bits::from(w), "not a tiling instance; output = input".into());
            };
            let note = match tile_closure_rows(&ts, &row, row.len()).0 {
                TileOutcome::Completed { .. } => format!("square of {} rows completed", row.len()),
                TileOutcome::Stalled { row } => format!("no row fits above row {row}; output = input"),
                TileOutcome::AmbiguousRow { row } => format!("row {row} is not forced; output = input"),
            };
            return (tiling_f(w), note);
        }
    };
    (output, note.to_string())
}

fn write_trace(b: Backend, w: &[u8], policy: &DeterminismPolicy, path: &Path) -> Result<(), CliError> {
    let mut lines = String::new();
    match b {
        Backend::Semithue | Backend::Pcp => {
            let opts = |len| Shortcuts {
                record_trace: true,
                ..Shortcuts::for_function(len, matches!(b, Backend::Semithue))
            };
            let outcome = if let Backend::Semithue = b {
                parse_instance(w)
                    .ok()
                    .map(|(s, u)| det_closure_with(&s, &u, staf_budget(u.len()), policy, opts(u.len())))
            } else {
                parse_pcp(w)
                    .ok()
                    .map(|(g, u)| det_closure_with(&g, &u, ptf_budget(u.len()), policy, opts(u.len())))
            };
            for step in outcome.iter().flat_map(|o| o.trace()) {
                lines += &step.to_json_line();
                lines.push('\n');
            }
        }
        Backend::Tiling => {
            if let Ok((ts, row, _)) = parse_tiling(w) {
                let (_, rows) = tile_closure_rows(&ts, &row, row.len());
                for (i, r) in rows.iter().enumerate() {
                    lines += &serde_json::json!({ "row": i + 1, "symbols": ts.row_names(r) }).to_string();
                    lines.push('\n');
                }
            }
        }
    }
    write(path, &lines)
}

fn eval(a: EvalArgs) -> Result<ExitCode, CliError> {
    let policy = a.semantics.unwrap_or_else(|| default_policy(a.backend));
    let input = read_instance(a.backend, &a.instance)?;
    let (w, parsed) = match &input {
        Input::Garbage(text, why) => {
            print!("{text}");
            eprintln!("note: not an instance ({why}); output = input");
            return Ok(ExitCode::SUCCESS);
        }
        Input::Bits(w) => (w.clone(), None),
        Input::Text(p) => (pure(p), Some(p)),
    };
    let (output, note) = evaluate(a.backend, &w, &policy);
    match parsed {
        Some(p) => print!("{}", text_of_output(p, &output)),
        None => println!("{output}"),
    }
    eprintln!("note: {note}");
    if let Some(path) = &a.trace {
        write_trace(a.backend, &w, &policy, path)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode, CliError> {
    let rows = match a.suite {
        Suite::Coding => coding_suite(&load_machine(&a.machine)?, a.n_max.max(1), a.trials, a.seed),
        Suite::Lemma => lemma_suite(&load_machine(&a.machine)?, a.n_max),
        Suite::Determinism => determinism_suite(),
    };
    print!("{}", format_table(&rows));
    Ok(if any_failed(&rows) { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn sample(a: SampleArgs) -> Result<ExitCode, CliError> {
    let d = a.truncation.sampler()?;
    eprintln!(
        "truncation: max_int {} max_len {}; truncated mass < {:.3e}; seed {}",
        d.max_int,
        d.max_len,
        d.truncated_mass_bound(),
        a.seed
    );
    let mut rng = rng_from_seed(a.seed);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let kind = a.backend.kind();
    let mut stdout = std::io::stdout().lock();
    for i in 0..a.count {
        let w = sample_instance(kind, &d, &mut rng);
        let text = match kind {
            FnKind::Staf => parse_instance(&w).map(|(s, u)| to_sts_text(&s, &u)).ok(),
            FnKind::Ptf => parse_pcp(&w).map(|(g, u)| to_pcp_text(&g, &u)).ok(),
            FnKind::Tiling => parse_tiling(&w).map(|(t, r, _)| to_tiles_text(&t, &r)).ok(),
        }
        .expect("sampled instances parse");
        match &a.out {
            Some(dir) => write(&dir.join(format!("sample_{i:04}.{}", a.backend.extension())), &text)?,
            None => {
                if i > 0 {
                    writeln!(stdout).ok();
                }
                write!(stdout, "{text}").ok();
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report(inv: &Inversion) {
    match inv {
        Inversion::Found { preimage, attempts } => println!("found {preimage} after {attempts} attempts"),
        Inversion::NotFound { attempts } => println!("no preimage among {attempts} candidates"),
        Inversion::LimitExceeded { attempts } => println!("limit reached after {attempts} attempts"),
    }
}

fn invert(a: InvertArgs) -> Result<ExitCode, CliError> {
    set_jobs(a.jobs)?;
    if a.limit == 0 {
        return Err(CliError::Usage("--limit must be at least 1".into()));
    }
    let kind = a.backend.kind();
    if let Some(path) = &a.instance {
        let policy = a.semantics.unwrap_or_else(|| default_policy(a.backend));
        let target = match read_instance(a.backend, path)? {
            Input::Text(p) => pure(&p),
            Input::Bits(w) => w,
            Input::Garbage(_, why) => {
                println!("target is not an instance ({why}); it is its own preimage");
                return Ok(ExitCode::SUCCESS);
            }
        };
        report(&brute_invert(kind, &target, &policy, a.limit));
        return Ok(ExitCode::SUCCESS);
    }
    let (Some(machine), Some(x)) = (&a.machine, &a.from_input) else {
        return Err(CliError::Usage("give --instance, or --machine with --from-input".into()));
    };
    let m = load_machine(machine)?;
    let x = parse_bits(x)?;
    if x.is_empty() || x.len() >= 64 {
        return Err(CliError::Usage("--from-input must have 1 to 63 bits".into()));
    }
    let c = CompiledFunction::compile(kind, &m, x.len(), a.salt_seed)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let policy = a.semantics.unwrap_or_else(|| c.policy());
    let Some(target) = c.forward(&x, &policy) else {
        return Err(CliError::Usage(format!("{x} has no encoding for this backend")));
    };
    match c.decode(&target, x.len()) {
        Some(y) => println!("target encodes output {y}"),
        None => println!("target carries no output (the function returned its input)"),
    }
    report(&invert_compiled(&c, x.len(), &target, &policy, a.limit));
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode, CliError> {
    set_jobs(a.jobs)?;
    let machine = load_machine(&a.machine)?;
    if a.ns.iter().any(|&n| n == 0 || n >= 64) {
        return Err(CliError::Usage("--ns values must be between 1 and 63".into()));
    }
    let kind = a.backend.kind();
    let policies = if a.semantics.is_empty() {
        let n = a.ns.iter().copied().max().unwrap_or(1);
        let c = CompiledFunction::compile(kind, &machine, n, a.seed)
            .map_err(|e| CliError::Parse(e.to_string()))?;
        vec![c.policy()]
    } else {
        a.semantics.clone()
    };
    let sampler = a.truncation.sampler()?;
    eprintln!(
        "truncation: max_int {} max_len {}; truncated mass < {:.3e}",
        sampler.max_int,
        sampler.max_len,
        sampler.truncated_mass_bound()
    );
    let cfg = ExperimentConfig {
        kind,
        machine_name: Path::new(&a.machine)
            .file_stem()
            .map_or(a.machine.clone(), |s| s.to_string_lossy().into_owned()),
        machine,
        ns: a.ns.clone(),
        targets: a.targets,
        identity_samples: a.identity_samples,
        policies,
        seed: a.seed,
        limit: a.limit.max(1),
        sampler,
    };
    let rows = owf_experiment(&cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    let csv = to_csv(&rows);
    match &a.out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => compile(a),
        Command::Eval(a) => eval(a),
        Command::Verify(a) => verify(a),
        Command::Sample(a) => sample(a),
        Command::Invert(a) => invert(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
