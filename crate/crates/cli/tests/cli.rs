use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use owflab_core::bits::bits;
use owflab_core::machine::library_machine;
use owflab_core::pcp::{compile_pcp, verify_witness};
use owflab_core::semithue::to_sts_text;
use owflab_core::stcompile::compile_semithue;

fn owflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owflab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn compile_semithue_not() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        owflab(&["compile", "--backend", "semithue", "--machine", "not", "--n", "4", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("R1 17"), "{}", stdout(&o));
    assert!(fs::read_to_string(dir.path().join("system.sts")).unwrap().starts_with("STS v1\n"));
    assert!(dir.path().join("codes.json").exists());
}

#[test]
fn compile_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = owflab(&[
            "compile",
            "--backend",
            "pcp",
            "--machine",
            "rot-pair",
            "--n",
            "6",
            "--salt-seed",
            "9",
            "--out",
            p(d.path()),
            "--input",
            "100110",
        ]);
        assert!(o.status.success());
    }
    for f in ["system.pcp", "codes.json", "instance.pcp"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        owflab(&["compile", "--backend", "lambda", "--machine", "not", "--n", "4", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = owflab(&[
        "compile",
        "--backend",
        "pcp",
        "--machine",
        "no-such-machine",
        "--n",
        "4",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.tm");
    fs::write(&bad, "TM v1\nstart: s\n").unwrap();
    let o =
        owflab(&["compile", "--backend", "pcp", "--machine", p(&bad), "--n", "4", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn eval_not_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = owflab(&[
        "compile",
        "--backend",
        "semithue",
        "--machine",
        "not",
        "--n",
        "4",
        "--out",
        p(dir.path()),
        "--input",
        "1010",
    ]);
    assert!(o.status.success());
    let c = compile_semithue(&library_machine("not").unwrap(), 4, 0).unwrap();
    let policy = c.policy().to_string();
    let inst = dir.path().join("instance.sts");
    let o = owflab(&["eval", "--backend", "semithue", "--instance", p(&inst), "--semantics", &policy]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), to_sts_text(&c.system, &c.encode_output(&bits("0101"))));
}

#[test]
fn strict_eval_reports_ambiguity() {
    let dir = tempfile::tempdir().unwrap();
    owflab(&[
        "compile",
        "--backend",
        "semithue",
        "--machine",
        "not",
        "--n",
        "5",
        "--out",
        p(dir.path()),
        "--input",
        "10001",
    ]);
    let inst = dir.path().join("instance.sts");
    let o = owflab(&["eval", "--backend", "semithue", "--instance", p(&inst), "--semantics", "strict"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), fs::read_to_string(&inst).unwrap());
    assert!(stderr(&o).contains("ambiguous at step 1"), "{}", stderr(&o));
}

#[test]
fn pcp_trace_replays() {
    let dir = tempfile::tempdir().unwrap();
    owflab(&[
        "compile",
        "--backend",
        "pcp",
        "--machine",
        "not",
        "--n",
        "4",
        "--out",
        p(dir.path()),
        "--input",
        "0111",
    ]);
    let trace = dir.path().join("trace.jsonl");
    let o = owflab(&[
        "eval",
        "--backend",
        "pcp",
        "--instance",
        p(&dir.path().join("instance.pcp")),
        "--trace",
        p(&trace),
    ]);
    assert!(o.status.success());
    let indices: Vec<usize> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["rule"].as_u64().unwrap() as usize)
        .collect();
    let c = compile_pcp(&library_machine("not").unwrap(), 4, 0).unwrap();
    assert!(!indices.is_empty());
    assert!(verify_witness(&c.pairs, &c.encode_input(&bits("0111")), &indices));
}

#[test]
fn garbage_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("junk.sts");
    fs::write(&f, "hello\n").unwrap();
    let o = owflab(&["eval", "--backend", "semithue", "--instance", p(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "hello\n");
    assert!(stderr(&o).contains("not an instance"));
    let b = dir.path().join("bits");
    fs::write(&b, "0110\n").unwrap();
    let o = owflab(&["eval", "--backend", "pcp", "--instance", p(&b)]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "0110\n".to_string()));
}

#[test]
fn verify_suites() {
    let o = owflab(&["verify", "--suite", "determinism"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("EXPECTED-FAIL"));
    let o = owflab(&["verify", "--suite", "lemma", "--machine", "id", "--n-max", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = owflab(&["verify", "--suite", "coding", "--machine", "not", "--n-max", "64", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn failing_suite_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("crash.tm");
    // moves left off cell 0 at once
    fs::write(&m, "TM v1\nstart: s\nhalt: h\ns 0 -> h 0 L\ns 1 -> h 1 L\ns B -> h B L\n").unwrap();
    let o = owflab(&["verify", "--suite", "lemma", "--machine", p(&m), "--n-max", "2"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn sample_is_seeded() {
    let a = owflab(&["sample", "--backend", "semithue", "--count", "4", "--seed", "5"]);
    let b = owflab(&["sample", "--backend", "semithue", "--count", "4", "--seed", "5"]);
    let c = owflab(&["sample", "--backend", "semithue", "--count", "4", "--seed", "6"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!(stderr(&a).contains("truncated mass"));
    let dir = tempfile::tempdir().unwrap();
    let o = owflab(&["sample", "--backend", "tiling", "--count", "3", "--out", p(dir.path())]);
    assert!(o.status.success());
    assert!(fs::read_to_string(dir.path().join("sample_0002.tiles")).unwrap().starts_with("TILES v1"));
}

#[test]
fn invert_not_at_eight() {
    let t = Instant::now();
    let o = owflab(&[
        "invert",
        "--backend",
        "pcp",
        "--machine",
        "not",
        "--from-input",
        "10110100",
        "--jobs",
        "2",
    ]);
    let took = t.elapsed();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("found 10110100 after 181 attempts"), "{}", stdout(&o));
    assert!(took.as_secs_f64() < 5.0, "{took:?}");
}

#[test]
fn invert_garbage_target() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t");
    fs::write(&f, "0").unwrap();
    let o = owflab(&["invert", "--backend", "semithue", "--instance", p(&f)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("found 0 after 0 attempts"), "{}", stdout(&o));
}

#[test]
fn experiment_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = owflab(&[
        "experiment",
        "--backend",
        "tiling",
        "--ns",
        "2,3",
        "--targets",
        "3",
        "--identity-samples",
        "5",
        "--seed",
        "2",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("kind,machine,n,seed,forward_us,attempts,found,identity_rate,policy"));
    assert_eq!(lines.count(), 2);
}
