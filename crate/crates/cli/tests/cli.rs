use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use gumbel_sketch::codec::{deserialize, serialize};
use gumbel_sketch::{Sketch, SketchConfig, Variant};
use serde_json::Value;
use tempfile::TempDir;

const FIXTURE_SEED: &str = "0x5EED_0000_0000_0001";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gumbel-sketch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gumbel-sketch")
}

fn run_with_stdin(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn gumbel-sketch");
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn fixture_lines() -> String {
    (0..10_000).map(|i| format!("item-{i}\n")).collect()
}

fn write(dir: &TempDir, name: &str, contents: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn estimate_json(path: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["estimate", s(path), "--format", "json"];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn empty_input_gives_initial_sketch() {
    let o = run_with_stdin(&["sketch", "-k", "64", "--seed", "7"], b"");
    assert!(o.status.success());
    assert!(stderr(&o).contains("0 items"));
    let config = SketchConfig::new(64, 7u64, Variant::DiscretizedSa).unwrap();
    assert_eq!(o.stdout, serialize(&Sketch::new(config)));
}

#[test]
fn duplicate_lines_do_not_change_the_file() {
    let a = run_with_stdin(&["sketch", "-k", "128"], b"x\ny\nz\n");
    let b = run_with_stdin(&["sketch", "-k", "128"], b"x\ny\nx\nz\ny\nz\n");
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stderr(&b).contains("6 items"));
}

#[test]
fn lines_are_raw_bytes() {
    // only the trailing newline is removed: "a\r" and "a" are different items
    let with_cr = run_with_stdin(&["sketch", "-k", "16", "--variant", "sa"], b"a\r\n");
    let plain = run_with_stdin(&["sketch", "-k", "16", "--variant", "sa"], b"a\n");
    let no_newline = run_with_stdin(&["sketch", "-k", "16", "--variant", "sa"], b"a");
    assert_ne!(with_cr.stdout, plain.stdout);
    assert_eq!(plain.stdout, no_newline.stdout);
}

#[test]
fn golden_sketch_file() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "items.txt", fixture_lines().as_bytes());
    let out = dir.path().join("out.gs");
    let o = run(&[
        "sketch",
        "--seed",
        FIXTURE_SEED,
        "-i",
        s(&input),
        "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("10000 items"));
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(fixture("golden-10k.gs")).unwrap()
    );
}

#[test]
fn golden_estimates() {
    let golden = fixture("golden-10k.gs");
    let h = estimate_json(&golden, &[]);
    let g = estimate_json(&golden, &["--estimator", "geometric"]);
    assert_eq!(h["estimate"].as_f64().unwrap(), 10388.522916230846);
    assert_eq!(g["estimate"].as_f64().unwrap(), 11266.791496915015);
    assert_eq!(h["harmonic_norm"], "moment");
    assert_eq!(h["variant"], "discretized-sa");
    assert_eq!(h["k"], 1024);

    let (zh, zg) = (
        h["estimate"].as_f64().unwrap(),
        g["estimate"].as_f64().unwrap(),
    );
    let rse = g["predicted_rse"].as_f64().unwrap();
    assert!((zh - zg).abs() / 10_000.0 < 5.0 * rse);
}

#[test]
fn json_output_round_trips() {
    let v = estimate_json(&fixture("golden-10k.gs"), &[]);
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
    for key in ["estimate", "k", "variant", "estimator", "predicted_rse"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn csv_and_text_outputs() {
    let o = run(&["estimate", s(&fixture("golden-10k.gs")), "--format", "csv"]);
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "estimate,k,variant,estimator,predicted_rse,seed,harmonic_norm"
    );
    assert!(lines
        .next()
        .unwrap()
        .starts_with("10388.522916230846,1024,discretized-sa,harmonic,"));
    let o = run(&["estimate", s(&fixture("golden-10k.gs")), "--format", "text"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("estimate"));
}

#[test]
fn estimate_from_stream_matches_file() {
    let o = run_with_stdin(
        &[
            "estimate",
            "--from-stream",
            "--seed",
            FIXTURE_SEED,
            "-f",
            "json",
        ],
        fixture_lines().as_bytes(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v, estimate_json(&fixture("golden-10k.gs"), &[]));
}

#[test]
fn published_normalization_is_available() {
    let v = estimate_json(&fixture("golden-10k.gs"), &["--harmonic-norm", "published"]);
    assert_eq!(v["harmonic_norm"], "published");
    // the published offset saturates below 2k on this stream
    assert!(v["estimate"].as_f64().unwrap() < 2048.0);
    let v = estimate_json(
        &fixture("golden-10k.gs"),
        &["--harmonic-norm", "scale=1.718281828459045"],
    );
    assert_eq!(v["estimate"].as_f64().unwrap(), 10388.522916230846);
}

#[test]
fn misapplied_flags_are_usage_errors() {
    let golden = fixture("golden-10k.gs");
    let o = run(&[
        "estimate",
        s(&golden),
        "-e",
        "geometric",
        "--harmonic-norm",
        "moment",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["estimate", s(&golden), "-k", "16"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["estimate", s(&golden), "--harmonic-norm", "sideways"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let sa = dir.path().join("sa.gs");
    let o = run_with_stdin(
        &["sketch", "--variant", "sa", "-k", "32", "-o", s(&sa)],
        b"a\nb\n",
    );
    assert!(o.status.success());
    let o = run(&["estimate", s(&sa), "--harmonic-norm", "moment"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("discretized-sa"));
}

#[test]
fn variant_mismatch_with_file() {
    let o = run(&["estimate", s(&fixture("golden-10k.gs")), "--variant", "fr"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("full-replication"));
}

#[test]
fn corrupted_and_missing_files() {
    let dir = TempDir::new().unwrap();
    let mut bytes = std::fs::read(fixture("golden-10k.gs")).unwrap();
    bytes[100] ^= 0x04;
    let bad = write(&dir, "bad.gs", &bytes);
    let o = run(&["estimate", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));

    let missing = dir.path().join("nope.gs");
    let o = run(&["estimate", s(&missing)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nope.gs"));

    let o = run(&["sketch", "-i", s(&missing)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_full_replication_sketch_cannot_be_estimated() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("fr.gs");
    assert!(
        run_with_stdin(&["sketch", "--variant", "fr", "-k", "8", "-o", s(&p)], b"")
            .status
            .success()
    );
    let o = run(&["estimate", s(&p)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

fn sketch_lines(dir: &TempDir, name: &str, lines: &[String], extra: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut args = vec!["sketch", "-o", s(&out)];
    args.extend_from_slice(extra);
    let o = run_with_stdin(&args, lines.concat().as_bytes());
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn merge_shards_equals_whole_stream() {
    let dir = TempDir::new().unwrap();
    let lines: Vec<String> = (0..6000).map(|i| format!("user-{}\n", i % 5000)).collect();
    let whole = sketch_lines(&dir, "whole.gs", &lines, &[]);
    let shards: Vec<PathBuf> = lines
        .chunks(1700)
        .enumerate()
        .map(|(i, c)| sketch_lines(&dir, &format!("shard{i}.gs"), c, &[]))
        .collect();

    let merged = dir.path().join("merged.gs");
    let mut args = vec!["merge", "-o", s(&merged)];
    args.extend(shards.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(&merged).unwrap(),
        std::fs::read(&whole).unwrap()
    );
    assert_eq!(estimate_json(&merged, &[]), estimate_json(&whole, &[]));

    let reversed = dir.path().join("reversed.gs");
    let mut args = vec!["merge", "-o", s(&reversed)];
    args.extend(shards.iter().rev().map(|p| s(p)));
    assert!(run(&args).status.success());
    assert_eq!(
        std::fs::read(&reversed).unwrap(),
        std::fs::read(&merged).unwrap()
    );
}

#[test]
fn merge_with_itself_is_identity() {
    let golden = fixture("golden-10k.gs");
    let o = run(&["merge", s(&golden), s(&golden)]);
    assert!(o.status.success());
    assert_eq!(o.stdout, std::fs::read(&golden).unwrap());
    let merged = deserialize(&o.stdout).unwrap();
    assert_eq!(
        merged,
        deserialize(&std::fs::read(&golden).unwrap()).unwrap()
    );
}

#[test]
fn merge_rejects_incompatible_inputs() {
    let dir = TempDir::new().unwrap();
    let lines = vec!["a\n".to_string(), "b\n".to_string()];
    let a = sketch_lines(&dir, "a.gs", &lines, &["-k", "64"]);
    let b = sketch_lines(&dir, "b.gs", &lines, &["-k", "64"]);
    let c = sketch_lines(&dir, "c.gs", &lines, &["-k", "64", "--seed", "1"]);
    let o = run(&["merge", s(&a), s(&b), s(&c)]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("a.gs") && msg.contains("c.gs"), "{msg}");

    let o = run(&["merge", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_rejects_too_few_trials() {
    let o = run(&["simulate", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--variant", "sa", "--harmonic-norm", "moment"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_report_is_deterministic() {
    let args = [
        "simulate",
        "--variant",
        "sa",
        "-e",
        "geometric",
        "--n",
        "5000",
        "-k",
        "64",
        "--trials",
        "30",
        "-f",
        "json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["trials"], 30);
    let rse = v["empirical_rse"].as_f64().unwrap();
    assert!(rse > 0.05 && rse < 0.3, "{rse}");
    assert!(v["coverage_fraction"].as_f64().unwrap() >= 2.0 / 3.0);
}

#[test]
fn simulate_emits_histogram() {
    let o = run(&[
        "simulate",
        "--emit-histogram",
        "--n",
        "64",
        "--samples",
        "20000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader.headers().unwrap(),
        vec!["distribution", "n", "x", "empirical", "reference"]
    );
    let mut gumbel_mass = 0.0;
    let mut kinds = std::collections::BTreeSet::new();
    for row in reader.records() {
        let row = row.unwrap();
        kinds.insert(row[0].to_string());
        if &row[0] == "gumbel" {
            gumbel_mass += row[3].parse::<f64>().unwrap() * 0.25;
            let x: f64 = row[2].parse().unwrap();
            let mu = 64f64.ln();
            let z = -(x - mu);
            let pdf = (z - z.exp()).exp();
            assert!((row[4].parse::<f64>().unwrap() - pdf).abs() < 1e-12);
        }
    }
    assert!(gumbel_mass > 0.999);
    assert_eq!(
        kinds.into_iter().collect::<Vec<_>>(),
        vec!["geometric", "gumbel"]
    );
}

#[test]
fn validate_quick_budget_passes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.csv");
    let o = run(&["validate", "--quick", "-o", s(&out)]);
    let report = std::fs::read_to_string(&out).unwrap();
    assert_eq!(o.status.code(), Some(0), "{}\n{report}", stderr(&o));
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,parameter,observed,target,pass"
    );
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn validate_flags_failures() {
    // a tiny sketch cannot meet the RSE windows tuned for the full budget
    let o = run(&[
        "validate", "--quick", "--n", "40", "-k", "4", "--trials", "30", "-f", "text",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[cfg(target_os = "linux")]
#[test]
fn sketch_memory_is_independent_of_stream_length() {
    fn peak_rss_kb(pid: u32) -> u64 {
        let status = std::fs::read_to_string(format!("/proc/{pid}/status")).unwrap();
        let line = status.lines().find(|l| l.starts_with("VmHWM:")).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    }

    let mut child = bin()
        .args(["sketch", "-o", "/dev/null"])
        .stdin(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = std::io::BufWriter::with_capacity(1 << 16, child.stdin.take().unwrap());
    let mut after_small = 0;
    for i in 0..10_000_000u64 {
        writeln!(stdin, "line-{i}").unwrap();
        if i == 100_000 {
            stdin.flush().unwrap();
            after_small = peak_rss_kb(child.id());
        }
    }
    stdin.flush().unwrap();
    // the pipe holds at most a few pages, so nearly every line has been read
    let after_large = peak_rss_kb(child.id());
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("10000000 items"));
    assert!(after_large < 32 * 1024, "peak RSS {after_large} kB");
    assert!(
        after_large < after_small + 1024,
        "{after_small} kB -> {after_large} kB"
    );
}
