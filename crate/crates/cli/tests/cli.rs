use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use regionminer_cli::run;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("regionminer").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn key(report: &str, k: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{k}=")))
        .unwrap_or_else(|| panic!("{k} missing in {report}"))
        .to_string()
}

#[test]
fn filtered_discovery_fits_the_clean_log() {
    let dir = tempfile::tempdir().unwrap();
    let pnml = dir.path().join("net.pnml");
    let (code, out, err) = run_args(&[
        "discover",
        "--log",
        s(&fixture("l1_prime.log")),
        "--alpha",
        "0.75",
        "--out-pnml",
        s(&pnml),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(key(&out, "skipped_pairs"), "0");
    let (code, report, err) = run_args(&[
        "evaluate",
        "--log",
        s(&fixture("l1.log")),
        "--pnml",
        s(&pnml),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(key(&report, "fitness"), "1.000000");
}

#[test]
fn alpha_one_matches_no_filter() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pnml");
    let b = dir.path().join("b.pnml");
    let log = fixture("l1_prime.log");
    assert_eq!(run_args(&["discover", "--log", s(&log), "--alpha", "1", "--out-pnml", s(&a)]).0, 0);
    assert_eq!(run_args(&["discover", "--log", s(&log), "--no-filter", "--out-pnml", s(&b)]).0, 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn side_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("lp");
    let (code, out, err) = run_args(&[
        "discover",
        "--log",
        s(&fixture("l1_prime.log")),
        "--alpha",
        "0.75",
        "--sequential",
        "--out-pnml",
        s(&dir.path().join("n.pnml")),
        "--out-dot",
        s(&dir.path().join("n.dot")),
        "--emit-seg-dot",
        s(&dir.path().join("seg.dot")),
        "--emit-causal-dot",
        s(&dir.path().join("causal.dot")),
        "--emit-lp",
        s(&lp),
    ]);
    assert_eq!(code, 0, "{err}");
    let pairs: usize = key(&out, "causal_pairs").parse().unwrap();
    assert_eq!(fs::read_dir(&lp).unwrap().count(), pairs);
    let seg = fs::read_to_string(dir.path().join("seg.dot")).unwrap();
    assert!(seg.starts_with("digraph") && seg.contains("dashed"));
    let net = fs::read_to_string(dir.path().join("n.dot")).unwrap();
    assert!(net.contains("shape=circle") && net.contains("shape=box"));
    assert!(fs::read_to_string(dir.path().join("causal.dot")).unwrap().starts_with("digraph"));
}

#[test]
fn mismatched_alphabet_names_missing_labels() {
    let dir = tempfile::tempdir().unwrap();
    let pnml = dir.path().join("net.pnml");
    let small = dir.path().join("small.log");
    fs::write(&small, "a b\n").unwrap();
    assert_eq!(run_args(&["discover", "--log", s(&small), "--out-pnml", s(&pnml)]).0, 0);
    let (code, _, err) = run_args(&["evaluate", "--log", s(&fixture("l1.log")), "--pnml", s(&pnml)]);
    assert_eq!(code, 1);
    assert!(err.contains("status=error kind=pipeline"), "{err}");
    assert!(err.contains("c,d,e,f,g,h"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let (code, _, err) = run_args(&["discover", "--log", "x.log"]);
    assert_eq!(code, 2);
    assert!(err.lines().last().unwrap().starts_with("status=error kind=usage"), "{err}");
    let (code, _, _) = run_args(&["discover", "--log", "x", "--alpha", "0.5", "--no-filter", "--out-pnml", "y"]);
    assert_eq!(code, 2);
    assert_eq!(run_args(&["frobnicate"]).0, 2);
    assert_eq!(run_args(&["--help"]).0, 0);
}

#[test]
fn pipeline_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_args(&[
        "discover",
        "--log",
        s(&dir.path().join("missing.log")),
        "--out-pnml",
        s(&dir.path().join("n.pnml")),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("does not exist"));
    // output directory checked before any work
    let (code, _, err) = run_args(&[
        "discover",
        "--log",
        s(&fixture("l1.log")),
        "--out-pnml",
        s(&dir.path().join("nope/n.pnml")),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("output directory"));
    let (code, _, _) = run_args(&[
        "discover",
        "--log",
        s(&fixture("l1.log")),
        "--alpha",
        "2",
        "--out-pnml",
        s(&dir.path().join("n.pnml")),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn noise_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.log");
    let b = dir.path().join("b.log");
    for out in [&a, &b] {
        let (code, _, err) = run_args(&[
            "noise",
            "--log",
            s(&fixture("l1.log")),
            "--level",
            "0.3",
            "--seed",
            "5",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (code, _, _) = run_args(&[
        "noise",
        "--log",
        s(&fixture("l1.log")),
        "--level",
        "1.5",
        "--seed",
        "5",
        "--out",
        s(&a),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn sweep_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("model.log");
    let generated = regionminer_core::quality::simulate(&regionminer_core::quality::reference_model(), 60, 3, 50);
    fs::write(&log, regionminer_core::event_log::serialize_trace_log(&generated)).unwrap();
    let (code, out, err) = run_args(&[
        "sweep",
        "--log",
        s(&log),
        "--alphas",
        "off,0.25,1",
        "--noise-levels",
        "0,0.1",
    ]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "noise,alpha,fitness,precision,wall_ms");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("0,off,1.000000,"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 5));
}

#[test]
fn convert_xes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("log.txt");
    let (code, _, err) = run_args(&["convert", "--xes", s(&fixture("three_traces.xes")), "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let log = regionminer_core::event_log::parse_trace_log(&fs::read_to_string(&out).unwrap()).unwrap();
    let expected =
        regionminer_core::event_log::parse_trace_log("2;register examine decide\n1;register check decide").unwrap();
    assert_eq!(log, expected);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_regionminer");
    let status = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let pnml = dir.path().join("n.pnml");
    let ok = Command::new(bin)
        .args(["discover", "--log", s(&fixture("l1.log")), "--out-pnml", s(&pnml)])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let missing = Command::new(bin)
        .args(["evaluate", "--log", "/nonexistent.log", "--pnml", s(&pnml)])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert!(stderr.starts_with("status=error kind=pipeline"));
}
