use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffconj")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Last line of a text report (the header comes first).
fn last_line(o: &Output) -> String {
    stdout(o).lines().last().unwrap_or_default().to_string()
}

fn structured(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.extend(["--report", "structured"]);
    let o = run(&all);
    (code(&o), serde_json::from_slice(&o.stdout).unwrap_or(Value::Null))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_spec(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn series_examples() {
    assert_eq!(last_line(&run(&["series", "invert", "[1,1]", "--order", "3"])), "[1, -1, 2]");
    assert_eq!(last_line(&run(&["series", "linearize", "[2,1]", "--order", "2"])), "[1, 1/2]");
    assert_eq!(last_line(&run(&["series", "compose", "[-1,0,-1]", "[-1,0,-1]"])), "[1, 0, 2]");
    assert_eq!(last_line(&run(&["series", "power", "[-1,0,-1]", "-2"])), "[1, 0, -2]");
    let (c, doc) = structured(&["series", "sqrt", "[1]", "--mu", "-1", "--order", "3"]);
    assert_eq!(c, 0);
    assert_eq!(doc["result"]["kind"], "family");
    assert_eq!(doc["result"]["free_indices"], serde_json::json!([2]));
    let (_, doc) = structured(&["series", "deviation", "[-1, 1, 0]"]);
    assert_eq!(doc["result"]["deviation_index"], 2);
    assert_eq!(doc["result"]["square_deviation"], 3);
}

#[test]
fn series_literals_round_trip_through_reports() {
    let lit = "[-3/7, 0, 5/2, -1/9]";
    let (_, doc) = structured(&["series", "compose", lit, "[1]"]);
    assert_eq!(doc["result"]["series"], lit);
}

#[test]
fn series_errors() {
    assert_eq!(code(&run(&["series", "invert", "[0, 1]"])), 12);
    assert_eq!(code(&run(&["series", "invert", "[1, x]"])), 11);
    assert_eq!(code(&run(&["series", "sqrt", "[4]", "--mu", "3"])), 12);
    assert_eq!(code(&run(&["series", "sqrt", "[4]"])), 10);
    assert_eq!(code(&run(&["series", "linearize", "[1, 1]"])), 12);
    assert_eq!(code(&run(&["series", "invert", "[1]", "[1]"])), 10);
}

#[test]
fn jet_examples() {
    assert_eq!(last_line(&run(&["jet", "-x - x^3", "0", "4"])), "[-1, 0, -1, 0]");
    assert_eq!(last_line(&run(&["jet", "1 - x", "1/2", "2"])), "[-1, 0]");
    assert_eq!(last_line(&run(&["jet", "exp(x)-1", "0", "3"])), "[1, 1/2, 1/6]");
    assert_eq!(code(&run(&["jet", "log(x)", "0", "3"])), 14);
    assert_eq!(code(&run(&["jet", "x +", "0", "3"])), 11);
}

#[test]
fn verify_examples() {
    assert_eq!(code(&run(&["verify", "-x", "1 - x", "x + 1/2"])), 0);
    assert_eq!(code(&run(&["verify", "-x", "-x - x^3", "x + x^3"])), 1);
    let (c, doc) = structured(&["verify", "-x", "-x", "x", "--interval", "-1", "1", "--points", "11"]);
    assert_eq!(c, 0);
    assert_eq!(doc["result"]["grid"]["points"], 11);
    assert_eq!(doc["header"]["interval"], serde_json::json!(["-1", "1"]));
}

#[test]
fn decide_examples() {
    let (c, doc) = structured(&["decide", &fixture("minus_x.spec"), &fixture("one_minus_x.spec")]);
    assert_eq!(c, 0);
    assert_eq!(doc["result"]["case_tag"], "INVOLUTION");
    let (c, doc) = structured(&[
        "decide",
        &fixture("jet_minus_x_boundary.spec"),
        &fixture("jet_involution_boundary.spec"),
    ]);
    assert_eq!(c, 1);
    assert_eq!(doc["result"]["case_tag"], "CASE3_BOUNDARY");
    let (c, _) = structured(&["decide", &fixture("jet_minus_x_unknown.spec"), &fixture("jet_mobius_unknown.spec")]);
    assert_eq!(c, 2);
}

#[test]
fn decide_without_matching_squares_is_a_precondition_failure() {
    let (c, doc) = structured(&["decide", &fixture("cubic.spec"), &fixture("cubic_conjugated.spec")]);
    assert_eq!(c, 12);
    assert_eq!(doc["result"]["case_tag"], "PRECONDITION_FAILED");
}

#[test]
fn text_report_has_header_and_fields() {
    let o = run(&["decide", &fixture("minus_x.spec"), &fixture("minus_x.spec")]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "# diffconj decide order=16 precision=50 interval=[-2, 2] points=1001 seed=0"
    );
    assert!(text.contains("status: CONJUGATE"));
    assert!(text.contains("certificate.expr: x"));
}

#[test]
fn invalid_specs_exit_11() {
    let dir = tempfile::tempdir().unwrap();
    let good = fixture("minus_x.spec");
    for (name, text) in [
        ("unknown_key.spec", "degree = -1\nexpr = \"-x\"\ncolour = red\n"),
        ("bad_degree.spec", "degree = 2\nexpr = \"-x\"\n"),
        ("no_body.spec", "degree = -1\n"),
        ("bad_expr.spec", "degree = -1\nexpr = \"-x +\"\n"),
        ("wrong_degree.spec", "degree = -1\nexpr = \"x + x^3\"\n"),
        ("not_diffeo.spec", "degree = -1\nexpr = \"x^2\"\n"),
        ("bad_fixed_point.spec", "degree = -1\nexpr = \"1 - x\"\nfixed_point = 0\n"),
    ] {
        let bad = write_spec(dir.path(), name, text);
        let o = run(&["decide", &good, &bad]);
        assert_eq!(code(&o), 11, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&run(&["decide", &good, "/nonexistent/spec"])), 11);
}

#[test]
fn usage_errors_exit_10() {
    assert_eq!(code(&run(&[])), 10);
    assert_eq!(code(&run(&["frobnicate"])), 10);
    assert_eq!(code(&run(&["selftest", "--bogus"])), 10);
    assert_eq!(code(&run(&["selftest", "--order", "3"])), 10);
    assert_eq!(code(&run(&["selftest", "--precision", "20"])), 10);
    assert_eq!(code(&run(&["selftest", "--suite", "nope"])), 10);
    assert_eq!(code(&run(&["verify", "-x", "-x", "x", "--interval", "1", "-1"])), 10);
    assert_eq!(code(&run(&["verify", "-x", "-x", "x", "--report", "xml"])), 10);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn selftest_is_deterministic() {
    let args = ["selftest", "--cases", "12", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("suite lemma-square seed=7 order=16 cases=12 passed=12 PASS"));
    let o = run(&["selftest", "--suite", "lemma-square", "--cases", "40"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 3);
}
