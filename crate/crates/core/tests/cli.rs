use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use surjkit::curve::curve_trace;

const BIN: &str = env!("CARGO_BIN_EXE_surjkit");

const GOOD: &str = r#"
[base]
project_arity = 2
depth = 10

[family]
exponents = ["1", "2", "3"]

[certify]
low = "-5"
high = "5"
grid = 9
epsilon = "1e-3"
"#;

const DEGENERATE: &str = r#"
[base]
project_arity = 2

[[family.terms]]
coefficient = "2"
exponents = ["1", "1"]

[[family.terms]]
coefficient = "-2"
exponents = ["1", "2"]

[certify]
low = "-1"
high = "1"
grid = 3
epsilon = "1e-3"
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn surjkit")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn trace_depth_one_has_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["trace", "--depth", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,y");
    assert_eq!(&lines[1..], ["0,0.25,0.25", "0.25,0.25,0.75", "0.5,0.75,0.75", "0.75,0.75,0.25"]);
}

#[test]
fn trace_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["trace", "--depth", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let expect = curve_trace(6, 12).unwrap();
    let rows: Vec<(f64, f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    assert_eq!(rows.len(), 4096);
    let distinct: HashSet<(u64, u64)> = rows.iter().map(|r| (r.1.to_bits(), r.2.to_bits())).collect();
    assert_eq!(distinct.len(), 4096);
    for (i, (r, p)) in rows.iter().zip(&expect).enumerate() {
        assert_eq!(r.0, i as f64 / 4096.0);
        assert_eq!((r.1, r.2), p.to_f64());
    }
}

#[test]
fn trace_rejects_bad_depths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["trace", "--depth", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["trace", "--depth", "13", "--out", out]).status.code(), Some(3));
    let missing = dir.path().join("nope").join("t.csv");
    assert_eq!(
        run(&["trace", "--depth", "1", "--out", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert_eq!(run(&["trace", "--depth", "x", "--out", out]).status.code(), Some(2));
}

#[test]
fn eval_constant_region_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let line = write(dir.path(), "line.toml", "[base]\ndepth = 6\n");
    let o = run(&["eval", "--spec", &line, "--point", "-1.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("0 0"));

    let proj = write(dir.path(), "proj.toml", "[base]\nproject_arity = 3\ndepth = 6\n");
    let a = run(&["eval", "--spec", &proj, "--point", "0.75,2,3"]);
    let b = run(&["eval", "--spec", &proj, "--point", "0.75,-40,1e6"]);
    let c = run(&["eval", "--spec", &line, "--point", "0.75"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a), stdout(&c));

    assert_eq!(run(&["eval", "--spec", &proj, "--point", "1,2"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--spec", &line, "--point", "abc"]).status.code(), Some(2));
}

#[test]
fn malformed_specs_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[base]\ndepth = 6\nbogus = 1\n");
    let o = run(&["eval", "--spec", &unknown, "--point", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let numeric = write(dir.path(), "n.toml", GOOD.replace("\"1e-3\"", "1e-3").as_str());
    assert_eq!(
        run(&["certify", "--spec", &numeric, "--report", "/dev/null"]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("absent.toml");
    assert_eq!(
        run(&["eval", "--spec", missing.to_str().unwrap(), "--point", "1"]).status.code(),
        Some(3)
    );
}

#[test]
fn certify_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "good.toml", GOOD);
    let r1 = dir.path().join("a.json");
    let r2 = dir.path().join("b.json");
    let o = run(&["certify", "--spec", &spec, "--report", r1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("status: certified (81/81"));
    let o = run(&["certify", "--spec", &spec, "--report", r2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read(&r1).unwrap();
    assert_eq!(a, fs::read(&r2).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["certified"], true);
    assert_eq!(json["full_rank"], true);
    assert_eq!(json["certificate"]["witnesses"].as_array().unwrap().len(), 81);
}

#[test]
fn certify_degenerate_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let report = report.to_str().unwrap();
    let deg = write(dir.path(), "deg.toml", DEGENERATE);
    let o = run(&["certify", "--spec", &deg, "--report", report]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("coordinate 1"));

    let good = write(dir.path(), "good.toml", GOOD);
    let o = run(&["certify", "--spec", &good, "--report", report, "--budget", "10"]);
    assert_eq!(o.status.code(), Some(3));

    // unreachable tolerance: refinement gives up, certificate records the failure
    let tight = GOOD.replace("grid = 9", "grid = 3").replace("\"1e-3\"", "\"1e-300\"");
    let tight = write(dir.path(), "tight.toml", &tight);
    let o = run(&["certify", "--spec", &tight, "--report", report]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
