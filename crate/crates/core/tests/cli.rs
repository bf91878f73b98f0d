use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qstruct"));
    cmd.env_remove("QSTRUCT_NMAX");
    cmd
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = bin().args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn json(r: &Run) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}", r.stdout))
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let mut all = vec!["generate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let r = run(&all);
    assert_eq!(r.code, 0, "{}", r.stderr);
    path
}

#[test]
fn generate_chebyshev_to_stdout() {
    let r = run(&["generate", "--family", "chebyshev-t", "-N", "8"]);
    assert_eq!(r.code, 0);
    let v = json(&r);
    let c: Vec<&str> = v["ttrr"]["C"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert_eq!(&c[..3], &["1/2", "1/4", "1/4"]);
    assert_eq!(c.len(), 8);
}

#[test]
fn generate_writes_both_files() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "qh", &["--family", "q-hermite", "--q-quarter", "1/2", "-N", "4"]);
    let ttrr: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(ttrr["B"].as_array().unwrap().iter().all(|b| b == "0"));
    assert_eq!(ttrr["C"][0], "15/64");
    let ops: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("qh.ops.json")).unwrap())
            .unwrap();
    assert_eq!(ops["text"][1], "x");
    assert_eq!(ops["polys"].as_array().unwrap().len(), 5);
}

#[test]
fn generate_rejects_irregular_parameters() {
    let r = run(&["generate", "--family", "alsalam-chihara", "--c", "1", "--d", "1", "--q-quarter", "1/2"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("1 - c*d*q^(n-1)"), "{}", r.stderr);
    let r = run(&["generate", "--family", "continuous-q-jacobi", "--p-a", "4", "--p-b", "1/3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("vanishes"), "{}", r.stderr);
    let r = run(&["generate", "--family", "nope"]);
    assert_eq!(r.code, 2);
    let r = run(&["generate", "--family", "q-hermite", "--q-quarter", "3/2"]);
    assert_eq!(r.code, 2);
}

#[test]
fn fit_examples() {
    let dir = TempDir::new().unwrap();
    let cheb = generate(dir.path(), "cheb", &["--family", "chebyshev-t", "-N", "10"]);
    let r = run(&["fit", cheb.to_str().unwrap(), "--deg-pi", "auto"]);
    assert_eq!(r.code, 0);
    let v = json(&r);
    assert_eq!(v["deg_pi"], 2);
    assert_eq!(v["pi_text"], "x^2-1");
    assert_eq!(v["status"], "exact");

    let qh = generate(dir.path(), "qh", &["--family", "q-hermite", "-N", "10"]);
    let r = run(&["fit", qh.to_str().unwrap(), "--deg-pi", "1"]);
    assert_eq!(r.code, 1);
    assert!(json(&r)["status"]["noSolution"].is_u64());

    let asc = generate(dir.path(), "asc", &["--family", "alsalam-chihara", "--c", "1/4", "--d", "1", "-N", "10"]);
    let r = run(&["fit", asc.to_str().unwrap(), "--deg-pi", "1"]);
    assert_eq!(r.code, 0);
    let v = json(&r);
    assert_eq!(v["pi_text"], "x-1");
    assert_eq!(v["c"][1], "-3/8");
}

#[test]
fn classify_examples() {
    let dir = TempDir::new().unwrap();
    let qj = generate(
        dir.path(),
        "qj",
        &["--family", "continuous-q-jacobi", "--p-a", "1/4", "--p-b", "1/16", "-N", "10"],
    );
    let r = run(&["classify", qj.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r);
    assert_eq!(v["family"], "continuous-q-jacobi");
    assert_eq!(v["params"]["p_a"], "1/4");
    assert_eq!(v["params"]["p_b"], "1/16");

    let qh = generate(dir.path(), "qh", &["--family", "q-hermite", "-N", "10"]);
    let r = run(&["classify", qh.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert_eq!(json(&r)["family"], "q-hermite");

    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&qj).unwrap()).unwrap();
    let c2 = qstruct::scalar::parse_rational(doc["C"][1].as_str().unwrap()).unwrap()
        + qstruct::scalar::rat(1, 1000);
    doc["C"][1] = Value::String(qstruct::scalar::format_rational(&c2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let r = run(&["classify", bad.to_str().unwrap()]);
    assert_eq!(r.code, 3);
    let v = json(&r);
    assert_eq!(v["family"], "not-characterized");
    assert!(v["predicates"].as_object().unwrap().contains_key("fit_deg_2"));
}

#[test]
fn verify_examples() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("qh", vec!["--family", "q-hermite"]),
        ("asc", vec!["--family", "alsalam-chihara", "--c", "1/4", "--d", "1"]),
        ("cheb", vec!["--family", "chebyshev-t"]),
        ("qj", vec!["--family", "continuous-q-jacobi", "--p-a", "1/4", "--p-b", "1/16"]),
    ];
    for (name, args) in cases {
        let mut a = args.clone();
        a.extend(["-N", "10"]);
        let path = generate(dir.path(), name, &a);
        let r = run(&["verify", path.to_str().unwrap(), "-N", "10", "--checks", "all"]);
        assert_eq!(r.code, 0, "{name}: {}", r.stdout);
        let v = json(&r);
        assert_eq!(v["pass"], true);
        let names: Vec<&str> = v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        assert_eq!(names, ["five-term", "pearson", "structure", "system"]);
    }

    let off = generate(dir.path(), "off", &["--family", "alsalam-chihara", "--c", "1/3", "--d", "1/5"]);
    let r = run(&["verify", off.to_str().unwrap(), "--checks", "structure", "--deg-pi", "1"]);
    assert_eq!(r.code, 1);
    assert_eq!(json(&r)["checks"][0]["pass"], false);

    let cheb = dir.path().join("cheb.json");
    let r = run(&["verify", cheb.to_str().unwrap(), "-N", "8", "--checks", "pearson"]);
    assert_eq!(r.code, 0);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "asc", &["--family", "alsalam-chihara", "--c", "1/4", "--d", "1"]);
    let p = path.to_str().unwrap();
    for args in [vec!["verify", p], vec!["classify", p], vec!["fit", p]] {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.stdout, b.stdout);
        assert!(!a.stdout.is_empty());
    }
    let again = dir.path().join("again.json");
    generate(dir.path(), "again", &["--family", "alsalam-chihara", "--c", "1/4", "--d", "1"]);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn env_cap_limits_horizon() {
    let out = bin()
        .args(["generate", "--family", "chebyshev-t", "-N", "20"])
        .env("QSTRUCT_NMAX", "5")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["ttrr"]["B"].as_array().unwrap().len(), 6);
}

#[test]
fn unreadable_input_exits_two() {
    let r = run(&["fit", "/nonexistent/ttrr.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("nonexistent"));
}
