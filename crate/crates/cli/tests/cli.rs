use std::path::Path;
use std::process::{Command, Output};

fn hwlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwlab")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    hwlab(args).status.code().expect("exit code")
}

fn stdout(args: &[&str]) -> String {
    let out = hwlab(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_kernel(path: &Path, n: usize, f: impl Fn(usize, usize) -> f64) {
    let text: String = (0..n)
        .map(|i| (0..n).map(|j| f(i, j).to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(path, text).unwrap();
}

fn roundtrips(json: &str) {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    let again = serde_json::to_string_pretty(&v).unwrap() + "\n";
    assert_eq!(again, json);
}

#[test]
fn eigencheck_exit_codes() {
    assert_eq!(code(&["eigencheck", "--lambda", "1"]), 0);
    assert_eq!(code(&["eigencheck", "--lambda", "-0.25"]), 0);
    assert_eq!(code(&["eigencheck", "--lambda", "-1"]), 3);
    assert_eq!(code(&["eigencheck", "--lambda", "3"]), 3);
    assert_eq!(code(&["eigencheck", "--lambda", "1+"]), 64);
    assert_eq!(code(&["eigencheck", "--lambda", "1 + 2i"]), 64);
    assert_eq!(code(&["eigencheck"]), 64);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn eigencheck_reports_bulb() {
    let out = stdout(&["eigencheck", "--lambda", "1", "--format", "json"]);
    roundtrips(&out);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "bulb");
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn chain_at_zero_prints_exact_polynomials() {
    let out = stdout(&["chain", "--lambda", "0", "--m", "2"]);
    assert!(out.contains("0,2,2,(1)*u^2"), "{out}");
    assert!(out.contains("1,4,3,(-1)*u^3 + (1/2)*u^4"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("2,6,4,")), "{out}");
    roundtrips(&stdout(&["chain", "--lambda", "0", "--m", "2", "--format", "json"]));
}

#[test]
fn chain_admissibility() {
    assert_eq!(code(&["chain", "--lambda", "-0.3", "--m", "2"]), 0);
    let out = hwlab(&["chain", "--lambda", "-0.5", "--m", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("-2/(2m+1)"));
    assert_eq!(code(&["chain", "--lambda", "-0.3", "--m", "0"]), 64);
}

#[test]
fn symbol_json() {
    let out = stdout(&["symbol", "--word", "H - Mx", "--index-at", "1", "--index-at", "-0.5", "--index-at", "3"]);
    roundtrips(&out);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let idx = v["index"].as_array().unwrap();
    assert_eq!(idx[0]["index"], 1);
    assert_eq!(idx[1]["index"], "undefined: essential");
    assert_eq!(idx[2]["index"], 0);

    let out = stdout(&["symbol", "--word", "H*Mx"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["f_minus"].as_array().unwrap().len(), 0);
    assert_eq!(v["f_plus"].as_array().unwrap().len(), 0);
}

#[test]
fn symbol_parse_error_has_caret() {
    let out = hwlab(&["symbol", "--word", "H -"]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("     ^"), "{err}");
}

#[test]
fn default_scan_csv() {
    let out = stdout(&["scan"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 121 * 91 + 1);
    assert_eq!(lines[0], "re,im,sigma_min");
    let again = stdout(&["scan", "--nx", "5", "--ny", "3"]);
    assert_eq!(again, stdout(&["scan", "--nx", "5", "--ny", "3"]));
}

#[test]
fn scan_svg_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.svg");
    let p = path.to_str().unwrap();
    assert_eq!(code(&["scan", "--nx", "11", "--ny", "9", "--N", "16", "--out", p]), 0);
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.contains("version=\"1.1\""));
    assert_eq!(svg.matches("<circle").count(), 1);
    assert!(svg.contains("cx=\"1\" cy=\"0\" r=\"1\""));
    assert_eq!(svg.matches("<rect").count(), 11 * 9 + 1);

    assert_eq!(code(&["scan", "--nx", "1"]), 64);
    let bad = dir.path().join("missing").join("scan.csv");
    assert_eq!(code(&["scan", "--nx", "3", "--ny", "3", "--out", bad.to_str().unwrap()]), 73);
}

#[test]
fn compact_approx_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let volterra = dir.path().join("volterra.csv");
    write_kernel(&volterra, 64, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    });
    let out = stdout(&["compact-approx", "--kernel", volterra.to_str().unwrap(), "--levels", "3"]);
    let bounds: Vec<f64> = out
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{out}");

    let ones = dir.path().join("ones.csv");
    write_kernel(&ones, 16, |_, _| 1.0);
    assert_eq!(code(&["compact-approx", "--kernel", ones.to_str().unwrap(), "--levels", "3"]), 3);

    let hundred = dir.path().join("hundred.csv");
    write_kernel(&hundred, 100, |i, j| if i > j { 1.0 } else { 0.0 });
    assert_eq!(code(&["compact-approx", "--kernel", hundred.to_str().unwrap(), "--levels", "3"]), 64);

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "1,0\n1\n").unwrap();
    assert_eq!(code(&["compact-approx", "--kernel", ragged.to_str().unwrap(), "--levels", "1"]), 65);

    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&["compact-approx", "--kernel", missing.to_str().unwrap(), "--levels", "1"]), 66);
}

#[test]
fn witness_tables() {
    let out = stdout(&["witness", "--kind", "spike", "--s", "0.3"]);
    let errs: Vec<f64> = out
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{out}");

    let out = stdout(&["witness", "--kind", "upsilon", "--rho", "1", "--format", "json"]);
    roundtrips(&out);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let inner: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["inner"].as_f64().unwrap()).collect();
    assert!(inner.windows(2).all(|w| w[1] < w[0]) && inner[2] < 0.01);

    assert_eq!(code(&["witness", "--kind", "upsilon", "--tau", "-1"]), 64);
    assert_eq!(code(&["witness", "--kind", "spike", "--s", "0.01"]), 64);
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_hwlab"))
        .args(["scan", "--nx", "3", "--ny", "3", "--N", "8"])
        .env("HW_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_hwlab"))
        .args(["scan", "--nx", "3", "--ny", "3"])
        .env("HW_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(64));
}
