use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitmetric"))
        .args(args)
        .env_remove("SPLITMETRIC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = run(&all);
    assert!(out.status.success(), "{}", stderr(&out));
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn csv_rows(args: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut all = args.to_vec();
    all.extend(["--format", "csv"]);
    let out = run(&all);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

/// Deterministic m x n design with a linear target and a little structured noise.
fn synthetic_csv(m: usize, n: usize) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for i in 0..m {
        let x: Vec<f64> = (0..n).map(|j| ((i * (j + 3) + j * j) as f64 * 0.7311).sin()).collect();
        let y: f64 = x.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum::<f64>() + 0.1 * (i as f64 * 1.9).cos();
        let mut cells = vec![y.to_string()];
        cells.extend(x.iter().map(f64::to_string));
        writeln!(file, "{}", cells.join(",")).unwrap();
    }
    file.flush().unwrap();
    file
}

#[test]
fn solve_reports_optimum() {
    let v = json(&["solve", "--m", "299", "--n", "12"]);
    let row = &v[0];
    assert_eq!(row["p_star"], 161);
    assert_eq!((row["ratio"].as_f64().unwrap() * 1e4).round() / 1e4, 0.5385);
    let v = json(&["solve", "--m", "11934", "--n", "16"]);
    assert_eq!((v[0]["ratio"].as_f64().unwrap() * 1e4).round() / 1e4, 0.2434);
}

#[test]
fn infeasible_shape_exits_2() {
    let out = run(&["solve", "--m", "7", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("m >= n + 5"));
    assert_eq!(run(&["solve", "--m", "20"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn curve_matches_solve() {
    let (header, rows) = csv_rows(&["curve", "--m", "20", "--n", "2"]);
    assert_eq!(header, ["p", "f"]);
    assert_eq!(rows.len(), 14);
    let argmin = rows
        .iter()
        .min_by(|a, b| a[1].parse::<f64>().unwrap().total_cmp(&b[1].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(argmin[0], "12");
    let v = json(&["curve", "--m", "20", "--n", "2"]);
    assert_eq!(v["argmin_p"], json(&["solve", "--m", "20", "--n", "2"])[0]["p_star"]);
}

#[test]
fn asymptotic_ratio() {
    let v = json(&["asymptotic", "--m", "1000000", "--n", "5", "--order", "4"]);
    let ratio = v[0]["ratio"].as_f64().unwrap();
    assert!((0.999..=1.001).contains(&ratio), "{ratio}");
    let v = json(&["asymptotic", "--m", "1000", "--n", "3", "--order", "1"]);
    let expect = 15f64.cbrt() * 100.0;
    assert!((v[0]["expansion"].as_f64().unwrap() - expect).abs() < 1e-9 * expect);
    let v = json(&[
        "asymptotic",
        "--m",
        "1000",
        "--n",
        "10",
        "--sweep",
        "1000000",
        "--points",
        "4",
    ]);
    let ms: Vec<u64> = v.as_array().unwrap().iter().map(|r| r["m"].as_u64().unwrap()).collect();
    assert_eq!(ms, [1000, 10000, 100000, 1000000]);
    assert_eq!(
        run(&["asymptotic", "--m", "1000", "--n", "3", "--order", "5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate", "--m", "20", "--n", "2", "--trials", "3000", "--seed", "5", "--format", "csv",
    ];
    let a = run(&args);
    let b = run(&args);
    let c = Command::new(env!("CARGO_BIN_EXE_splitmetric"))
        .args(args)
        .env("SPLITMETRIC_THREADS", "3")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().next().unwrap(), "p,mean_sq_dev,std_err,analytic_f");
    assert_eq!(text.lines().count(), 1 + 17);
    assert!(stderr(&a).contains("# argmin_gap="));
}

#[test]
fn simulate_rejects_zero_trials() {
    let out = run(&["simulate", "--m", "20", "--n", "2", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_marks_divergent_rows() {
    let v = json(&["moments", "--m", "30", "--n", "3", "--p", "6", "--trials", "2000"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["status"], "finite");
    assert_eq!(rows[1]["status"], "divergent");
    assert!(rows[1]["closed_form"].is_null());
    assert_eq!(rows[2]["status"], "finite");

    let v = json(&["moments", "--m", "30", "--n", "1", "--p", "10", "--trials", "2000"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let out = run(&["moments", "--m", "30", "--n", "3", "--p", "28"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_missing_file() {
    let out = run(&["bench", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/definitely/not/here.csv"));
}

#[test]
fn bench_on_synthetic_data() {
    let file = synthetic_csv(243, 10);
    let path = file.path().to_str().unwrap();
    let v = json(&["bench", path, "--permutations", "50", "--seed", "1"]);
    let rows = v.as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(names, ["half", "three_quarter", "optimal"]);
    let opt = &rows[2];
    assert_eq!((opt["ratio"].as_f64().unwrap() * 1e4).round() / 1e4, 0.5267);
    assert_eq!(rows[0]["p"], 122);
    assert_eq!(opt["m"], 243);
    assert_eq!(opt["n"], 10);
    assert_eq!(opt["permutations"], 50);
    let keys: Vec<&String> = opt.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 8);

    let bad = run(&["bench", path, "--target-column", "40"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_default_permutations() {
    let out = run(&["bench", "--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("[default: 10000]"));
}

#[test]
fn json_and_csv_agree() {
    let file = synthetic_csv(60, 3);
    let path = file.path().to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--m", "299", "--n", "12"],
        vec!["curve", "--m", "40", "--n", "5"],
        vec!["simulate", "--m", "15", "--n", "2", "--trials", "500"],
        vec!["moments", "--m", "20", "--n", "2", "--p", "8", "--trials", "500"],
        vec!["bench", path, "--permutations", "40"],
    ];
    for args in cases {
        let (header, rows) = csv_rows(&args);
        let v = json(&args);
        let jrows = v.as_array().or_else(|| v["rows"].as_array()).unwrap();
        assert_eq!(rows.len(), jrows.len());
        for (row, jrow) in rows.iter().zip(jrows) {
            for (key, cell) in header.iter().zip(row) {
                let jv = &jrow[key.as_str()];
                match jv {
                    Value::Number(num) => {
                        let a = cell.parse::<f64>().unwrap();
                        assert_eq!(a.to_bits(), num.as_f64().unwrap().to_bits(), "{args:?} {key}");
                    }
                    Value::Null => assert_eq!(cell, ""),
                    Value::String(s) => assert_eq!(cell, s),
                    other => panic!("{other}"),
                }
            }
        }
    }
}

#[test]
fn table_uses_six_significant_digits() {
    let out = run(&["solve", "--m", "299", "--n", "12"]);
    let text = stdout(&out);
    assert!(text.contains("0.538462"), "{text}");
    assert!(text.contains("161.084"), "{text}");
}
