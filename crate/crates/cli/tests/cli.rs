//! End-to-end tests of the `dqaoi` binary: output schemas against golden
//! files, exit codes and output files.
//!
//! Set `DQAOI_BLESS=1` to rewrite the golden files after an intended change.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqaoi"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("DQAOI_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

fn first_line(s: &str) -> String {
    format!("{}\n", s.lines().next().unwrap_or_default())
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dqaoi-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn eval_outputs() {
    check_golden(
        "eval_zw_d.csv",
        &stdout(&["eval", "--system", "zw-d", "--T", "5", "--format", "csv"]),
    );
    check_golden(
        "eval_zw_d.txt",
        &stdout(&["eval", "--system", "zw-d", "--T", "5"]),
    );
    check_golden(
        "eval_geo_d.json",
        &stdout(&[
            "eval", "--system", "geo-d", "--p", "0.2", "--T", "5", "--detail", "--format", "json",
        ]),
    );
    check_golden(
        "eval_reduction.csv",
        &stdout(&[
            "eval",
            "--system",
            "geo-d",
            "--mu",
            "0.25,0.25",
            "--metric",
            "reduction",
            "--format",
            "csv",
        ]),
    );
}

#[test]
fn eval_boundary_values() {
    let v: Value = serde_json::from_str(&stdout(&[
        "eval", "--system", "geo-d", "--T", "1", "--p", "0.7", "--format", "json",
    ]))
    .unwrap();
    let values: Vec<f64> = v["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_f64().unwrap())
        .collect();
    assert_eq!(values, [2.0, 2.0]);
}

#[test]
fn simulate_d_d_json() {
    check_golden(
        "simulate_d_d.json",
        &stdout(&[
            "simulate",
            "--system",
            "d-d",
            "--mu",
            "0.5",
            "--periods",
            "100",
            "--rounds",
            "2",
        ]),
    );
}

#[test]
fn simulate_schema() {
    let v: Value =
        serde_json::from_str(&stdout(&["simulate", "--periods", "200", "--rounds", "2"])).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let params: Vec<&str> = v["params"]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    check_golden(
        "simulate_keys.txt",
        &format!("{}\nparams: {}\n", keys.join(","), params.join(",")),
    );
    let freq_sum: f64 = v["state_freq"]
        .as_object()
        .unwrap()
        .values()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((freq_sum - 1.0).abs() < 1e-12);

    let csv = stdout(&[
        "simulate",
        "--periods",
        "200",
        "--rounds",
        "2",
        "--format",
        "csv",
    ]);
    check_golden("simulate_header.csv", &first_line(&csv));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn single_round_is_rejected() {
    let out = run(&["simulate", "--periods", "50", "--rounds", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_file() {
    let dir = temp_dir("trace");
    let path = dir.join("trace.csv");
    stdout(&[
        "simulate",
        "--system",
        "d-d",
        "--mu",
        "0.5",
        "--periods",
        "20",
        "--rounds",
        "2",
        "--warmup",
        "2",
        "--trace",
        path.to_str().unwrap(),
    ]);
    check_golden("trace_d_d.csv", &std::fs::read_to_string(&path).unwrap());

    let path = dir.join("geo.csv");
    stdout(&[
        "simulate",
        "--periods",
        "30",
        "--rounds",
        "2",
        "--trace",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut prev: Option<u64> = None;
    for line in text.lines().skip(1) {
        let aoi: u64 = line.split(',').nth(1).unwrap().parse().unwrap();
        if let Some(p) = prev {
            assert!(aoi == p + 1 || aoi <= p, "AoI jumped from {p} to {aoi}");
        }
        prev = Some(aoi);
    }
    // 30 periods of T = 5 slots, plus the initial record.
    assert_eq!(text.lines().count(), 1 + 151);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn sweep_headers() {
    let mu = stdout(&["sweep", "mu"]);
    check_golden("sweep_mu_header.csv", &first_line(&mu));
    assert_eq!(mu.lines().count(), 1 + 95);

    let sim = stdout(&[
        "sweep",
        "mu",
        "--systems",
        "geo-d,zw-geo",
        "--from",
        "0.3",
        "--to",
        "0.5",
        "--step",
        "0.2",
        "--simulate",
        "--periods",
        "50",
        "--rounds",
        "2",
    ]);
    check_golden("sweep_mu_simulate_header.csv", &first_line(&sim));
    let rows: Vec<Vec<&str>> = sim
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    // 1/0.3 is not an integer period for geo-d; zw-geo needs none.
    assert!(rows[0][8..].iter().all(|c| c.is_empty()));
    assert!(rows[1][8..].iter().all(|c| !c.is_empty()));
    assert!(rows[2][8..].iter().all(|c| !c.is_empty()));

    check_golden(
        "sweep_ratio.csv",
        &stdout(&[
            "sweep", "ratio", "--mu-a", "0.5", "--from", "0.25", "--to", "1", "--step", "0.25",
        ]),
    );
}

#[test]
fn converge_csv() {
    let out = stdout(&["converge", "--system", "geo-d", "--deltas", "10,100,1000"]);
    check_golden("converge_header.csv", &first_line(&out));
    assert_eq!(out.lines().count(), 4);

    let json: Value = serde_json::from_str(&stdout(&[
        "converge",
        "--system",
        "geo-geo",
        "--mu",
        "1,1",
        "--deltas",
        "100,10000",
        "--format",
        "json",
    ]))
    .unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let last = rows[1]["scaled_discrete"].as_f64().unwrap();
    assert!((last - 1.25).abs() < 1e-3);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = temp_dir("out");
    let path = dir.join("eval.csv");
    let out = run(&[
        "eval",
        "--system",
        "zw-d",
        "--T",
        "5",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        stdout(&["eval", "--system", "zw-d", "--T", "5", "--format", "csv"])
    );
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["verify", "theorem1", "--max-T", "2"]), Some(0));
    assert_eq!(
        code(&["verify", "theorem1", "--max-T", "2", "--tol", "0"]),
        Some(1)
    );
    assert_eq!(code(&["converge", "--deltas", "1"]), Some(2));
    assert_eq!(
        code(&["eval", "--system", "geo-d", "--lambda", "1"]),
        Some(2)
    );
    assert_eq!(code(&["no-such-command"]), Some(2));
    assert_eq!(code(&["simulate", "--threads", "0"]), Some(2));
    assert_eq!(code(&["verify", "lemma", "--cap", "10"]), Some(3));
    // Findings are not failures.
    assert_eq!(code(&["verify", "table", "--max-T", "3"]), Some(0));
}

#[test]
fn verify_lemma_passes() {
    let out = stdout(&["verify", "lemma", "--max-T", "8"]);
    assert!(out.contains("PASS"), "{out}");
}

#[test]
fn committed_table_report_is_current() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/table_adjudication.md");
    let committed = std::fs::read_to_string(committed).unwrap();
    assert_eq!(stdout(&["verify", "table", "--max-T", "6"]), committed);
}
