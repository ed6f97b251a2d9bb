use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FRAC: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn ommp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ommp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixture(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn two_by_three(dir: &Path) -> PathBuf {
    fixture(dir, "a23.csv", &format!("1,0,{FRAC}\n0,1,{FRAC}\n"))
}

fn identity(dir: &Path, n: usize) -> PathBuf {
    let text: String = (0..n)
        .map(|i| {
            let row: Vec<&str> = (0..n).map(|j| if i == j { "1" } else { "0" }).collect();
            row.join(",") + "\n"
        })
        .collect();
    fixture(dir, "eye.csv", &text)
}

fn parse_signal(text: &str) -> Vec<(usize, f64)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,value"));
    lines
        .map(|l| {
            let (i, v) = l.split_once(',').unwrap();
            (i.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn recover_identity_two_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let a = identity(dir.path(), 5);
    let y = fixture(dir.path(), "y.csv", "0\n2.5\n0\n-1\n0\n");
    let out = ommp(&[
        "recover",
        path_str(&a),
        path_str(&y),
        "--M",
        "2",
        "--H",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(parse_signal(&stdout(&out)), vec![(1, 2.5), (3, -1.0)]);
}

#[test]
fn recover_first_column_of_two_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let a = two_by_three(dir.path());
    let y = fixture(dir.path(), "y.csv", "1,0\n");
    let trace = dir.path().join("trace.json");
    let out = ommp(&[
        "recover",
        path_str(&a),
        path_str(&y),
        "--trace-out",
        path_str(&trace),
    ]);
    assert_eq!(code(&out), 0);
    let sig = parse_signal(&stdout(&out));
    assert_eq!(sig.len(), 1);
    assert_eq!(sig[0].0, 0);
    assert!((sig[0].1 - 1.0).abs() < 1e-12);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(trace).unwrap()).unwrap();
    assert_eq!(json["stop_reason"], "residual_below_tol");
    assert_eq!(json["trace"]["records"].as_array().unwrap().len(), 1);
}

#[test]
fn recover_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = two_by_three(dir.path());
    let bad_dims = fixture(dir.path(), "y3.csv", "1\n0\n0\n");
    assert_eq!(
        code(&ommp(&["recover", path_str(&a), path_str(&bad_dims)])),
        2
    );

    let garbage = fixture(dir.path(), "g.csv", "1,zero\n");
    let y = fixture(dir.path(), "y.csv", "1\n2\n");
    assert_eq!(
        code(&ommp(&["recover", path_str(&garbage), path_str(&y)])),
        1
    );
    assert_eq!(code(&ommp(&["recover", path_str(&a), "/no/such/file"])), 1);

    // Budget of one single-atom iteration cannot fit a 2-sparse target.
    let eye = identity(dir.path(), 3);
    let y2 = fixture(dir.path(), "y2.csv", "1\n1\n0\n");
    assert_eq!(
        code(&ommp(&[
            "recover",
            path_str(&eye),
            path_str(&y2),
            "--H",
            "1"
        ])),
        3
    );

    // Duplicate columns make the second selection rank deficient.
    let dup = fixture(dir.path(), "dup.csv", "1,1,0\n0,0,1\n");
    let y3 = fixture(dir.path(), "y3b.csv", "1\n1\n");
    let out = ommp(&["recover", path_str(&dup), path_str(&y3), "--M", "2"]);
    assert_eq!(code(&out), 4);

    assert_eq!(
        code(&ommp(&["recover", path_str(&a), path_str(&y), "--M", "0"])),
        1
    );
    assert_eq!(code(&ommp(&["recover"])), 1);
}

#[test]
fn analyze_rip_and_spark() {
    let dir = tempfile::tempdir().unwrap();
    let a = two_by_three(dir.path());
    let out = ommp(&["analyze", path_str(&a), "--rip-order", "2", "--spark"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("quantity,order,value,note"));
    let delta: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&delta[..2], &["delta", "2"]);
    assert!((delta[2].parse::<f64>().unwrap() - FRAC).abs() < 1e-12);
    assert_eq!(lines.next(), Some("spark,,3,"));

    let eye = identity(dir.path(), 4);
    let out = ommp(&["analyze", path_str(&eye), "--spark", "--json"]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["spark"]["value"], 5);
    assert_eq!(json["spark"]["full"], true);
    assert_eq!(json["spark_note"], "full spark");
}

#[test]
fn analyze_too_large() {
    let dir = tempfile::tempdir().unwrap();
    let row: Vec<String> = (0..60)
        .map(|j| ((j * 7 % 11) as f64 - 5.0).to_string())
        .collect();
    let text: String = (0..30).map(|_| row.join(",") + "\n").collect();
    let big = fixture(dir.path(), "big.csv", &text);
    let out = ommp(&["analyze", path_str(&big), "--rip-order", "10"]);
    assert_eq!(code(&out), 5);
    assert!(out.stdout.is_empty());
    assert_eq!(code(&ommp(&["analyze", path_str(&big)])), 1);
}

#[test]
fn bench_config_round_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(
        dir.path(),
        "cfg.json",
        r#"{"m": 20, "N": 50, "s_values": [1, 2, 3], "trials_per_s": 4, "master_seed": 1,
            "policies": [{"fixed": 1}, "floor_sqrt_s", "floor_half_s"]}"#,
    );
    let out1 = dir.path().join("r1.csv");
    let out2 = dir.path().join("r2.csv");
    let plot = dir.path().join("fig");
    for out in [&out1, &out2] {
        let o = ommp(&[
            "bench",
            path_str(&cfg),
            "--out",
            path_str(out),
            "--seed",
            "77",
            "--plot",
            path_str(&plot),
            "--quiet",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(&out1).unwrap();
    assert_eq!(csv, fs::read_to_string(&out2).unwrap());
    assert_eq!(csv.lines().count(), 1 + 9);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r1.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["master_seed"], 77);
    for suffix in ["fig-success.svg", "fig-iterations.svg"] {
        assert!(fs::read_to_string(dir.path().join(suffix))
            .unwrap()
            .contains("<polyline"));
    }

    let json_out = dir.path().join("r.json");
    let o = ommp(&[
        "bench",
        path_str(&cfg),
        "--out",
        path_str(&json_out),
        "--quiet",
    ]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json_out).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["config"]["master_seed"], 1);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn bench_desk_preset_shape() {
    let out = ommp(&["bench", "--preset", "desk", "--trials", "2", "--quiet"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 1 + 24 * 3);
}

#[test]
fn bench_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = fixture(dir.path(), "bad.json", r#"{"m": 20}"#);
    assert_eq!(code(&ommp(&["bench", path_str(&bad)])), 1);
    let invalid = fixture(
        dir.path(),
        "inv.json",
        r#"{"m": 5, "N": 10, "s_values": [9], "trials_per_s": 1, "master_seed": 1, "policies": ["floor_half_s"]}"#,
    );
    assert_eq!(code(&ommp(&["bench", path_str(&invalid)])), 1);
    assert_eq!(code(&ommp(&["bench"])), 1);
}

#[test]
fn verify_suites() {
    let out = ommp(&["verify", "--suite", "norms", "--cases", "500"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("check,passed,failed\n"));
    assert!(text.contains("holder,500,0"));

    let out = ommp(&[
        "verify", "--suite", "lemmas", "--cases", "10", "--atoms", "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = ommp(&[
        "verify",
        "--suite",
        "theorem5",
        "--cases",
        "10",
        "--sparsities",
        "2,3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("exact_recovery,10,0"));

    let out = ommp(&["verify", "--suite", "theorem1", "--cases", "3", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["searches"][0]["found"], 3);
}

#[test]
fn verify_reports_unmet_hypotheses() {
    let out = ommp(&[
        "verify",
        "--suite",
        "theorem5",
        "--cases",
        "2",
        "--sparsities",
        "4",
    ]);
    assert_eq!(code(&out), 7);
    assert!(String::from_utf8_lossy(&out.stderr).contains("s=4"));
}
