//! End-to-end checks of the command-line interface.

use std::io::Write;
use std::process::Command;

fn plant_json() -> &'static str {
    r#"{"n": 2, "A": [[0.0, 1.0], [4.0, 3.0]], "b1": [0.0, 0.0], "b2": [0.0, 1.0],
        "c1": [-2.0, 1.0], "c2": [-2.0, 1.0], "d11": 1.0, "d12": 0.0, "d21": 1.0}"#
}

fn write_plant(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
    let path = dir.path().join("plant.json");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    path
}

#[test]
fn gamma_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_plant(&dir, plant_json());
    let out = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["gamma"])
        .arg(&path)
        .arg("--json")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["gamma_star"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(v["case"], "Case4");
    // Byte-identical on a second run.
    let out2 = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["gamma"])
        .arg(&path)
        .arg("--json")
        .output()
        .unwrap();
    assert_eq!(out.stdout, out2.stdout);
}

#[test]
fn zeros_reports_channels() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_plant(&dir, plant_json());
    let out = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["zeros"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["zu"]["relative_degree"], 1);
    assert_eq!(v["zu"]["zeros"][0]["class"], "Unstable");
    assert_eq!(v["yw"]["relative_degree"], 0);
}

#[test]
fn verify_passes_and_dumps_sdpa() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_plant(&dir, plant_json());
    let dump = dir.path().join("problem.dat-s");
    let out = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["verify"])
        .arg(&path)
        .args(["--tol", "1e-4", "--dump-sdp"])
        .arg(&dump)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.lines().count() > 4);
}

#[test]
fn computation_error_exits_one() {
    // Unstabilizable plant: unstable mode unreachable from u.
    let bad = r#"{"n": 1, "A": [[1.0]], "b1": [1.0], "b2": [0.0],
                  "c1": [1.0], "c2": [1.0], "d11": 0.0, "d12": 1.0, "d21": 1.0}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = write_plant(&dir, bad);
    let out = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["gamma"])
        .arg(&path)
        .arg("--json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("stabilizable"));
    // No partial output on stdout.
    assert!(out.stdout.is_empty());
}

#[test]
fn parse_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_plant(&dir, r#"{"n": 1}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_hinf"))
        .args(["gamma"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_emits_deterministic_csv() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_hinf"))
            .args(["bench", "--seed", "5", "--count", "4", "--n-min", "2", "--n-max", "3"])
            .output()
            .unwrap()
    };
    let a = run();
    assert!(a.status.success());
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,n,case,gamma_closed,gamma_oracle,gap,closed_ms,oracle_ms,conclusive,skipped"
    );
    assert_eq!(text.lines().count(), 5);
    // Gamma columns are deterministic across runs (timing columns vary).
    let b = run();
    let text_b = String::from_utf8(b.stdout).unwrap();
    let fixed = |t: &str| -> Vec<String> {
        t.lines()
            .skip(1)
            .map(|l| {
                let parts: Vec<&str> = l.split(',').collect();
                parts[0..6].join(",")
            })
            .collect()
    };
    assert_eq!(fixed(&text), fixed(&text_b));
}
