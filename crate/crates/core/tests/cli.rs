use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_pointflow");

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(config: &str, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(BIN).arg("run").arg(config).arg("--out").arg(out).args(extra).env_remove("PF_THREADS").output().unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&config_path("ssc_two_sources.json"), out, &["--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert_eq!(fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["cone.csv", "kkt.csv", "optimize.csv", "ssc.csv"]);
    assert_eq!(fa, fb);
}

#[test]
fn manifest_records_overrides_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&config_path("gradient_check.json"), dir.path(), &["--seed", "42"]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 42);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(dir.path().join("gradient_check.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let rel: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(rel <= 1e-4, "{line}");
    }
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("gradient_check.json")).unwrap().replace("\"alpha\": 1.5", "\"alpha\": 2.0");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let o = run(path.to_str().unwrap(), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha must lie in (0,2)"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["run", &config_path("gradient_check.json"), "--out"])
        .arg(dir.path())
        .env("PF_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PF_THREADS"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = Command::new(BIN).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn regularity_ladder_shows_reduced_regularity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&config_path("regularity_study.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("regularity.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][2] > w[0][2]), "{csv}");
    let drift = (rows[2][3] - rows[1][3]).abs() / rows[1][3];
    assert!(drift <= 0.05, "{drift}");
}
