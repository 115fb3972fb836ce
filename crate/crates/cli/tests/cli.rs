use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eccbio(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eccbio"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const FAR_CONFIG: &str = r#"{
  "id": "far20",
  "metric": "far",
  "scheme": "ss",
  "keyed": true,
  "codes": [{"kind": "random", "m": 10, "n": 20, "seed": 1}],
  "enroll_noise": [0.01],
  "probe_noise": [0.01],
  "tau": [0.05],
  "trials": 5000,
  "seed": 3
}"#;

#[test]
fn simulate_is_reproducible_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "far.json", FAR_CONFIG);
    let a = eccbio(
        &["simulate", "far", "--config", &cfg, "--out", "a"],
        tmp.path(),
    );
    let b = eccbio(
        &["simulate", "far", "--config", &cfg, "--out", "b"],
        tmp.path(),
    );
    assert!(a.status.success() && b.status.success());
    let ca = fs::read(tmp.path().join("a/far20.csv")).unwrap();
    let cb = fs::read(tmp.path().join("b/far20.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("experiment_id,metric,p_hat,ci_low,ci_high,bound,trials,seed\n"));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/far20.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 20);
    assert_eq!(summary["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn seed_and_trials_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "far.json", FAR_CONFIG);
    let o = eccbio(
        &[
            "simulate", "frr", "--config", &cfg, "--seed", "9", "--trials", "700",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(line.starts_with("far20,frr,"), "{line}");
    assert!(line.ends_with(",700,9"), "{line}");
}

#[test]
fn bounds_only_rows_and_json_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "far.json", FAR_CONFIG);
    let o = eccbio(&["bounds", "--config", &cfg], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("far20,frr,,,,"));
    assert!(rows[1].starts_with("far20,far,,,,0.0517"));

    let o = eccbio(
        &[
            "bounds", "--n", "20", "--m", "10", "--p", "0.02", "--tau", "0.05", "--format", "json",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["far_bound"]["value"].as_f64().unwrap() - 0.05176).abs() < 1e-4);
}

#[test]
fn assumption_violation_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        &FAR_CONFIG.replace("[0.05]", "[0.3]"),
    );
    let o = eccbio(&["bounds", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn parse_errors_report_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "broken.json",
        "{\n  \"id\": \"x\",\n  \"metric\": 7\n}",
    );
    let o = eccbio(&["simulate", "far", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn sar_stored_attack_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let body = FAR_CONFIG.replace(
        "\"trials\": 5000",
        "\"attack\": \"stored\", \"compromise\": {\"systems\": [{\"stored\": true}]}, \"trials\": 2000",
    );
    let cfg = write_config(tmp.path(), "sar.json", &body);
    let o = eccbio(&["simulate", "sar", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(
        row.starts_with("far20,sar,1.0,") && row.ends_with(",1.0,1.0,2000,3"),
        "{row}"
    );

    let cfg = write_config(
        tmp.path(),
        "nosar.json",
        &FAR_CONFIG.replace("\"trials\"", "\"attack\": \"stored\", \"trials\""),
    );
    let o = eccbio(&["simulate", "sar", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inconsistent scenario"));
}

#[test]
fn matrix_file_replaces_codes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("h.txt"), "3 7\n0001111\n0110011\n1010101\n").unwrap();
    let cfg = write_config(tmp.path(), "far.json", FAR_CONFIG);
    let o = eccbio(
        &[
            "simulate",
            "far",
            "--config",
            &cfg,
            "--matrix-file",
            "h.txt",
            "--format",
            "json",
        ],
        tmp.path(),
    );
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["n"].as_u64(), v["m"].as_u64()), (Some(7), Some(3)));
}

#[test]
fn equiv_reports_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eq.json",
        r#"{"id":"eq","metric":"frr","scheme":"fc","keyed":true,"codes":[{"kind":"hamming","r":4}],
            "enroll_noise":[0.03],"probe_noise":[0.03],"tau":[0.2],"trials":2000,"seed":1}"#,
    );
    let o = eccbio(&["equiv", "--config", &cfg, "--format", "json"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["coupled_agreements"], v["coupled_trials"]);
    assert_eq!(v["storage"][0]["storage_bits"], 15);
    assert_eq!(v["storage"][2]["storage_bits"], 4);
}

#[test]
fn leakage_from_matrix_files() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("h1.txt"), "2 6\n110000\n001100\n").unwrap();
    fs::write(tmp.path().join("h2.txt"), "2 6\n110000\n000011\n").unwrap();
    let o = eccbio(
        &[
            "leakage",
            "--matrix-file",
            "h1.txt",
            "--matrix-file",
            "h2.txt",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["method"], "exact-enumeration");
    assert!((v[0]["bits_leaked"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    let cfg = write_config(
        tmp.path(),
        "one.json",
        r#"{"id":"l","metric":"far","scheme":"ss","keyed":true,"codes":[{"kind":"hamming","r":3}],"tau":[0.2]}"#,
    );
    let o = eccbio(&["leakage", "--config", &cfg], tmp.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let bits: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["bits_leaked"].as_f64().unwrap())
        .collect();
    assert!(
        bits[0].abs() < 1e-9 && bits[1].abs() < 1e-9 && (bits[2] - 3.0).abs() < 1e-9,
        "{bits:?}"
    );
}

#[test]
fn linkage_and_design() {
    let tmp = tempfile::tempdir().unwrap();
    let o = eccbio(
        &[
            "linkage", "--preset", "example1", "--m", "4", "--n", "12", "--trials", "500",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["residual"], 0);
    assert_eq!(v["rank_linked"]["hits"], 500);
    assert!(
        eccbio(&["linkage", "--preset", "example9"], tmp.path())
            .status
            .code()
            == Some(1)
    );

    let o = eccbio(
        &[
            "design",
            "--m",
            "3",
            "--n",
            "9",
            "--restarts",
            "2",
            "--out",
            "d",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("d/design.txt")).unwrap();
    assert_eq!(text.matches("---").count(), 2);
    assert!(text.starts_with("3 9\n"));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("d/design.json")).unwrap())
            .unwrap();
    assert_eq!(v["report"]["t_min"], 3);
}
