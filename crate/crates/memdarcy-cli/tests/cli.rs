use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "geometry": {"n_cell": 16},
  "time": {"horizon": 1.0, "steps": 8},
  "sweep": {"n_macro": 16, "epsilons": [0.25, 0.125, 0.0625]}
}"#;

fn memdarcy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memdarcy"))
        .current_dir(dir)
        .env_remove("MEMDARCY_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn incommensurate_eps_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"sweep": {"epsilons": [0.25, 0.3]}}"#).unwrap();
    let o = memdarcy(dir.path(), &["--config", "bad.json", "rates"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.epsilons[1]"), "{}", stderr(&o));
    assert!(!dir.path().join("memdarcy-out").exists());
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.json"), r#"{"geometry": {"ncell": 16}}"#).unwrap();
    let o = memdarcy(dir.path(), &["--config", "typo.json", "cell"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ncell"));
    let o = memdarcy(dir.path(), &["--config", "absent.json", "cell"]);
    assert_eq!(o.status.code(), Some(1));
    let o = memdarcy(dir.path(), &["--jobs", "0", "cell"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cell_writes_masks_where_asked() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_memdarcy"))
        .current_dir(dir.path())
        .env("MEMDARCY_OUT", "from-env")
        .args(["--config", "small.json", "cell"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = fs::read_to_string(dir.path().join("from-env/domain_eps8.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n128 128\n"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("from-env/cell.json")).unwrap()).unwrap();
    let counts: Vec<u64> = summary["domains"].as_array().unwrap().iter().map(|d| d["obstacles"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![0, 16, 144]);

    let o = Command::new(env!("CARGO_BIN_EXE_memdarcy"))
        .current_dir(dir.path())
        .env("MEMDARCY_OUT", "from-env")
        .args(["--config", "small.json", "--out", "from-flag", "cell"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-flag/cell.pgm").exists());
}

#[test]
fn rates_are_deterministic_and_reuse_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("small.json"), SMALL).unwrap();
    let o = memdarcy(p, &["--config", "small.json", "--out", "a", "--jobs", "2", "rates"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(p.join("a/report.json")).unwrap();
    let stamps = |d: &Path| -> Vec<(String, std::time::SystemTime)> {
        let mut v: Vec<_> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), e.metadata().unwrap().modified().unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let cached = stamps(&p.join("a/cache"));
    assert_eq!(cached.len(), 4);

    let o = memdarcy(p, &["--config", "small.json", "--out", "a", "rates"]);
    assert!(o.status.success());
    assert_eq!(stderr(&o).matches("cached").count(), 3);
    assert_eq!(fs::read(p.join("a/report.json")).unwrap(), first);
    assert_eq!(stamps(&p.join("a/cache")), cached);

    let o = memdarcy(p, &["--config", "small.json", "--out", "b", "fine"]);
    assert!(o.status.success());
    assert_eq!(fs::read(p.join("b/report.json")).unwrap(), first);

    let csv = fs::read_to_string(p.join("a/rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("eps,velocity,gradient"));
    assert!(lines[4].starts_with("slope,"));
    let plot = fs::read_to_string(p.join("a/plot/rate_gradient.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn kernel_and_homogenize_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("k.json"), r#"{"geometry": {"n_cell": 16}, "time": {"horizon": 1.0, "steps": 32}, "sweep": {"n_macro": 16}}"#).unwrap();
    let o = memdarcy(p, &["--config", "k.json", "--out", "o", "kernel"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("o/kernel.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,A11,A12,A21,A22"));
    assert_eq!(csv.lines().count(), 34);
    let dump = fs::read_to_string(p.join("o/fields/W1_x.txt")).unwrap();
    assert!(dump.starts_with("# {"));
    assert_eq!(dump.lines().count(), 17);
    let o = memdarcy(p, &["--config", "k.json", "--out", "o", "homogenize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("o/homogenized.json")).unwrap()).unwrap();
    assert!(h["max_contraction_ratio"].as_f64().unwrap() <= 0.6);
}

#[test]
fn strict_verify_exits_3_when_a_check_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // coarse enough that the boundary-layer and rate checks cannot pass
    fs::write(p.join("small.json"), SMALL).unwrap();
    let o = memdarcy(p, &["--config", "small.json", "--out", "v", "verify", "--strict"]);
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 10, "{out}");
    assert!(out.contains("[FAIL]"));
    assert_eq!(o.status.code(), Some(3));
    let o = memdarcy(p, &["--config", "small.json", "--out", "v", "verify"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 10);
}
