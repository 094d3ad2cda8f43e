use std::path::Path;
use std::process::{Command, Output};

fn glab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn build_then_estimate_and_norm() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = glab(d, &["build", "--construction", "thmA", "--host", "l2", "--levels", "4", "--out", "space.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("space.json").exists());
    assert!(d.join("space.witnesses.csv").exists());

    let o = glab(d, &["estimate", "--space", "space.json", "--param", "ktilde", "--m-list", "1,2,4", "--seed", "3", "--trials", "20", "--out", "r.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("quantity,scale,value,bound_kind,witness,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("ktilde,") && r.ends_with(",3")));

    let dim = 2usize.pow(6) - 4;
    let mut coeffs = vec!["0"; dim];
    coeffs[0] = "1";
    std::fs::write(d.join("c.csv"), coeffs.join("\n")).unwrap();
    let o = glab(d, &["norm", "--space", "space.json", "--coeffs", "c.csv"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v > 0.0 && v.is_finite());

    let o = glab(d, &["tga", "--space", "space.json", "--coeffs", "c.csv", "--m", "1"]);
    assert!(o.status.success());
    let g: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(g.len(), dim);
    assert!((g[0] - 1.0).abs() < 1e-12 && g[1..].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn every_construction_builds() {
    let dir = tempfile::tempdir().unwrap();
    for (c, levels) in [("mainA", "4"), ("demNonUCC", "8"), ("dkk", "5")] {
        let out = format!("{c}.json");
        let o = glab(dir.path(), &["build", "--construction", c, "--levels", levels, "--out", &out]);
        assert!(o.status.success(), "{c}: {}", String::from_utf8_lossy(&o.stderr));
        let o = glab(dir.path(), &["estimate", "--space", &out, "--param", "qg"]);
        assert!(o.status.success(), "{c}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).lines().nth(1).unwrap().starts_with("qg,"));
    }
}

#[test]
fn reproduce_is_byte_stable_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"suite":"rotation","levels":4,"seed":5,"trials":4}"#).unwrap();
    let args = ["reproduce", "--config", "cfg.json", "--suite", "thmA", "--seed", "9"];
    let a = glab(d, &[&args[..], &["--out", "a.csv"]].concat());
    let b = glab(d, &[&args[..], &["--out", "b.csv"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let ca = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(ca, std::fs::read(d.join("b.csv")).unwrap());
    assert!(String::from_utf8_lossy(&ca).lines().skip(1).all(|l| l.ends_with(",9")));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a.verdicts.json")).unwrap()).unwrap();
    assert_eq!(v["suite"], "thmA");
    assert_eq!(v["provenance"]["config"]["levels"], 4);
    assert_eq!(v["passed"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(glab(d, &["reproduce", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(glab(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(glab(d, &["reproduce", "--suite", "thmA", "--levels", "1"]).status.code(), Some(2));
    assert_eq!(
        glab(d, &["build", "--construction", "thmA", "--levels", "12", "--cap", "100", "--out", "x.json"]).status.code(),
        Some(2)
    );
    assert_eq!(glab(d, &["reproduce", "--suite", "rotation", "--out", "r.csv"]).status.code(), Some(0));
    assert_eq!(glab(d, &["check", "--criteria", "1"]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_glab"))
        .current_dir(d)
        .env("GLAB_THREADS", "zero")
        .args(["check", "--criteria", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_verdicts_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"suite":"dkkw","levels":4,"spread_limit":1.0}"#).unwrap();
    let o = glab(dir.path(), &["reproduce", "--config", "cfg.json", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("[FAIL]"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (t, out) in [("1", "one.csv"), ("4", "four.csv")] {
        let o = Command::new(env!("CARGO_BIN_EXE_glab"))
            .current_dir(d)
            .env("GLAB_THREADS", t)
            .args(["reproduce", "--suite", "calibration", "--trials", "20", "--out", out])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    }
    assert_eq!(std::fs::read(d.join("one.csv")).unwrap(), std::fs::read(d.join("four.csv")).unwrap());
}
