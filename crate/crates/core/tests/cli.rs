use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn luca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_luca"))
        .current_dir(dir)
        .env_remove("LUCA_ENCODER_URL")
        .args(args)
        .output()
        .expect("spawn luca")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = luca(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &[&str] = &[
    "--set", "count=10", "--set", "n_jobs=3", "--set", "n_machines=2", "--set", "ops_min=2", "--set", "ops_max=3",
];
const QUICK: &[&str] = &[
    "--set", "runs=1", "--set", "iterations=2", "--set", "batch_size=3", "--set", "check_period=2",
];

fn args<'a>(head: &[&'a str], tails: &[&[&'a str]]) -> Vec<&'a str> {
    let mut v = head.to_vec();
    for t in tails {
        v.extend_from_slice(t);
    }
    v
}

#[test]
fn pipeline_from_generation_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &args(&["generate", "--out", "data", "--seed", "3"], &[SMALL]));
    for m in ["train.txt", "val.txt", "test.txt", "config.txt", "meta.txt"] {
        assert!(d.join("data").join(m).is_file(), "{m}");
    }
    ok(d, &args(&["train", "--out", "tr"], &[QUICK]));
    assert!(d.join("tr/run_00/final.txt").is_file());
    assert!(d.join("tr/run_00/run_log.csv").is_file());

    for out in ["ev1", "ev2"] {
        ok(d, &["eval", "--out", out, "--set", "checkpoints=luca=tr", "--set", "methods=fifo,mwkr,oracle"]);
    }
    for f in ["table.csv", "per_instance.csv", "improvements.csv", "config.txt"] {
        let a = fs::read_to_string(d.join("ev1").join(f)).unwrap();
        let b = fs::read_to_string(d.join("ev2").join(f)).unwrap();
        if f == "config.txt" {
            // only the out= line differs
            assert_eq!(a.replace("out=ev1", ""), b.replace("out=ev2", ""));
        } else {
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }
    let table = luca::bench::parse_table_csv(&fs::read_to_string(d.join("ev1/table.csv")).unwrap()).unwrap();
    let names: Vec<_> = table.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["fifo", "mwkr", "oracle", "luca"]);
    assert!(table.iter().all(|r| r.approx_oracle.is_some()));

    ok(d, &["report", "--out", "rep", "--set", "input=ev1"]);
    let md = fs::read_to_string(d.join("rep/report.md")).unwrap();
    assert!(md.contains("| luca |"));
    assert!(d.join("rep/assets/gantt_best.svg").is_file());

    ok(d, &["oracle", "--out", "or", "--set", "lambda=0.5"]);
    let csv = fs::read_to_string(d.join("or/oracle.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("exp.cfg"), "# small\ncount=4\nn_jobs=2\nn_machines=2\nops_min=1\nops_max=2\nsplit=0.5,0.25,0.25\n").unwrap();
    ok(d, &["generate", "--config", "exp.cfg", "--set", "count=8", "--out", "g"]);
    let cfg = fs::read_to_string(d.join("g/config.txt")).unwrap();
    assert!(cfg.contains("count=8\n") && cfg.contains("n_jobs=2\n"));
    assert_eq!(fs::read_dir(d.join("g/instances")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "fjs")
    }).count(), 8);
}

#[test]
fn failures_exit_nonzero_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for bad in [
        vec!["generate", "--out", "x", "--set", "lambda=1.5"],
        vec!["generate", "--out", "x", "--set", "no_such_key=1"],
        vec!["generate", "--out", "x", "--set", "e_min=3", "--set", "e_max=2"],
        vec!["eval", "--out", "x", "--set", "dataset=missing"],
        vec!["report", "--out", "x"],
    ] {
        let out = luca(d, &bad);
        assert!(!out.status.success(), "{bad:?} should fail");
        assert!(!out.stderr.is_empty());
    }
    let leftovers: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(leftovers.is_empty(), "partial output left behind: {leftovers:?}");
}

#[test]
fn unreachable_encoder_without_fallback_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &args(&["generate", "--out", "data"], &[SMALL]));
    let out = Command::new(env!("CARGO_BIN_EXE_luca"))
        .current_dir(d)
        .env("LUCA_ENCODER_URL", "http://127.0.0.1:9/embed")
        .args(args(&["train", "--out", "tr", "--set", "encoder_fallback=false", "--set", "encoder_timeout_ms=200"], &[QUICK]))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!d.join("tr").exists());
}
