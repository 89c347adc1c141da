use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn qsep(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_qsep"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn sd_at_lambda_four_is_three_quarters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", "lambda = 4\nseed = 3\n");
    let (code, stdout, _) = qsep(&["qefid-sd", "--config", cfg.to_str().unwrap(), "--format", "both"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let r = report(dir.path(), "qefid-sd");
    assert_eq!(r["table"]["rows"][0][2], Value::from(0.75));
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["verdicts"][0]["formula"].as_str().unwrap().contains("2^(-4/2)"));
    let csv = fs::read_to_string(dir.path().join("qefid-sd.csv")).unwrap();
    assert!(csv.starts_with("lambda,subset_size,sd,closed_form,abs_diff\n4,4,0.75,0.75,"));
}

#[test]
fn emulation_with_one_query_and_fifteen_copies_stays_below_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "e.cfg", "q = 1\nell = 15\nlambda = 2\ncircuits = 3\n");
    let (code, stdout, _) = qsep(&["emulate-bound", "--config", cfg.to_str().unwrap(), "--seed", "8"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let r = report(dir.path(), "emulate-bound");
    for row in r["table"]["rows"].as_array().unwrap() {
        assert!(row[7].as_f64().unwrap() <= 0.5);
        assert_eq!(row[8], Value::from(0.5));
        assert!(row[10].as_str().unwrap().contains("2*1/sqrt(15+1)"));
    }
}

#[test]
fn missing_seed_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.cfg", "lambda = 4\n");
    let (code, _, stderr) = qsep(&["qefid-sd", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("seed"));
    assert!(!dir.path().join("qefid-sd.json").exists());
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("qefid-sd", "seed = 1\nlamda = 4\n"),
        ("qefid-sd", "seed = 1\nlambda = 3\n"),
        ("copygen", "seed = 1\nseed = 2\n"),
        ("money-forge", "seed = 1\neta = 0.1\n"),
        ("owsg-attack", "seed = 1\ncandidate = nope\n"),
        ("copygen", "experiment = qefid-sd\nseed = 1\n"),
    ];
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let cfg = write_cfg(dir.path(), &format!("{i}.cfg"), text);
        let (code, _, stderr) = qsep(&[cmd, "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(code, 2, "{cmd} {text:?}: {stderr}");
    }
    assert_eq!(qsep(&["no-such-command", "--seed", "1"], dir.path()).0, 2);
    assert_eq!(qsep(&["qefid-sd", "--seed", "x"], dir.path()).0, 2);
}

#[test]
fn capacity_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "c.cfg", "seed = 1\nlambda = 8\nt = 1\ntd = exact\n");
    let (code, _, stderr) = qsep(&["statistical-lemma", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("capacity"));
}

#[test]
fn failed_verdict_exits_one_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "f.cfg", "seed = 1\ntrials = 4\nestimator = measured\n");
    let (code, stdout, _) = qsep(&["money-forge", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL forgery_rate"));
    assert_eq!(report(dir.path(), "money-forge")["pass"], Value::Bool(false));
}

#[test]
fn same_seed_gives_the_same_report_up_to_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let strip = |dir: &Path| {
        let mut v = report(dir, "copygen");
        v["wall_clock_seconds"] = Value::Null;
        v
    };
    assert_eq!(qsep(&["copygen", "--seed", "5", "--threads", "1"], a.path()).0, 0);
    assert_eq!(qsep(&["copygen", "--seed", "5", "--threads", "3"], b.path()).0, 0);
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(qsep(&["copygen", "--seed", "6"], b.path()).0, 0);
    assert_ne!(strip(a.path()), strip(b.path()));
}

#[test]
fn shipped_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, cfg) in [
        ("emulate-bound", "configs/emulate-file.cfg"),
        ("owsg-attack", "configs/owsg-template.cfg"),
        ("qefid-yao", "configs/qefid-yao.cfg"),
    ] {
        let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(cfg))
            .unwrap()
            .replace("crates/cli/", "");
        let local = write_cfg(dir.path(), "local.cfg", &text);
        let (code, stdout, stderr) = qsep(&[cmd, "--config", local.to_str().unwrap()], dir.path());
        assert_eq!(code, 0, "{cmd}: {stdout}{stderr}");
        assert_eq!(report(dir.path(), cmd)["config"]["experiment"], Value::from(cmd));
    }
}
