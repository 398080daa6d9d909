use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn sacfd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sacfd"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn sacfd")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn eval_json(dir: &Path, args: &[&str]) -> Value {
    let out = dir.join("report.json");
    let mut full = vec!["eval"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let o = sacfd(&full, dir);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nnot_a_field = 1\n").unwrap();
    let o = sacfd(&["eval", "--expert", "--episodes", "1", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn training_without_demo_files_aborts_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sacfd(&["train", "--steps", "10", "--demos", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn unreadable_checkpoint_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ck.json"), "{ not json").unwrap();
    let o = sacfd(&["eval", "--checkpoint", "ck.json", "--episodes", "1"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn expert_eval_is_competent_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let a = eval_json(dir.path(), &["--expert", "--episodes", "20"]);
    let b = eval_json(dir.path(), &["--expert", "--episodes", "20"]);
    assert_eq!(a, b);
    let rate = |k: &str| a[k].as_f64().unwrap();
    assert!(rate("success_rate") >= 0.9, "{a}");
    assert_eq!(rate("success_rate") + rate("collision_rate") + rate("timeout_rate"), 1.0);
}

#[test]
fn record_then_train_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = sacfd(&["record", "--episodes", "3", "--out", "demos"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<_> = std::fs::read_dir(p.join("demos")).unwrap().collect();
    assert_eq!(files.len(), 3);

    let o = sacfd(&["train", "--steps", "1500", "--seed", "4", "--out", "runs/fd"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sacfd(&["train", "--steps", "1500", "--seed", "4", "--no-demos", "--out", "runs/sac"], p);
    assert!(o.status.success(), "{}", stderr(&o));

    for run in ["runs/fd/seed_4", "runs/sac/seed_4"] {
        for f in ["metrics.csv", "best.json", "last.json", "run.json"] {
            assert!(p.join(run).join(f).exists(), "{run}/{f}");
        }
    }
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(p.join("runs/fd/seed_4/run.json")).unwrap()).unwrap();
    assert_eq!(meta["demo_files"].as_array().unwrap().len(), 3);
    assert_eq!(meta["seed"], 4);

    // the ablation keeps rho pinned at 1
    let mut rdr = csv::Reader::from_path(p.join("runs/sac/seed_4/metrics.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "rho").unwrap();
    let rhos: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(!rhos.is_empty() && rhos.iter().all(|&r| r == 1.0));

    let o = sacfd(
        &["plot", "--run", "runs/fd/seed_4", "--run", "runs/sac/seed_4", "--demos", "demos", "--out", "fig.svg"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(p.join("fig.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="series""#).count(), 2);
    assert_eq!(svg.matches(r#"class="expert""#).count(), 1);
}

#[test]
fn untrained_policy_rarely_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = sacfd(&["train", "--steps", "1", "--no-demos", "--out", "runs"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = eval_json(dir.path(), &["--checkpoint", "runs/seed_0/last.json", "--episodes", "20"]);
    assert!(r["success_rate"].as_f64().unwrap() <= 0.1, "{r}");
}

#[test]
fn serve_on_port_zero_reports_the_port() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_sacfd"))
        .args(["serve", "--port", "0", "--out", "human"])
        .current_dir(dir.path())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap();
    assert!(port > 0, "{line}");
}
