use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tabletop(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabletop"))
        .args(args)
        .env("TABLETOP_OUT", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .map(|r| r.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    dirs.sort();
    dirs
}

#[test]
fn usage_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!tabletop(tmp.path(), &["frobnicate"]).status.success());
    assert!(!tabletop(tmp.path(), &["bench", "--game", "chess"]).status.success());
    assert!(!tabletop(tmp.path(), &["bench", "--game", "diamant", "--bogus"]).status.success());
    let o = tabletop(tmp.path(), &["play", "--game", "tictactoe", "--players", "3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("players"));
}

#[test]
fn bench_reports_steps_per_second() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tabletop(tmp.path(), &["bench", "--game", "diamant", "--seconds", "0.2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("steps/sec"));
    let o = tabletop(tmp.path(), &["bench", "--game", "loveletter", "--max-steps", "500", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["steps"], 500);
}

#[test]
fn actions_dump_the_atlas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tabletop(tmp.path(), &["actions", "--game", "loveletter", "--players", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 68);
    assert!(text.starts_with("0\t"));
    let o = tabletop(tmp.path(), &["actions", "--game", "tictactoe", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["labels"].as_array().unwrap().len(), 9);
}

#[test]
fn observe_dumps_both_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tabletop(tmp.path(), &["observe", "--game", "stratego", "--seed", "4", "--step", "6"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["vector"].as_array().unwrap().len(), 27 * 10 * 10);
    assert_eq!(v["step"], 6);
    assert!(v["json"].is_object());
    let again = tabletop(tmp.path(), &["observe", "--game", "stratego", "--seed", "4", "--step", "6"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn play_writes_manifest_and_replayable_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "play", "--game", "loveletter", "--players", "3", "--opponent", "osla", "--episodes", "12", "--seed", "5",
    ];
    let o = tabletop(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = run_dirs(tmp.path());
    assert_eq!(dirs.len(), 1);
    let dir = &dirs[0];
    for f in ["manifest.json", "episodes.csv", "games.jsonl", "summary.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["game"], "LoveLetter");
    assert_eq!(manifest["config"]["opponents"], serde_json::json!(["osla", "osla"]));
    assert!(dir.to_string_lossy().ends_with(manifest["run_id"].as_str().unwrap()));
    let csv = fs::read_to_string(dir.join("episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);

    let o = tabletop(tmp.path(), &["replay", dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("12 games, 0 mismatches"));

    // Same configuration, same directory; another seed, another one.
    assert!(tabletop(tmp.path(), &args).status.success());
    assert_eq!(run_dirs(tmp.path()).len(), 1);
    let mut other = args.to_vec();
    *other.last_mut().unwrap() = "6";
    assert!(tabletop(tmp.path(), &other).status.success());
    assert_eq!(run_dirs(tmp.path()).len(), 2);
}

#[test]
fn replay_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tabletop(tmp.path(), &["play", "--game", "diamant", "--episodes", "3"]);
    assert!(o.status.success());
    let log = run_dirs(tmp.path())[0].join("games.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let mut first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    first["seed"] = serde_json::json!(first["seed"].as_u64().unwrap() ^ 1);
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[0] = first.to_string();
    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = tabletop(tmp.path(), &["replay", bad.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn train_then_evaluate_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tabletop(
        tmp.path(),
        &["train", "--game", "tictactoe", "--steps", "2048", "--seeds", "2", "--seed", "3", "-q", "--checkpoint-every", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dirs(tmp.path()).pop().unwrap();
    assert!(dir.join("manifest.json").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    for seed in [3, 4] {
        let sd = dir.join(format!("seed_{seed}"));
        let metrics = fs::read_to_string(sd.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 3);
        assert!(sd.join("final.ckpt").exists());
        assert_eq!(fs::read_dir(sd.join("checkpoints")).unwrap().count(), 2);
    }

    let ckpt = dir.join("seed_3").join("final.ckpt");
    let agent = format!("ppo:{}", ckpt.display());
    let o = tabletop(tmp.path(), &["eval", "--game", "tictactoe", "--agent", &agent, "--episodes", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eval_dir = run_dirs(tmp.path()).into_iter().find(|d| d.to_string_lossy().contains("eval-")).unwrap();
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["episodes"], 50);
    let rates = ["win_rate", "tie_rate", "loss_rate"].map(|k| s[k]["mean"].as_f64().unwrap());
    assert!((rates.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let o = tabletop(tmp.path(), &["eval", "--game", "diamant", "--agent", &agent, "--episodes", "5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));
}
