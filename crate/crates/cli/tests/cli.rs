use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_streamctl"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STREAMCTL_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn replay_into(out: &Path, jobs: &str, extra_env: &[(&str, &str)]) -> Output {
    let g = golden();
    let mut cmd = bin();
    cmd.args([
        "--config",
        g.join("config.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        jobs,
        "replay",
        "--stream",
        g.join("stream.jsonl").to_str().unwrap(),
        "--queries",
        g.join("queries.jsonl").to_str().unwrap(),
        "--policy",
        g.join("policy.json").to_str().unwrap(),
    ]);
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn replay_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = replay_into(dir.path(), "2", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["trace.jsonl", "metrics.json"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(golden().join(name)).unwrap(),
            "{name} drifted from the golden copy"
        );
    }
}

#[test]
fn aggressive_history_drops_more_on_replay() {
    let drop_ratio = |tau: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = replay_into(dir.path(), "1", &[("STREAMCTL_MEMORY__TAU_HIST", tau)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
        m["drop_ratio"].as_f64().unwrap()
    };
    assert!(drop_ratio("0.01") > drop_ratio("1.0"));
}

#[test]
fn truncated_stream_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden().join("stream.jsonl")).unwrap();
    let second_line = text.find('\n').unwrap() + 1;
    let cut = &text[..second_line + 40];
    let stream = dir.path().join("stream.jsonl");
    fs::write(&stream, cut).unwrap();
    let g = golden();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "replay",
        "--stream",
        stream.to_str().unwrap(),
        "--queries",
        g.join("queries.jsonl").to_str().unwrap(),
        "--policy",
        g.join("policy.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("byte offset {second_line}")), "{err}");
}

#[test]
fn zero_steps_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[trainer]\nsteps = 0\n").unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "train",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("runlog.csv")).unwrap();
    assert_eq!(
        csv,
        "step,rho_ema,rho_raw,mean_reward,accuracy,escalate_count,answer_count,mean_naive_reward,mean_cost,loss,kl\n"
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("runlog.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[memory]\ntau_hist = 1.5\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "config"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory.tau_hist"));

    fs::write(&cfg, "[memory]\nwindoww = 2\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "config"]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--axis", "fps=1"]).status.code(), Some(1));

    let missing = dir.path().join("missing.json");
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "eval",
        "--policy",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_config_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = streamctl_cli::parse_config(&text, Vec::new()).unwrap();
    assert_eq!(parsed, streamctl_cli::RunConfig::default());
}

#[test]
fn train_then_eval_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[trainer]\nsteps = 40\n\n[environment.queries]\ncount = 30\n",
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let c = cfg.to_str().unwrap();
    assert!(run(&["--config", c, "--out", d, "train"]).status.success());
    let first = run(&["--config", c, "--out", d, "eval"]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let a = fs::read(dir.path().join("metrics.json")).unwrap();
    let second = run(&["--config", c, "--out", d, "--jobs", "3", "eval"]);
    assert!(second.status.success());
    assert_eq!(a, fs::read(dir.path().join("metrics.json")).unwrap());

    let report: streamctl_cli::commands::EvalReport = serde_json::from_slice(&a).unwrap();
    assert_eq!(report.all_fast.mean_cost, 1.0);
    assert_eq!(report.all_slow.mean_cost, 10.0);
    assert!(report.adaptive.mean_cost < report.all_slow.mean_cost);
}

#[test]
fn reward_surface_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "sweep",
        "--reward-surface",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("reward_surface.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["rho", "e", "c", "delta_esc", "delta_ans", "r"]
    );
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: Vec<f64> = rec.iter().map(|x| x.parse().unwrap()).collect();
        let (rho, e, c, r) = (v[0], v[1], v[2], v[5]);
        let naive = match (e as u8, c as u8) {
            (0, 1) => 2.0,
            (0, 0) => -1.0,
            (1, 1) => 1.0,
            _ => 0.0,
        };
        if (0.1..=0.5).contains(&rho) {
            assert_eq!(r, naive, "rho {rho} branch ({e},{c})");
        }
        rows += 1;
    }
    assert_eq!(rows, 404);
}
