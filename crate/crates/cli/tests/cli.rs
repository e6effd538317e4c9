use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dnlrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnlrl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!(
            r#"
name = "small"
environment = "cartpole"
variant = "dNLRLc"
trainer = "sac"
trials = 2
episodes = 6
output_dir = "{}"

[sac]
warmup_steps = 32
batch_size = 16
"#,
            dir.join("runs").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn train_evaluate_extract_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = dnlrl(&["train", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("seed 0: 6 episodes, mean reward:"), "{text}");
    assert!(text.contains("seed 1:"), "{text}");

    let runs = tmp.path().join("runs");
    let ck = runs.join("seed-0/checkpoint.json");
    assert!(ck.is_file());

    let out = dnlrl(&["evaluate", ck.to_str().unwrap(), "--episodes", "3", "--greedy"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("over 3 episodes"), "{}", stdout(&out));

    let out = dnlrl(&["extract", ck.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("mean reward:") && report.contains("left() :-") && report.contains("right() :-"));

    let out = dnlrl(&["extract", ck.to_str().unwrap(), "--json", "--keep", "0.3", "--confident", "0.9"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for line in stdout(&out).lines() {
        assert!(line.starts_with('{') && line.contains("\"action\""), "{line}");
    }

    let plots = tmp.path().join("plots");
    let out = dnlrl(&[
        "plot",
        runs.join("seed-0").to_str().unwrap(),
        runs.join("seed-1").to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(plots.join("overlay.csv").is_file());
}

#[test]
fn overrides_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out_dir = tmp.path().join("other");
    let out = dnlrl(&[
        "train",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--episodes",
        "3",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ck = out_dir.join("seed-5/checkpoint.json");
    let out = dnlrl(&["train", "--resume", ck.to_str().unwrap(), "--episodes", "5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("seed 5: 5 episodes"), "{}", stdout(&out));
    let metrics = fs::read_to_string(out_dir.join("seed-5/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 6);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "variant = \"dNLRLnlc\"\ntrials = 0\n").unwrap();
    let out = dnlrl(&["train", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("invalid configuration") && err.contains("trials"), "{err}");

    let out = dnlrl(&["extract", tmp.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"));

    let out = dnlrl(&["frobnicate"]);
    assert!(!out.status.success());
}
