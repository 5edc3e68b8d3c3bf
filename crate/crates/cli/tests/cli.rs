//! End-to-end CLI tests: exit codes, config overrides, and artifact
//! production through the binary interface.

use std::path::Path;
use std::process::Command;

fn rlihf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rlihf"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let scene = toml::to_string(&rlihf_core::env::SceneSpec::default()).unwrap();
    let text = format!(
        "alpha = 0.0\ntotal_timesteps = 600\nmaster_seed = 4\n\n\
         [feedback]\nsource = \"disabled\"\n\n\
         [sac]\nwarmup_steps = 150\nbuffer_capacity = 2000\n\n\
         [eval]\ninterval = 300\nepisodes = 2\nfinal_window = 4\nsmoothing_window = 2\n\n\
         [scene]\n{}",
        scene.replace("[arm]", "[scene.arm]")
            .replace("[[obstacles]]", "[[scene.obstacles]]")
            .replace("[object]", "[scene.object]")
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_config_ok_and_error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());

    let ok = rlihf()
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{:?}", ok);

    // Unknown field through --set: config error, exit 2.
    let bad = rlihf()
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .args(["--set", "no_such_field=1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());

    // Invalid value: negative alpha rejected with a field message.
    let neg = rlihf()
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .args(["--set", "alpha=-0.5"])
        .output()
        .unwrap();
    assert_eq!(neg.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&neg.stderr).contains("alpha"));

    // Missing file.
    let missing = rlihf()
        .args(["validate-config", "--config", "/nonexistent/cfg.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn train_writes_artifacts_and_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");

    let res = rlihf()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--set", "total_timesteps=500", "--set", "master_seed=9", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["curve.csv", "episodes.jsonl", "checkpoint.json", "summary.csv", "config.toml", "DONE"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    // The frozen config reflects the overrides.
    let frozen = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(frozen.contains("total_timesteps = 500"));
    assert!(frozen.contains("master_seed = 9"));
}

#[test]
fn eval_reads_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    let train = rlihf()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(train.status.code(), Some(0));

    let eval = rlihf()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(out.join("checkpoint.json"))
        .args(["--episodes", "3"])
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("success_rate"));
    assert!(stdout.contains("path_efficiency"));
}

#[test]
fn export_plots_on_empty_dir_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let res = rlihf()
        .args(["export-plots", "--dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3));
}
