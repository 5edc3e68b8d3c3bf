//! Integration tests over whole training runs: determinism, the alpha = 0
//! equivalence, warmup accounting, resumability, and checkpoint round-trips.

use std::path::{Path, PathBuf};

use rlihf_core::env::SceneSpec;
use rlihf_core::feedback::ObserverModel;
use rlihf_core::rl::{SacConfig, SacState};
use rlihf_core::runner::{train_single, ExperimentConfig, FeedbackSource};

fn small_config(out: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        scene: SceneSpec::default(),
        sac: SacConfig {
            warmup_steps: 200,
            buffer_capacity: 5_000,
            ..SacConfig::default()
        },
        alpha: 0.0,
        feedback: FeedbackSource::Disabled,
        total_timesteps: 1_200,
        master_seed: 11,
        eval: rlihf_core::runner::EvalProtocol {
            interval: 600,
            episodes: 2,
            final_window: 4,
            smoothing_window: 2,
        },
        judge_epsilon: 0.005,
        out_dir: Some(out),
    }
}

fn observer() -> ObserverModel {
    ObserverModel {
        subject_id: "s-test".to_string(),
        tpr: 0.8,
        tnr: 0.8,
        sharpness: 25.0,
    }
}

fn file_bytes(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn identical_configs_produce_byte_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train_single(&small_config(a.clone()), false).unwrap();
    train_single(&small_config(b.clone()), false).unwrap();
    for name in ["curve.csv", "episodes.jsonl", "checkpoint.json", "summary.csv"] {
        assert_eq!(
            file_bytes(&a, name),
            file_bytes(&b, name),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn alpha_zero_with_observer_matches_disabled_feedback() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("disabled"), tmp.path().join("alpha0"));
    train_single(&small_config(a.clone()), false).unwrap();

    let mut with_observer = small_config(b.clone());
    with_observer.feedback = FeedbackSource::Simulated {
        observer: observer(),
    };
    with_observer.alpha = 0.0;
    train_single(&with_observer, false).unwrap();

    for name in ["curve.csv", "episodes.jsonl", "checkpoint.json"] {
        assert_eq!(
            file_bytes(&a, name),
            file_bytes(&b, name),
            "{name} differs between disabled feedback and alpha = 0"
        );
    }
}

#[test]
fn no_updates_during_warmup_and_one_phase_after() {
    let tmp = tempfile::tempdir().unwrap();

    // Run ending exactly at the warmup boundary: zero update phases.
    let mut cfg = small_config(tmp.path().join("warmup_only"));
    cfg.sac.warmup_steps = 400;
    cfg.total_timesteps = 401;
    cfg.eval.interval = 401;
    let artifacts = train_single(&cfg, false).unwrap();
    assert_eq!(artifacts.meta.update_phases, 1);
    assert_eq!(artifacts.meta.gradient_updates, 1);

    let mut cfg0 = small_config(tmp.path().join("warmup_zero"));
    cfg0.sac.warmup_steps = 400;
    cfg0.total_timesteps = 400;
    cfg0.eval.interval = 400;
    // total == warmup is rejected up front.
    assert!(cfg0.validate().is_err());

    // The post-warmup agent differs from a freshly initialized one.
    let agent = SacState::load(&tmp.path().join("warmup_only/checkpoint.json")).unwrap();
    let mut rng = rlihf_core::rng::derive_stream(cfg.master_seed, rlihf_core::rng::StreamKind::Init);
    let fresh = SacState::new(
        cfg.scene.observation_dim(),
        cfg.scene.action_dim(),
        &cfg.sac,
        &mut rng,
    );
    assert_ne!(agent.actor.params(), fresh.actor.params());
}

#[test]
fn completed_runs_are_skipped_not_retrained() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path().join("run"));
    let first = train_single(&cfg, false).unwrap();
    let stamp = std::fs::metadata(first.dir.join("checkpoint.json"))
        .unwrap()
        .modified()
        .unwrap();

    let second = train_single(&cfg, false).unwrap();
    let stamp2 = std::fs::metadata(second.dir.join("checkpoint.json"))
        .unwrap()
        .modified()
        .unwrap();
    assert_eq!(stamp, stamp2, "completed run was retrained without --force");
    assert_eq!(
        first.summary.success_rate.mean,
        second.summary.success_rate.mean
    );
    assert_eq!(first.meta, second.meta);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path().join("run"));
    train_single(&cfg, false).unwrap();
    let path = tmp.path().join("run/checkpoint.json");
    let a = SacState::load(&path).unwrap();
    let copy = tmp.path().join("copy.json");
    a.save(&copy).unwrap();
    let b = SacState::load(&copy).unwrap();
    assert_eq!(a.actor.params(), b.actor.params());
    assert_eq!(a.critic1.params(), b.critic1.params());
    assert_eq!(a.critic2.params(), b.critic2.params());
    assert_eq!(a.target1.params(), b.target1.params());
    assert_eq!(a.target2.params(), b.target2.params());
    assert_eq!(a.log_temp.to_bits(), b.log_temp.to_bits());
    assert_eq!(a.global_step, b.global_step);

    // Identical continued behavior: both act identically on a probe.
    let obs = vec![0.25; a.obs_dim];
    let mut r1 = rlihf_core::rng::derive_stream(5, rlihf_core::rng::StreamKind::Policy);
    let mut r2 = rlihf_core::rng::derive_stream(5, rlihf_core::rng::StreamKind::Policy);
    assert_eq!(
        a.act(&obs, true, &mut r1).unwrap(),
        b.act(&obs, true, &mut r2).unwrap()
    );
}

#[test]
fn frozen_config_reloads_and_revalidates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path().join("run"));
    train_single(&cfg, false).unwrap();
    let reloaded = ExperimentConfig::load(&tmp.path().join("run/config.toml")).unwrap();
    assert_eq!(reloaded.master_seed, cfg.master_seed);
    assert_eq!(reloaded.total_timesteps, cfg.total_timesteps);
    assert_eq!(reloaded.scene, cfg.scene);
}
