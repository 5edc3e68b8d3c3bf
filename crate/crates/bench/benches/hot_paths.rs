//! Criterion benchmarks for the per-step hot paths: forward kinematics,
//! collision checking, decoder sampling, policy inference, and a full
//! gradient update phase.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rlihf_core::env::{Action, Environment, SceneSpec};
use rlihf_core::feedback::{simulate_decoder, ErrorCause, ErrorJudgment, ObserverModel};
use rlihf_core::rl::{ReplayBuffer, SacConfig, SacState, Transition};
use rlihf_core::rng::{derive_stream, StreamKind};

fn bench_env(c: &mut Criterion) {
    let scene = SceneSpec::default();
    let env = Environment::new(scene.clone()).unwrap();
    let k = scene.action_dim();
    let action = Action {
        joint_velocity_commands: vec![0.3; k],
    };

    c.bench_function("env_reset", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed = seed.wrapping_add(1);
            black_box(env.reset(seed))
        })
    });

    c.bench_function("env_step", |b| {
        let mut state = env.reset(7);
        b.iter(|| {
            let (next, out) = env.step(&state, &action).unwrap();
            state = if out.terminated { env.reset(7) } else { next };
            black_box(out.r_env)
        })
    });
}

fn bench_decoder(c: &mut Criterion) {
    let observer = ObserverModel {
        subject_id: "bench".to_string(),
        tpr: 0.8,
        tnr: 0.8,
        sharpness: 25.0,
    };
    let mut rng = derive_stream(11, StreamKind::Decoder);
    let judgment = ErrorJudgment {
        is_error: true,
        cause: ErrorCause::MovedAwayFromSubgoal,
    };
    c.bench_function("simulate_decoder", |b| {
        b.iter(|| black_box(simulate_decoder(&judgment, &observer, &mut rng)))
    });
}

fn bench_sac(c: &mut Criterion) {
    let scene = SceneSpec::default();
    let obs_dim = scene.observation_dim();
    let act_dim = scene.action_dim();
    let cfg = SacConfig::default();
    let mut init_rng = derive_stream(3, StreamKind::Init);
    let mut agent = SacState::new(obs_dim, act_dim, &cfg, &mut init_rng);
    let mut policy_rng = derive_stream(3, StreamKind::Policy);
    let mut buffer_rng = derive_stream(3, StreamKind::Buffer);

    let mut buffer = ReplayBuffer::new(4096, obs_dim, act_dim);
    let mut fill_rng = derive_stream(5, StreamKind::Env);
    for _ in 0..4096 {
        use rand::Rng;
        let obs: Vec<f64> = (0..obs_dim).map(|_| fill_rng.random_range(-1.0..1.0)).collect();
        let next: Vec<f64> = (0..obs_dim).map(|_| fill_rng.random_range(-1.0..1.0)).collect();
        let act: Vec<f64> = (0..act_dim).map(|_| fill_rng.random_range(-1.0..1.0)).collect();
        buffer
            .push(Transition {
                observation: obs,
                action: act,
                r_total: fill_rng.random_range(-0.5..0.5),
                next_observation: next,
                terminal: false,
            })
            .unwrap();
    }

    let obs = vec![0.1; obs_dim];
    c.bench_function("policy_act", |b| {
        b.iter(|| black_box(agent.act(&obs, false, &mut policy_rng).unwrap()))
    });

    c.bench_function("sac_update_phase", |b| {
        b.iter(|| {
            let sampled = buffer.sample(cfg.batch_size, &mut buffer_rng).unwrap();
            let batch = rlihf_core::rl::Batch::from_transitions(&sampled).unwrap();
            agent.update_critics(&batch, &cfg, &mut policy_rng).unwrap();
            agent.update_actor(&batch, &cfg, &mut policy_rng).unwrap();
            agent.update_temperature(&batch, &cfg, &mut policy_rng).unwrap();
            agent.soft_update_targets(cfg.tau);
        })
    });
}

criterion_group!(benches, bench_env, bench_decoder, bench_sac);
criterion_main!(benches);
