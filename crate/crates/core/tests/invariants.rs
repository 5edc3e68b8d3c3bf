//! Property tests for the structural invariants: rigid-link preservation,
//! joint limits, action bounds, reward sparsity, feedback range and
//! linearity, and path-efficiency rigid-motion invariance.

use proptest::prelude::*;

use rlihf_core::env::{forward_kinematics, Action, ArmConfig, Environment, SceneSpec};
use rlihf_core::feedback::shape_reward;
use rlihf_core::metrics::path_efficiency;

fn arm_strategy() -> impl Strategy<Value = (ArmConfig, Vec<f64>)> {
    (2usize..6, any::<bool>()).prop_flat_map(|(links, planar)| {
        (
            proptest::collection::vec(0.1f64..1.0, links),
            proptest::collection::vec(-3.0f64..3.0, links),
        )
            .prop_map(move |(lengths, angles)| {
                (
                    ArmConfig {
                        link_lengths: lengths,
                        joint_limits: vec![[-3.2, 3.2]; links],
                        max_joint_velocity: 0.1,
                        planar,
                        home_angles: vec![0.0; links],
                    },
                    angles,
                )
            })
    })
}

proptest! {
    #[test]
    fn link_lengths_preserved_by_forward_kinematics((config, angles) in arm_strategy()) {
        let points = forward_kinematics(&angles, &config).unwrap();
        for (w, &len) in points.windows(2).zip(&config.link_lengths) {
            let d = ((w[1][0] - w[0][0]).powi(2)
                + (w[1][1] - w[0][1]).powi(2)
                + (w[1][2] - w[0][2]).powi(2))
            .sqrt();
            prop_assert!((d - len).abs() < 1e-9, "segment {d} vs link {len}");
        }
    }

    #[test]
    fn steps_respect_joint_limits_and_reward_sparsity(
        seed in 0u64..1000,
        commands in proptest::collection::vec(
            proptest::collection::vec(-2.0f64..2.0, 3), 1..60),
    ) {
        let scene = SceneSpec::default();
        let env = Environment::new(scene.clone()).unwrap();
        let mut state = env.reset(seed);
        for c in commands {
            if state.done { break; }
            let (next, out) = env
                .step(&state, &Action { joint_velocity_commands: c })
                .unwrap();
            for (i, (&a, lim)) in next
                .joint_angles
                .iter()
                .zip(&scene.arm.joint_limits)
                .enumerate()
            {
                prop_assert!(a >= lim[0] - 1e-12 && a <= lim[1] + 1e-12, "joint {i} out of limits");
            }
            // Joint displacement per step is bounded by max_joint_velocity.
            for (a, b) in next.joint_angles.iter().zip(&state.joint_angles) {
                prop_assert!((a - b).abs() <= scene.arm.max_joint_velocity + 1e-12);
            }
            // Sparse reward: only the success bonus and collision penalty occur.
            let expected = f64::from(out.success) * scene.success_bonus
                + f64::from(out.collided) * scene.collision_penalty;
            prop_assert_eq!(out.r_env, expected);
            state = next;
        }
    }

    #[test]
    fn shaped_reward_range_and_linearity(
        r_env in -10.0f64..10.0,
        p in 0.0f64..=1.0,
        alpha in 0.0f64..2.0,
    ) {
        let s = shape_reward(r_env, p, alpha).unwrap();
        prop_assert!((s.r_hf - (0.5 - p)).abs() == 0.0, "r_hf must be exactly 0.5 - p");
        prop_assert!(s.r_hf >= -0.5 && s.r_hf <= 0.5);
        prop_assert_eq!(s.r_total, r_env + alpha * s.r_hf);
        // Linearity in alpha: doubling alpha doubles the shaping term.
        let s2 = shape_reward(r_env, p, 2.0 * alpha).unwrap();
        prop_assert!(((s2.r_total - r_env) - 2.0 * (s.r_total - r_env)).abs() < 1e-12);
    }

    #[test]
    fn path_efficiency_invariant_under_rigid_motion(
        path in proptest::collection::vec(
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..40),
        angle in 0.0f64..6.28,
        shift in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
    ) {
        let pts: Vec<[f64; 3]> = path.iter().map(|&(x, y, z)| [x, y, z]).collect();
        let (s, c) = angle.sin_cos();
        let moved: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| {
                [
                    c * p[0] - s * p[1] + shift.0,
                    s * p[0] + c * p[1] + shift.1,
                    p[2] + shift.2,
                ]
            })
            .collect();
        let a = path_efficiency(&pts).unwrap();
        let b = path_efficiency(&moved).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn actions_bounded_after_tanh(obs_seed in 0u64..500) {
        use rlihf_core::rl::{SacConfig, SacState};
        use rlihf_core::rng::{derive_stream, StreamKind};
        let cfg = SacConfig::default();
        let mut rng = derive_stream(obs_seed, StreamKind::Init);
        let agent = SacState::new(5, 2, &cfg, &mut rng);
        let mut rng_p = derive_stream(obs_seed, StreamKind::Policy);
        use rand::Rng;
        let obs: Vec<f64> = (0..5).map(|_| rng_p.random_range(-3.0..3.0)).collect();
        let a = agent.act(&obs, true, &mut rng_p).unwrap();
        for v in a {
            prop_assert!(v > -1.0 && v < 1.0);
        }
    }
}
