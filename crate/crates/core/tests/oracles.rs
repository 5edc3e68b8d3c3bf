//! Independent numerical oracles for the kinematics: forward kinematics is
//! cross-checked against nalgebra's rotation composition, and the
//! segment-sphere collision test against dense point sampling.

use nalgebra::{Rotation3, Vector3};
use rlihf_core::env::{collision_check, forward_kinematics, ArmConfig, Obstacle};

fn arm(planar: bool, lengths: &[f64]) -> ArmConfig {
    ArmConfig {
        link_lengths: lengths.to_vec(),
        joint_limits: vec![[-3.2, 3.2]; lengths.len()],
        max_joint_velocity: 0.1,
        planar,
        home_angles: vec![0.0; lengths.len()],
    }
}

fn fk_nalgebra(angles: &[f64], config: &ArmConfig) -> Vec<[f64; 3]> {
    let mut points = vec![[0.0; 3]];
    let mut p = Vector3::zeros();
    let mut rot = Rotation3::identity();
    for (i, (&theta, &len)) in angles.iter().zip(&config.link_lengths).enumerate() {
        let axis = if config.planar || i % 2 == 0 {
            Vector3::z_axis()
        } else {
            Vector3::y_axis()
        };
        rot *= Rotation3::from_axis_angle(&axis, theta);
        p += rot * Vector3::new(len, 0.0, 0.0);
        points.push([p.x, p.y, p.z]);
    }
    points
}

#[test]
fn forward_kinematics_matches_nalgebra_planar_and_3d() {
    use rand::Rng;
    let mut rng = rlihf_core::rng::derive_stream(42, rlihf_core::rng::StreamKind::Eval);
    for &planar in &[true, false] {
        for links in 2..=6usize {
            let lengths: Vec<f64> = (0..links).map(|_| rng.random_range(0.1..1.0)).collect();
            let config = arm(planar, &lengths);
            for _ in 0..50 {
                let angles: Vec<f64> = (0..links).map(|_| rng.random_range(-3.0..3.0)).collect();
                let ours = forward_kinematics(&angles, &config).unwrap();
                let theirs = fk_nalgebra(&angles, &config);
                assert_eq!(ours.len(), theirs.len());
                for (a, b) in ours.iter().zip(&theirs) {
                    for d in 0..3 {
                        assert!(
                            (a[d] - b[d]).abs() < 1e-12,
                            "planar={planar} links={links}: {a:?} vs {b:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn planar_arm_stays_in_plane() {
    use rand::Rng;
    let mut rng = rlihf_core::rng::derive_stream(7, rlihf_core::rng::StreamKind::Eval);
    let config = arm(true, &[0.5, 0.4, 0.3, 0.2]);
    for _ in 0..100 {
        let angles: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        for p in forward_kinematics(&angles, &config).unwrap() {
            assert_eq!(p[2], 0.0);
        }
    }
}

/// Dense-sampling oracle: a segment intersects the sphere iff some sampled
/// point along it is inside. 1000 samples per segment bound the gap between
/// the oracle and the analytic test; disagreements are only possible within
/// a thin shell around the surface, so near-boundary cases are skipped.
#[test]
fn collision_check_matches_dense_sampling() {
    use rand::Rng;
    let mut rng = rlihf_core::rng::derive_stream(43, rlihf_core::rng::StreamKind::Eval);
    let mut checked = 0;
    while checked < 500 {
        let points: Vec<[f64; 3]> = (0..4)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let obstacle = Obstacle {
            center: [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ],
            radius: rng.random_range(0.05..0.5),
        };

        // Minimum distance from any segment to the center, via dense sampling.
        let mut min_d = f64::INFINITY;
        for w in points.windows(2) {
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                let q = [
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                    w[0][2] + t * (w[1][2] - w[0][2]),
                ];
                let d = ((q[0] - obstacle.center[0]).powi(2)
                    + (q[1] - obstacle.center[1]).powi(2)
                    + (q[2] - obstacle.center[2]).powi(2))
                .sqrt();
                min_d = min_d.min(d);
            }
        }
        // Skip configurations too close to the decision boundary for the
        // sampled oracle to resolve.
        if (min_d - obstacle.radius).abs() < 1e-3 {
            continue;
        }
        checked += 1;
        let expected = min_d < obstacle.radius;
        assert_eq!(
            collision_check(&points, &[obstacle]),
            expected,
            "min_d {min_d} radius {}",
            obstacle.radius
        );
    }
}
