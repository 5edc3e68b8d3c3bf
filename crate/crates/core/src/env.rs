//! Kinematic serial-link reaching environment.
//!
//! A K-link arm (planar by default, alternating-axis 3-D optionally) must
//! reach an object, auto-grasp it on proximity, and carry it into a goal
//! sphere through a field of static spherical obstacles. The environment is
//! purely kinematic: joint velocities are integrated by one explicit Euler
//! step per control tick, and the only rewards are a terminal success bonus
//! and a per-step collision penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Serial-chain arm description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    /// One length per link, meters, all positive.
    pub link_lengths: Vec<f64>,
    /// Per-joint [low, high] angle interval, radians.
    pub joint_limits: Vec<[f64; 2]>,
    /// Maximum joint displacement per step, radians.
    pub max_joint_velocity: f64,
    /// Planar arms rotate every joint about z; non-planar arms alternate
    /// z and y axes along the chain.
    #[serde(default = "default_true")]
    pub planar: bool,
    /// Joint angles the arm resets to.
    pub home_angles: Vec<f64>,
}

fn default_true() -> bool {
    true
}

impl ArmConfig {
    pub fn num_links(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_links();
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 links, got {k}")));
        }
        if self.joint_limits.len() != k || self.home_angles.len() != k {
            return Err(Error::Config(format!(
                "joint_limits ({}) and home_angles ({}) must both have length {k}",
                self.joint_limits.len(),
                self.home_angles.len()
            )));
        }
        if self.link_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if !(lim[0] < lim[1]) {
                return Err(Error::Config(format!(
                    "joint limit {i} is not well-ordered: [{}, {}]",
                    lim[0], lim[1]
                )));
            }
        }
        if !(self.max_joint_velocity > 0.0) {
            return Err(Error::Config("max_joint_velocity must be positive".into()));
        }
        for (i, (&a, lim)) in self.home_angles.iter().zip(&self.joint_limits).enumerate() {
            if a < lim[0] || a > lim[1] {
                return Err(Error::Config(format!("home angle {i} outside joint limits")));
            }
        }
        Ok(())
    }
}

/// Static spherical obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Point,
    pub radius: f64,
}

/// Where the object starts each episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectPlacement {
    /// Always the same point.
    Fixed { position: Point },
    /// Uniform in an axis-aligned box, resampled per reset seed.
    RandomBox { low: Point, high: Point },
}

/// Complete scene description: arm, obstacles, goal, object, horizon and
/// reward constants. This is the structured config block the CLI parses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub arm: ArmConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub goal_center: Point,
    pub goal_radius: f64,
    pub object: ObjectPlacement,
    /// Episode length cap, steps.
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    /// Auto-grasp distance, meters.
    #[serde(default = "default_grasp_radius")]
    pub grasp_radius: f64,
    #[serde(default = "default_success_bonus")]
    pub success_bonus: f64,
    #[serde(default = "default_collision_penalty")]
    pub collision_penalty: f64,
}

fn default_horizon() -> u32 {
    300
}
fn default_grasp_radius() -> f64 {
    0.05
}
fn default_success_bonus() -> f64 {
    1.0
}
fn default_collision_penalty() -> f64 {
    -0.1
}

impl Default for SceneSpec {
    /// Three-link planar reach-and-carry scene used by the checked-in
    /// configs: object and goal sit inside the arm's comfortable workspace
    /// with one obstacle off the direct path, and tolerances are generous
    /// enough that undirected exploration occasionally succeeds.
    fn default() -> Self {
        SceneSpec {
            arm: ArmConfig {
                link_lengths: vec![0.5, 0.4, 0.3],
                joint_limits: vec![[-3.1, 3.1]; 3],
                max_joint_velocity: 0.1,
                planar: true,
                home_angles: vec![0.5, 0.5, 0.5],
            },
            obstacles: vec![Obstacle {
                center: [0.95, 0.05, 0.0],
                radius: 0.12,
            }],
            goal_center: [0.15, 0.95, 0.0],
            goal_radius: 0.1,
            object: ObjectPlacement::Fixed {
                position: [0.5, 0.65, 0.0],
            },
            horizon: 150,
            grasp_radius: 0.08,
            success_bonus: 10.0,
            collision_penalty: -0.1,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        if !(self.goal_radius > 0.0) {
            return Err(Error::Config("goal_radius must be positive".into()));
        }
        if self.obstacles.iter().any(|o| !(o.radius > 0.0)) {
            return Err(Error::Config("obstacle radii must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(self.grasp_radius > 0.0) {
            return Err(Error::Config("grasp_radius must be positive".into()));
        }
        // An obstacle swallowing the goal or the home pose makes the task
        // unsatisfiable; reject it up front.
        let home_pts = forward_kinematics(&self.arm.home_angles, &self.arm)?;
        for (i, o) in self.obstacles.iter().enumerate() {
            if geom::dist(o.center, self.goal_center) <= o.radius && o.radius > self.goal_radius {
                return Err(Error::Config(format!("obstacle {i} covers the goal center")));
            }
            for w in home_pts.windows(2) {
                if geom::segment_point_distance(w[0], w[1], o.center) < o.radius {
                    return Err(Error::Config(format!("obstacle {i} covers the home pose")));
                }
            }
        }
        if let ObjectPlacement::RandomBox { low, high } = &self.object {
            if low.iter().zip(high).any(|(l, h)| l > h) {
                return Err(Error::Config("object random box has low > high".into()));
            }
        }
        Ok(())
    }

    /// Observation vector length for this scene.
    pub fn observation_dim(&self) -> usize {
        self.arm.num_links() + 10
    }

    pub fn action_dim(&self) -> usize {
        self.arm.num_links()
    }
}

/// Full simulator state for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub joint_angles: Vec<f64>,
    pub object_position: Point,
    pub goal_center: Point,
    pub goal_radius: f64,
    pub carrying: bool,
    pub done: bool,
    pub step_index: u32,
}

/// Per-joint velocity commands in [-1, 1]; scaled by `max_joint_velocity`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub joint_velocity_commands: Vec<f64>,
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub r_env: f64,
    pub terminated: bool,
    pub success: bool,
    pub collided: bool,
    /// Remaining reach-and-carry distance: end-effector to object plus
    /// object to goal before grasping, end-effector to goal after. This
    /// stays continuous through the grasp transition (up to the grasp
    /// radius) and is the progress measure the observer judges against.
    pub distance_to_subgoal: f64,
}

/// Joint positions for the chain, base first, end effector last (K+1 points).
pub fn forward_kinematics(joint_angles: &[f64], config: &ArmConfig) -> Result<Vec<Point>> {
    if joint_angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("non-finite joint angle".into()));
    }
    if joint_angles.len() != config.num_links() {
        return Err(Error::InvalidInput(format!(
            "expected {} joint angles, got {}",
            config.num_links(),
            joint_angles.len()
        )));
    }
    let mut points = Vec::with_capacity(joint_angles.len() + 1);
    let mut p: Point = [0.0, 0.0, 0.0];
    points.push(p);
    let mut rot = geom::Rot3::identity();
    for (i, (&theta, &len)) in joint_angles.iter().zip(&config.link_lengths).enumerate() {
        let joint_rot = if config.planar || i % 2 == 0 {
            geom::Rot3::about_z(theta)
        } else {
            geom::Rot3::about_y(theta)
        };
        rot = rot.mul(&joint_rot);
        p = geom::add(p, rot.apply([len, 0.0, 0.0]));
        points.push(p);
    }
    Ok(points)
}

/// True iff any link segment comes within an obstacle's radius of its center.
pub fn collision_check(joint_points: &[Point], obstacles: &[Obstacle]) -> bool {
    debug_assert!(joint_points.len() >= 2);
    obstacles.iter().any(|o| {
        joint_points
            .windows(2)
            .any(|w| geom::segment_point_distance(w[0], w[1], o.center) < o.radius)
    })
}

/// The environment proper: a validated scene plus step/reset dynamics.
/// Instances hold no interior mutability; states are explicit values.
#[derive(Debug, Clone)]
pub struct Environment {
    scene: SceneSpec,
}

impl Environment {
    pub fn new(scene: SceneSpec) -> Result<Self> {
        scene.validate()?;
        Ok(Environment { scene })
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    /// Deterministic function of (scene, seed). The seed only matters when
    /// object placement is randomized.
    pub fn reset(&self, seed: u64) -> WorldState {
        let object_position = match &self.scene.object {
            ObjectPlacement::Fixed { position } => *position,
            ObjectPlacement::RandomBox { low, high } => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut p = [0.0; 3];
                for i in 0..3 {
                    p[i] = if low[i] == high[i] {
                        low[i]
                    } else {
                        rng.random_range(low[i]..=high[i])
                    };
                }
                p
            }
        };
        WorldState {
            joint_angles: self.scene.arm.home_angles.clone(),
            object_position,
            goal_center: self.scene.goal_center,
            goal_radius: self.scene.goal_radius,
            carrying: false,
            done: false,
            step_index: 0,
        }
    }

    /// Observation and progress measure for a state, without stepping.
    pub fn observe(&self, state: &WorldState) -> (Vec<f64>, f64) {
        let points = forward_kinematics(&state.joint_angles, &self.scene.arm)
            .expect("state angles are finite by construction");
        let ee = *points.last().unwrap();
        let obs = self.observation(state, ee);
        (obs, self.distance_to_subgoal(state, ee))
    }

    fn observation(&self, state: &WorldState, ee: Point) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.scene.observation_dim());
        obs.extend_from_slice(&state.joint_angles);
        obs.extend_from_slice(&ee);
        obs.extend_from_slice(&state.object_position);
        obs.extend_from_slice(&state.goal_center);
        obs.push(if state.carrying { 1.0 } else { 0.0 });
        obs
    }

    fn distance_to_subgoal(&self, state: &WorldState, ee: Point) -> f64 {
        if state.carrying {
            geom::dist(ee, state.goal_center)
        } else {
            geom::dist(ee, state.object_position)
                + geom::dist(state.object_position, state.goal_center)
        }
    }

    /// One Euler step. Errors if called on a terminated state.
    pub fn step(&self, state: &WorldState, action: &Action) -> Result<(WorldState, StepOutcome)> {
        if state.done {
            return Err(Error::Usage("step called on a terminated episode".into()));
        }
        if action.joint_velocity_commands.len() != self.scene.arm.num_links() {
            return Err(Error::InvalidInput(format!(
                "action has {} components, arm has {} joints",
                action.joint_velocity_commands.len(),
                self.scene.arm.num_links()
            )));
        }
        let arm = &self.scene.arm;
        let mut next = state.clone();
        for ((angle, cmd), lim) in next
            .joint_angles
            .iter_mut()
            .zip(&action.joint_velocity_commands)
            .zip(&arm.joint_limits)
        {
            let v = cmd.clamp(-1.0, 1.0) * arm.max_joint_velocity;
            *angle = (*angle + v).clamp(lim[0], lim[1]);
        }
        next.step_index = state.step_index + 1;

        let points = forward_kinematics(&next.joint_angles, arm)?;
        let ee = *points.last().unwrap();
        let collided = collision_check(&points, &self.scene.obstacles);

        if !next.carrying && geom::dist(ee, next.object_position) <= self.scene.grasp_radius {
            next.carrying = true;
        }
        if next.carrying {
            next.object_position = ee;
        }
        let success =
            next.carrying && geom::dist(ee, next.goal_center) <= next.goal_radius;
        let terminated = success || next.step_index >= self.scene.horizon;
        next.done = terminated;

        let r_env = if success { self.scene.success_bonus } else { 0.0 }
            + if collided { self.scene.collision_penalty } else { 0.0 };

        let outcome = StepOutcome {
            observation: self.observation(&next, ee),
            r_env,
            terminated,
            success,
            collided,
            distance_to_subgoal: self.distance_to_subgoal(&next, ee),
        };
        Ok((next, outcome))
    }
}
