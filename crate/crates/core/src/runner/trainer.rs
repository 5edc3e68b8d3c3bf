//! The single-run training loop: act, step, judge, decode, shape, store,
//! update, evaluate, and write artifacts.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Environment, WorldState};
use crate::error::{Error, Result};
use crate::feedback::{
    judge_transition, load_probability_stream, shape_reward, simulate_decoder,
};
use crate::metrics::{self, EpisodeRecord, RunSummary, SummaryRow};
use crate::rl::buffer::{ReplayBuffer, Transition};
use crate::rl::sac::{Batch, SacState};
use crate::rng::{self, derive_stream, StreamKind};
use crate::runner::{write_curve, CurvePoint, ExperimentConfig, FeedbackSource};

/// Run-level counters written alongside the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: String,
    pub subject: String,
    pub alpha: f64,
    pub total_timesteps: u32,
    /// Number of gradient-update phases executed (one phase per post-warmup
    /// environment step; each phase runs `update_to_data_ratio` updates).
    pub update_phases: u64,
    pub gradient_updates: u64,
    pub train_episodes: u64,
}

/// Paths produced by a completed run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub meta: RunMeta,
}

const DONE_MARKER: &str = "DONE";

pub fn run_is_complete(dir: &Path) -> bool {
    dir.join(DONE_MARKER).exists()
}

struct EpisodeAccum {
    ee_path: Vec<[f64; 3]>,
    r_env: Vec<f64>,
    r_total: Vec<f64>,
    collisions: u32,
    success: bool,
    start_step: u64,
}

impl EpisodeAccum {
    fn new(start_ee: [f64; 3], start_step: u64) -> Self {
        EpisodeAccum {
            ee_path: vec![start_ee],
            r_env: Vec::new(),
            r_total: Vec::new(),
            collisions: 0,
            success: false,
            start_step,
        }
    }

    fn into_record(self, episode_index: u64) -> EpisodeRecord {
        EpisodeRecord {
            end_effector_path: self.ee_path,
            per_step_r_env: self.r_env,
            per_step_r_total: self.r_total,
            collision_steps: self.collisions,
            success: self.success,
            episode_index,
            global_step_at_start: self.start_step,
        }
    }
}

fn ee_from_obs(obs: &[f64], num_links: usize) -> [f64; 3] {
    [obs[num_links], obs[num_links + 1], obs[num_links + 2]]
}

/// Train one configuration to completion and write artifacts into
/// `cfg.out_dir`. A directory already containing a completed run is left
/// untouched unless `force` is set; its summary is reloaded instead.
pub fn train_single(cfg: &ExperimentConfig, force: bool) -> Result<RunArtifacts> {
    cfg.validate()?;
    let dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("out_dir is required for training".into()))?;

    if run_is_complete(&dir) && !force {
        let summary_text = std::fs::read_to_string(dir.join("summary.json"))
            .map_err(|e| Error::io(dir.join("summary.json"), e))?;
        let summary = serde_json::from_str(&summary_text).map_err(|e| Error::Serde(e.to_string()))?;
        let meta_text = std::fs::read_to_string(dir.join("run_meta.json"))
            .map_err(|e| Error::io(dir.join("run_meta.json"), e))?;
        let meta = serde_json::from_str(&meta_text).map_err(|e| Error::Serde(e.to_string()))?;
        return Ok(RunArtifacts { dir, summary, meta });
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    // Freeze the resolved config next to the results.
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)
        .map_err(|e| Error::io(dir.join("config.toml"), e))?;

    let mut trainer = Trainer::new(cfg)?;
    while trainer.global_step < cfg.total_timesteps as u64 {
        trainer.step()?;
    }
    trainer.finish(&dir)
}

struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    env: Environment,
    agent: SacState,
    buffer: ReplayBuffer,
    rng_env: ChaCha12Rng,
    rng_policy: ChaCha12Rng,
    rng_decoder: ChaCha12Rng,
    rng_buffer: ChaCha12Rng,
    stream: Option<Vec<f64>>,
    stream_pos: usize,
    state: WorldState,
    prev_obs: Vec<f64>,
    prev_distance: f64,
    global_step: u64,
    episode: EpisodeAccum,
    train_episode_count: u64,
    update_phases: u64,
    gradient_updates: u64,
    eval_index: u32,
    eval_logs: Vec<(u64, Vec<f64>)>,
    eval_records: Vec<EpisodeRecord>,
    curve: Vec<CurvePoint>,
    // Mean shaped return of training episodes finished since the last eval.
    interval_train_returns: Vec<f64>,
    last_train_return: f64,
}

impl<'a> Trainer<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let env = Environment::new(cfg.scene.clone())?;
        let obs_dim = cfg.scene.observation_dim();
        let action_dim = cfg.scene.action_dim();
        let mut rng_init = derive_stream(cfg.master_seed, StreamKind::Init);
        let agent = SacState::new(obs_dim, action_dim, &cfg.sac, &mut rng_init);
        let buffer = ReplayBuffer::new(cfg.sac.buffer_capacity, obs_dim, action_dim);

        let rng_decoder = {
            let seed = rng::decoder_seed(cfg.master_seed, 0, cfg.feedback.subject_id());
            derive_stream(seed, StreamKind::Decoder)
        };
        let stream = match &cfg.feedback {
            FeedbackSource::Stream { path } => Some(load_probability_stream(path)?),
            _ => None,
        };

        let mut rng_env = derive_stream(cfg.master_seed, StreamKind::Env);
        let state = env.reset(next_seed(&mut rng_env));
        let (prev_obs, prev_distance) = env.observe(&state);
        let start_ee = ee_from_obs(&prev_obs, action_dim);

        Ok(Trainer {
            cfg,
            env,
            agent,
            buffer,
            rng_env,
            rng_policy: derive_stream(cfg.master_seed, StreamKind::Policy),
            rng_decoder,
            rng_buffer: derive_stream(cfg.master_seed, StreamKind::Buffer),
            stream,
            stream_pos: 0,
            state,
            prev_obs,
            prev_distance,
            global_step: 0,
            episode: EpisodeAccum::new(start_ee, 0),
            train_episode_count: 0,
            update_phases: 0,
            gradient_updates: 0,
            eval_index: 0,
            eval_logs: Vec::new(),
            eval_records: Vec::new(),
            curve: Vec::new(),
            interval_train_returns: Vec::new(),
            last_train_return: 0.0,
        })
    }

    fn feedback_probability(&mut self, judgment: &crate::feedback::ErrorJudgment) -> Result<f64> {
        let cfg: &ExperimentConfig = self.cfg;
        match &cfg.feedback {
            FeedbackSource::Disabled => Ok(0.5),
            FeedbackSource::Simulated { observer } => {
                Ok(simulate_decoder(judgment, observer, &mut self.rng_decoder).p)
            }
            FeedbackSource::Stream { path } => {
                let stream = self.stream.as_ref().expect("stream loaded in new()");
                let p = stream.get(self.stream_pos).copied().ok_or_else(|| {
                    Error::Usage(format!(
                        "probability stream {} exhausted at timestep {}",
                        path.display(),
                        self.stream_pos
                    ))
                })?;
                self.stream_pos += 1;
                Ok(p)
            }
        }
    }

    /// One environment interaction plus (past warmup) one update phase.
    fn step(&mut self) -> Result<()> {
        let action_vec = self.agent.act(&self.prev_obs, true, &mut self.rng_policy)?;
        let action = Action {
            joint_velocity_commands: action_vec.clone(),
        };
        let (next_state, outcome) = self.env.step(&self.state, &action)?;

        let judgment = judge_transition(self.prev_distance, &outcome, self.cfg.judge_epsilon);
        let p = self.feedback_probability(&judgment)?;
        let shaped = shape_reward(outcome.r_env, p, self.cfg.alpha)?;

        self.buffer.push(Transition {
            observation: std::mem::take(&mut self.prev_obs),
            action: action_vec,
            r_total: shaped.r_total,
            next_observation: outcome.observation.clone(),
            terminal: outcome.success,
        })?;

        self.global_step += 1;
        self.agent.global_step = self.global_step;

        self.episode
            .ee_path
            .push(ee_from_obs(&outcome.observation, self.env.scene().action_dim()));
        self.episode.r_env.push(outcome.r_env);
        self.episode.r_total.push(shaped.r_total);
        if outcome.collided {
            self.episode.collisions += 1;
        }
        if outcome.success {
            self.episode.success = true;
        }

        if outcome.terminated {
            let record = std::mem::replace(
                &mut self.episode,
                EpisodeAccum::new([0.0; 3], self.global_step),
            )
            .into_record(self.train_episode_count);
            self.interval_train_returns.push(record.total_return());
            self.train_episode_count += 1;

            self.state = self.env.reset(next_seed(&mut self.rng_env));
            let (obs, d) = self.env.observe(&self.state);
            self.episode.ee_path[0] = ee_from_obs(&obs, self.env.scene().action_dim());
            self.prev_obs = obs;
            self.prev_distance = d;
        } else {
            self.state = next_state;
            self.prev_obs = outcome.observation;
            self.prev_distance = outcome.distance_to_subgoal;
        }

        if self.global_step > self.cfg.sac.warmup_steps as u64
            && self.buffer.len() >= self.cfg.sac.batch_size
        {
            self.update_phases += 1;
            for _ in 0..self.cfg.sac.update_to_data_ratio {
                let items = self.buffer.sample(self.cfg.sac.batch_size, &mut self.rng_buffer)?;
                let batch = Batch::from_transitions(&items)?;
                self.agent.update_critics(&batch, &self.cfg.sac, &mut self.rng_policy)?;
                self.agent.update_actor(&batch, &self.cfg.sac, &mut self.rng_policy)?;
                self.agent.update_temperature(&batch, &self.cfg.sac, &mut self.rng_policy)?;
                self.agent.soft_update_targets(self.cfg.sac.tau);
                self.gradient_updates += 1;
            }
        }

        if self.global_step % self.cfg.eval.interval as u64 == 0
            || self.global_step == self.cfg.total_timesteps as u64
        {
            self.evaluate()?;
        }
        Ok(())
    }

    /// Deterministic-policy evaluation with the feedback channel disabled.
    fn evaluate(&mut self) -> Result<()> {
        // Guard against double evaluation when the final step coincides with
        // the cadence.
        if self
            .curve
            .last()
            .is_some_and(|p| p.step == self.global_step)
        {
            return Ok(());
        }
        let mut returns = Vec::with_capacity(self.cfg.eval.episodes as usize);
        let num_links = self.env.scene().action_dim();
        for ep in 0..self.cfg.eval.episodes {
            let seed = rng::eval_seed(self.cfg.master_seed, self.eval_index, ep);
            let mut state = self.env.reset(seed);
            let (mut obs, _) = self.env.observe(&state);
            let mut accum = EpisodeAccum::new(ee_from_obs(&obs, num_links), self.global_step);
            let mut rng_unused = derive_stream(0, StreamKind::Eval);
            loop {
                let a = self.agent.act(&obs, false, &mut rng_unused)?;
                let (next, outcome) = self.env.step(
                    &state,
                    &Action {
                        joint_velocity_commands: a,
                    },
                )?;
                accum.ee_path.push(ee_from_obs(&outcome.observation, num_links));
                accum.r_env.push(outcome.r_env);
                // Feedback disabled during evaluation.
                accum.r_total.push(outcome.r_env);
                if outcome.collided {
                    accum.collisions += 1;
                }
                if outcome.success {
                    accum.success = true;
                }
                let done = outcome.terminated;
                state = next;
                obs = outcome.observation;
                if done {
                    break;
                }
            }
            let record = accum.into_record(ep as u64);
            returns.push(record.env_return());
            self.eval_records.push(record);
        }
        self.eval_index += 1;

        if !self.interval_train_returns.is_empty() {
            self.last_train_return = self.interval_train_returns.iter().sum::<f64>()
                / self.interval_train_returns.len() as f64;
            self.interval_train_returns.clear();
        }
        self.curve.push(CurvePoint {
            step: self.global_step,
            eval_return_mean: returns.iter().sum::<f64>() / returns.len() as f64,
            train_return: self.last_train_return,
        });
        self.eval_logs.push((self.global_step, returns));
        Ok(())
    }

    fn finish(mut self, dir: &Path) -> Result<RunArtifacts> {
        // Make sure the run ends with an evaluation point.
        self.evaluate()?;

        write_curve(&dir.join("curve.csv"), &self.curve)?;

        let episodes_path = dir.join("episodes.jsonl");
        let mut file = std::fs::File::create(&episodes_path).map_err(|e| Error::io(&episodes_path, e))?;
        for record in &self.eval_records {
            let line = serde_json::to_string(record).map_err(|e| Error::Serde(e.to_string()))?;
            writeln!(file, "{line}").map_err(|e| Error::io(&episodes_path, e))?;
        }

        self.agent.save(&dir.join("checkpoint.json"))?;

        let window = self.cfg.eval.final_window.min(self.eval_records.len());
        let final_records = &self.eval_records[self.eval_records.len() - window..];
        let curve = crate::metrics::build_return_curve(&self.eval_logs)?;
        let summary = RunSummary::from_records(final_records, curve)?;

        let row = SummaryRow {
            method: self.cfg.feedback.method_name().to_string(),
            alpha: self.cfg.alpha,
            subject: self.cfg.feedback.subject_id().to_string(),
            success_rate: summary.success_rate,
            path_efficiency: summary.path_efficiency,
            mean_collision: summary.mean_collision,
        };
        std::fs::write(dir.join("summary.csv"), metrics::summary_table(&[row]))
            .map_err(|e| Error::io(dir.join("summary.csv"), e))?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?,
        )
        .map_err(|e| Error::io(dir.join("summary.json"), e))?;

        let meta = RunMeta {
            method: self.cfg.feedback.method_name().to_string(),
            subject: self.cfg.feedback.subject_id().to_string(),
            alpha: self.cfg.alpha,
            total_timesteps: self.cfg.total_timesteps,
            update_phases: self.update_phases,
            gradient_updates: self.gradient_updates,
            train_episodes: self.train_episode_count,
        };
        std::fs::write(
            dir.join("run_meta.json"),
            serde_json::to_string_pretty(&meta).map_err(|e| Error::Serde(e.to_string()))?,
        )
        .map_err(|e| Error::io(dir.join("run_meta.json"), e))?;

        std::fs::write(dir.join(DONE_MARKER), "").map_err(|e| Error::io(dir.join(DONE_MARKER), e))?;
        Ok(RunArtifacts {
            dir: dir.to_path_buf(),
            summary,
            meta,
        })
    }
}

fn next_seed(rng: &mut ChaCha12Rng) -> u64 {
    use rand::RngCore;
    rng.next_u64()
}
