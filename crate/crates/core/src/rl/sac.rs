//! Soft actor-critic with twin critics, target networks and a learned
//! entropy temperature. All gradients are computed analytically by the
//! hand-written backward passes in [`crate::rl::mlp`]; the loss/gradient
//! routines are exposed as pure functions of (parameters, batch, noise) so
//! finite-difference oracles can check them directly.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rl::adam::Adam;
use crate::rl::buffer::Transition;
use crate::rl::mlp::MlpNetwork;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Emitted actions are clamped strictly inside (-1, 1).
const ACTION_BOUND: f64 = 1.0 - 1e-12;
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub initial_temperature: f64,
    /// Defaults to -action_dim when unset.
    pub target_entropy: Option<f64>,
    pub hidden_sizes: Vec<usize>,
    pub update_to_data_ratio: u32,
    pub warmup_steps: u32,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            temperature_lr: 3e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            initial_temperature: 0.2,
            target_entropy: None,
            hidden_sizes: vec![32, 32],
            update_to_data_ratio: 1,
            warmup_steps: 1000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma = {} outside (0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau = {} outside (0, 1]", self.tau)));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("temperature_lr", self.temperature_lr),
            ("initial_temperature", self.initial_temperature),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size {} must be in [1, buffer_capacity {}]",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden_sizes must be non-empty and positive".into()));
        }
        if self.update_to_data_ratio == 0 {
            return Err(Error::Config("update_to_data_ratio must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolved_target_entropy(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }
}

/// Actor, twin critics with targets, temperature and optimizer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacState {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub actor: MlpNetwork,
    pub critic1: MlpNetwork,
    pub critic2: MlpNetwork,
    pub target1: MlpNetwork,
    pub target2: MlpNetwork,
    pub log_temp: f64,
    opt_actor: Adam,
    opt_critic1: Adam,
    opt_critic2: Adam,
    opt_temp: Adam,
    pub global_step: u64,
    pub update_count: u64,
}

/// Minibatch in struct-of-arrays layout.
pub struct Batch {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub terminals: Vec<f64>,
    pub len: usize,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let len = items.len();
        let obs_dim = items[0].observation.len();
        let act_dim = items[0].action.len();
        let mut b = Batch {
            obs: Vec::with_capacity(len * obs_dim),
            actions: Vec::with_capacity(len * act_dim),
            rewards: Vec::with_capacity(len),
            next_obs: Vec::with_capacity(len * obs_dim),
            terminals: Vec::with_capacity(len),
            len,
        };
        for t in items {
            b.obs.extend_from_slice(&t.observation);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.r_total);
            b.next_obs.extend_from_slice(&t.next_observation);
            b.terminals.push(if t.terminal { 1.0 } else { 0.0 });
        }
        Ok(b)
    }
}

/// Reparameterized squashed-Gaussian sample for a batch of observations,
/// deterministic given the noise vector.
pub struct PolicySample {
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Per-dim flag: raw log-std hit its clamp (gradient is zero there).
    pub clamped: Vec<bool>,
    pub noise: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_prob: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable log(1 - tanh(u)^2).
fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Run the actor on `obs` and squash `mu + sigma * noise`.
pub fn sample_policy(
    actor: &MlpNetwork,
    obs: &[f64],
    batch: usize,
    noise: &[f64],
) -> (PolicySample, crate::rl::mlp::ForwardCache) {
    let k = actor.output_dim() / 2;
    assert_eq!(noise.len(), batch * k);
    let cache = actor.forward_cached(obs, batch);
    let out = cache.output();
    let mut s = PolicySample {
        mu: vec![0.0; batch * k],
        log_std: vec![0.0; batch * k],
        clamped: vec![false; batch * k],
        noise: noise.to_vec(),
        pre_tanh: vec![0.0; batch * k],
        actions: vec![0.0; batch * k],
        log_prob: vec![0.0; batch],
    };
    for i in 0..batch {
        let row = &out[i * 2 * k..(i + 1) * 2 * k];
        let mut lp = 0.0;
        for j in 0..k {
            let idx = i * k + j;
            let mu = row[j];
            let raw = row[k + j];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sigma = ls.exp();
            let xi = noise[idx];
            let u = mu + sigma * xi;
            s.mu[idx] = mu;
            s.log_std[idx] = ls;
            s.clamped[idx] = raw < LOG_STD_MIN || raw > LOG_STD_MAX;
            s.pre_tanh[idx] = u;
            s.actions[idx] = u.tanh().clamp(-ACTION_BOUND, ACTION_BOUND);
            lp += -0.5 * xi * xi - ls - 0.5 * LN_2PI - log1m_tanh2(u);
        }
        s.log_prob[i] = lp;
    }
    (s, cache)
}

/// Log-density of the squashed Gaussian at a given pre-tanh value; used as
/// an independent check of the sampling path.
pub fn squashed_gaussian_log_prob(mu: &[f64], log_std: &[f64], pre_tanh: &[f64]) -> f64 {
    mu.iter()
        .zip(log_std)
        .zip(pre_tanh)
        .map(|((&m, &ls), &u)| {
            let sigma = ls.exp();
            let z = (u - m) / sigma;
            -0.5 * z * z - ls - 0.5 * LN_2PI - log1m_tanh2(u)
        })
        .sum()
}

/// Mean-squared-error critic loss against fixed targets, with analytic
/// parameter gradients.
pub fn critic_loss_and_grads(
    critic: &MlpNetwork,
    inputs: &[f64],
    batch: usize,
    targets: &[f64],
) -> (f64, Vec<f64>) {
    let cache = critic.forward_cached(inputs, batch);
    let q = cache.output();
    let inv_b = 1.0 / batch as f64;
    let loss: f64 = q
        .iter()
        .zip(targets)
        .map(|(qi, yi)| (qi - yi) * (qi - yi))
        .sum::<f64>()
        * inv_b;
    let d_out: Vec<f64> = q
        .iter()
        .zip(targets)
        .map(|(qi, yi)| 2.0 * (qi - yi) * inv_b)
        .collect();
    let mut grad = vec![0.0; critic.num_params()];
    critic.backward(&cache, &d_out, Some(&mut grad), false);
    (loss, grad)
}

pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_log_prob: f64,
}

/// Actor objective `mean(temperature * log_prob - min(Q1, Q2))` under
/// reparameterized sampling, with analytic gradients through the squashing
/// and both the explicit and pre-tanh log-density terms. Critics are treated
/// as fixed.
pub fn actor_loss_and_grads(
    actor: &MlpNetwork,
    critic1: &MlpNetwork,
    critic2: &MlpNetwork,
    obs: &[f64],
    batch: usize,
    noise: &[f64],
    temperature: f64,
) -> ActorLoss {
    let k = actor.output_dim() / 2;
    let obs_dim = actor.input_dim();
    let (sample, actor_cache) = sample_policy(actor, obs, batch, noise);

    let mut critic_in = vec![0.0; batch * (obs_dim + k)];
    for i in 0..batch {
        critic_in[i * (obs_dim + k)..i * (obs_dim + k) + obs_dim]
            .copy_from_slice(&obs[i * obs_dim..(i + 1) * obs_dim]);
        critic_in[i * (obs_dim + k) + obs_dim..(i + 1) * (obs_dim + k)]
            .copy_from_slice(&sample.actions[i * k..(i + 1) * k]);
    }
    let c1 = critic1.forward_cached(&critic_in, batch);
    let c2 = critic2.forward_cached(&critic_in, batch);
    let q1 = c1.output();
    let q2 = c2.output();

    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut dy1 = vec![0.0; batch];
    let mut dy2 = vec![0.0; batch];
    for i in 0..batch {
        let qmin = q1[i].min(q2[i]);
        loss += (temperature * sample.log_prob[i] - qmin) * inv_b;
        if q1[i] <= q2[i] {
            dy1[i] = -inv_b;
        } else {
            dy2[i] = -inv_b;
        }
    }

    // Gradient of the -min(Q1,Q2) term with respect to the sampled actions.
    let dx1 = critic1.backward(&c1, &dy1, None, true).unwrap();
    let dx2 = critic2.backward(&c2, &dy2, None, true).unwrap();

    let mut d_actor_out = vec![0.0; batch * 2 * k];
    for i in 0..batch {
        for j in 0..k {
            let idx = i * k + j;
            let u = sample.pre_tanh[idx];
            let t = u.tanh();
            let sech2 = 1.0 - t * t;
            let sigma = sample.log_std[idx].exp();
            let xi = sample.noise[idx];
            let d_l_da =
                dx1[i * (obs_dim + k) + obs_dim + j] + dx2[i * (obs_dim + k) + obs_dim + j];
            // d log_prob / du = 2 tanh(u); du/dmu = 1; du/dlog_std = sigma*xi.
            let d_l_du = temperature * 2.0 * t * inv_b + d_l_da * sech2;
            d_actor_out[i * 2 * k + j] = d_l_du;
            if !sample.clamped[idx] {
                d_actor_out[i * 2 * k + k + j] =
                    d_l_du * sigma * xi - temperature * inv_b;
            }
        }
    }
    let mut grad = vec![0.0; actor.num_params()];
    actor.backward(&actor_cache, &d_actor_out, Some(&mut grad), false);

    let mean_log_prob = sample.log_prob.iter().sum::<f64>() * inv_b;
    ActorLoss {
        loss,
        grad,
        mean_log_prob,
    }
}

/// Temperature objective `-log_temp * (mean_log_prob + target_entropy)` with
/// the log-probabilities detached. Returns (loss, d loss / d log_temp).
pub fn temperature_loss_and_grad(
    log_temp: f64,
    mean_log_prob: f64,
    target_entropy: f64,
) -> (f64, f64) {
    let excess = mean_log_prob + target_entropy;
    (-log_temp * excess, -excess)
}

impl SacState {
    pub fn new<R: Rng>(obs_dim: usize, action_dim: usize, cfg: &SacConfig, rng: &mut R) -> Self {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(&cfg.hidden_sizes);
        actor_sizes.push(2 * action_dim);
        let mut critic_sizes = vec![obs_dim + action_dim];
        critic_sizes.extend_from_slice(&cfg.hidden_sizes);
        critic_sizes.push(1);

        let actor = MlpNetwork::new(&actor_sizes, rng);
        let critic1 = MlpNetwork::new(&critic_sizes, rng);
        let critic2 = MlpNetwork::new(&critic_sizes, rng);
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        let opt_actor = Adam::new(cfg.actor_lr, actor.num_params());
        let opt_critic1 = Adam::new(cfg.critic_lr, critic1.num_params());
        let opt_critic2 = Adam::new(cfg.critic_lr, critic2.num_params());
        let opt_temp = Adam::new(cfg.temperature_lr, 1);
        SacState {
            obs_dim,
            action_dim,
            actor,
            critic1,
            critic2,
            target1,
            target2,
            log_temp: cfg.initial_temperature.ln(),
            opt_actor,
            opt_critic1,
            opt_critic2,
            opt_temp,
            global_step: 0,
            update_count: 0,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temp.exp()
    }

    /// Squashed-Gaussian action for one observation. `stochastic` draws
    /// reparameterization noise from `rng`; otherwise the squashed mean.
    pub fn act<R: Rng>(&self, observation: &[f64], stochastic: bool, rng: &mut R) -> Result<Vec<f64>> {
        if observation.len() != self.obs_dim {
            return Err(Error::InvalidInput(format!(
                "observation has dim {}, expected {}",
                observation.len(),
                self.obs_dim
            )));
        }
        if observation.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        let k = self.action_dim;
        let noise: Vec<f64> = if stochastic {
            (0..k).map(|_| StandardNormal.sample(rng)).collect()
        } else {
            vec![0.0; k]
        };
        let (sample, _) = sample_policy(&self.actor, observation, 1, &noise);
        Ok(sample.actions)
    }

    /// TD targets `r + gamma * (1 - terminal) * (min target Q - temp * logp)`
    /// for a batch, with next actions sampled using the given noise.
    pub fn td_targets(&self, batch: &Batch, cfg: &SacConfig, noise: &[f64]) -> Vec<f64> {
        let k = self.action_dim;
        let obs_dim = self.obs_dim;
        let (next_sample, _) = sample_policy(&self.actor, &batch.next_obs, batch.len, noise);
        let mut tin = vec![0.0; batch.len * (obs_dim + k)];
        for i in 0..batch.len {
            tin[i * (obs_dim + k)..i * (obs_dim + k) + obs_dim]
                .copy_from_slice(&batch.next_obs[i * obs_dim..(i + 1) * obs_dim]);
            tin[i * (obs_dim + k) + obs_dim..(i + 1) * (obs_dim + k)]
                .copy_from_slice(&next_sample.actions[i * k..(i + 1) * k]);
        }
        let qt1 = self.target1.forward_batch(&tin, batch.len);
        let qt2 = self.target2.forward_batch(&tin, batch.len);
        let temp = self.temperature();
        (0..batch.len)
            .map(|i| {
                let soft_q = qt1[i].min(qt2[i]) - temp * next_sample.log_prob[i];
                batch.rewards[i] + cfg.gamma * (1.0 - batch.terminals[i]) * soft_q
            })
            .collect()
    }

    /// One optimizer step on both critics. Returns the summed critic loss.
    pub fn update_critics<R: Rng>(
        &mut self,
        batch: &Batch,
        cfg: &SacConfig,
        rng: &mut R,
    ) -> Result<f64> {
        if batch.len == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        let k = self.action_dim;
        let noise: Vec<f64> = (0..batch.len * k).map(|_| StandardNormal.sample(rng)).collect();
        let targets = self.td_targets(batch, cfg, &noise);

        let obs_dim = self.obs_dim;
        let mut cin = vec![0.0; batch.len * (obs_dim + k)];
        for i in 0..batch.len {
            cin[i * (obs_dim + k)..i * (obs_dim + k) + obs_dim]
                .copy_from_slice(&batch.obs[i * obs_dim..(i + 1) * obs_dim]);
            cin[i * (obs_dim + k) + obs_dim..(i + 1) * (obs_dim + k)]
                .copy_from_slice(&batch.actions[i * k..(i + 1) * k]);
        }
        let (l1, g1) = critic_loss_and_grads(&self.critic1, &cin, batch.len, &targets);
        let (l2, g2) = critic_loss_and_grads(&self.critic2, &cin, batch.len, &targets);
        self.opt_critic1.step(self.critic1.params_mut(), &g1);
        self.opt_critic2.step(self.critic2.params_mut(), &g2);
        Ok(l1 + l2)
    }

    /// One optimizer step on the actor. Returns (loss, mean log-prob).
    pub fn update_actor<R: Rng>(
        &mut self,
        batch: &Batch,
        cfg: &SacConfig,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let _ = cfg;
        if batch.len == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        let k = self.action_dim;
        let noise: Vec<f64> = (0..batch.len * k).map(|_| StandardNormal.sample(rng)).collect();
        let result = actor_loss_and_grads(
            &self.actor,
            &self.critic1,
            &self.critic2,
            &batch.obs,
            batch.len,
            &noise,
            self.temperature(),
        );
        self.opt_actor.step(self.actor.params_mut(), &result.grad);
        Ok((result.loss, result.mean_log_prob))
    }

    /// One optimizer step on the temperature. Returns the loss.
    pub fn update_temperature<R: Rng>(
        &mut self,
        batch: &Batch,
        cfg: &SacConfig,
        rng: &mut R,
    ) -> Result<f64> {
        if batch.len == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        let k = self.action_dim;
        let noise: Vec<f64> = (0..batch.len * k).map(|_| StandardNormal.sample(rng)).collect();
        let (sample, _) = sample_policy(&self.actor, &batch.obs, batch.len, &noise);
        let mean_log_prob = sample.log_prob.iter().sum::<f64>() / batch.len as f64;
        let target_entropy = cfg.resolved_target_entropy(self.action_dim);
        let (loss, grad) = temperature_loss_and_grad(self.log_temp, mean_log_prob, target_entropy);
        let mut p = [self.log_temp];
        self.opt_temp.step(&mut p, &[grad]);
        self.log_temp = p[0];
        Ok(loss)
    }

    /// Polyak-average critics into targets: `target <- tau*critic + (1-tau)*target`.
    pub fn soft_update_targets(&mut self, tau: f64) {
        for (critic, target) in [
            (&self.critic1, &mut self.target1),
            (&self.critic2, &mut self.target2),
        ] {
            for (t, c) in target.params_mut().iter_mut().zip(critic.params()) {
                *t = tau * c + (1.0 - tau) * *t;
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
    }
}
