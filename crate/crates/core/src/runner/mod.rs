//! Experiment orchestration: single training runs, the feedback-weight
//! sweep and the cross-subject study, all deterministic and resumable.

mod export;
mod study;
mod trainer;

pub use export::{export_loso_plots, export_sweep_plots};
pub use study::{alpha_sweep, loso_eval, CellFailure, LosoReportRow, SweepOutcome};
pub use trainer::{train_single, RunArtifacts, RunMeta};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::SceneSpec;
use crate::error::{Error, Result};
use crate::feedback::{ObserverModel, DEFAULT_JUDGE_EPSILON};
use crate::fmt::fmt_f64;
use crate::rl::sac::SacConfig;

/// Where per-step feedback probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedbackSource {
    /// No feedback channel; `r_total == r_env`.
    Disabled,
    /// Parametric observer model generating probabilities online.
    Simulated { observer: ObserverModel },
    /// Replay of a recorded probability stream.
    Stream { path: PathBuf },
}

impl FeedbackSource {
    pub fn subject_id(&self) -> &str {
        match self {
            FeedbackSource::Simulated { observer } => &observer.subject_id,
            FeedbackSource::Disabled => "none",
            FeedbackSource::Stream { .. } => "stream",
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            FeedbackSource::Disabled => "sparse",
            _ => "rlihf",
        }
    }
}

/// Evaluation cadence and summary window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalProtocol {
    /// Evaluate every this many training steps.
    pub interval: u32,
    /// Deterministic-policy episodes per evaluation.
    pub episodes: u32,
    /// Table summaries are computed over this many final eval episodes.
    pub final_window: usize,
    /// Moving-average window (in checkpoints) for steps-to-threshold.
    pub smoothing_window: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            interval: 5000,
            episodes: 10,
            final_window: 100,
            smoothing_window: 5,
        }
    }
}

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSpec,
    #[serde(default)]
    pub sac: SacConfig,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_feedback")]
    pub feedback: FeedbackSource,
    pub total_timesteps: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub eval: EvalProtocol,
    #[serde(default = "default_judge_epsilon")]
    pub judge_epsilon: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_feedback() -> FeedbackSource {
    FeedbackSource::Disabled
}

fn default_judge_epsilon() -> f64 {
    DEFAULT_JUDGE_EPSILON
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.sac.validate()?;
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if self.total_timesteps <= self.sac.warmup_steps {
            return Err(Error::Config(format!(
                "total_timesteps {} must exceed warmup_steps {}",
                self.total_timesteps, self.sac.warmup_steps
            )));
        }
        if self.eval.interval == 0 || self.eval.episodes == 0 || self.eval.final_window == 0 {
            return Err(Error::Config("eval protocol fields must be positive".into()));
        }
        if !(self.judge_epsilon >= 0.0) {
            return Err(Error::Config("judge_epsilon must be >= 0".into()));
        }
        match &self.feedback {
            FeedbackSource::Simulated { observer } => observer.validate()?,
            FeedbackSource::Stream { path } => {
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "probability stream {} does not exist",
                        path.display()
                    )));
                }
            }
            FeedbackSource::Disabled => {}
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Grid for the sweep and cross-subject protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub seeds: Vec<u32>,
    /// Subject ids drawn from the observer bank; `["all"]` selects every one.
    #[serde(default)]
    pub subjects: Vec<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep alphas and seeds must be non-empty".into()));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("sweep alphas must be >= 0".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("duplicate seeds in sweep spec".into()));
        }
        let mut alphas = self.alphas.clone();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        if alphas.len() != self.alphas.len() {
            return Err(Error::Config("duplicate alphas in sweep spec".into()));
        }
        Ok(())
    }
}

/// One point of an emitted learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub eval_return_mean: f64,
    pub train_return: f64,
}

pub const CURVE_HEADER: &str = "step,eval_return_mean,train_return";

pub fn write_curve(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.step,
            fmt_f64(p.eval_return_mean),
            fmt_f64(p.train_return)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CURVE_HEADER => {}
        other => {
            return Err(Error::Format {
                path: path.into(),
                row: 1,
                message: format!("bad curve header: {other:?}"),
            })
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |m: String| Error::Format {
            path: path.into(),
            row: idx + 1,
            message: m,
        };
        let mut it = line.split(',');
        let step = it
            .next()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| fail("bad step".into()))?;
        let eval_return_mean = it
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| fail("bad eval return".into()))?;
        let train_return = it
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| fail("bad train return".into()))?;
        points.push(CurvePoint {
            step,
            eval_return_mean,
            train_return,
        });
    }
    Ok(points)
}

/// Trailing moving average of the evaluation returns.
pub fn smooth_curve(points: &[(u64, f64)], window: usize) -> Vec<(u64, f64)> {
    let w = window.max(1);
    points
        .iter()
        .enumerate()
        .map(|(i, &(step, _))| {
            let lo = i.saturating_sub(w - 1);
            let vals = &points[lo..=i];
            let mean = vals.iter().map(|p| p.1).sum::<f64>() / vals.len() as f64;
            (step, mean)
        })
        .collect()
}

/// First step at which the smoothed return reaches `threshold`.
pub fn steps_to_threshold(smoothed: &[(u64, f64)], threshold: f64) -> Option<u64> {
    smoothed.iter().find(|(_, v)| *v >= threshold).map(|(s, _)| *s)
}

/// Area under the curve measured from the worst attainable eval return, so
/// comparisons stay meaningful when raw returns straddle zero.
pub fn shifted_auc(points: &[(u64, f64)], floor: f64) -> f64 {
    let shifted: Vec<(u64, f64)> = points.iter().map(|&(s, v)| (s, v - floor)).collect();
    crate::metrics::auc_trapezoid(&shifted)
}
