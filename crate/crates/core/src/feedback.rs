//! Simulated evaluative observer and reward integration.
//!
//! Ground-truth action judgments (progress regression or collision) are
//! turned into graded error probabilities `p` by a per-subject confusion
//! model, then folded into the reward through the centered mapping
//! `r_hf = 0.5 - p` and the weighted sum `r_total = r_env + alpha * r_hf`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::env::StepOutcome;
use crate::error::{Error, Result};

/// Mean of the emitted probability distribution when the decoder reads the
/// outcome as an error, and its mirror for the no-error read.
pub const MU_ERROR: f64 = 0.8;
pub const MU_CORRECT: f64 = 0.2;

/// Default ground-truth progress tolerance, meters.
pub const DEFAULT_JUDGE_EPSILON: f64 = 0.005;

/// Per-subject confusion model standing in for a pretrained neural decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverModel {
    pub subject_id: String,
    /// P(decoded as error | true error): sensitivity.
    pub tpr: f64,
    /// P(decoded as no-error | no error): specificity.
    pub tnr: f64,
    /// Concentration of the emitted Beta distributions.
    pub sharpness: f64,
}

impl ObserverModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tpr", self.tpr), ("tnr", self.tnr)] {
            if !(0.5..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "observer {}: {name} = {v} outside [0.5, 1.0]",
                    self.subject_id
                )));
            }
        }
        if !(self.sharpness > 0.0) {
            return Err(Error::Config(format!(
                "observer {}: sharpness must be positive",
                self.subject_id
            )));
        }
        Ok(())
    }
}

/// Why a transition was judged erroneous, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCause {
    MovedAwayFromSubgoal,
    Collision,
    None,
}

/// Ground-truth judgment of the agent's most recent action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorJudgment {
    pub is_error: bool,
    pub cause: ErrorCause,
}

/// One decoded feedback value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackSample {
    pub p: f64,
    pub r_hf: f64,
}

/// The (r_env, r_hf, alpha, r_total) record for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapedReward {
    pub r_env: f64,
    pub r_hf: f64,
    pub alpha: f64,
    pub r_total: f64,
}

/// Judge one transition from the progress measure of the previous step and
/// the outcome of the current one. Collision takes precedence; a distance
/// increase must exceed `epsilon` strictly to count as an error.
pub fn judge_transition(
    prev_distance_to_subgoal: f64,
    curr: &StepOutcome,
    epsilon: f64,
) -> ErrorJudgment {
    if curr.collided {
        ErrorJudgment {
            is_error: true,
            cause: ErrorCause::Collision,
        }
    } else if curr.distance_to_subgoal - prev_distance_to_subgoal > epsilon {
        ErrorJudgment {
            is_error: true,
            cause: ErrorCause::MovedAwayFromSubgoal,
        }
    } else {
        ErrorJudgment {
            is_error: false,
            cause: ErrorCause::None,
        }
    }
}

/// Draw one decoded probability for a judged transition.
///
/// The decoder first commits to a side of 0.5 (correct side with probability
/// `tpr` for errors, `tnr` for non-errors), then draws a graded confidence
/// from the matching Beta component, `Beta(sharpness*mu, sharpness*(1-mu))`
/// with `mu` 0.8 on the error side and 0.2 on the no-error side, conditioned
/// on that side. The conditioning makes thresholded accuracy equal the
/// configured (tpr, tnr) exactly, independent of sharpness.
pub fn simulate_decoder<R: Rng>(
    judgment: &ErrorJudgment,
    model: &ObserverModel,
    rng: &mut R,
) -> FeedbackSample {
    let says_error = if judgment.is_error {
        rng.random::<f64>() < model.tpr
    } else {
        !(rng.random::<f64>() < model.tnr)
    };
    let mu = if says_error { MU_ERROR } else { MU_CORRECT };
    let beta = Beta::new(model.sharpness * mu, model.sharpness * (1.0 - mu))
        .expect("valid Beta parameters for sharpness > 0");
    let p = loop {
        let x = beta.sample(rng);
        if (x > 0.5) == says_error {
            break x;
        }
    };
    FeedbackSample { p, r_hf: 0.5 - p }
}

/// Centered mapping plus weighted sum: `r_hf = 0.5 - p`,
/// `r_total = r_env + alpha * r_hf`.
pub fn shape_reward(r_env: f64, p: f64, alpha: f64) -> Result<ShapedReward> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("p = {p} outside [0, 1]")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be >= 0")));
    }
    let r_hf = 0.5 - p;
    Ok(ShapedReward {
        r_env,
        r_hf,
        alpha,
        r_total: r_env + alpha * r_hf,
    })
}

/// Load a replayed decoder-probability stream.
///
/// Format: header line `step,p`, then one row per timestep with the step
/// index counting up from 0 without gaps and `p` in [0, 1].
pub fn load_probability_stream(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "step,p" => {}
        Some((_, header)) => {
            return Err(Error::Format {
                path: path.into(),
                row: 1,
                message: format!("expected header 'step,p', found '{header}'"),
            })
        }
        None => {
            return Err(Error::Format {
                path: path.into(),
                row: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Format {
            path: path.into(),
            row,
            message,
        };
        let (step_s, p_s) = line
            .split_once(',')
            .ok_or_else(|| fail("expected 'step,p'".into()))?;
        let step: usize = step_s
            .trim()
            .parse()
            .map_err(|_| fail(format!("bad step index '{step_s}'")))?;
        if step != out.len() {
            return Err(fail(format!(
                "non-monotonic step index: expected {}, found {step}",
                out.len()
            )));
        }
        let p: f64 = p_s
            .trim()
            .parse()
            .map_err(|_| fail(format!("bad probability '{p_s}'")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(fail(format!("p = {p} outside [0, 1]")));
        }
        out.push(p);
    }
    Ok(out)
}

/// Write a probability stream in the format [`load_probability_stream`] reads.
pub fn save_probability_stream(path: &Path, probabilities: &[f64]) -> Result<()> {
    let mut text = String::from("step,p\n");
    for (i, p) in probabilities.iter().enumerate() {
        writeln!(text, "{i},{p}").expect("writing to string");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A bank of observer models keyed by subject id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverBank {
    pub subjects: Vec<ObserverModel>,
}

impl ObserverBank {
    /// Twelve subjects with `tpr = tnr` evenly spaced over [0.60, 0.90],
    /// mirroring inter-individual decoder variability.
    pub fn default_bank() -> Self {
        let n = 12;
        let subjects = (0..n)
            .map(|i| {
                let acc = 0.60 + 0.30 * i as f64 / (n - 1) as f64;
                ObserverModel {
                    subject_id: format!("s{:02}", i + 1),
                    tpr: acc,
                    tnr: acc,
                    sharpness: 25.0,
                }
            })
            .collect();
        ObserverBank { subjects }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bank: ObserverBank =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Config("observer bank is empty".into()));
        }
        for s in &self.subjects {
            s.validate()?;
        }
        let mut ids: Vec<&str> = self.subjects.iter().map(|s| s.subject_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.subjects.len() {
            return Err(Error::Config("duplicate subject ids in observer bank".into()));
        }
        Ok(())
    }

    pub fn get(&self, subject_id: &str) -> Result<&ObserverModel> {
        self.subjects
            .iter()
            .find(|s| s.subject_id == subject_id)
            .ok_or_else(|| Error::Config(format!("subject '{subject_id}' not in observer bank")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
