//! Evaluation quantities: success rate, path efficiency, collision counts
//! and return curves, aggregated as mean plus-or-minus population standard
//! deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// One evaluated episode; the unit every metric aggregates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub end_effector_path: Vec<Point>,
    pub per_step_r_env: Vec<f64>,
    pub per_step_r_total: Vec<f64>,
    pub collision_steps: u32,
    pub success: bool,
    pub episode_index: u64,
    pub global_step_at_start: u64,
}

impl EpisodeRecord {
    pub fn env_return(&self) -> f64 {
        self.per_step_r_env.iter().sum()
    }

    pub fn total_return(&self) -> f64 {
        self.per_step_r_total.iter().sum()
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: impl ExactSizeIterator<Item = f64> + Clone) -> Result<MeanStd> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Usage("empty record list".into()));
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Ok(MeanStd {
        mean,
        std: var.sqrt(),
    })
}

/// Straight-line displacement divided by polyline arc length, in (0, 1].
/// A path with zero arc length scores 1 by convention.
pub fn path_efficiency(path: &[Point]) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::InvalidInput("empty path".into()));
    }
    if path.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite path coordinate".into()));
    }
    let arc: f64 = path.windows(2).map(|w| geom::dist(w[0], w[1])).sum();
    if arc == 0.0 {
        return Ok(1.0);
    }
    let straight = geom::dist(path[0], *path.last().unwrap());
    Ok((straight / arc).min(1.0))
}

pub fn success_rate(records: &[EpisodeRecord]) -> Result<MeanStd> {
    mean_std(
        records
            .iter()
            .map(|r| if r.success { 1.0 } else { 0.0 })
            .collect::<Vec<_>>()
            .into_iter(),
    )
}

pub fn mean_collision(records: &[EpisodeRecord]) -> Result<MeanStd> {
    mean_std(
        records
            .iter()
            .map(|r| r.collision_steps as f64)
            .collect::<Vec<_>>()
            .into_iter(),
    )
}

pub fn mean_path_efficiency(records: &[EpisodeRecord]) -> Result<MeanStd> {
    let effs: Vec<f64> = records
        .iter()
        .map(|r| path_efficiency(&r.end_effector_path))
        .collect::<Result<_>>()?;
    mean_std(effs.into_iter())
}

/// Per evaluation checkpoint, the mean return over its episodes.
/// Steps must be strictly increasing.
pub fn build_return_curve(evaluations: &[(u64, Vec<f64>)]) -> Result<Vec<(u64, f64)>> {
    if evaluations.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidInput(
            "evaluation steps must be strictly increasing".into(),
        ));
    }
    evaluations
        .iter()
        .map(|(step, returns)| {
            if returns.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "evaluation at step {step} has no episodes"
                )));
            }
            Ok((*step, returns.iter().sum::<f64>() / returns.len() as f64))
        })
        .collect()
}

/// Trapezoidal area under a return curve.
pub fn auc_trapezoid(curve: &[(u64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| 0.5 * (w[1].1 + w[0].1) * (w[1].0 - w[0].0) as f64)
        .sum()
}

/// Aggregated quantities for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub success_rate: MeanStd,
    pub path_efficiency: MeanStd,
    pub mean_collision: MeanStd,
    pub return_curve: Vec<(u64, f64)>,
}

impl RunSummary {
    /// Table-style summary over `records` (typically the final evaluation
    /// episodes) plus the evaluation return curve.
    pub fn from_records(records: &[EpisodeRecord], return_curve: Vec<(u64, f64)>) -> Result<Self> {
        Ok(RunSummary {
            success_rate: success_rate(records)?,
            path_efficiency: mean_path_efficiency(records)?,
            mean_collision: mean_collision(records)?,
            return_curve,
        })
    }

    pub fn auc(&self) -> f64 {
        auc_trapezoid(&self.return_curve)
    }
}

/// One row of the emitted summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub alpha: f64,
    pub subject: String,
    pub success_rate: MeanStd,
    pub path_efficiency: MeanStd,
    pub mean_collision: MeanStd,
}

pub const SUMMARY_HEADER: &str = "method,alpha,subject,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,mean_collision_mean,mean_collision_std";

pub fn summary_table(rows: &[SummaryRow]) -> String {
    use crate::fmt::fmt_f64;
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            fmt_f64(r.alpha),
            r.subject,
            fmt_f64(r.success_rate.mean),
            fmt_f64(r.success_rate.std),
            fmt_f64(r.path_efficiency.mean),
            fmt_f64(r.path_efficiency.std),
            fmt_f64(r.mean_collision.mean),
            fmt_f64(r.mean_collision.std),
        ));
    }
    out
}
