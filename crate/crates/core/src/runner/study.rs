//! The two experimental protocols: the feedback-weight sweep and the
//! cross-subject robustness study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::ObserverBank;
use crate::fmt::fmt_f64;
use crate::metrics::{MeanStd, SummaryRow};
use crate::rng::cell_seed;
use crate::runner::trainer::{train_single, RunArtifacts};
use crate::runner::{
    read_curve, smooth_curve, shifted_auc, steps_to_threshold, ExperimentConfig, FeedbackSource,
    SweepSpec,
};

/// Canonical directory label for a feedback weight.
pub fn alpha_label(alpha: f64) -> String {
    format!("{alpha}")
}

/// One failed cell; sweeps record failures and keep going.
#[derive(Debug, Clone)]
pub struct CellFailure {
    pub dir: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// One Table-style row per alpha, pooled over seeds and eval episodes.
    pub summary_rows: Vec<SummaryRow>,
    /// Per alpha: mean and std over seeds of the floor-shifted eval AUC.
    pub auc_rows: Vec<(f64, MeanStd)>,
    pub failures: Vec<CellFailure>,
}

struct Cell {
    cfg: ExperimentConfig,
    alpha: f64,
    seed: u32,
}

fn make_cell(
    base: &ExperimentConfig,
    alpha: f64,
    seed: u32,
    feedback: FeedbackSource,
    dir: PathBuf,
) -> Cell {
    let mut cfg = base.clone();
    cfg.alpha = alpha;
    cfg.feedback = feedback;
    // Env/policy/buffer streams depend only on (base master seed, seed
    // index), so cells at the same seed are paired across alphas and
    // subjects; the decoder stream additionally folds in the subject id.
    cfg.master_seed = cell_seed(base.master_seed, seed);
    cfg.out_dir = Some(dir);
    Cell { cfg, alpha, seed }
}

fn run_cells(cells: &[Cell], workers: usize, force: bool) -> (Vec<(usize, RunArtifacts)>, Vec<CellFailure>) {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("building worker pool");
    let results: Vec<(usize, std::result::Result<RunArtifacts, String>)> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| (i, train_single(&cell.cfg, force).map_err(|e| e.to_string())))
            .collect()
    });
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(a) => ok.push((i, a)),
            Err(message) => failures.push(CellFailure {
                dir: cells[i].cfg.out_dir.clone().unwrap_or_default(),
                message,
            }),
        }
    }
    ok.sort_by_key(|(i, _)| *i);
    (ok, failures)
}

/// Pool equal-sized per-run (mean, std) groups into one mean/std.
fn pool_mean_std(groups: &[MeanStd]) -> MeanStd {
    let n = groups.len() as f64;
    let mean = groups.iter().map(|g| g.mean).sum::<f64>() / n;
    let second_moment = groups
        .iter()
        .map(|g| g.std * g.std + g.mean * g.mean)
        .sum::<f64>()
        / n;
    MeanStd {
        mean,
        std: (second_moment - mean * mean).max(0.0).sqrt(),
    }
}

fn mean_std_of(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Worst attainable evaluation return for a scene; AUCs are measured from
/// this floor so they stay positive and comparable.
pub fn auc_floor(cfg: &ExperimentConfig) -> f64 {
    cfg.scene.horizon as f64 * cfg.scene.collision_penalty.min(0.0)
}

/// One `train_single` per (alpha, seed) cell. An alpha of exactly 0 runs as
/// the sparse baseline (feedback disabled); if 0 is absent from the grid the
/// baseline is added automatically.
pub fn alpha_sweep(
    base: &ExperimentConfig,
    spec: &SweepSpec,
    out_root: &Path,
    workers: usize,
    force: bool,
) -> Result<SweepOutcome> {
    spec.validate()?;
    let observer = match &base.feedback {
        FeedbackSource::Simulated { observer } => observer.clone(),
        _ => {
            return Err(Error::Config(
                "alpha_sweep needs a simulated observer in the base config".into(),
            ))
        }
    };
    let mut alphas = spec.alphas.clone();
    if !alphas.contains(&0.0) {
        alphas.insert(0, 0.0);
    }
    alphas.sort_by(f64::total_cmp);
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();

    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &seed in &seeds {
            let (feedback, subject) = if alpha == 0.0 {
                (FeedbackSource::Disabled, "none".to_string())
            } else {
                (
                    FeedbackSource::Simulated {
                        observer: observer.clone(),
                    },
                    observer.subject_id.clone(),
                )
            };
            let dir = out_root
                .join("sweep")
                .join(alpha_label(alpha))
                .join(&subject)
                .join(seed.to_string());
            cells.push(make_cell(base, alpha, seed, feedback, dir));
        }
    }

    let (completed, failures) = run_cells(&cells, workers, force);

    let floor = auc_floor(base);
    let mut summary_rows = Vec::new();
    let mut auc_rows = Vec::new();
    let mut auc_csv = String::from("alpha,seed,auc\n");
    for &alpha in &alphas {
        let runs: Vec<&RunArtifacts> = completed
            .iter()
            .filter(|(i, _)| cells[*i].alpha == alpha)
            .map(|(_, a)| a)
            .collect();
        if runs.is_empty() {
            continue;
        }
        let aucs: Vec<f64> = runs
            .iter()
            .map(|a| shifted_auc(&a.summary.return_curve, floor))
            .collect();
        for ((i, _), auc) in completed
            .iter()
            .filter(|(i, _)| cells[*i].alpha == alpha)
            .zip(&aucs)
        {
            auc_csv.push_str(&format!(
                "{},{},{}\n",
                alpha_label(alpha),
                cells[*i].seed,
                fmt_f64(*auc)
            ));
        }
        summary_rows.push(SummaryRow {
            method: if alpha == 0.0 { "sparse" } else { "rlihf" }.to_string(),
            alpha,
            subject: if alpha == 0.0 {
                "none".to_string()
            } else {
                observer.subject_id.clone()
            },
            success_rate: pool_mean_std(
                &runs.iter().map(|a| a.summary.success_rate).collect::<Vec<_>>(),
            ),
            path_efficiency: pool_mean_std(
                &runs.iter().map(|a| a.summary.path_efficiency).collect::<Vec<_>>(),
            ),
            mean_collision: pool_mean_std(
                &runs.iter().map(|a| a.summary.mean_collision).collect::<Vec<_>>(),
            ),
        });
        auc_rows.push((alpha, mean_std_of(&aucs)));
    }

    let sweep_dir = out_root.join("sweep");
    std::fs::create_dir_all(&sweep_dir).map_err(|e| Error::io(&sweep_dir, e))?;
    std::fs::write(
        sweep_dir.join("sweep_summary.csv"),
        crate::metrics::summary_table(&summary_rows),
    )
    .map_err(|e| Error::io(sweep_dir.join("sweep_summary.csv"), e))?;
    let mut auc_agg = String::from("alpha,auc_mean,auc_std\n");
    for (alpha, ms) in &auc_rows {
        auc_agg.push_str(&format!(
            "{},{},{}\n",
            alpha_label(*alpha),
            fmt_f64(ms.mean),
            fmt_f64(ms.std)
        ));
    }
    std::fs::write(sweep_dir.join("auc.csv"), format!("{auc_csv}\n{auc_agg}"))
        .map_err(|e| Error::io(sweep_dir.join("auc.csv"), e))?;

    Ok(SweepOutcome {
        summary_rows,
        auc_rows,
        failures,
    })
}

/// Per-subject acceleration report from the cross-subject study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReportRow {
    pub subject: String,
    pub tpr: f64,
    pub tnr: f64,
    /// Ratio of seed-mean floor-shifted eval AUC, feedback over sparse.
    pub auc_ratio: f64,
    /// Median over seeds of the paired steps-to-threshold ratio; runs that
    /// never reach the threshold are censored at the step budget.
    pub steps_to_threshold_ratio: f64,
}

/// Run the fixed-alpha study over every requested subject, paired against
/// shared sparse baselines at the same seeds.
pub fn loso_eval(
    base: &ExperimentConfig,
    bank: &ObserverBank,
    subjects: &[String],
    alpha: f64,
    seeds: &[u32],
    out_root: &Path,
    workers: usize,
    force: bool,
) -> Result<(Vec<LosoReportRow>, Vec<CellFailure>)> {
    bank.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("loso needs at least one seed".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Config("loso alpha must be > 0".into()));
    }
    let subject_ids: Vec<String> = if subjects.len() == 1 && subjects[0] == "all" {
        bank.subjects.iter().map(|s| s.subject_id.clone()).collect()
    } else {
        subjects.to_vec()
    };
    // Fail fast on unknown subjects.
    for id in &subject_ids {
        bank.get(id)?;
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();

    let mut cells = Vec::new();
    for &seed in &seeds {
        let dir = out_root.join("loso").join("sparse").join("none").join(seed.to_string());
        cells.push(make_cell(base, 0.0, seed, FeedbackSource::Disabled, dir));
    }
    for id in &subject_ids {
        let observer = bank.get(id)?.clone();
        for &seed in &seeds {
            let dir = out_root
                .join("loso")
                .join(alpha_label(alpha))
                .join(id)
                .join(seed.to_string());
            cells.push(make_cell(
                base,
                alpha,
                seed,
                FeedbackSource::Simulated { observer: observer.clone() },
                dir,
            ));
        }
    }

    let (completed, failures) = run_cells(&cells, workers, force);
    if !failures.is_empty() {
        return Ok((Vec::new(), failures));
    }

    let floor = auc_floor(base);
    let window = base.eval.smoothing_window;
    let total = base.total_timesteps as u64;

    // Index completed runs by cell index.
    let artifact = |idx: usize| -> &RunArtifacts {
        &completed.iter().find(|(i, _)| *i == idx).expect("cell completed").1
    };

    // Sparse curves, one per seed, in `seeds` order (cells 0..seeds.len()).
    let sparse: Vec<(f64, Option<u64>, f64)> = (0..seeds.len())
        .map(|i| {
            let a = artifact(i);
            let curve = &a.summary.return_curve;
            let smoothed = smooth_curve(curve, window);
            let final_return = smoothed.last().map(|p| p.1).unwrap_or(0.0);
            let threshold = 0.8 * final_return;
            (
                shifted_auc(curve, floor),
                steps_to_threshold(&smoothed, threshold),
                threshold,
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut report_csv = String::from(
        "subject,tpr,tnr,auc_ratio,steps_to_threshold_ratio\n",
    );
    for (s_idx, id) in subject_ids.iter().enumerate() {
        let model = bank.get(id)?;
        let mut auc_pairs = Vec::new();
        let mut step_ratios = Vec::new();
        for (k, _seed) in seeds.iter().enumerate() {
            let cell_idx = seeds.len() + s_idx * seeds.len() + k;
            let a = artifact(cell_idx);
            let curve = &a.summary.return_curve;
            let smoothed = smooth_curve(curve, window);
            let (sparse_auc, sparse_steps, threshold) = sparse[k];
            let rl_auc = shifted_auc(curve, floor);
            auc_pairs.push((rl_auc, sparse_auc));
            let rl_steps = steps_to_threshold(&smoothed, threshold).unwrap_or(total) as f64;
            let sp_steps = sparse_steps.unwrap_or(total) as f64;
            step_ratios.push(rl_steps / sp_steps.max(1.0));
        }
        let mean_rl: f64 = auc_pairs.iter().map(|p| p.0).sum::<f64>() / auc_pairs.len() as f64;
        let mean_sp: f64 = auc_pairs.iter().map(|p| p.1).sum::<f64>() / auc_pairs.len() as f64;
        step_ratios.sort_by(f64::total_cmp);
        let median = step_ratios[step_ratios.len() / 2];
        let row = LosoReportRow {
            subject: id.clone(),
            tpr: model.tpr,
            tnr: model.tnr,
            auc_ratio: mean_rl / mean_sp,
            steps_to_threshold_ratio: median,
        };
        report_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.subject,
            fmt_f64(row.tpr),
            fmt_f64(row.tnr),
            fmt_f64(row.auc_ratio),
            fmt_f64(row.steps_to_threshold_ratio)
        ));
        rows.push(row);
    }

    let loso_dir = out_root.join("loso");
    std::fs::create_dir_all(&loso_dir).map_err(|e| Error::io(&loso_dir, e))?;
    std::fs::write(loso_dir.join("loso_report.csv"), report_csv)
        .map_err(|e| Error::io(loso_dir.join("loso_report.csv"), e))?;
    Ok((rows, failures))
}

/// Per-seed curves for a finished run directory.
pub fn load_run_curve(dir: &Path) -> Result<Vec<(u64, f64)>> {
    let points = read_curve(&dir.join("curve.csv"))?;
    Ok(points.iter().map(|p| (p.step, p.eval_return_mean)).collect())
}
