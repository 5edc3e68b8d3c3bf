//! Plot-ready table export from finished run directories. No rendering:
//! figures are produced externally from these delimiter-separated files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn dir_name(path: &Path) -> String {
    path.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

/// Load (step, eval return) curves for every seed directory under `group`,
/// collecting incomplete cells instead of failing fast.
fn load_group_curves(
    group: &Path,
    missing: &mut Vec<PathBuf>,
) -> Result<Vec<Vec<(u64, f64)>>> {
    let mut curves = Vec::new();
    for seed_dir in sorted_subdirs(group)? {
        if !seed_dir.join("DONE").exists() {
            missing.push(seed_dir);
            continue;
        }
        curves.push(super::study::load_run_curve(&seed_dir)?);
    }
    Ok(curves)
}

fn curve_stats(curves: &[Vec<(u64, f64)>]) -> Vec<(u64, f64, f64)> {
    // Aggregate by step so curves with differing checkpoint sets still align.
    let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for curve in curves {
        for &(step, v) in curve {
            by_step.entry(step).or_default().push(v);
        }
    }
    by_step
        .into_iter()
        .map(|(step, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (step, mean, var.sqrt())
        })
        .collect()
}

fn incomplete_error(missing: Vec<PathBuf>) -> Error {
    let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
    Error::Usage(format!("incomplete runs: {}", list.join(", ")))
}

/// Emit `fig2_curves.csv` under `<out_root>/sweep`: per-alpha mean and std
/// evaluation-return curves across seeds.
pub fn export_sweep_plots(out_root: &Path) -> Result<Vec<PathBuf>> {
    let sweep = out_root.join("sweep");
    let mut missing = Vec::new();
    let mut table = String::from("alpha,step,mean_return,std_return\n");
    for alpha_dir in sorted_subdirs(&sweep)? {
        let alpha = dir_name(&alpha_dir);
        for subject_dir in sorted_subdirs(&alpha_dir)? {
            let curves = load_group_curves(&subject_dir, &mut missing)?;
            for (step, mean, std) in curve_stats(&curves) {
                table.push_str(&format!(
                    "{alpha},{step},{},{}\n",
                    fmt_f64(mean),
                    fmt_f64(std)
                ));
            }
        }
    }
    if !missing.is_empty() {
        return Err(incomplete_error(missing));
    }
    let path = sweep.join("fig2_curves.csv");
    std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
    Ok(vec![path])
}

/// Emit one `fig3_<subject>.csv` per subject under `<out_root>/loso`: the
/// subject's mean/std feedback curve paired with the shared sparse baseline.
pub fn export_loso_plots(out_root: &Path) -> Result<Vec<PathBuf>> {
    let loso = out_root.join("loso");
    let mut missing = Vec::new();

    let sparse_curves = load_group_curves(&loso.join("sparse").join("none"), &mut missing)?;
    if sparse_curves.is_empty() && missing.is_empty() {
        return Err(Error::Usage(format!(
            "no sparse baseline runs under {}",
            loso.join("sparse").join("none").display()
        )));
    }
    let sparse_stats = curve_stats(&sparse_curves);

    let mut subject_tables: Vec<(String, Vec<(u64, f64, f64)>)> = Vec::new();
    for alpha_dir in sorted_subdirs(&loso)? {
        if dir_name(&alpha_dir) == "sparse" {
            continue;
        }
        for subject_dir in sorted_subdirs(&alpha_dir)? {
            let curves = load_group_curves(&subject_dir, &mut missing)?;
            if !curves.is_empty() {
                subject_tables.push((dir_name(&subject_dir), curve_stats(&curves)));
            }
        }
    }
    if !missing.is_empty() {
        return Err(incomplete_error(missing));
    }

    let mut written = Vec::new();
    for (subject, stats) in subject_tables {
        let mut table = String::from("step,rlihf_mean,rlihf_std,sparse_mean,sparse_std\n");
        for ((step, m, s), (sp_step, sp_m, sp_s)) in stats.iter().zip(&sparse_stats) {
            debug_assert_eq!(step, sp_step);
            table.push_str(&format!(
                "{step},{},{},{},{}\n",
                fmt_f64(*m),
                fmt_f64(*s),
                fmt_f64(*sp_m),
                fmt_f64(*sp_s)
            ));
        }
        let path = loso.join(format!("fig3_{subject}.csv"));
        std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
