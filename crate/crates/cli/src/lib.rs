//! Command-line front end: config parsing with dotted-path overrides,
//! subcommands for each protocol, and plot-ready data export.
//!
//! Exit codes: 0 success, 2 config error, 3 partial-sweep failure or
//! incomplete export input.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use rlihf_core::env::Action;
use rlihf_core::feedback::ObserverBank;
use rlihf_core::metrics::{EpisodeRecord, RunSummary};
use rlihf_core::rl::SacState;
use rlihf_core::runner::{
    alpha_sweep, export_loso_plots, export_sweep_plots, loso_eval, train_single,
    ExperimentConfig, SweepSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Environment variable supplying the default worker count.
pub const WORKERS_ENV: &str = "RLIHF_WORKERS";

#[derive(Parser)]
#[command(name = "rlihf", about = "Sparse-reward reaching with simulated evaluative feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path overrides applied after parsing, e.g. --set alpha=0.3
    /// or --set scene.horizon=200.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Comma-separated feedback weights.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    alphas: Vec<f64>,
    /// Comma-separated seed indices.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3, 4])]
    seeds: Vec<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single configuration.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        force: bool,
        /// Print the resolved config before running.
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Run the feedback-weight sweep over (alpha, seed) cells.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Root output directory for the sweep.
        #[arg(long)]
        out: PathBuf,
        /// Parallel cell workers; defaults to $RLIHF_WORKERS or 1.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = false)]
        force: bool,
    },
    /// Run the cross-subject study at a fixed alpha.
    Loso {
        #[command(flatten)]
        config: ConfigArgs,
        /// Observer bank file; defaults to the built-in twelve-subject bank.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Subjects to run; "all" selects the whole bank.
        #[arg(long, value_delimiter = ',', default_values_t = vec!["all".to_string()])]
        subjects: Vec<String>,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3, 4])]
        seeds: Vec<u32>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = false)]
        force: bool,
    },
    /// Evaluate a saved checkpoint with the deterministic policy.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: u32,
    },
    /// Export plot-ready curve tables from a finished run directory.
    ExportPlots {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Parse, override, validate and print a config.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the resolved config on success.
        #[arg(long, default_value_t = false)]
        print: bool,
    },
}

/// Apply one `key=value` override to a parsed TOML tree.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), String> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| format!("override '{spec}' is not KEY=VALUE"))?;
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .map(|mut t| t.remove("v").unwrap())
        .or_else(|_| {
            toml::from_str::<toml::Table>(&format!("v = \"{value}\""))
                .map(|mut t| t.remove("v").unwrap())
        })
        .map_err(|e| format!("override '{spec}': cannot parse value: {e}"))?;

    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| format!("override '{spec}': '{}' is not a table", parts[..i].join(".")))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("key split yields at least one part");
}

/// Parse the config file, apply overrides, deserialize and validate.
pub fn resolve_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut tree: toml::Value = toml::from_str(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    let cfg: ExperimentConfig = tree
        .try_into()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn workers_or_default(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

fn eval_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    episodes: u32,
) -> Result<RunSummary, String> {
    use rlihf_core::env::Environment;
    let agent = SacState::load(checkpoint).map_err(|e| e.to_string())?;
    let env = Environment::new(cfg.scene.clone()).map_err(|e| e.to_string())?;
    let num_links = cfg.scene.action_dim();
    let mut records = Vec::new();
    let mut returns = Vec::new();
    let mut rng = rlihf_core::rng::derive_stream(cfg.master_seed, rlihf_core::rng::StreamKind::Eval);
    for ep in 0..episodes {
        let seed = rlihf_core::rng::eval_seed(cfg.master_seed, u32::MAX, ep);
        let mut state = env.reset(seed);
        let (mut obs, _) = env.observe(&state);
        let ee = |o: &[f64]| [o[num_links], o[num_links + 1], o[num_links + 2]];
        let mut path = vec![ee(&obs)];
        let mut r_env = Vec::new();
        let mut collisions = 0u32;
        let mut success = false;
        loop {
            let a = agent.act(&obs, false, &mut rng).map_err(|e| e.to_string())?;
            let (next, out) = env
                .step(&state, &Action { joint_velocity_commands: a })
                .map_err(|e| e.to_string())?;
            path.push(ee(&out.observation));
            r_env.push(out.r_env);
            collisions += out.collided as u32;
            success |= out.success;
            let done = out.terminated;
            state = next;
            obs = out.observation;
            if done {
                break;
            }
        }
        returns.push(r_env.iter().sum::<f64>());
        records.push(EpisodeRecord {
            end_effector_path: path,
            per_step_r_env: r_env.clone(),
            per_step_r_total: r_env,
            collision_steps: collisions,
            success,
            episode_index: ep as u64,
            global_step_at_start: agent.global_step,
        });
    }
    let curve = vec![(agent.global_step.max(1), returns.iter().sum::<f64>() / returns.len() as f64)];
    RunSummary::from_records(&records, curve).map_err(|e| e.to_string())
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            out,
            force,
            print_config,
        } => {
            let mut cfg = match resolve_config(&config.config, &config.overrides) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            if let Some(out) = out {
                cfg.out_dir = Some(out);
            }
            if print_config {
                match cfg.to_toml() {
                    Ok(t) => println!("{t}"),
                    Err(e) => return config_error(&e.to_string()),
                }
            }
            match train_single(&cfg, force) {
                Ok(artifacts) => {
                    println!(
                        "run complete: {} (success_rate {:.3}, auc {:.3})",
                        artifacts.dir.display(),
                        artifacts.summary.success_rate.mean,
                        artifacts.summary.auc()
                    );
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
        Command::Sweep {
            config,
            grid,
            out,
            workers,
            force,
        } => {
            let cfg = match resolve_config(&config.config, &config.overrides) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let spec = SweepSpec {
                alphas: grid.alphas,
                seeds: grid.seeds,
                subjects: vec![],
            };
            match alpha_sweep(&cfg, &spec, &out, workers_or_default(workers), force) {
                Ok(outcome) => {
                    println!(
                        "sweep complete: {} rows, {} failed cells",
                        outcome.summary_rows.len(),
                        outcome.failures.len()
                    );
                    for f in &outcome.failures {
                        eprintln!("failed cell {}: {}", f.dir.display(), f.message);
                    }
                    if outcome.failures.is_empty() {
                        EXIT_OK
                    } else {
                        EXIT_PARTIAL
                    }
                }
                Err(e) => config_error(&e.to_string()),
            }
        }
        Command::Loso {
            config,
            bank,
            subjects,
            alpha,
            seeds,
            out,
            workers,
            force,
        } => {
            let cfg = match resolve_config(&config.config, &config.overrides) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let bank = match bank {
                Some(path) => match ObserverBank::load(&path) {
                    Ok(b) => b,
                    Err(e) => return config_error(&e.to_string()),
                },
                None => ObserverBank::default_bank(),
            };
            match loso_eval(
                &cfg,
                &bank,
                &subjects,
                alpha,
                &seeds,
                &out,
                workers_or_default(workers),
                force,
            ) {
                Ok((rows, failures)) => {
                    for r in &rows {
                        println!(
                            "{}: auc_ratio {:.3}, steps_ratio {:.3}",
                            r.subject, r.auc_ratio, r.steps_to_threshold_ratio
                        );
                    }
                    for f in &failures {
                        eprintln!("failed cell {}: {}", f.dir.display(), f.message);
                    }
                    if failures.is_empty() {
                        EXIT_OK
                    } else {
                        EXIT_PARTIAL
                    }
                }
                Err(e) => config_error(&e.to_string()),
            }
        }
        Command::Eval {
            config,
            checkpoint,
            episodes,
        } => {
            let cfg = match resolve_config(&config.config, &config.overrides) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            match eval_checkpoint(&cfg, &checkpoint, episodes) {
                Ok(summary) => {
                    println!(
                        "success_rate {:.3} +- {:.3}",
                        summary.success_rate.mean, summary.success_rate.std
                    );
                    println!(
                        "path_efficiency {:.3} +- {:.3}",
                        summary.path_efficiency.mean, summary.path_efficiency.std
                    );
                    println!(
                        "mean_collision {:.3} +- {:.3}",
                        summary.mean_collision.mean, summary.mean_collision.std
                    );
                    EXIT_OK
                }
                Err(e) => config_error(&e),
            }
        }
        Command::ExportPlots { dir } => {
            let mut wrote_any = false;
            for (exists, export) in [
                (
                    dir.join("sweep").is_dir(),
                    export_sweep_plots as fn(&Path) -> rlihf_core::Result<Vec<PathBuf>>,
                ),
                (dir.join("loso").is_dir(), export_loso_plots),
            ] {
                if !exists {
                    continue;
                }
                match export(&dir) {
                    Ok(paths) => {
                        for p in paths {
                            println!("wrote {}", p.display());
                        }
                        wrote_any = true;
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_PARTIAL;
                    }
                }
            }
            if wrote_any {
                EXIT_OK
            } else {
                eprintln!(
                    "error: {} contains neither sweep/ nor loso/ results",
                    dir.display()
                );
                EXIT_PARTIAL
            }
        }
        Command::ValidateConfig { config, print } => {
            match resolve_config(&config.config, &config.overrides) {
                Ok(cfg) => {
                    if print {
                        match cfg.to_toml() {
                            Ok(t) => println!("{t}"),
                            Err(e) => return config_error(&e.to_string()),
                        }
                    } else {
                        println!("ok");
                    }
                    EXIT_OK
                }
                Err(e) => config_error(&e),
            }
        }
    }
}

fn config_error(message: &str) -> i32 {
    eprintln!("error: {message}");
    EXIT_CONFIG
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_parsing() {
        let mut v: toml::Value = toml::from_str("alpha = 0.1\n[scene]\nhorizon = 300").unwrap();
        apply_override(&mut v, "alpha=0.3").unwrap();
        apply_override(&mut v, "scene.horizon=200").unwrap();
        apply_override(&mut v, "feedback.source=\"disabled\"").unwrap();
        let t = v.as_table().unwrap();
        assert_eq!(t["alpha"].as_float(), Some(0.3));
        assert_eq!(t["scene"]["horizon"].as_integer(), Some(200));
        assert_eq!(t["feedback"]["source"].as_str(), Some("disabled"));
        assert!(apply_override(&mut v, "no-equals").is_err());
    }

    #[test]
    fn bare_string_values_fall_back_to_quoted() {
        let mut v: toml::Value = toml::from_str("").unwrap();
        apply_override(&mut v, "feedback.source=disabled").unwrap();
        assert_eq!(
            v.as_table().unwrap()["feedback"]["source"].as_str(),
            Some("disabled")
        );
    }
}
