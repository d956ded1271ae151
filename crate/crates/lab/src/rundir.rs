//! Run directories.
//!
//! ```text
//! <out>/manifest.json        written before anything runs
//! <out>/config.toml          full configuration snapshot
//! <out>/cost_matrix.csv      trials x rollouts, verdict column
//! <out>/rollouts.csv         final yaw, cost, interventions per rollout
//! <out>/interventions.csv    median interventions per rollout
//! <out>/summary.txt
//! <out>/traces/trial-XX/rollout-YY.csv     per-tick trace
//! <out>/traces/trial-XX/policy-YY.toml      policy executed in rollout YY
//! <out>/traces/trial-XX/model-YY.toml       hyperparameters fitted after YY
//! <out>/traces/trial-XX/transitions.csv     model training data
//! ```
//!
//! A comparison writes one such directory per condition plus
//! `comparison.csv` and `comparison.txt`. Everything except the manifest's
//! timestamp is a function of the configuration and the tool version.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tacsyn_core::harness::{
    check_comparable, run_trial_with, Comparison, ExperimentConfig, ExperimentReport, TrialEvent, TrialOutcome,
};

use crate::config::render_config;
use crate::error::{LabError, LabResult};
use crate::formats::{self, FormatError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<PathBuf>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub started_unix_ms: u128,
}

impl RunManifest {
    pub fn new(command: &str, config_paths: Vec<PathBuf>, master_seed: u64, output_dir: &Path) -> Self {
        let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        Self {
            command: command.to_owned(),
            config_paths,
            master_seed,
            output_dir: output_dir.to_path_buf(),
            tool_version: VERSION.to_owned(),
            started_unix_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for independent trials.
    pub jobs: usize,
    pub write_traces: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1), write_traces: true }
    }
}

/// Creates `dir`, which must not exist yet or be empty.
pub fn create_run_dir(dir: &Path) -> LabResult<()> {
    if dir.exists() {
        let empty = fs::read_dir(dir).map_err(|e| LabError::io(format!("listing {}", dir.display()), e))?.next().is_none();
        if !empty {
            return Err(LabError::Usage(format!("output directory {} already exists and is not empty", dir.display())));
        }
    }
    fs::create_dir_all(dir).map_err(|e| LabError::io(format!("creating {}", dir.display()), e))
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> LabResult<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_text(&dir.join("manifest.json"), &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> LabResult<()> {
    fs::write(path, text).map_err(|e| LabError::io(format!("writing {}", path.display()), e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), FormatError>) -> LabResult<()> {
    let file = File::create(path).map_err(|e| LabError::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| e.at(path))?;
    w.flush().map_err(|e| LabError::io(format!("writing {}", path.display()), e))
}

/// Runs every trial of `cfg` into the existing directory `dir`. Trials are
/// spread over `opts.jobs` threads; results are assembled in trial order.
pub fn run_into(cfg: &ExperimentConfig, dir: &Path, opts: RunOptions) -> LabResult<ExperimentReport> {
    cfg.validate()?;
    write_text(&dir.join("config.toml"), &render_config(cfg)?)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<LabResult<TrialOutcome>>>> = Mutex::new((0..cfg.n_trials).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= cfg.n_trials {
            break;
        }
        let result = run_one(cfg, dir, i, opts);
        slots.lock().expect("no worker panicked")[i] = Some(result);
    };
    std::thread::scope(|s| {
        for _ in 1..opts.jobs.clamp(1, cfg.n_trials.max(1)) {
            s.spawn(worker);
        }
        worker();
    });
    let outcomes = slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect::<LabResult<Vec<_>>>()?;
    let report = ExperimentReport { condition: cfg.condition, task: cfg.task, outcomes, max_rollouts: cfg.max_rollouts };
    write_with(&dir.join("cost_matrix.csv"), |w| formats::write_cost_matrix(w, &report))?;
    write_with(&dir.join("rollouts.csv"), |w| formats::write_rollouts(w, &report))?;
    write_with(&dir.join("interventions.csv"), |w| formats::write_interventions(w, &report))?;
    write_text(&dir.join("summary.txt"), &summary_text(&report))?;
    Ok(report)
}

fn run_one(cfg: &ExperimentConfig, dir: &Path, i: usize, opts: RunOptions) -> LabResult<TrialOutcome> {
    let seed = cfg.trial_seed(i);
    let trial_dir = dir.join("traces").join(format!("trial-{:02}", i + 1));
    if opts.write_traces {
        fs::create_dir_all(&trial_dir).map_err(|e| LabError::io(format!("creating {}", trial_dir.display()), e))?;
    }
    let mut io_error = None;
    let mut transitions = Vec::new();
    let outcome = run_trial_with(cfg, seed, |event| {
        if !opts.write_traces || io_error.is_some() {
            return;
        }
        let written = match event {
            TrialEvent::Rollout { index, trace, policy } => {
                transitions.extend(trace.transitions.iter().cloned());
                write_with(&trial_dir.join(format!("rollout-{:02}.csv", index + 1)), |w| formats::write_trace(w, trace))
                    .and_then(|_| {
                        write_text(&trial_dir.join(format!("policy-{:02}.toml", index + 1)), &formats::render_policy(policy))
                    })
            }
            TrialEvent::Model { after_rollout, model } => write_text(
                &trial_dir.join(format!("model-{:02}.toml", after_rollout + 1)),
                &formats::render_hypers(&model.hypers()),
            ),
        };
        if let Err(e) = written {
            io_error = Some(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    if opts.write_traces {
        write_with(&trial_dir.join("transitions.csv"), |w| formats::write_transitions(w, &transitions))?;
    }
    log::info!(
        "{} trial {}: {} after {} rollouts{}",
        cfg.condition.as_str(),
        i + 1,
        outcome.verdict.as_str(),
        outcome.rollout_count(),
        outcome.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
    );
    Ok(outcome)
}

pub fn summary_text(report: &ExperimentReport) -> String {
    let mut s = format!("condition={} task={}\n{}\n", report.condition.as_str(), report.task.name(), formats::summary_line(report));
    for (i, o) in report.outcomes.iter().enumerate() {
        s.push_str(&format!("trial {:02} seed {}: {} ({} rollouts)", i + 1, o.seed, o.verdict.as_str(), o.rollout_count()));
        if let Some(d) = &o.diagnostic {
            s.push_str(&format!(" diagnostic: {d}"));
        }
        s.push('\n');
    }
    s
}

/// Runs each configuration into `dir/<condition>` and tabulates them.
pub fn compare_into(configs: &[ExperimentConfig], dir: &Path, opts: RunOptions) -> LabResult<(Comparison, Vec<ExperimentReport>)> {
    check_comparable(configs)?;
    let mut reports = Vec::with_capacity(configs.len());
    for (k, cfg) in configs.iter().enumerate() {
        let name = cfg.condition.as_str();
        let taken = configs[..k].iter().filter(|c| c.condition == cfg.condition).count();
        let sub = if taken == 0 { dir.join(name) } else { dir.join(format!("{name}-{}", taken + 1)) };
        fs::create_dir_all(&sub).map_err(|e| LabError::io(format!("creating {}", sub.display()), e))?;
        reports.push(run_into(cfg, &sub, opts)?);
    }
    let cmp = Comparison::from_reports(&reports)?;
    write_with(&dir.join("comparison.csv"), |w| formats::write_comparison(w, &cmp))?;
    write_text(&dir.join("comparison.txt"), &formats::comparison_table(&cmp))?;
    Ok((cmp, reports))
}
