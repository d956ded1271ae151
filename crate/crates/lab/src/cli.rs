//! Command-line front end. Log verbosity comes from `TACSYN_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `warn`).

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use tacsyn_core::harness::ExperimentConfig;
use tacsyn_core::reactive::calibrate;

use crate::config::{disable_reactive, load_config};
use crate::error::{LabError, LabResult};
use crate::formats;
use crate::rundir::{compare_into, create_run_dir, run_into, write_manifest, write_text, RunManifest, RunOptions, VERSION};

pub const LOG_ENV: &str = "TACSYN_LOG";

#[derive(Debug, Parser)]
#[command(name = "tacsyn", version, about = "Model-based policy search with a tactile slip reflex")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive slip thresholds from labeled force samples (f1,f2,f3,label).
    Calibrate {
        samples: PathBuf,
        /// Calibration file to write (TOML).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        force_scale: f64,
    },
    /// Run every trial of one configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run several configurations that differ only in their condition.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the tool version.
    Version,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; per-trial seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory (must be new or empty).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Disable the reflex; synergy runs as the visuo-tactile learner.
    #[arg(long)]
    pub no_reactive: bool,
    /// Worker threads for independent trials.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip per-rollout trace files.
    #[arg(long)]
    pub no_traces: bool,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.master_seed = s;
            cfg.seeds.clear();
        }
        if let Some(n) = self.trials {
            cfg.n_trials = n;
        }
        if self.no_reactive {
            disable_reactive(cfg);
        }
    }

    fn options(&self) -> RunOptions {
        let mut o = RunOptions::default();
        if let Some(j) = self.jobs {
            o.jobs = j.max(1);
        }
        o.write_traces = !self.no_traces;
        o
    }

    fn out_dir(&self, label: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
            PathBuf::from("runs").join(format!("{label}-{ms}-{}", std::process::id()))
        })
    }
}

fn load(path: &Path, common: &Common) -> LabResult<ExperimentConfig> {
    let mut cfg = load_config(path)?;
    common.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Executes a parsed command, printing results to stdout.
pub fn execute(cli: Cli) -> LabResult<()> {
    match cli.command {
        Command::Version => {
            println!("tacsyn {VERSION}");
            Ok(())
        }
        Command::Calibrate { samples, out, force_scale } => {
            let file = File::open(&samples).map_err(|e| LabError::io(format!("opening {}", samples.display()), e))?;
            let data = formats::read_samples(file).map_err(|e| e.at(&samples))?;
            let cal = calibrate(&data, force_scale)?;
            if let Some(out) = out {
                write_text(&out, &formats::render_calibration(&cal))?;
            }
            println!("thresholds ({:.2}, {:.2}), α_des={:.2}", cal.firm_threshold, cal.slip_threshold, cal.alpha_des);
            Ok(())
        }
        Command::Run { config, common } => {
            let cfg = load(&config, &common)?;
            let dir = common.out_dir(&format!("{}-{}", cfg.condition.as_str(), cfg.task.name()));
            create_run_dir(&dir)?;
            write_manifest(&dir, &RunManifest::new("run", vec![config], cfg.master_seed, &dir))?;
            let report = run_into(&cfg, &dir, common.options())?;
            println!("{} {}", cfg.condition.as_str(), formats::summary_line(&report));
            println!("results in {}", dir.display());
            Ok(())
        }
        Command::Compare { configs, common } => {
            if configs.len() < 2 {
                return Err(LabError::Usage(format!("compare needs at least two configs, got {}", configs.len())));
            }
            let cfgs = configs.iter().map(|p| load(p, &common)).collect::<LabResult<Vec<_>>>()?;
            tacsyn_core::harness::check_comparable(&cfgs)?;
            let dir = common.out_dir("compare");
            create_run_dir(&dir)?;
            write_manifest(&dir, &RunManifest::new("compare", configs, cfgs[0].master_seed, &dir))?;
            let (cmp, _) = compare_into(&cfgs, &dir, common.options())?;
            print!("{}", formats::comparison_table(&cmp));
            println!("results in {}", dir.display());
            Ok(())
        }
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_USAGE } else { crate::error::EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => crate::error::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
