//! TOML experiment configurations.
//!
//! Every field of [`ExperimentConfig`] may be given; omitted fields take
//! their defaults. A minimal file is
//!
//! ```toml
//! condition = "synergy"    # visual_only | visuo_tactile | synergy
//! task = "cup"             # cup | bottle
//! master_seed = 7
//! ```
//!
//! A custom task is written as a table:
//!
//! ```toml
//! [task.custom]
//! initial_yaw_deg = 0.0
//! goal_deg = 45.0
//! ```
//!
//! `reactive_enabled` follows the condition unless set explicitly.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use tacsyn_core::harness::ExperimentConfig;
use tacsyn_core::Condition;

use crate::error::{LabError, LabResult};

#[derive(Deserialize)]
struct Probe {
    condition: Option<Condition>,
    reactive_enabled: Option<bool>,
}

/// Parses a configuration document; `origin` only labels errors.
pub fn parse_config(text: &str, origin: &Path) -> LabResult<ExperimentConfig> {
    let err = |message: String| LabError::Config { path: origin.to_path_buf(), message };
    let probe: Probe = toml::from_str(text).map_err(|e| err(e.message().to_owned()))?;
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| err(e.to_string()))?;
    if probe.reactive_enabled.is_none() {
        cfg.reactive_enabled = probe.condition.unwrap_or(cfg.condition).reactive_enabled();
    }
    cfg.validate().map_err(|e| err(e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> LabResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, path)
}

/// Full snapshot of `cfg` with every field spelled out.
pub fn render_config(cfg: &ExperimentConfig) -> LabResult<String> {
    toml::to_string(cfg).map_err(|e| LabError::Usage(format!("cannot render config: {e}")))
}

/// Applies the `--no-reactive` override: the synergy condition falls back to
/// the visuo-tactile learner (same observations, no reflex); the other
/// conditions are already reflex-free.
pub fn disable_reactive(cfg: &mut ExperimentConfig) {
    if cfg.condition == Condition::Synergy {
        cfg.condition = Condition::VisuoTactile;
    }
    cfg.reactive_enabled = false;
}

#[cfg(test)]
mod tests {
    use super::*;
    use tacsyn_core::harness::Task;

    fn parse(text: &str) -> LabResult<ExperimentConfig> {
        parse_config(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn reactive_flag_follows_condition() {
        let cfg = parse("condition = \"visual_only\"").unwrap();
        assert!(!cfg.reactive_enabled);
        assert!(parse("condition = \"visual_only\"\nreactive_enabled = true").is_err());
    }

    #[test]
    fn custom_task_and_nested_overrides() {
        let cfg = parse(
            "task = { custom = { initial_yaw_deg = 5.0, goal_deg = 30.0 } }\n\
             n_trials = 3\n[plant]\nforce_gain = 4.5\n[learning]\nparticles = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.task, Task::Custom { initial_yaw_deg: 5.0, goal_deg: 30.0 });
        assert_eq!(cfg.n_trials, 3);
        assert_eq!(cfg.plant.force_gain, 4.5);
        assert_eq!(cfg.learning.particles, 12);
        assert_eq!(cfg.plant.force_saturation, ExperimentConfig::default().plant.force_saturation);
    }

    #[test]
    fn seeds_above_the_signed_range_round_trip() {
        let cfg = parse("master_seed = \"18446744073709551615\"\nseeds = [3, \"10597490478336637036\"]\nn_trials = 2").unwrap();
        assert_eq!(cfg.master_seed, u64::MAX);
        assert_eq!(cfg.seeds, vec![3, 10597490478336637036]);
        let text = render_config(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
        assert!(parse("master_seed = -1").is_err());
        assert!(parse("seeds = [\"x\"]\nn_trials = 1").is_err());
    }

    #[test]
    fn unknown_condition_is_reported_with_path() {
        let err = parse("condition = \"telepathy\"").unwrap_err();
        assert!(err.to_string().contains("test.toml"), "{err}");
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("tolerance_deg = -1.0").is_err());
        assert!(parse("max_rollouts = 0").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        for text in ["task = \"bottle\"\ncondition = \"visuo_tactile\"", "master_seed = 99\nseeds = [1, 2, 3]\nn_trials = 3"] {
            let cfg = parse(text).unwrap();
            let again = parse(&render_config(&cfg).unwrap()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn no_reactive_override() {
        let mut cfg = ExperimentConfig::default();
        disable_reactive(&mut cfg);
        assert_eq!(cfg.condition, Condition::VisuoTactile);
        assert!(cfg.validate().is_ok());
    }
}
