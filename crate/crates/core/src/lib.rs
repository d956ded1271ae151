//! Model-based policy search in synergy with a tactile slip-avoidance reflex.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs plus explicit seeds: the ground-truth hand/object
//! simulator, the reactive grip controller, Gaussian-process dynamics models
//! with particle propagation, linear-policy search and the episodic learning
//! harness. File formats, the CLI and run directories live in the `tacsyn`
//! companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod cost;
pub mod error;
pub mod fixtures;
pub mod gp;
pub mod harness;
pub mod linalg;
pub(crate) mod math;
pub mod optimize;
pub mod plant;
pub mod policy;
pub mod propagate;
pub mod reactive;
pub mod search;
pub mod seed;

pub use cost::{Condition, CostSpec};
pub use error::{Error, Result};
pub use gp::{GpHyper, GpModel};
pub use harness::{ExperimentConfig, ExperimentReport, RolloutTrace, TrialOutcome, Verdict};
pub use plant::{Control, Event, MotorRange, Plant, PlantConfig, PlantState, State};
pub use policy::Policy;
pub use reactive::{ReactiveGain, SlipCalibration, SlipClass};

/// Number of actuated fingers (thumb, index, middle).
pub const FINGERS: usize = 3;
