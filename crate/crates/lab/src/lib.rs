//! Configuration files, CSV formats, run directories and the command line
//! for `tacsyn-core` experiments.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod rundir;

pub use error::{LabError, LabResult};
