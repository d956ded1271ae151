use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value outside its domain: {0}")]
    Domain(String),
    #[error("non-finite or ill-conditioned numerics: {0}")]
    Numeric(String),
    #[error("the object has fallen; the plant cannot be stepped until reset")]
    Irreversible,
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("model fit failed: {0}")]
    Fit(String),
    #[error("policy optimization produced a non-finite return at theta = {theta:?}")]
    Optimization { theta: Vec<f64> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
