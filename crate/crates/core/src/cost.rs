//! Per-tick costs of the three learning conditions.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::FINGERS;

/// Which sensing and control layers a learner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Yaw-only state and cost, no reflex.
    VisualOnly,
    /// Yaw and forces in state and cost, no reflex.
    VisuoTactile,
    /// Yaw and forces in state, yaw plus reflex pseudoenergy in the cost,
    /// reflex active.
    Synergy,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::VisualOnly, Condition::VisuoTactile, Condition::Synergy];

    /// Dimension of the state the policy and model see.
    pub fn state_dim(self) -> usize {
        match self {
            Condition::VisualOnly => 1,
            _ => 1 + FINGERS,
        }
    }

    pub fn reactive_enabled(self) -> bool {
        self == Condition::Synergy
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::VisualOnly => "visual_only",
            Condition::VisuoTactile => "visuo_tactile",
            Condition::Synergy => "synergy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s.trim())
    }
}

/// Anything that scores a (model) state. `e_r` is the reflex error at that
/// state, or 0 when the state carries no forces.
pub trait StageCost {
    fn cost(&self, x: &[f64], e_r: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub variant: Condition,
    /// rad.
    pub phi_des: f64,
    /// N, used by `VisuoTactile`.
    pub f_des: [f64; FINGERS],
    pub lambda1: f64,
    pub lambda2: f64,
    /// Used by `Synergy`; the reflex error already includes it.
    pub alpha_des: f64,
}

impl CostSpec {
    pub fn new(variant: Condition, phi_des: f64) -> Self {
        Self { variant, phi_des, f_des: [2.0; FINGERS], lambda1: 0.5, lambda2: 0.5, alpha_des: 0.25 }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |l: f64| (0.0..=1.0).contains(&l);
        if !in_unit(self.lambda1) || !in_unit(self.lambda2) || (self.lambda1 + self.lambda2 - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "cost weights must be a convex pair, got ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        if !self.phi_des.is_finite() || !self.f_des.iter().all(|f| f.is_finite()) {
            return Err(Error::Config("cost targets must be finite".into()));
        }
        Ok(())
    }
}

/// `1 - exp(-(phi - phi_des)^2)`.
pub fn pose_error(phi: f64, phi_des: f64) -> f64 {
    let d = phi - phi_des;
    1.0 - math::exp(-d * d)
}

/// Per-tick cost in `[0, 1]`. `x` is `[yaw]` for `VisualOnly` and
/// `[yaw, f1, f2, f3]` otherwise.
pub fn step_cost(x: &[f64], e_r: f64, spec: &CostSpec) -> f64 {
    match spec.variant {
        Condition::VisualOnly => pose_error(x[0], spec.phi_des),
        Condition::VisuoTactile => {
            let d = x[0] - spec.phi_des;
            let a = math::exp(-d * d);
            let df: f64 = (0..FINGERS).map(|i| { let d = x[1 + i] - spec.f_des[i]; d * d }).sum();
            let b = math::exp(-df);
            1.0 - (spec.lambda1 * a + spec.lambda2 * b)
        }
        Condition::Synergy => spec.lambda1 * pose_error(x[0], spec.phi_des) + spec.lambda2 * e_r.abs(),
    }
}

impl StageCost for CostSpec {
    fn cost(&self, x: &[f64], e_r: f64) -> f64 {
        step_cost(x, e_r, self)
    }
}
