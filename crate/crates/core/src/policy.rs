//! Linear policy `u_p = A x + b`, saturated into the motor bounds.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Control, MotorRange};
use crate::seed;
use crate::FINGERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    state_dim: usize,
    /// Row-major `FINGERS x state_dim`.
    a: Vec<f64>,
    b: [f64; FINGERS],
    bounds: [MotorRange; FINGERS],
}

impl Policy {
    pub fn new(state_dim: usize, a: Vec<f64>, b: [f64; FINGERS], bounds: [MotorRange; FINGERS]) -> Result<Self> {
        if state_dim == 0 || a.len() != FINGERS * state_dim {
            return Err(Error::Domain(format!(
                "gain matrix has {} entries, expected {FINGERS} x {state_dim}",
                a.len()
            )));
        }
        if !a.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::Domain("policy parameters must be finite".into()));
        }
        Ok(Self { state_dim, a, b, bounds })
    }

    /// `A = 0`, `u_p = clamp(b)`.
    pub fn constant(state_dim: usize, b: [f64; FINGERS], bounds: [MotorRange; FINGERS]) -> Self {
        Self { state_dim, a: alloc::vec![0.0; FINGERS * state_dim], b, bounds }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn gain(&self) -> &[f64] {
        &self.a
    }

    pub fn offset(&self) -> &[f64; FINGERS] {
        &self.b
    }

    pub fn bounds(&self) -> &[MotorRange; FINGERS] {
        &self.bounds
    }

    pub fn num_params(&self) -> usize {
        self.a.len() + FINGERS
    }

    /// `θ = (A row-major, b)`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.a.clone();
        p.extend_from_slice(&self.b);
        p
    }

    pub fn set_params(&mut self, theta: &[f64]) {
        let n = self.a.len();
        self.a.copy_from_slice(&theta[..n]);
        self.b.copy_from_slice(&theta[n..n + FINGERS]);
    }

    pub fn with_params(&self, theta: &[f64]) -> Self {
        let mut p = self.clone();
        p.set_params(theta);
        p
    }

    /// `clamp(A x + b)`.
    pub fn action(&self, x: &[f64]) -> Result<Control> {
        if x.len() != self.state_dim {
            return Err(Error::Domain(format!(
                "policy expects a {}-dimensional state, got {}",
                self.state_dim,
                x.len()
            )));
        }
        Ok(Control { motors: self.action_raw(x) })
    }

    /// Same as [`Policy::action`] without the dimension check.
    #[inline]
    pub fn action_raw(&self, x: &[f64]) -> [f64; FINGERS] {
        let v = self.affine(x);
        core::array::from_fn(|i| self.bounds[i].clamp(v[i]))
    }

    /// `A x + b` before saturation.
    #[inline]
    pub fn affine(&self, x: &[f64]) -> [f64; FINGERS] {
        core::array::from_fn(|i| {
            let row = &self.a[i * self.state_dim..(i + 1) * self.state_dim];
            row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[i]
        })
    }

    /// Squared distance of `A x + b` from the motor box.
    pub fn saturation_excess(&self, x: &[f64]) -> f64 {
        let v = self.affine(x);
        (0..FINGERS)
            .map(|i| {
                let e = v[i] - self.bounds[i].clamp(v[i]);
                e * e
            })
            .sum()
    }
}

/// Spread of the random initial policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomPolicySpec {
    /// Std of every gain entry.
    pub gain_std: f64,
    /// Std of the initial command around the anchor (motor units).
    pub offset_std: f64,
}

impl Default for RandomPolicySpec {
    fn default() -> Self {
        Self { gain_std: 0.02, offset_std: 0.02 }
    }
}

/// Random initial policy. Gains are i.i.d. zero-mean Gaussian; the offset is
/// chosen so that the command at `x0` is `anchor` plus a zero-mean Gaussian
/// perturbation, shrunk until it lies strictly inside the bounds.
pub fn random_policy(
    x0: &[f64],
    anchor: &Control,
    bounds: [MotorRange; FINGERS],
    spec: RandomPolicySpec,
    seed: u64,
) -> Result<Policy> {
    let dim = x0.len();
    for i in 0..FINGERS {
        let b = bounds[i];
        if !(b.lo < anchor.motors[i] && anchor.motors[i] < b.hi) {
            return Err(Error::Domain(format!("anchor command of finger {i} is not strictly inside its bounds")));
        }
    }
    let mut rng = seed::rng(seed);
    let gain = Normal::new(0.0, spec.gain_std).map_err(|e| Error::Domain(format!("{e}")))?;
    let offset = Normal::new(0.0, spec.offset_std).map_err(|e| Error::Domain(format!("{e}")))?;
    let a: Vec<f64> = (0..FINGERS * dim).map(|_| gain.sample(&mut rng)).collect();
    let mut b = [0.0; FINGERS];
    for i in 0..FINGERS {
        let mut eps: f64 = offset.sample(&mut rng);
        let inside = |v: f64| bounds[i].lo < v && v < bounds[i].hi;
        while !inside(anchor.motors[i] + eps) {
            eps *= 0.5;
        }
        let ax: f64 = a[i * dim..(i + 1) * dim].iter().zip(x0).map(|(a, x)| a * x).sum();
        b[i] = anchor.motors[i] + eps - ax;
    }
    Policy::new(dim, a, b, bounds)
}
