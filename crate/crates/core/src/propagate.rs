//! Long-term prediction by seeded particle propagation through a learned
//! dynamics model.
//!
//! All random draws are fixed up front in a [`NoiseTable`]: one standard
//! normal per (step, particle, output), standardized across particles so
//! every step's draws have exactly zero mean and unit variance. With the
//! table fixed, the predicted trajectory is a deterministic, piecewise
//! smooth function of the policy parameters, which is what finite
//! difference policy gradients need.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::math;
use crate::plant::MotorRange;
use crate::policy::Policy;
use crate::reactive::{ReactiveGain, SlipCalibration};
use crate::seed;
use crate::FINGERS;

/// One-step stochastic dynamics: Gaussian next state per dimension given
/// the concatenated `(x, u)` input.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn predict_into(&self, input: &[f64], mean: &mut [f64], var: &mut [f64], scratch: &mut Vec<f64>);
}

impl Dynamics for GpModel {
    fn state_dim(&self) -> usize {
        GpModel::state_dim(self)
    }

    fn predict_into(&self, input: &[f64], mean: &mut [f64], var: &mut [f64], scratch: &mut Vec<f64>) {
        GpModel::predict_into(self, input, mean, var, scratch)
    }
}

/// Equally weighted particles, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub dim: usize,
    pub states: Vec<f64>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.states.chunks(self.dim) {
            m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Population covariance, row-major `dim x dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let m = self.mean();
        let d = self.dim;
        let mut c = vec![0.0; d * d];
        for p in self.states.chunks(d) {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (p[i] - m[i]) * (p[j] - m[j]);
                }
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }
}

/// Distribution over the model state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateDistribution {
    /// Mean and row-major covariance.
    Gaussian { mean: Vec<f64>, covariance: Vec<f64> },
    Particles(ParticleSet),
}

impl StateDistribution {
    pub fn point(x: &[f64]) -> Self {
        let d = x.len();
        StateDistribution::Gaussian { mean: x.to_vec(), covariance: vec![0.0; d * d] }
    }

    pub fn diagonal(mean: &[f64], std: &[f64]) -> Self {
        let d = mean.len();
        let mut covariance = vec![0.0; d * d];
        for i in 0..d {
            covariance[i * d + i] = std[i] * std[i];
        }
        StateDistribution::Gaussian { mean: mean.to_vec(), covariance }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateDistribution::Gaussian { mean, .. } => mean.len(),
            StateDistribution::Particles(p) => p.dim,
        }
    }
}

/// The modeled reflex. The calibration is always needed to score the
/// pseudoenergy; the gain is present only when the reflex acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflexModel {
    pub calibration: SlipCalibration,
    pub gain: Option<ReactiveGain>,
}

impl ReflexModel {
    /// Reflex error at a model state; 0 for states without forces.
    #[inline]
    pub fn error(&self, x: &[f64]) -> f64 {
        if x.len() < 1 + FINGERS {
            return 0.0;
        }
        let s = self.calibration.force_scale;
        let r2: f64 = x[1..=FINGERS].iter().map(|f| (f / s) * (f / s)).sum();
        math::exp(-r2) - self.calibration.alpha_des
    }

    /// Command actually applied: `clamp(u_p + K e_r)` when active.
    #[inline]
    pub fn command(&self, u_p: [f64; FINGERS], e_r: f64, bounds: &[MotorRange; FINGERS]) -> [f64; FINGERS] {
        match &self.gain {
            Some(g) => core::array::from_fn(|i| bounds[i].clamp(u_p[i] + g.k[i] * e_r)),
            None => u_p,
        }
    }
}

/// Pre-drawn standard normals: initial-state draws and per-step output
/// draws, standardized across particles.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    particles: usize,
    horizon: usize,
    dim: usize,
    init: Vec<f64>,
    steps: Vec<f64>,
}

impl NoiseTable {
    pub fn new(particles: usize, horizon: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let mut init = draw(particles * dim);
        let mut steps = draw(horizon * particles * dim);
        standardize(&mut init, particles, dim);
        for t in 0..horizon {
            standardize(&mut steps[t * particles * dim..(t + 1) * particles * dim], particles, dim);
        }
        Self { particles, horizon, dim, init, steps }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    fn step(&self, t: usize, p: usize) -> &[f64] {
        let o = (t * self.particles + p) * self.dim;
        &self.steps[o..o + self.dim]
    }

    /// Particles drawn from `init` with this table's initial draws.
    pub fn initial_particles(&self, init: &StateDistribution) -> Result<ParticleSet> {
        let d = self.dim;
        if init.dim() != d {
            return Err(Error::Domain(format!("initial distribution of dim {} for dim {d}", init.dim())));
        }
        match init {
            StateDistribution::Particles(p) => Ok(p.clone()),
            StateDistribution::Gaussian { mean, covariance } => {
                let mut states = Vec::with_capacity(self.particles * d);
                if covariance.iter().all(|v| *v == 0.0) {
                    for _ in 0..self.particles {
                        states.extend_from_slice(mean);
                    }
                } else {
                    let cov = SquareMatrix::from_fn(d, |i, j| covariance[i * d + j]);
                    let chol = Cholesky::factor(&cov)?;
                    let l = chol.lower();
                    for p in 0..self.particles {
                        let z = &self.init[p * d..(p + 1) * d];
                        for i in 0..d {
                            let v: f64 = (0..=i).map(|k| l.get(i, k) * z[k]).sum();
                            states.push(mean[i] + v);
                        }
                    }
                }
                Ok(ParticleSet { dim: d, states })
            }
        }
    }
}

fn standardize(block: &mut [f64], particles: usize, dim: usize) {
    if particles < 2 {
        return;
    }
    let n = particles as f64;
    for d in 0..dim {
        let mean = (0..particles).map(|p| block[p * dim + d]).sum::<f64>() / n;
        let var = (0..particles).map(|p| { let r = block[p * dim + d] - mean; r * r }).sum::<f64>() / n;
        let inv = if var > 0.0 { 1.0 / math::sqrt(var) } else { 0.0 };
        for p in 0..particles {
            block[p * dim + d] = (block[p * dim + d] - mean) * inv;
        }
    }
}

/// Runs the closed loop `policy (+ reflex) → model` for `noise.horizon()`
/// steps. `visit(t, states, errors)` sees the particles at every time
/// `t = 0..=T` together with the reflex error of each particle.
pub fn simulate<M: Dynamics>(
    model: &M,
    policy: &Policy,
    start: &ParticleSet,
    noise: &NoiseTable,
    reflex: &ReflexModel,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let d = model.state_dim();
    if policy.state_dim() != d || start.dim != d {
        return Err(Error::Domain(format!(
            "model dim {d}, policy dim {}, particles dim {}",
            policy.state_dim(),
            start.dim
        )));
    }
    let n = start.len();
    if n != noise.particles() || noise.dim != d {
        return Err(Error::Domain("noise table does not match the particle set".into()));
    }
    let mut states = start.states.clone();
    let mut next = vec![0.0; states.len()];
    let mut errors = vec![0.0; n];
    let mut input = vec![0.0; d + FINGERS];
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    let mut scratch = Vec::new();
    let bounds = *policy.bounds();

    for t in 0..=noise.horizon() {
        for p in 0..n {
            errors[p] = reflex.error(&states[p * d..(p + 1) * d]);
        }
        visit(t, &states, &errors);
        if t == noise.horizon() {
            break;
        }
        for p in 0..n {
            let x = &states[p * d..(p + 1) * d];
            let u = reflex.command(policy.action_raw(x), errors[p], &bounds);
            input[..d].copy_from_slice(x);
            input[d..].copy_from_slice(&u);
            model.predict_into(&input, &mut mean, &mut var, &mut scratch);
            let z = noise.step(t, p);
            for k in 0..d {
                next[p * d + k] = mean[k] + math::sqrt(var[k]) * z[k];
            }
        }
        core::mem::swap(&mut states, &mut next);
    }
    Ok(())
}

/// Particle approximations of `p(x_1), ..., p(x_T)` under `policy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub particles: usize,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { particles: 300, seed: 0 }
    }
}

pub fn propagate<M: Dynamics>(
    model: &M,
    policy: &Policy,
    init: &StateDistribution,
    horizon: usize,
    reflex: &ReflexModel,
    cfg: PropagationConfig,
) -> Result<Vec<ParticleSet>> {
    if horizon == 0 {
        return Err(Error::Domain("propagation horizon must be at least 1".into()));
    }
    if cfg.particles == 0 {
        return Err(Error::Domain("need at least one particle".into()));
    }
    let noise = NoiseTable::new(cfg.particles, horizon, model.state_dim(), cfg.seed);
    let start = noise.initial_particles(init)?;
    let mut out = Vec::with_capacity(horizon);
    simulate(model, policy, &start, &noise, reflex, |t, states, _| {
        if t > 0 {
            out.push(ParticleSet { dim: start.dim, states: states.to_vec() });
        }
    })?;
    Ok(out)
}
