//! Policy evaluation and improvement on a learned model.

use alloc::vec::Vec;

use crate::cost::StageCost;
use crate::error::{Error, Result};
use crate::optimize::{minimize, ForwardDifference, MinimizeOptions, Termination};
use crate::policy::Policy;
use crate::propagate::{simulate, Dynamics, NoiseTable, ParticleSet, PropagationConfig, ReflexModel, StateDistribution};

/// Evaluates `J = Σ_{t=0}^{T} E[c(x_t)]` for many policies with one fixed
/// set of random draws.
#[derive(Debug)]
pub struct ReturnEvaluator<'a, M, C> {
    model: &'a M,
    cost: &'a C,
    reflex: ReflexModel,
    noise: NoiseTable,
    start: ParticleSet,
}

impl<'a, M: Dynamics, C: StageCost> ReturnEvaluator<'a, M, C> {
    pub fn new(
        model: &'a M,
        cost: &'a C,
        init: &StateDistribution,
        reflex: ReflexModel,
        horizon: usize,
        prop: PropagationConfig,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        if prop.particles == 0 {
            return Err(Error::Domain("need at least one particle".into()));
        }
        let noise = NoiseTable::new(prop.particles, horizon, model.state_dim(), prop.seed);
        let start = noise.initial_particles(init)?;
        Ok(Self { model, cost, reflex, noise, start })
    }

    /// Expected return of `policy`.
    pub fn evaluate(&self, policy: &Policy) -> Result<f64> {
        Ok(self.per_step(policy)?.iter().sum())
    }

    /// `J` plus `weight` times the mean squared excursion of the unsaturated
    /// policy output outside the motor box, summed over `t < T`. The extra
    /// term keeps gradients alive when commands saturate.
    pub fn evaluate_penalized(&self, policy: &Policy, weight: f64) -> Result<f64> {
        if weight == 0.0 {
            return self.evaluate(policy);
        }
        let d = self.start.dim;
        let n = self.start.len() as f64;
        let horizon = self.noise.horizon();
        let mut total = 0.0;
        simulate(self.model, policy, &self.start, &self.noise, &self.reflex, |t, states, errors| {
            let c: f64 = states.chunks(d).zip(errors).map(|(x, e)| self.cost.cost(x, *e)).sum();
            let p: f64 = if t < horizon { states.chunks(d).map(|x| policy.saturation_excess(x)).sum() } else { 0.0 };
            total += (c + weight * p) / n;
        })?;
        Ok(total)
    }

    /// Expected cost at each `t = 0..=T`.
    pub fn per_step(&self, policy: &Policy) -> Result<Vec<f64>> {
        let d = self.start.dim;
        let n = self.start.len() as f64;
        let mut out = Vec::with_capacity(self.noise.horizon() + 1);
        simulate(self.model, policy, &self.start, &self.noise, &self.reflex, |_, states, errors| {
            let total: f64 = states.chunks(d).zip(errors).map(|(x, e)| self.cost.cost(x, *e)).sum();
            out.push(total / n);
        })?;
        Ok(out)
    }
}

/// `J` for `policy`, propagating `horizon` steps from `init`.
pub fn expected_return<M: Dynamics, C: StageCost>(
    model: &M,
    policy: &Policy,
    cost: &C,
    init: &StateDistribution,
    reflex: ReflexModel,
    horizon: usize,
    prop: PropagationConfig,
) -> Result<f64> {
    ReturnEvaluator::new(model, cost, init, reflex, horizon, prop)?.evaluate(policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub horizon: usize,
    pub propagation: PropagationConfig,
    pub optimizer: MinimizeOptions,
    /// Relative forward-difference step on the policy parameters.
    pub fd_step: f64,
    /// Weight of the saturation term of [`ReturnEvaluator::evaluate_penalized`].
    pub saturation_penalty: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            horizon: 15,
            propagation: PropagationConfig::default(),
            optimizer: MinimizeOptions::default(),
            fd_step: 1e-6,
            saturation_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub policy: Policy,
    pub initial_return: f64,
    pub final_return: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Locally minimizes `J` over `θ = (A, b)` with BFGS on forward-difference
/// gradients of the seeded particle objective. With a saturation penalty the
/// search runs on the penalized objective; the starting policy is returned
/// if the result would have a higher `J`.
pub fn improve_policy<M: Dynamics, C: StageCost>(
    model: &M,
    init_policy: &Policy,
    cost: &C,
    init: &StateDistribution,
    reflex: ReflexModel,
    cfg: &SearchConfig,
) -> Result<Improvement> {
    let eval = ReturnEvaluator::new(model, cost, init, reflex, cfg.horizon, cfg.propagation)?;
    let mut scratch = init_policy.clone();
    let mut obj = ForwardDifference {
        f: |theta: &[f64]| {
            scratch.set_params(theta);
            eval.evaluate_penalized(&scratch, cfg.saturation_penalty).unwrap_or(f64::NAN)
        },
        step: cfg.fd_step,
    };
    let m = minimize(&mut obj, &init_policy.params(), &cfg.optimizer)?;
    let (initial_return, mut final_return) = if cfg.saturation_penalty == 0.0 {
        (m.initial_value, m.value)
    } else {
        (eval.evaluate(init_policy)?, eval.evaluate(&init_policy.with_params(&m.x))?)
    };
    let mut policy = init_policy.with_params(&m.x);
    if final_return > initial_return {
        policy = init_policy.clone();
        final_return = initial_return;
    }
    Ok(Improvement {
        policy,
        initial_return,
        final_return,
        iterations: m.iterations,
        evaluations: m.evaluations,
        termination: m.termination,
    })
}
