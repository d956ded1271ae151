//! Gaussian-process regression of one-step dynamics.
//!
//! One independent GP per state dimension, zero prior mean, ARD squared
//! exponential kernel. Inputs are `(x_t, u_t)` and targets the state
//! increments `x_{t+1} − x_t`; predictions add the increment back.
//! Hyperparameters maximize the log marginal likelihood (BFGS on log
//! parameters, analytic gradient, a few restarts).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::math;
use crate::optimize::{minimize, MinimizeOptions, Objective};
use crate::FINGERS;

/// Kernel and noise hyperparameters of one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub length_scales: Vec<f64>,
    /// σ_f².
    pub signal_variance: f64,
    /// σ_n².
    pub noise_variance: f64,
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.length_scales.iter().all(|l| pos(*l)) && pos(self.signal_variance) && pos(self.noise_variance) {
            Ok(())
        } else {
            Err(Error::Domain(format!("hyperparameters must be positive and finite: {self:?}")))
        }
    }

    /// `(ln ℓ_1..ln ℓ_d, ln σ_f, ln σ_n)`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.length_scales.iter().map(|l| math::ln(*l)).collect();
        v.push(0.5 * math::ln(self.signal_variance));
        v.push(0.5 * math::ln(self.noise_variance));
        v
    }

    pub fn from_log(p: &[f64]) -> Self {
        let d = p.len() - 2;
        Self {
            length_scales: p[..d].iter().map(|v| math::exp(*v)).collect(),
            signal_variance: math::exp(2.0 * p[d]),
            noise_variance: math::exp(2.0 * p[d + 1]),
        }
    }
}

/// `σ_f² exp(−½ Σ_d ((a_d − b_d)/ℓ_d)²)`.
pub fn se_kernel(a: &[f64], b: &[f64], hyper: &GpHyper) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&hyper.length_scales)
        .map(|((x, y), l)| {
            let z = (x - y) / l;
            z * z
        })
        .sum();
    hyper.signal_variance * math::exp(-0.5 * r2)
}

/// Row-major `n x d` input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Inputs {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && data.len() % dim == 0);
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        Self { dim, data: rows.iter().flatten().copied().collect() }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn gram(inputs: &Inputs, hyper: &GpHyper) -> SquareMatrix {
    let n = inputs.len();
    let mut k = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = se_kernel(inputs.row(i), inputs.row(j), hyper);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

fn noisy_gram(inputs: &Inputs, hyper: &GpHyper) -> SquareMatrix {
    let mut k = gram(inputs, hyper);
    for i in 0..k.dim() {
        k.set(i, i, k.get(i, i) + hyper.noise_variance);
    }
    k
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log evidence `ln p(y | X, hyper)` and its gradient with respect to
/// [`GpHyper::to_log`].
pub fn log_marginal_likelihood(inputs: &Inputs, targets: &[f64], hyper: &GpHyper) -> Result<(f64, Vec<f64>)> {
    hyper.validate()?;
    let n = inputs.len();
    if n == 0 || targets.len() != n || hyper.length_scales.len() != inputs.dim {
        return Err(Error::Domain(format!(
            "{n} inputs of dim {}, {} targets, {} length scales",
            inputs.dim,
            targets.len(),
            hyper.length_scales.len()
        )));
    }
    let kf = gram(inputs, hyper);
    let mut k = kf.clone();
    for i in 0..n {
        k.set(i, i, k.get(i, i) + hyper.noise_variance);
    }
    let chol = Cholesky::factor(&k)?;
    let alpha = chol.solve(targets);
    let lml = -0.5 * dot(targets, &alpha) - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;

    // d lml / d θ = ½ tr((α αᵀ − K⁻¹) ∂K/∂θ)
    let kinv = chol.inverse();
    let d = inputs.dim;
    let mut grad = vec![0.0; d + 2];
    let inv_l2: Vec<f64> = hyper.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut trace_w = 0.0;
    for i in 0..n {
        let wii = alpha[i] * alpha[i] - kinv.get(i, i);
        trace_w += wii;
        // Diagonal entries carry no distance, only the signal term.
        grad[d] += 0.5 * wii * 2.0 * kf.get(i, i);
        let xi = inputs.row(i);
        for j in 0..i {
            let w = 2.0 * (alpha[i] * alpha[j] - kinv.get(i, j));
            let kij = kf.get(i, j);
            let xj = inputs.row(j);
            for dd in 0..d {
                let diff = xi[dd] - xj[dd];
                grad[dd] += 0.5 * w * kij * diff * diff * inv_l2[dd];
            }
            grad[d] += 0.5 * w * 2.0 * kij;
        }
    }
    grad[d + 1] = 0.5 * trace_w * 2.0 * hyper.noise_variance;
    Ok((lml, grad))
}

/// A fitted single-output GP.
#[derive(Debug, Clone, PartialEq)]
pub struct GpOutput {
    hyper: GpHyper,
    /// Inputs divided by the length scales.
    scaled: Inputs,
    chol: Cholesky,
    /// `K⁻¹ y`.
    beta: Vec<f64>,
}

impl GpOutput {
    pub fn new(inputs: &Inputs, targets: &[f64], hyper: GpHyper) -> Result<Self> {
        hyper.validate()?;
        if inputs.is_empty() || targets.len() != inputs.len() {
            return Err(Error::Domain("GP needs as many targets as inputs".into()));
        }
        let chol = Cholesky::factor(&noisy_gram(inputs, &hyper))?;
        let beta = chol.solve(targets);
        let scaled = Inputs::new(
            inputs.dim,
            inputs
                .data
                .chunks(inputs.dim)
                .flat_map(|row| row.iter().zip(&hyper.length_scales).map(|(x, l)| x / l))
                .collect(),
        );
        Ok(Self { hyper, scaled, chol, beta })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Posterior mean and latent variance of the function at `input`.
    /// `scratch` is resized as needed.
    pub fn predict_latent_with(&self, input: &[f64], scratch: &mut Vec<f64>) -> (f64, f64) {
        let n = self.len();
        let d = self.scaled.dim;
        scratch.resize(n + d, 0.0);
        let (k, q) = scratch.split_at_mut(n);
        for (qk, (x, l)) in q.iter_mut().zip(input.iter().zip(&self.hyper.length_scales)) {
            *qk = x / l;
        }
        for (i, s) in k.iter_mut().enumerate() {
            let row = &self.scaled.data[i * d..(i + 1) * d];
            let r2: f64 = row.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            *s = self.hyper.signal_variance * math::exp(-0.5 * r2);
        }
        let mean = dot(k, &self.beta);
        self.chol.solve_lower_in_place(k);
        let latent = (self.hyper.signal_variance - dot(k, k)).max(0.0);
        (mean, latent)
    }

    /// Posterior mean and predictive variance (latent variance plus σ_n²).
    pub fn predict_with(&self, input: &[f64], scratch: &mut Vec<f64>) -> (f64, f64) {
        let (mean, latent) = self.predict_latent_with(input, scratch);
        (mean, latent + self.hyper.noise_variance)
    }

    pub fn predict(&self, input: &[f64]) -> (f64, f64) {
        self.predict_with(input, &mut Vec::new())
    }
}

/// One observed transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub control: [f64; FINGERS],
    pub next: Vec<f64>,
}

impl Transition {
    pub fn input(&self) -> Vec<f64> {
        let mut v = self.state.clone();
        v.extend_from_slice(&self.control);
        v
    }
}

/// Per-dimension Gaussian prediction of the next state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub variance: f64,
}

/// GP dynamics model over a `state_dim`-dimensional state and three motor
/// commands.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    state_dim: usize,
    outputs: Vec<GpOutput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Optimizer runs per output; the first starts from the data-driven
    /// initialization, later ones from deterministic perturbations of it.
    pub restarts: usize,
    pub optimizer: MinimizeOptions,
    /// Optional starting hyperparameters per output (e.g. the previous fit),
    /// tried in addition to the data-driven initialization.
    pub warm_start: Option<Vec<GpHyper>>,
    /// Half-width, in log units, of the box around the initialization
    /// outside which a quadratic penalty applies.
    pub log_box: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            optimizer: MinimizeOptions { max_iter: 100, grad_tol: 1e-4, ..Default::default() },
            warm_start: None,
            log_box: 3.0,
        }
    }
}

/// Data-driven initialization: ℓ_d = input std, σ_f = target std,
/// σ_n = 0.1 σ_f.
pub fn default_hyper(inputs: &Inputs, targets: &[f64]) -> GpHyper {
    let n = inputs.len() as f64;
    let length_scales = (0..inputs.dim)
        .map(|d| {
            let s = std_dev((0..inputs.len()).map(|i| inputs.row(i)[d]), n);
            if s > 1e-8 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let sf = std_dev(targets.iter().copied(), n).max(1e-6);
    GpHyper { length_scales, signal_variance: sf * sf, noise_variance: 0.01 * sf * sf }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone, n: f64) -> f64 {
    let mean = values.clone().sum::<f64>() / n;
    math::sqrt(values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

struct NegEvidence<'a> {
    inputs: &'a Inputs,
    targets: &'a [f64],
    center: Vec<f64>,
    half_width: f64,
    cached: Option<(Vec<f64>, Vec<f64>)>,
}

const PENALTY_WEIGHT: f64 = 10.0;

impl Objective for NegEvidence<'_> {
    fn value(&mut self, p: &[f64]) -> f64 {
        if p.iter().any(|v| v.abs() > 50.0) {
            return f64::INFINITY;
        }
        match log_marginal_likelihood(self.inputs, self.targets, &GpHyper::from_log(p)) {
            Ok((lml, mut g)) => {
                let mut pen = 0.0;
                for i in 0..p.len() {
                    let excess = (p[i] - self.center[i]).abs() - self.half_width;
                    g[i] = -g[i];
                    if excess > 0.0 {
                        pen += PENALTY_WEIGHT * excess * excess;
                        g[i] += 2.0 * PENALTY_WEIGHT * excess * (p[i] - self.center[i]).signum();
                    }
                }
                self.cached = Some((p.to_vec(), g));
                -lml + pen
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&mut self, p: &[f64], _fx: f64, grad: &mut [f64]) {
        if !matches!(&self.cached, Some((x, _)) if x == p) {
            self.value(p);
        }
        match &self.cached {
            Some((_, g)) => grad.copy_from_slice(g),
            None => grad.iter_mut().for_each(|g| *g = 0.0),
        }
    }
}

/// Fits the hyperparameters of one output.
pub fn fit_output(inputs: &Inputs, targets: &[f64], init: &GpHyper, extra_starts: &[GpHyper], opts: &FitOptions) -> Result<GpOutput> {
    let center = init.to_log();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for r in 0..opts.restarts.max(1) {
        let shift = match r {
            0 => 0.0,
            r if r % 2 == 1 => 0.5 * ((r + 1) / 2) as f64,
            r => -0.5 * (r / 2) as f64,
        };
        // Perturb the length scales; keep the variances.
        let mut s = center.clone();
        for v in s.iter_mut().take(inputs.dim) {
            *v += shift;
        }
        starts.push(s);
    }
    starts.extend(extra_starts.iter().filter(|h| h.length_scales.len() == inputs.dim).map(GpHyper::to_log));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let mut obj = NegEvidence { inputs, targets, center: center.clone(), half_width: opts.log_box, cached: None };
        if !obj.value(&s).is_finite() {
            continue;
        }
        let Ok(m) = minimize(&mut obj, &s, &opts.optimizer) else { continue };
        if best.as_ref().map_or(true, |(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (_, p) = best.ok_or_else(|| Error::Numeric("no hyperparameter start gave a positive-definite Gram matrix".into()))?;
    GpOutput::new(inputs, targets, GpHyper::from_log(&p))
}

impl GpModel {
    /// Model from fixed hyperparameters (no optimization).
    pub fn with_hyper(data: &[Transition], hypers: Vec<GpHyper>) -> Result<Self> {
        let (state_dim, inputs, targets) = Self::design(data)?;
        if hypers.len() != state_dim {
            return Err(Error::Domain(format!("{} hyperparameter sets for {state_dim} outputs", hypers.len())));
        }
        let outputs = hypers
            .into_iter()
            .zip(&targets)
            .map(|(h, y)| GpOutput::new(&inputs, y, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { state_dim, outputs })
    }

    /// Fits every output by maximizing its marginal likelihood.
    pub fn fit(data: &[Transition], opts: &FitOptions) -> Result<Self> {
        let (state_dim, inputs, targets) = Self::design(data)?;
        let outputs = targets
            .iter()
            .enumerate()
            .map(|(d, y)| {
                let init = default_hyper(&inputs, y);
                let warm: Vec<GpHyper> = opts.warm_start.as_ref().and_then(|w| w.get(d).cloned()).into_iter().collect();
                fit_output(&inputs, y, &init, &warm, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { state_dim, outputs })
    }

    fn design(data: &[Transition]) -> Result<(usize, Inputs, Vec<Vec<f64>>)> {
        let first = data.first().ok_or_else(|| Error::Fit("no training data".into()))?;
        let state_dim = first.state.len();
        if state_dim == 0 || data.iter().any(|t| t.state.len() != state_dim || t.next.len() != state_dim) {
            return Err(Error::Fit("transitions disagree on the state dimension".into()));
        }
        let all_finite = data
            .iter()
            .all(|t| t.state.iter().chain(&t.next).chain(&t.control).all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::Fit("non-finite training data".into()));
        }
        let rows: Vec<Vec<f64>> = data.iter().map(Transition::input).collect();
        if rows.iter().all(|r| r == &rows[0]) {
            return Err(Error::Fit(format!("all {} training inputs are identical", rows.len())));
        }
        let inputs = Inputs::from_rows(&rows);
        let targets = (0..state_dim)
            .map(|d| data.iter().map(|t| t.next[d] - t.state[d]).collect())
            .collect();
        Ok((state_dim, inputs, targets))
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + FINGERS
    }

    pub fn outputs(&self) -> &[GpOutput] {
        &self.outputs
    }

    pub fn hypers(&self) -> Vec<GpHyper> {
        self.outputs.iter().map(|o| o.hyper.clone()).collect()
    }

    /// Predictive distribution of the next state, per dimension.
    pub fn predict(&self, x: &[f64], u: &[f64; FINGERS]) -> Result<Vec<Gaussian1>> {
        if x.len() != self.state_dim {
            return Err(Error::Domain(format!("state of dim {} for a model of dim {}", x.len(), self.state_dim)));
        }
        let mut input = x.to_vec();
        input.extend_from_slice(u);
        let mut scratch = Vec::new();
        Ok(self
            .outputs
            .iter()
            .zip(x)
            .map(|(o, xd)| {
                let (m, v) = o.predict_with(&input, &mut scratch);
                Gaussian1 { mean: xd + m, variance: v }
            })
            .collect())
    }

    /// Allocation-free variant of [`GpModel::predict`] over a concatenated
    /// `(x, u)` input.
    #[inline]
    pub fn predict_into(&self, input: &[f64], mean: &mut [f64], var: &mut [f64], scratch: &mut Vec<f64>) {
        for (d, o) in self.outputs.iter().enumerate() {
            let (m, v) = o.predict_with(input, scratch);
            mean[d] = input[d] + m;
            var[d] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hyper(d: usize) -> GpHyper {
        GpHyper { length_scales: vec![0.8; d], signal_variance: 1.3, noise_variance: 0.01 }
    }

    #[test]
    fn kernel_closed_forms() {
        let h = GpHyper { length_scales: vec![0.5, 2.0], signal_variance: 2.0, noise_variance: 0.1 };
        assert_eq!(se_kernel(&[1.0, 2.0], &[1.0, 2.0], &h), 2.0);
        assert_relative_eq!(se_kernel(&[0.5, 0.0], &[0.0, 0.0], &h), 2.0 * math::exp(-0.5), epsilon = 1e-15);
        assert!(se_kernel(&[100.0, 0.0], &[0.0, 0.0], &h) < 1e-300);
    }

    #[test]
    fn single_point_evidence_is_gaussian_density() {
        let h = hyper(1);
        let inputs = Inputs::new(1, vec![0.3]);
        let (lml, _) = log_marginal_likelihood(&inputs, &[0.7], &h).unwrap();
        let var = h.signal_variance + h.noise_variance;
        let expected = -0.5 * 0.49 / var - 0.5 * math::ln(2.0 * core::f64::consts::PI * var);
        assert_relative_eq!(lml, expected, epsilon = 1e-12);
    }

    #[test]
    fn log_hyper_round_trip() {
        let h = GpHyper { length_scales: vec![0.3, 4.0], signal_variance: 0.7, noise_variance: 1e-3 };
        let back = GpHyper::from_log(&h.to_log());
        for (a, b) in h.length_scales.iter().zip(&back.length_scales) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        assert_relative_eq!(h.signal_variance, back.signal_variance, max_relative = 1e-14);
        assert_relative_eq!(h.noise_variance, back.noise_variance, max_relative = 1e-14);
    }

    #[test]
    fn identical_inputs_cannot_be_fitted() {
        let t = |y: f64| Transition { state: vec![0.1], control: [0.5; 3], next: vec![y] };
        let data = vec![t(0.0), t(1.0), t(2.0)];
        assert!(matches!(GpModel::fit(&data, &FitOptions::default()), Err(Error::Fit(_))));
        assert!(matches!(GpModel::fit(&[], &FitOptions::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn far_queries_revert_to_the_prior() {
        let data: Vec<Transition> = (0..6)
            .map(|i| {
                let x = i as f64 * 0.2;
                Transition { state: vec![x], control: [0.0; 3], next: vec![x + 0.3 * x] }
            })
            .collect();
        let h = GpHyper { length_scales: vec![0.5; 4], signal_variance: 0.4, noise_variance: 1e-6 };
        let model = GpModel::with_hyper(&data, vec![h.clone()]).unwrap();
        let p = model.predict(&[50.0], &[0.0; 3]).unwrap();
        assert_relative_eq!(p[0].mean, 50.0, epsilon = 1e-12);
        assert_relative_eq!(p[0].variance, h.signal_variance + h.noise_variance, epsilon = 1e-12);
    }
}
