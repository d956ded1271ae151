//! Episodic learning protocol: rollouts on the simulated plant, model
//! refits, policy improvement, outcome classification and aggregation.
//!
//! A trial starts from a random policy and runs at most `max_rollouts`
//! rollouts. It ends as
//!
//! * `ObjectSlipped` as soon as any rollout drops the object,
//! * `TaskLearned` at the second consecutive rollout whose final yaw lies
//!   within `tolerance` of the goal and which held the object for the
//!   whole holding phase (a rollout that lands in the goal band is
//!   re-executed with the unchanged policy to confirm),
//! * `TaskNotLearned` when the rollout budget runs out.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cost::{step_cost, Condition, CostSpec};
use crate::error::{Error, Result};
use crate::gp::{FitOptions, GpHyper, GpModel, Transition};
use crate::math;
use crate::optimize::MinimizeOptions;
use crate::plant::{Control, Event, Plant, PlantConfig, State};
use crate::policy::{random_policy, Policy, RandomPolicySpec};
use crate::propagate::{PropagationConfig, ReflexModel, StateDistribution};
use crate::reactive::{
    combine, control_error, count_interventions, reactive_correction, reactive_pseudoenergy, ReactiveGain,
    SlipCalibration, INTERVENTION_THRESHOLD,
};
use crate::search::{improve_policy, SearchConfig};
use crate::seed::{self, tag};
use crate::FINGERS;

/// Re-orientation task; angles in degrees at this boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Grasped at 0 deg, goal 70 deg.
    Cup,
    /// Grasped at 70 deg, goal 10 deg.
    Bottle,
    Custom { initial_yaw_deg: f64, goal_deg: f64 },
}

impl Task {
    pub fn initial_yaw(&self) -> f64 {
        match self {
            Task::Cup => 0.0,
            Task::Bottle => 70f64.to_radians(),
            Task::Custom { initial_yaw_deg, .. } => initial_yaw_deg.to_radians(),
        }
    }

    pub fn goal(&self) -> f64 {
        match self {
            Task::Cup => 70f64.to_radians(),
            Task::Bottle => 10f64.to_radians(),
            Task::Custom { goal_deg, .. } => goal_deg.to_radians(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Task::Cup => "cup".into(),
            Task::Bottle => "bottle".into(),
            Task::Custom { initial_yaw_deg, goal_deg } => format!("custom({initial_yaw_deg}->{goal_deg})"),
        }
    }
}

/// Cost weights and force target; the variant and goal come from the
/// condition and task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub f_des: [f64; FINGERS],
}

impl Default for CostParams {
    fn default() -> Self {
        Self { lambda1: 0.5, lambda2: 0.5, f_des: [2.0; FINGERS] }
    }
}

/// Budgets of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Particles used while optimizing the policy.
    pub particles: usize,
    pub optimizer_iterations: usize,
    /// Relative forward-difference step on policy parameters.
    pub fd_step: f64,
    /// Weight on policy outputs leaving the motor box during search.
    pub saturation_penalty: f64,
    pub fit_restarts: usize,
    pub fit_iterations: usize,
    /// Only the most recent transitions are kept for model fitting.
    pub max_training_points: usize,
    pub random_policy: RandomPolicySpec,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            particles: 30,
            optimizer_iterations: 25,
            fd_step: 1e-6,
            saturation_penalty: 1.0,
            fit_restarts: 1,
            fit_iterations: 60,
            max_training_points: 120,
            random_policy: RandomPolicySpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub condition: Condition,
    pub task: Task,
    pub n_trials: usize,
    pub max_rollouts: usize,
    /// Ticks of policy execution per rollout.
    pub episode_ticks: usize,
    /// Ticks the last command is held after the episode.
    pub hold_ticks: usize,
    /// Ticks between policy updates; one model step spans this many ticks.
    pub policy_period: usize,
    /// Half-width of the goal band (deg).
    pub tolerance_deg: f64,
    pub reactive_enabled: bool,
    #[serde(with = "crate::seed::text")]
    pub master_seed: u64,
    /// Explicit per-trial seeds; derived from `master_seed` when empty.
    #[serde(with = "crate::seed::text::list")]
    pub seeds: Vec<u64>,
    pub plant: PlantConfig,
    pub calibration: SlipCalibration,
    pub gain: ReactiveGain,
    pub cost: CostParams,
    pub learning: LearningConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(Condition::Synergy, Task::Cup)
    }
}

impl ExperimentConfig {
    pub fn new(condition: Condition, task: Task) -> Self {
        Self {
            condition,
            task,
            n_trials: 10,
            max_rollouts: 11,
            episode_ticks: 150,
            hold_ticks: 1000,
            policy_period: 10,
            tolerance_deg: 5.0,
            reactive_enabled: condition.reactive_enabled(),
            master_seed: 0,
            seeds: Vec::new(),
            plant: PlantConfig::default(),
            calibration: SlipCalibration::default(),
            gain: ReactiveGain::default(),
            cost: CostParams::default(),
            learning: LearningConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tolerance_deg > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance_deg));
        }
        if self.max_rollouts == 0 {
            return bad("max_rollouts must be at least 1".into());
        }
        if self.policy_period == 0 || self.episode_ticks < self.policy_period || self.episode_ticks % self.policy_period != 0
        {
            return bad(format!(
                "episode_ticks ({}) must be a positive multiple of policy_period ({})",
                self.episode_ticks, self.policy_period
            ));
        }
        if self.reactive_enabled != self.condition.reactive_enabled() {
            return bad(format!(
                "condition {} requires reactive_enabled = {}",
                self.condition.as_str(),
                self.condition.reactive_enabled()
            ));
        }
        if !self.seeds.is_empty() && self.seeds.len() < self.n_trials {
            return bad(format!("{} seeds listed for {} trials", self.seeds.len(), self.n_trials));
        }
        if self.learning.particles == 0 || self.learning.max_training_points < 2 {
            return bad("learning needs at least one particle and two training points".into());
        }
        self.plant.validate()?;
        self.calibration.validate()?;
        self.gain.validate()?;
        self.cost_spec().validate()
    }

    pub fn cost_spec(&self) -> CostSpec {
        CostSpec {
            variant: self.condition,
            phi_des: self.task.goal(),
            f_des: self.cost.f_des,
            lambda1: self.cost.lambda1,
            lambda2: self.cost.lambda2,
            alpha_des: self.calibration.alpha_des,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance_deg.to_radians()
    }

    pub fn horizon(&self) -> usize {
        self.episode_ticks / self.policy_period
    }

    /// Seed of the `i`-th trial.
    pub fn trial_seed(&self, i: usize) -> u64 {
        self.seeds.get(i).copied().unwrap_or_else(|| seed::derive(self.master_seed, tag::TRIAL, i as u64))
    }

    /// The observation the learner sees.
    pub fn project(&self, s: &State) -> Vec<f64> {
        match self.condition {
            Condition::VisualOnly => vec![s.yaw],
            _ => s.to_array().to_vec(),
        }
    }

    pub fn reflex_model(&self) -> ReflexModel {
        ReflexModel {
            calibration: self.calibration,
            gain: if self.reactive_enabled { Some(self.gain) } else { None },
        }
    }
}

/// One tick of a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    /// Observation before the step.
    pub state: State,
    pub u_p: [f64; FINGERS],
    pub u_r: [f64; FINGERS],
    pub u: [f64; FINGERS],
    pub alpha: f64,
    pub pseudoenergy: f64,
    pub cost: f64,
    /// Outcome of the step taken at this tick.
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub records: Vec<TickRecord>,
    pub terminal: Event,
    /// Yaw when the policy stops acting (or when the object fell).
    pub final_yaw: f64,
    pub episode_ticks: usize,
    /// Model-rate transitions `(x_k, u_k) → x_{k+1}` of the episode.
    pub transitions: Vec<Transition>,
}

impl RolloutTrace {
    pub fn fell(&self) -> bool {
        self.terminal == Event::Fell
    }

    /// Mean per-tick cost over the policy-execution part of the rollout.
    pub fn episode_cost(&self) -> f64 {
        let ticks: Vec<f64> = self.records.iter().take(self.episode_ticks).map(|r| r.cost).collect();
        if ticks.is_empty() {
            0.0
        } else {
            ticks.iter().sum::<f64>() / ticks.len() as f64
        }
    }

    pub fn interventions(&self, threshold: f64) -> usize {
        count_interventions(self.records.iter().map(|r| r.pseudoenergy), threshold)
    }
}

/// Executes `policy` on `plant` for `episode_ticks`, recomputing the policy
/// command every `policy_period` ticks and (if enabled) the reflex every
/// tick, then holds the last policy command for `hold_ticks`.
pub fn run_rollout(plant: &mut Plant, policy: &Policy, config: &ExperimentConfig) -> Result<RolloutTrace> {
    if plant.state().fallen {
        return Err(Error::Irreversible);
    }
    let total = config.episode_ticks + config.hold_ticks;
    let spec = config.cost_spec();
    let cal = &config.calibration;
    let bounds = *policy.bounds();
    let mut records = Vec::with_capacity(total);
    let mut transitions = Vec::with_capacity(config.horizon());
    // State at the last policy update and the command summed since then.
    let mut pending: Option<(Vec<f64>, [f64; FINGERS], usize)> = None;
    let mut u_p = Control::default();
    let mut final_yaw = plant.observe().yaw;
    let mut terminal = Event::None;

    for t in 0..total {
        let obs = plant.observe();
        let x = config.project(&obs);
        let on_update = t < config.episode_ticks && t % config.policy_period == 0;
        if t % config.policy_period == 0 && t <= config.episode_ticks {
            if let Some((x_prev, u_sum, n)) = pending.take() {
                transitions.push(Transition { state: x_prev, control: mean_command(u_sum, n), next: x.clone() });
            }
        }
        if t == config.episode_ticks {
            final_yaw = obs.yaw;
        }
        if on_update {
            u_p = policy.action(&x)?;
        }
        let alpha = cal.alpha(&obs.forces)?;
        let e_r = control_error(alpha, cal)?;
        let u_r = if config.reactive_enabled { reactive_correction(e_r, &config.gain) } else { [0.0; FINGERS] };
        let u = combine(&u_p, &u_r, &bounds);
        if on_update {
            pending = Some((x.clone(), [0.0; FINGERS], 0));
        }
        if let Some((_, u_sum, n)) = pending.as_mut() {
            for (s, m) in u_sum.iter_mut().zip(u.motors) {
                *s += m;
            }
            *n += 1;
        }
        let event = plant.step(&u)?;
        records.push(TickRecord {
            tick: t as u32,
            state: obs,
            u_p: u_p.motors,
            u_r,
            u: u.motors,
            alpha,
            pseudoenergy: reactive_pseudoenergy(e_r),
            cost: step_cost(&x, e_r, &spec),
            event,
        });
        if event == Event::Fell {
            terminal = Event::Fell;
            if t < config.episode_ticks {
                final_yaw = plant.observe().yaw;
            }
            break;
        }
    }
    if terminal == Event::None && config.hold_ticks == 0 {
        // The episode's last transition closes on the final observation.
        let obs = plant.observe();
        final_yaw = obs.yaw;
        if let Some((x_prev, u_sum, n)) = pending.take() {
            transitions.push(Transition { state: x_prev, control: mean_command(u_sum, n), next: config.project(&obs) });
        }
    }
    Ok(RolloutTrace { records, terminal, final_yaw, episode_ticks: config.episode_ticks, transitions })
}

fn mean_command(sum: [f64; FINGERS], n: usize) -> [f64; FINGERS] {
    sum.map(|s| s / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TaskLearned,
    TaskNotLearned,
    ObjectSlipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::TaskLearned => "task_learned",
            Verdict::TaskNotLearned => "task_not_learned",
            Verdict::ObjectSlipped => "object_slipped",
        }
    }
}

/// Per-rollout facts the outcome rules look at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub fell: bool,
    pub final_yaw: f64,
    pub cost: f64,
    pub interventions: usize,
}

impl RolloutSummary {
    pub fn of(trace: &RolloutTrace) -> Self {
        Self {
            fell: trace.fell(),
            final_yaw: trace.final_yaw,
            cost: trace.episode_cost(),
            interventions: trace.interventions(INTERVENTION_THRESHOLD),
        }
    }
}

/// Applies the outcome rules one rollout at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBook {
    goal: f64,
    tolerance: f64,
    max_rollouts: usize,
    rollouts: Vec<RolloutSummary>,
}

impl TrialBook {
    pub fn new(goal: f64, tolerance: f64, max_rollouts: usize) -> Self {
        Self { goal, tolerance, max_rollouts, rollouts: Vec::new() }
    }

    pub fn in_goal(&self, r: &RolloutSummary) -> bool {
        !r.fell && (r.final_yaw - self.goal).abs() <= self.tolerance
    }

    /// Records a rollout; returns the verdict once the trial is decided.
    pub fn record(&mut self, r: RolloutSummary) -> Option<Verdict> {
        let confirmed = self.rollouts.last().is_some_and(|p| self.in_goal(p)) && self.in_goal(&r);
        self.rollouts.push(r);
        if r.fell {
            Some(Verdict::ObjectSlipped)
        } else if confirmed {
            Some(Verdict::TaskLearned)
        } else if self.rollouts.len() >= self.max_rollouts {
            Some(Verdict::TaskNotLearned)
        } else {
            None
        }
    }

    pub fn last_in_goal(&self) -> bool {
        self.rollouts.last().is_some_and(|r| self.in_goal(r))
    }

    pub fn rollouts(&self) -> &[RolloutSummary] {
        &self.rollouts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub verdict: Verdict,
    pub rollouts: Vec<RolloutSummary>,
    /// Set when model fitting or policy search aborted the trial.
    pub diagnostic: Option<String>,
}

impl TrialOutcome {
    pub fn rollout_count(&self) -> usize {
        self.rollouts.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.rollouts.iter().map(|r| r.cost).collect()
    }

    pub fn interventions(&self) -> Vec<usize> {
        self.rollouts.iter().map(|r| r.interventions).collect()
    }
}

/// Progress of a trial, reported as it happens.
#[derive(Debug, Clone, Copy)]
pub enum TrialEvent<'a> {
    /// Rollout `index` (0-based) finished; `policy` is the one it executed.
    Rollout { index: usize, trace: &'a RolloutTrace, policy: &'a Policy },
    /// The dynamics model refitted on the data up to rollout `after_rollout`.
    Model { after_rollout: usize, model: &'a GpModel },
}

/// Runs one trial, reporting every rollout and model fit to `observe`.
pub fn run_trial_with(
    config: &ExperimentConfig,
    trial_seed: u64,
    mut observe: impl FnMut(TrialEvent<'_>),
) -> Result<TrialOutcome> {
    config.validate()?;
    let goal = config.task.goal();
    let mut book = TrialBook::new(goal, config.tolerance(), config.max_rollouts);
    let plant_for = |r: usize| -> Result<Plant> {
        let plant_cfg = PlantConfig { rng_seed: seed::derive(trial_seed, tag::PLANT, r as u64), ..config.plant.clone() };
        Plant::reset(plant_cfg, config.task.initial_yaw())
    };

    let first = plant_for(0)?;
    let x0 = config.project(&first.observe());
    let mut policy = random_policy(
        &x0,
        &first.grasp_command(),
        config.plant.motor_bounds,
        config.learning.random_policy,
        seed::derive(trial_seed, tag::POLICY_INIT, 0),
    )?;
    let init_dist = StateDistribution::diagonal(&x0, &project_std(config));
    let mut data: Vec<Transition> = Vec::new();
    let mut hypers: Option<Vec<GpHyper>> = None;

    for r in 0..config.max_rollouts {
        let mut plant = if r == 0 { first.clone() } else { plant_for(r)? };
        let trace = run_rollout(&mut plant, &policy, config)?;
        observe(TrialEvent::Rollout { index: r, trace: &trace, policy: &policy });
        data.extend(trace.transitions.iter().cloned());
        if let Some(verdict) = book.record(RolloutSummary::of(&trace)) {
            return Ok(TrialOutcome { seed: trial_seed, verdict, rollouts: book.rollouts().to_vec(), diagnostic: None });
        }
        if book.last_in_goal() {
            continue;
        }
        let model = match fit_model(config, &data, hypers.take()) {
            Ok(m) => m,
            Err(e) => return Ok(aborted(trial_seed, &book, r, e)),
        };
        observe(TrialEvent::Model { after_rollout: r, model: &model });
        hypers = Some(model.hypers());
        match improve(config, &model, &policy, &init_dist, trial_seed, r) {
            Ok(next) => policy = next,
            Err(e) => return Ok(aborted(trial_seed, &book, r, e)),
        }
    }
    unreachable!("the trial book decides at max_rollouts")
}

fn aborted(seed: u64, book: &TrialBook, rollout: usize, e: Error) -> TrialOutcome {
    TrialOutcome {
        seed,
        verdict: Verdict::TaskNotLearned,
        rollouts: book.rollouts().to_vec(),
        diagnostic: Some(format!("after rollout {}: {e}", rollout + 1)),
    }
}

pub fn run_trial(config: &ExperimentConfig, trial_seed: u64) -> Result<TrialOutcome> {
    run_trial_with(config, trial_seed, |_| {})
}

fn project_std(config: &ExperimentConfig) -> Vec<f64> {
    let s = config.plant.process_noise_std;
    config.project(&State { yaw: s[0], forces: [s[1], s[2], s[3]] })
}

/// Fits the dynamics model on the most recent transitions.
fn fit_model(config: &ExperimentConfig, data: &[Transition], warm: Option<Vec<GpHyper>>) -> Result<GpModel> {
    let lc = &config.learning;
    let recent = &data[data.len().saturating_sub(lc.max_training_points)..];
    let fit_opts = FitOptions {
        restarts: lc.fit_restarts,
        optimizer: MinimizeOptions { max_iter: lc.fit_iterations, grad_tol: 1e-4, ..Default::default() },
        warm_start: warm,
        ..Default::default()
    };
    GpModel::fit(recent, &fit_opts)
}

fn improve(
    config: &ExperimentConfig,
    model: &GpModel,
    policy: &Policy,
    init: &StateDistribution,
    trial_seed: u64,
    rollout: usize,
) -> Result<Policy> {
    let lc = &config.learning;
    let search = SearchConfig {
        horizon: config.horizon(),
        propagation: PropagationConfig {
            particles: lc.particles,
            seed: seed::derive(trial_seed, tag::PROPAGATION, rollout as u64),
        },
        optimizer: MinimizeOptions { max_iter: lc.optimizer_iterations, ..Default::default() },
        fd_step: lc.fd_step,
        saturation_penalty: lc.saturation_penalty,
    };
    Ok(improve_policy(model, policy, &config.cost_spec(), init, config.reflex_model(), &search)?.policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub condition: Condition,
    pub task: Task,
    pub outcomes: Vec<TrialOutcome>,
    pub max_rollouts: usize,
}

impl ExperimentReport {
    pub fn trials(&self) -> usize {
        self.outcomes.len()
    }

    fn rate(&self, v: Verdict) -> Result<f64> {
        if self.outcomes.is_empty() {
            return Err(Error::Domain("rates are undefined for an experiment without trials".into()));
        }
        Ok(self.count(v) as f64 / self.outcomes.len() as f64)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.outcomes.iter().filter(|o| o.verdict == v).count()
    }

    pub fn success_rate(&self) -> Result<f64> {
        self.rate(Verdict::TaskLearned)
    }

    pub fn slip_rate(&self) -> Result<f64> {
        self.rate(Verdict::ObjectSlipped)
    }

    /// Rows are trials, columns rollouts; `None` where a trial had stopped.
    pub fn cost_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.outcomes
            .iter()
            .map(|o| (0..self.max_rollouts).map(|r| o.rollouts.get(r).map(|s| s.cost)).collect())
            .collect()
    }

    /// Median intervention count at each rollout over the trials that
    /// executed it.
    pub fn median_interventions(&self) -> Vec<Option<f64>> {
        (0..self.max_rollouts)
            .map(|r| {
                let mut v: Vec<f64> =
                    self.outcomes.iter().filter_map(|o| o.rollouts.get(r)).map(|s| s.interventions as f64).collect();
                math::median(&mut v)
            })
            .collect()
    }
}

/// Runs every trial of `config` in order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, |_, _| {})
}

/// Like [`run_experiment`], reporting trial events tagged with the trial
/// index.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    mut observe: impl FnMut(usize, TrialEvent<'_>),
) -> Result<ExperimentReport> {
    config.validate()?;
    let outcomes = (0..config.n_trials)
        .map(|i| run_trial_with(config, config.trial_seed(i), |e| observe(i, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { condition: config.condition, task: config.task, outcomes, max_rollouts: config.max_rollouts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: Condition,
    pub trials: usize,
    pub success_rate: f64,
    pub slip_rate: f64,
}

/// Conditions ordered by success rate (descending), then slip rate
/// (ascending); ties keep input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: Task,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn from_reports(reports: &[ExperimentReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::Domain("nothing to compare".into()))?;
        if reports.iter().any(|r| r.task != first.task) {
            return Err(Error::Domain("reports cover different tasks".into()));
        }
        let mut rows = reports
            .iter()
            .map(|r| {
                Ok(ComparisonRow {
                    condition: r.condition,
                    trials: r.trials(),
                    success_rate: r.success_rate()?,
                    slip_rate: r.slip_rate()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.sort_by(|a, b| {
            b.success_rate.total_cmp(&a.success_rate).then(a.slip_rate.total_cmp(&b.slip_rate))
        });
        Ok(Self { task: first.task, rows })
    }
}

/// Checks that `configs` differ only in their learning condition.
pub fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    if configs.len() < 2 {
        return Err(Error::Domain(format!("need at least two configurations, got {}", configs.len())));
    }
    let first = &configs[0];
    for c in &configs[1..] {
        if c.task != first.task {
            return Err(Error::Domain(format!("tasks differ: {} vs {}", first.task.name(), c.task.name())));
        }
        if c.plant != first.plant {
            return Err(Error::Domain("plant configurations differ".into()));
        }
    }
    Ok(())
}

/// Runs each configuration and tabulates the results.
pub fn compare_conditions(configs: &[ExperimentConfig]) -> Result<(Comparison, Vec<ExperimentReport>)> {
    check_comparable(configs)?;
    let reports = configs.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    Ok((Comparison::from_reports(&reports)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(fell: bool, yaw_deg: f64) -> RolloutSummary {
        RolloutSummary { fell, final_yaw: yaw_deg.to_radians(), cost: 0.5, interventions: 0 }
    }

    fn book() -> TrialBook {
        TrialBook::new(70f64.to_radians(), 5f64.to_radians(), 11)
    }

    #[test]
    fn slip_ends_the_trial() {
        let mut b = book();
        assert_eq!(b.record(summary(false, 10.0)), None);
        assert_eq!(b.record(summary(false, 40.0)), None);
        assert_eq!(b.record(summary(true, 68.0)), Some(Verdict::ObjectSlipped));
        assert_eq!(b.rollouts().len(), 3);
    }

    #[test]
    fn two_consecutive_in_goal_rollouts_learn_the_task() {
        let mut b = book();
        for yaw in [5.0, 20.0, 35.0, 50.0, 60.0] {
            assert_eq!(b.record(summary(false, yaw)), None);
        }
        assert_eq!(b.record(summary(false, 73.0)), None);
        assert!(b.last_in_goal());
        assert_eq!(b.record(summary(false, 67.5)), Some(Verdict::TaskLearned));
        assert_eq!(b.rollouts().len(), 7);
    }

    #[test]
    fn interrupted_streak_does_not_count() {
        let mut b = book();
        assert_eq!(b.record(summary(false, 70.0)), None);
        assert_eq!(b.record(summary(false, 60.0)), None);
        assert_eq!(b.record(summary(false, 71.0)), None);
        assert_eq!(b.record(summary(false, 69.0)), Some(Verdict::TaskLearned));
    }

    #[test]
    fn budget_exhaustion_is_not_learned() {
        let mut b = book();
        for _ in 0..10 {
            assert_eq!(b.record(summary(false, 30.0)), None);
        }
        assert_eq!(b.record(summary(false, 30.0)), Some(Verdict::TaskNotLearned));
    }

    #[test]
    fn band_edges_are_inclusive() {
        let b = book();
        assert!(b.in_goal(&summary(false, 74.999)));
        assert!(!b.in_goal(&summary(false, 75.01)));
        assert!(!b.in_goal(&summary(true, 70.0)));
    }

    #[test]
    fn config_invariants() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut c = ExperimentConfig::new(Condition::VisualOnly, Task::Cup);
        c.reactive_enabled = true;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.tolerance_deg = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.max_rollouts = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.episode_ticks = 155;
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_experiment_has_undefined_rates() {
        let mut c = ExperimentConfig::default();
        c.n_trials = 0;
        let report = run_experiment(&c).unwrap();
        assert!(report.outcomes.is_empty());
        assert!(report.success_rate().is_err());
        assert!(report.slip_rate().is_err());
    }

    #[test]
    fn tasks_convert_degrees() {
        assert_eq!(Task::Cup.initial_yaw(), 0.0);
        assert!((Task::Cup.goal() - 1.221_730_476).abs() < 1e-9);
        assert!((Task::Bottle.initial_yaw() - 1.221_730_476).abs() < 1e-9);
        assert!((Task::Bottle.goal() - 0.174_532_925).abs() < 1e-9);
    }

    #[test]
    fn comparison_needs_matching_configs() {
        let a = ExperimentConfig::new(Condition::Synergy, Task::Cup);
        assert!(check_comparable(&[a.clone()]).is_err());
        let b = ExperimentConfig::new(Condition::VisualOnly, Task::Bottle);
        assert!(check_comparable(&[a.clone(), b]).is_err());
        let mut c = ExperimentConfig::new(Condition::VisualOnly, Task::Cup);
        c.plant.force_gain = 4.0;
        assert!(check_comparable(&[a.clone(), c]).is_err());
        let d = ExperimentConfig::new(Condition::VisualOnly, Task::Cup);
        assert!(check_comparable(&[a, d]).is_ok());
    }
}
