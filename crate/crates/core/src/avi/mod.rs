//! Approximate value iteration with the step schedule, sigmoidal step
//! scaling and the sign-lock safeguard.

mod log;
mod update;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::exec;
use crate::model::{Mdp, StateClass};
use crate::rollout::{
    draw, draw_trajectories, Draw, FeatureMap, Greedy, InstanceSampler, LinearValueFn, MdpConfig,
    RolloutError, Sample,
};

pub use log::{read_run_log, write_run_log, IterationLog, RUN_LOG_HEADER};
pub use update::{
    apply_update, enforce_locks, kappa, learning_rate, raw_step, residuals, sign, statewise_errors,
    weight_update, Residuals, UpdateStats,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `learning_rate(k)`.
    Schedule,
    Fixed(f64),
}

impl StepSize {
    pub fn at(self, k: usize) -> f64 {
        match self {
            StepSize::Schedule => learning_rate(k),
            StepSize::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AviConfig {
    pub t_avi: usize,
    /// States per draw when `weight_training_trajectories` is 0.
    pub n_avi: usize,
    pub r_scale: f64,
    pub scaling_enabled: bool,
    pub sign_guard_enabled: bool,
    /// Trajectories per training set; 0 draws `n_avi` states instead.
    pub weight_training_trajectories: usize,
    pub step_size: StepSize,
}

impl Default for AviConfig {
    fn default() -> Self {
        AviConfig {
            t_avi: 50,
            n_avi: 1000,
            r_scale: 1.0,
            scaling_enabled: true,
            sign_guard_enabled: true,
            weight_training_trajectories: 30,
            step_size: StepSize::Schedule,
        }
    }
}

impl AviConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.t_avi == 0 {
            return Err("t_avi must be at least 1".into());
        }
        if self.n_avi == 0 {
            return Err("n_avi must be at least 1".into());
        }
        if !(self.r_scale > 0.0 && self.r_scale.is_finite()) {
            return Err(format!("r_scale must be positive, got {}", self.r_scale));
        }
        if let StepSize::Fixed(a) = self.step_size {
            if !(a > 0.0 && a.is_finite()) {
                return Err(format!("fixed step size must be positive, got {a}"));
            }
        }
        Ok(())
    }

    fn r_scale(&self) -> Option<f64> {
        self.scaling_enabled.then_some(self.r_scale)
    }
}

/// Where training sets come from.
pub trait TrainingSource<M: Mdp, F>: Sync {
    /// A training set drawn under `Greedy(v)`. Must be a pure function of
    /// `(v, seed)`.
    fn draw(
        &self,
        v: &LinearValueFn<F>,
        cfg: &MdpConfig,
        seed: u64,
    ) -> Result<Draw<M>, RolloutError>;
}

/// The live states of a fixed number of greedy trajectories.
pub struct Trajectories<S> {
    pub sampler: S,
    pub count: usize,
}

impl<S, F> TrainingSource<S::Mdp, F> for Trajectories<S>
where
    S: InstanceSampler,
    F: FeatureMap<S::Mdp>,
{
    fn draw(
        &self,
        v: &LinearValueFn<F>,
        cfg: &MdpConfig,
        seed: u64,
    ) -> Result<Draw<S::Mdp>, RolloutError> {
        draw_trajectories(&Greedy { v, cfg }, self.count, &self.sampler, cfg, seed)
    }
}

/// A fixed number of states drawn by following the greedy policy with resets.
pub struct States<S> {
    pub sampler: S,
    pub count: usize,
}

impl<S, F> TrainingSource<S::Mdp, F> for States<S>
where
    S: InstanceSampler,
    F: FeatureMap<S::Mdp>,
{
    fn draw(
        &self,
        v: &LinearValueFn<F>,
        cfg: &MdpConfig,
        seed: u64,
    ) -> Result<Draw<S::Mdp>, RolloutError> {
        let mut rng = exec::rng_from_seed(seed);
        draw(&Greedy { v, cfg }, self.count, &self.sampler, cfg, &mut rng)
    }
}

/// Greedy trajectories or greedy states, whichever `AviConfig` asks for.
pub enum GreedySource<S> {
    Trajectories(Trajectories<S>),
    States(States<S>),
}

impl<S> GreedySource<S> {
    pub fn new(sampler: S, avi_cfg: &AviConfig) -> Self {
        match avi_cfg.weight_training_trajectories {
            0 => GreedySource::States(States {
                sampler,
                count: avi_cfg.n_avi,
            }),
            count => GreedySource::Trajectories(Trajectories { sampler, count }),
        }
    }
}

impl<S, F> TrainingSource<S::Mdp, F> for GreedySource<S>
where
    S: InstanceSampler,
    F: FeatureMap<S::Mdp>,
{
    fn draw(
        &self,
        v: &LinearValueFn<F>,
        cfg: &MdpConfig,
        seed: u64,
    ) -> Result<Draw<S::Mdp>, RolloutError> {
        match self {
            GreedySource::Trajectories(t) => t.draw(v, cfg, seed),
            GreedySource::States(s) => s.draw(v, cfg, seed),
        }
    }
}

/// Every live state of one MDP, in order. Only usable for small explicit
/// MDPs; there are no trajectories, so the training success is always 0.
pub struct AllStates<M: Mdp> {
    pub mdp: Arc<M>,
    pub states: Vec<M::State>,
}

impl<M: Mdp> AllStates<M> {
    pub fn new(mdp: Arc<M>, states: impl IntoIterator<Item = M::State>) -> Self {
        let states = states
            .into_iter()
            .filter(|s| mdp.classify(s) == StateClass::Live)
            .collect();
        AllStates { mdp, states }
    }
}

impl<M: Mdp, F> TrainingSource<M, F> for AllStates<M> {
    fn draw(&self, _: &LinearValueFn<F>, _: &MdpConfig, _: u64) -> Result<Draw<M>, RolloutError> {
        Ok(Draw {
            samples: self
                .states
                .iter()
                .map(|s| Sample {
                    mdp: Arc::clone(&self.mdp),
                    state: s.clone(),
                })
                .collect(),
            finished: Vec::new(),
        })
    }
}

/// Decides whether one greedy policy tests as significantly better than
/// another.
pub trait PolicyComparator<F>: Sync {
    fn significantly_better(
        &self,
        a: &LinearValueFn<F>,
        b: &LinearValueFn<F>,
        seed: u64,
    ) -> Result<bool, RolloutError>;
}

/// A comparator given by a closure.
pub struct FnComparator<C>(pub C);

impl<F, C> PolicyComparator<F> for FnComparator<C>
where
    C: Fn(&LinearValueFn<F>, &LinearValueFn<F>, u64) -> bool + Sync,
{
    fn significantly_better(
        &self,
        a: &LinearValueFn<F>,
        b: &LinearValueFn<F>,
        seed: u64,
    ) -> Result<bool, RolloutError> {
        Ok((self.0)(a, b, seed))
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState<F> {
    pub value_fn: LinearValueFn<F>,
    /// Completed iterations.
    pub k: usize,
    pub locked_signs: BTreeMap<usize, i8>,
    pub last_training_success: f64,
}

impl<F> TrainerState<F> {
    pub fn new(value_fn: LinearValueFn<F>) -> Self {
        TrainerState {
            value_fn,
            k: 0,
            locked_signs: BTreeMap::new(),
            last_training_success: 0.0,
        }
    }
}

/// Outcome of a sign-guard check.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardOutcome {
    pub reconsidered: bool,
    pub reverted: Vec<usize>,
    pub weights: Vec<f64>,
}

fn stream(master: u64, purpose: u64, k: usize) -> u64 {
    exec::derive_seed(exec::derive_seed(master, purpose), k as u64)
}

const DRAW_STREAM: u64 = 1;
const GUARD_STREAM: u64 = 2;

/// Reconsiders sign changes from `prev` to `next` when the training success
/// dropped and `Greedy(prev)` tests as significantly better than
/// `Greedy(next)`. Each reverted weight gets its previous value back and is
/// locked to that value's sign in `locks`.
pub fn sign_guard<F: Clone, C: PolicyComparator<F> + ?Sized>(
    prev: &LinearValueFn<F>,
    prev_success: f64,
    next: &LinearValueFn<F>,
    next_success: f64,
    locks: &mut BTreeMap<usize, i8>,
    comparator: &C,
    seed: u64,
) -> Result<GuardOutcome, RolloutError> {
    let flipped: Vec<usize> = (0..prev.weights.len())
        .filter(|&i| sign(prev.weights[i]) != sign(next.weights[i]))
        .collect();
    let mut out = GuardOutcome {
        reconsidered: false,
        reverted: Vec::new(),
        weights: next.weights.clone(),
    };
    if next_success >= prev_success || flipped.is_empty() {
        return Ok(out);
    }
    if !comparator.significantly_better(prev, next, exec::derive_seed(seed, 0))? {
        return Ok(out);
    }
    out.reconsidered = true;
    for (j, &i) in flipped.iter().enumerate() {
        let mut w = next.weights.clone();
        w[i] = prev.weights[i];
        let candidate = next.with_weights(w);
        if comparator.significantly_better(
            &candidate,
            next,
            exec::derive_seed(seed, 1 + j as u64),
        )? {
            out.reverted.push(i);
        }
    }
    for &i in &out.reverted {
        out.weights[i] = prev.weights[i];
        locks.insert(i, sign(prev.weights[i]));
    }
    Ok(out)
}

/// A finished (or paused) run.
#[derive(Debug, Clone)]
pub struct AviRun<F> {
    pub state: TrainerState<F>,
    pub log: Vec<IterationLog>,
}

/// The training set for iteration `state.k`, drawn under the current weights.
pub fn draw_training<M, F, T>(
    state: &TrainerState<F>,
    cfg: &MdpConfig,
    source: &T,
    seed: u64,
) -> Result<Draw<M>, RolloutError>
where
    M: Mdp,
    T: TrainingSource<M, F> + ?Sized,
{
    source.draw(&state.value_fn, cfg, stream(seed, DRAW_STREAM, state.k))
}

/// One iteration from `training` (the set drawn for `state.k`). Advances
/// `state` and returns the log row and the training set for the next
/// iteration.
pub fn avi_step<M, F, T>(
    state: &mut TrainerState<F>,
    training: &Draw<M>,
    avi_cfg: &AviConfig,
    cfg: &MdpConfig,
    source: &T,
    comparator: Option<&dyn PolicyComparator<F>>,
    seed: u64,
) -> Result<(IterationLog, Draw<M>), RolloutError>
where
    M: Mdp,
    F: FeatureMap<M> + Clone,
    T: TrainingSource<M, F> + ?Sized,
{
    let k = state.k;
    let success = training.success_rate();
    let alpha = avi_cfg.step_size.at(k);
    let r = residuals(&state.value_fn, &training.samples, cfg)?;
    let (mut w, stats) = apply_update(&state.value_fn.weights, &r, alpha, avi_cfg.r_scale());
    enforce_locks(&state.value_fn.weights, &mut w, &state.locked_signs);
    let mut next = state.value_fn.with_weights(w);
    let mut next_training = source.draw(&next, cfg, stream(seed, DRAW_STREAM, k + 1))?;

    let mut guard = GuardOutcome {
        reconsidered: false,
        reverted: Vec::new(),
        weights: Vec::new(),
    };
    if avi_cfg.sign_guard_enabled {
        if let Some(c) = comparator {
            guard = sign_guard(
                &state.value_fn,
                success,
                &next,
                next_training.success_rate(),
                &mut state.locked_signs,
                c,
                stream(seed, GUARD_STREAM, k),
            )?;
            if !guard.reverted.is_empty() {
                next = next.with_weights(guard.weights.clone());
                next_training = source.draw(&next, cfg, stream(seed, DRAW_STREAM, k + 1))?;
            }
        }
    }

    let row = IterationLog {
        k,
        alpha,
        b_avg: stats.b_avg,
        kappa: stats.kappa,
        training_success: success,
        training_states: training.samples.len(),
        reconsidered: guard.reconsidered,
        reverted: guard.reverted,
        locked: state.locked_signs.keys().copied().collect(),
        weights: next.weights.clone(),
    };
    state.value_fn = next;
    state.k = k + 1;
    state.last_training_success = next_training.success_rate();
    Ok((row, next_training))
}

/// Runs `iterations` AVI iterations starting from `state`. Training set `k`
/// is drawn from `source` under the iteration-`k` weights with a seed derived
/// from `(seed, k)`, so a resumed run continues exactly as an uninterrupted
/// one would.
pub fn avi_resume<M, F, T>(
    mut state: TrainerState<F>,
    iterations: usize,
    avi_cfg: &AviConfig,
    cfg: &MdpConfig,
    source: &T,
    comparator: Option<&dyn PolicyComparator<F>>,
    seed: u64,
) -> Result<AviRun<F>, RolloutError>
where
    M: Mdp,
    F: FeatureMap<M> + Clone,
    T: TrainingSource<M, F> + ?Sized,
{
    let mut log = Vec::with_capacity(iterations);
    let mut training = draw_training(&state, cfg, source, seed)?;
    for _ in 0..iterations {
        let (row, next) = avi_step(
            &mut state, &training, avi_cfg, cfg, source, comparator, seed,
        )?;
        log.push(row);
        training = next;
    }
    Ok(AviRun { state, log })
}

/// `avi_cfg.t_avi` iterations from `v0`.
pub fn avi<M, F, T>(
    v0: LinearValueFn<F>,
    avi_cfg: &AviConfig,
    cfg: &MdpConfig,
    source: &T,
    comparator: Option<&dyn PolicyComparator<F>>,
    seed: u64,
) -> Result<AviRun<F>, RolloutError>
where
    M: Mdp,
    F: FeatureMap<M> + Clone,
    T: TrainingSource<M, F> + ?Sized,
{
    avi_resume(
        TrainerState::new(v0),
        avi_cfg.t_avi,
        avi_cfg,
        cfg,
        source,
        comparator,
        seed,
    )
}
