//! Greedy policies, Bellman backups, trajectories and training-set draws.

mod value;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::exec;
use crate::model::{Mdp, StateClass};

pub(crate) use value::dot;
pub use value::{
    bellman_update, best_action, greedy_action, q_value, value, FeatureMap, Features,
    IndicatorFeatures, LinearValueFn, MdpConfig,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RolloutError {
    #[error("no applicable action in a state that was expected to be live")]
    NoApplicableAction,
    #[error("policy chose no action in a live state")]
    PolicyFailed,
    #[error("{features} features but {weights} weights")]
    WeightCount { features: usize, weights: usize },
    #[error("weight {0} is not finite")]
    NonFiniteWeight(usize),
    #[error("the instance sampler produced no instance with a live initial state")]
    NoLiveInitialState,
}

/// Maps a live state to an applicable action.
pub trait Policy<M: Mdp>: Sync {
    fn act(&self, mdp: &M, s: &M::State) -> Option<M::Action>;
}

/// `Greedy(V)`.
#[derive(Debug, Clone, Copy)]
pub struct Greedy<'a, F> {
    pub v: &'a LinearValueFn<F>,
    pub cfg: &'a MdpConfig,
}

impl<M: Mdp, F: FeatureMap<M>> Policy<M> for Greedy<'_, F> {
    fn act(&self, mdp: &M, s: &M::State) -> Option<M::Action> {
        greedy_action(self.v, mdp, s, self.cfg).ok()
    }
}

/// A policy given by a closure.
pub struct FnPolicy<P>(pub P);

impl<M, P> Policy<M> for FnPolicy<P>
where
    M: Mdp,
    P: Fn(&M, &M::State) -> Option<M::Action> + Sync,
{
    fn act(&self, mdp: &M, s: &M::State) -> Option<M::Action> {
        (self.0)(mdp, s)
    }
}

/// Source of problem instances for training and evaluation.
pub trait InstanceSampler: Sync {
    type Mdp: Mdp;

    fn sample(&self, rng: &mut dyn RngCore) -> Arc<Self::Mdp>;
}

/// Always the same instance.
#[derive(Debug)]
pub struct FixedInstance<M>(pub Arc<M>);

impl<M> Clone for FixedInstance<M> {
    fn clone(&self) -> Self {
        FixedInstance(Arc::clone(&self.0))
    }
}

impl<M: Mdp> InstanceSampler for FixedInstance<M> {
    type Mdp = M;

    fn sample(&self, _: &mut dyn RngCore) -> Arc<M> {
        Arc::clone(&self.0)
    }
}

/// Picks uniformly among a list of instances.
#[derive(Debug)]
pub struct UniformInstances<M>(pub Vec<Arc<M>>);

impl<M> Clone for UniformInstances<M> {
    fn clone(&self) -> Self {
        UniformInstances(self.0.clone())
    }
}

impl<M: Mdp> InstanceSampler for UniformInstances<M> {
    type Mdp = M;

    fn sample(&self, rng: &mut dyn RngCore) -> Arc<M> {
        let i = rng.random_range(0..self.0.len());
        Arc::clone(&self.0[i])
    }
}

/// Inverse-CDF draw from a successor list, in listed order.
pub fn sample_successor<S: Clone>(dist: &[(f64, S)], rng: &mut dyn RngCore) -> S {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (p, s) in dist {
        acc += p;
        if u < acc {
            return s.clone();
        }
    }
    dist.last().expect("empty successor distribution").1.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Goal,
    DeadEnd,
    StepCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Goal => "goal",
            Termination::DeadEnd => "dead_end",
            Termination::StepCap => "step_cap",
        })
    }
}

impl std::str::FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "goal" => Ok(Termination::Goal),
            "dead_end" => Ok(Termination::DeadEnd),
            "step_cap" => Ok(Termination::StepCap),
            _ => Err(format!("unknown termination `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<M: Mdp> {
    pub states: Vec<M::State>,
    pub actions: Vec<M::Action>,
    pub termination: Termination,
}

impl<M: Mdp> Trajectory<M> {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    /// The non-terminal states, which are the ones a training draw keeps.
    pub fn live_states(&self) -> &[M::State] {
        match self.termination {
            Termination::StepCap => &self.states,
            _ => &self.states[..self.states.len() - 1],
        }
    }
}

/// Dump line for one trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub instance: String,
    pub termination: Termination,
    pub length: usize,
}

impl fmt::Display for TrajectoryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed={} instance={} termination={} length={}",
            self.seed, self.instance, self.termination, self.length
        )
    }
}

/// Follows `policy` from the initial state until a goal, a dead end, or
/// `max_trajectory_length` steps.
pub fn run_trajectory<M: Mdp, P: Policy<M> + ?Sized>(
    policy: &P,
    mdp: &M,
    cfg: &MdpConfig,
    rng: &mut dyn RngCore,
) -> Result<Trajectory<M>, RolloutError> {
    let mut states = vec![mdp.initial_state()];
    let mut actions = Vec::new();
    let termination = loop {
        let s = states.last().unwrap();
        match mdp.classify(s) {
            StateClass::Goal => break Termination::Goal,
            StateClass::DeadEnd => break Termination::DeadEnd,
            StateClass::Live if actions.len() == cfg.max_trajectory_length => {
                break Termination::StepCap
            }
            StateClass::Live => {}
        }
        let a = policy.act(mdp, s).ok_or(RolloutError::PolicyFailed)?;
        let next = sample_successor(&mdp.successors(s, &a), rng);
        actions.push(a);
        states.push(next);
    };
    Ok(Trajectory {
        states,
        actions,
        termination,
    })
}

/// A drawn state together with the instance it belongs to.
#[derive(Debug)]
pub struct Sample<M: Mdp> {
    pub mdp: Arc<M>,
    pub state: M::State,
}

impl<M: Mdp> Clone for Sample<M> {
    fn clone(&self) -> Self {
        Sample {
            mdp: Arc::clone(&self.mdp),
            state: self.state.clone(),
        }
    }
}

/// A training set plus the outcomes of the trajectories that were both begun
/// and finished while drawing it.
#[derive(Debug, Clone)]
pub struct Draw<M: Mdp> {
    pub samples: Vec<Sample<M>>,
    pub finished: Vec<Termination>,
}

impl<M: Mdp> Draw<M> {
    pub fn states(&self) -> impl Iterator<Item = &M::State> {
        self.samples.iter().map(|s| &s.state)
    }

    /// Fraction of finished trajectories that reached the goal; 0 when none
    /// finished.
    pub fn success_rate(&self) -> f64 {
        if self.finished.is_empty() {
            return 0.0;
        }
        let goals = self
            .finished
            .iter()
            .filter(|t| **t == Termination::Goal)
            .count();
        goals as f64 / self.finished.len() as f64
    }
}

/// Attempts at finding an instance with a live initial state before giving up.
const RESET_ATTEMPTS: usize = 1000;

/// Draws exactly `n` live states by following `policy`, restarting from a
/// fresh instance whenever the goal or a dead end is reached or the current
/// trajectory has produced more than `max_trajectory_length` states.
pub fn draw<S, P>(
    policy: &P,
    n: usize,
    sampler: &S,
    cfg: &MdpConfig,
    rng: &mut dyn RngCore,
) -> Result<Draw<S::Mdp>, RolloutError>
where
    S: InstanceSampler + ?Sized,
    P: Policy<S::Mdp> + ?Sized,
{
    let mut samples = Vec::with_capacity(n);
    let mut finished = Vec::new();
    if n == 0 {
        return Ok(Draw { samples, finished });
    }
    let (mut mdp, mut s) = fresh_live(sampler, rng, &mut finished)?;
    let mut j = 0;
    for _ in 0..n {
        samples.push(Sample {
            mdp: Arc::clone(&mdp),
            state: s.clone(),
        });
        j += 1;
        let a = policy.act(&mdp, &s).ok_or(RolloutError::PolicyFailed)?;
        s = sample_successor(&mdp.successors(&s, &a), rng);
        let ended = match mdp.classify(&s) {
            StateClass::Goal => Some(Termination::Goal),
            StateClass::DeadEnd => Some(Termination::DeadEnd),
            StateClass::Live if j > cfg.max_trajectory_length => Some(Termination::StepCap),
            StateClass::Live => None,
        };
        if let Some(t) = ended {
            finished.push(t);
            (mdp, s) = fresh_live(sampler, rng, &mut finished)?;
            j = 0;
        }
    }
    Ok(Draw { samples, finished })
}

/// A fresh instance whose initial state is live. Instances that start in a
/// terminal state count as finished zero-step trajectories.
fn fresh_live<S: InstanceSampler + ?Sized>(
    sampler: &S,
    rng: &mut dyn RngCore,
    finished: &mut Vec<Termination>,
) -> Result<(Arc<S::Mdp>, <S::Mdp as Mdp>::State), RolloutError> {
    for _ in 0..RESET_ATTEMPTS {
        let mdp = sampler.sample(rng);
        let s = mdp.initial_state();
        match mdp.classify(&s) {
            StateClass::Live => return Ok((mdp, s)),
            StateClass::Goal => finished.push(Termination::Goal),
            StateClass::DeadEnd => finished.push(Termination::DeadEnd),
        }
    }
    Err(RolloutError::NoLiveInitialState)
}

/// Runs `k` trajectories, trajectory `i` with its own generator derived from
/// `(seed, i)`, and collects their live states in trajectory order.
pub fn draw_trajectories<S, P>(
    policy: &P,
    k: usize,
    sampler: &S,
    cfg: &MdpConfig,
    seed: u64,
) -> Result<Draw<S::Mdp>, RolloutError>
where
    S: InstanceSampler + ?Sized,
    P: Policy<S::Mdp> + ?Sized,
{
    let runs = exec::par_map(k, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        let mdp = sampler.sample(&mut rng);
        run_trajectory(policy, &*mdp, cfg, &mut rng).map(|t| (mdp, t))
    });
    let mut samples = Vec::new();
    let mut finished = Vec::with_capacity(k);
    for run in runs {
        let (mdp, t) = run?;
        samples.extend(t.live_states().iter().map(|s| Sample {
            mdp: Arc::clone(&mdp),
            state: s.clone(),
        }));
        finished.push(t.termination);
    }
    Ok(Draw { samples, finished })
}
