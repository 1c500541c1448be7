use crate::feature::{CompiledFeature, FeatureExpr};
use crate::model::tabular::TabularMdp;
use crate::model::{Mdp, ProblemInstance, StateClass};

use super::RolloutError;

/// Rewards, discount and trajectory cap shared by the simulator and trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpConfig {
    pub gamma: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub dead_end_value: f64,
    pub max_trajectory_length: usize,
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            gamma: 0.95,
            goal_reward: 1.0,
            step_reward: 0.0,
            dead_end_value: 0.0,
            max_trajectory_length: 1000,
        }
    }
}

impl MdpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0,1], got {}", self.gamma));
        }
        if self.max_trajectory_length == 0 {
            return Err("max_trajectory_length must be positive".into());
        }
        for (name, x) in [
            ("goal_reward", self.goal_reward),
            ("step_reward", self.step_reward),
            ("dead_end_value", self.dead_end_value),
        ] {
            if !x.is_finite() {
                return Err(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

/// A fixed-length feature vector.
pub trait Features: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn describe(&self, i: usize) -> String;
}

/// Feature values of states of one kind of MDP.
pub trait FeatureMap<M: Mdp + ?Sized>: Features {
    /// Writes `f_0(s) .. f_n(s)` into `out` (of length `self.len()`).
    fn eval_into(&self, mdp: &M, s: &M::State, out: &mut [f64]);

    fn eval(&self, mdp: &M, s: &M::State) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(mdp, s, &mut out);
        out
    }
}

impl Features for Vec<FeatureExpr> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn describe(&self, i: usize) -> String {
        self[i].to_string()
    }
}

/// Relational features. Each must be well formed for every instance it is
/// evaluated on; callers check this once up front with
/// [`check_for_instance`](crate::feature::check_for_instance).
impl FeatureMap<ProblemInstance> for Vec<FeatureExpr> {
    fn eval_into(&self, inst: &ProblemInstance, s: &crate::model::GroundState, out: &mut [f64]) {
        for (f, o) in self.iter().zip(out.iter_mut()) {
            *o = f64::from(CompiledFeature::compile_unchecked(f, inst).count(inst, s));
        }
    }
}

/// One 0/1 feature per state of a tabular MDP; weights are then a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorFeatures(pub usize);

impl Features for IndicatorFeatures {
    fn len(&self) -> usize {
        self.0
    }

    fn describe(&self, i: usize) -> String {
        format!("state={i}")
    }
}

impl FeatureMap<TabularMdp> for IndicatorFeatures {
    fn eval_into(&self, _: &TabularMdp, s: &usize, out: &mut [f64]) {
        out.fill(0.0);
        out[*s] = 1.0;
    }
}

/// `V(s) = w · Φ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearValueFn<F> {
    pub features: F,
    pub weights: Vec<f64>,
}

impl<F: Features> LinearValueFn<F> {
    pub fn new(features: F, weights: Vec<f64>) -> Result<Self, RolloutError> {
        if features.len() != weights.len() {
            return Err(RolloutError::WeightCount {
                features: features.len(),
                weights: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(RolloutError::NonFiniteWeight(i));
        }
        Ok(LinearValueFn { features, weights })
    }

    pub fn zeros(features: F) -> Self {
        let n = features.len();
        LinearValueFn {
            features,
            weights: vec![0.0; n],
        }
    }

    /// Raw dot product, ignoring terminal status.
    pub fn dot<M: Mdp + ?Sized>(&self, mdp: &M, s: &M::State) -> f64
    where
        F: FeatureMap<M>,
    {
        let phi = self.features.eval(mdp, s);
        dot(&self.weights, &phi)
    }
}

impl<F: Clone> LinearValueFn<F> {
    /// The same features with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.weights.len());
        LinearValueFn {
            features: self.features.clone(),
            weights,
        }
    }
}

pub(crate) fn dot(w: &[f64], phi: &[f64]) -> f64 {
    w.iter().zip(phi).map(|(w, f)| w * f).sum()
}

/// `V(s)`, with the absorbing conventions for terminal states.
pub fn value<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    s: &M::State,
    cfg: &MdpConfig,
) -> f64 {
    match mdp.classify(s) {
        StateClass::Goal if cfg.gamma < 1.0 => cfg.goal_reward / (1.0 - cfg.gamma),
        StateClass::Goal => cfg.goal_reward,
        StateClass::DeadEnd => cfg.dead_end_value,
        StateClass::Live => v.dot(mdp, s),
    }
}

/// Reward plus discounted continuation for landing in `next`. Goals end the
/// episode, so they contribute the goal reward and nothing after it.
fn backup_term<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    next: &M::State,
    cfg: &MdpConfig,
) -> f64 {
    match mdp.classify(next) {
        StateClass::Goal => cfg.goal_reward,
        StateClass::DeadEnd => cfg.step_reward + cfg.dead_end_value,
        StateClass::Live => cfg.step_reward + cfg.gamma * v.dot(mdp, next),
    }
}

/// Expected one-step backup of taking `a` in `s`.
pub fn q_value<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    s: &M::State,
    a: &M::Action,
    cfg: &MdpConfig,
) -> f64 {
    mdp.successors(s, a)
        .iter()
        .map(|(p, next)| p * backup_term(v, mdp, next, cfg))
        .sum()
}

/// The best action and its backup. The first action in the MDP's order wins
/// exact ties.
pub fn best_action<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    s: &M::State,
    cfg: &MdpConfig,
) -> Result<(M::Action, f64), RolloutError> {
    let mut best: Option<(M::Action, f64)> = None;
    for a in mdp.actions(s) {
        let q = q_value(v, mdp, s, &a, cfg);
        if best.as_ref().is_none_or(|(_, b)| q > *b) {
            best = Some((a, q));
        }
    }
    best.ok_or(RolloutError::NoApplicableAction)
}

/// `U(V)(s)`: the Bellman backup at a live state.
pub fn bellman_update<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    s: &M::State,
    cfg: &MdpConfig,
) -> Result<f64, RolloutError> {
    best_action(v, mdp, s, cfg).map(|(_, q)| q)
}

pub fn greedy_action<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    mdp: &M,
    s: &M::State,
    cfg: &MdpConfig,
) -> Result<M::Action, RolloutError> {
    best_action(v, mdp, s, cfg).map(|(a, _)| a)
}
