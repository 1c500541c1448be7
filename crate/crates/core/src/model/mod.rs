//! Grounded planning problems and the transition semantics shared by the
//! simulator, the feature evaluator and the trainer.

pub mod fileworld;
mod instance;
mod state;
pub mod tabular;

use std::fmt::Debug;
use std::hash::Hash;

pub use instance::{
    parse_problem, GroundAction, GroundEffect, GroundFormula, ModelError, Outcome, ProblemInstance,
    StateClass,
};
pub use state::{Atom, GroundState, ObjId, PredId};

/// The view of a goal-oriented MDP the rollout and training code needs.
///
/// Actions are returned in a fixed order; greedy tie-breaking relies on it.
pub trait Mdp: Send + Sync {
    type State: Clone + Eq + Hash + Debug + Send + Sync;
    type Action: Clone + Debug + Send + Sync;

    fn initial_state(&self) -> Self::State;

    fn is_goal(&self, s: &Self::State) -> bool;

    fn actions(&self, s: &Self::State) -> Vec<Self::Action>;

    /// Successor distribution; probabilities sum to 1.
    fn successors(&self, s: &Self::State, a: &Self::Action) -> Vec<(f64, Self::State)>;

    fn has_action(&self, s: &Self::State) -> bool {
        !self.actions(s).is_empty()
    }

    fn classify(&self, s: &Self::State) -> StateClass {
        if self.is_goal(s) {
            StateClass::Goal
        } else if self.has_action(s) {
            StateClass::Live
        } else {
            StateClass::DeadEnd
        }
    }

    fn action_label(&self, a: &Self::Action) -> String {
        format!("{a:?}")
    }

    /// Identifier used in trajectory dumps and reports.
    fn name(&self) -> String {
        String::new()
    }
}

impl Mdp for ProblemInstance {
    type State = GroundState;
    type Action = usize;

    fn initial_state(&self) -> GroundState {
        self.init().clone()
    }

    fn is_goal(&self, s: &GroundState) -> bool {
        ProblemInstance::is_goal(self, s)
    }

    fn actions(&self, s: &GroundState) -> Vec<usize> {
        self.applicable_action_ids(s)
    }

    fn successors(&self, s: &GroundState, a: &usize) -> Vec<(f64, GroundState)> {
        instance::successors_unchecked(s, &self.ground_actions()[*a])
    }

    fn has_action(&self, s: &GroundState) -> bool {
        self.ground_actions().iter().any(|a| a.is_applicable(s))
    }

    fn action_label(&self, a: &usize) -> String {
        self.ground_actions()[*a].label.clone()
    }

    fn name(&self) -> String {
        ProblemInstance::name(self).to_string()
    }
}
