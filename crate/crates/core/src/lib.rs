//! Trajectory-based approximate value iteration over relational features
//! for probabilistic planning domains written in a PPDDL subset.

pub mod avi;
pub mod eval;
pub mod exec;
pub mod feature;
pub mod model;
pub mod pddl;
pub mod rollout;
pub mod search;
pub mod snapshot;
