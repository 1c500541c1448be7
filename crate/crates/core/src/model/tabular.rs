//! Explicit finite MDPs, used as a ground-truth harness for the trainer.

use rand::Rng;

use super::Mdp;

/// States are `0..n`. A state with no actions that is not a goal is a dead end.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    /// `transitions[s][a]` is the successor distribution of action `a` in `s`.
    pub transitions: Vec<Vec<Vec<(f64, usize)>>>,
    pub goals: Vec<bool>,
    pub initial: usize,
}

impl TabularMdp {
    pub fn num_states(&self) -> usize {
        self.goals.len()
    }

    /// Random MDP with `n` states and up to `max_actions` actions per state.
    /// The last state is the goal; state 0 is initial. Roughly one state in
    /// eight is a dead end.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, max_actions: usize) -> Self {
        assert!(n >= 2 && max_actions >= 1);
        let mut goals = vec![false; n];
        goals[n - 1] = true;
        let mut transitions = Vec::with_capacity(n);
        for s in 0..n {
            if goals[s] || (s > 0 && rng.random_bool(0.125)) {
                transitions.push(Vec::new());
                continue;
            }
            let k = rng.random_range(1..=max_actions);
            let mut acts = Vec::with_capacity(k);
            for _ in 0..k {
                let fanout = rng.random_range(1..=3.min(n));
                let mut weights: Vec<(f64, usize)> = (0..fanout)
                    .map(|_| (rng.random_range(0.05..1.0), rng.random_range(0..n)))
                    .collect();
                let total: f64 = weights.iter().map(|(w, _)| w).sum();
                for (w, _) in &mut weights {
                    *w /= total;
                }
                acts.push(weights);
            }
            transitions.push(acts);
        }
        TabularMdp {
            transitions,
            goals,
            initial: 0,
        }
    }
}

impl Mdp for TabularMdp {
    type State = usize;
    type Action = usize;

    fn initial_state(&self) -> usize {
        self.initial
    }

    fn is_goal(&self, s: &usize) -> bool {
        self.goals[*s]
    }

    fn actions(&self, s: &usize) -> Vec<usize> {
        if self.goals[*s] {
            return Vec::new();
        }
        (0..self.transitions[*s].len()).collect()
    }

    fn successors(&self, s: &usize, a: &usize) -> Vec<(f64, usize)> {
        self.transitions[*s][*a].clone()
    }

    fn has_action(&self, s: &usize) -> bool {
        !self.goals[*s] && !self.transitions[*s].is_empty()
    }
}
