//! Tabular MDP fixtures, a value-iteration oracle and a scripted trainer.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relavi::avi::*;
use relavi::model::tabular::TabularMdp;
use relavi::model::{Mdp, StateClass};
use relavi::rollout::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table(n: usize, w: Vec<f64>) -> LinearValueFn<IndicatorFeatures> {
    LinearValueFn::new(IndicatorFeatures(n), w).unwrap()
}

/// s0 -> s1 -> s2 (goal), deterministic.
pub fn chain() -> Arc<TabularMdp> {
    Arc::new(TabularMdp {
        transitions: vec![vec![vec![(1.0, 1)]], vec![vec![(1.0, 2)]], vec![]],
        goals: vec![false, false, true],
        initial: 0,
    })
}

pub fn samples(m: &Arc<TabularMdp>, states: &[usize]) -> Vec<Sample<TabularMdp>> {
    states
        .iter()
        .map(|&s| Sample {
            mdp: Arc::clone(m),
            state: s,
        })
        .collect()
}

/// One synchronous value-iteration sweep written directly over the table.
pub fn vi_sweep(m: &TabularMdp, v: &[f64], cfg: &MdpConfig) -> Vec<f64> {
    let mut next = v.to_vec();
    for s in 0..m.num_states() {
        if m.goals[s] || m.transitions[s].is_empty() {
            continue;
        }
        next[s] = m.transitions[s]
            .iter()
            .map(|dist| {
                dist.iter()
                    .map(|&(p, t)| {
                        p * if m.goals[t] {
                            cfg.goal_reward
                        } else if m.transitions[t].is_empty() {
                            cfg.step_reward + cfg.dead_end_value
                        } else {
                            cfg.step_reward + cfg.gamma * v[t]
                        }
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
    }
    next
}

pub fn vi_fixed_point(m: &TabularMdp, cfg: &MdpConfig) -> Vec<f64> {
    let mut v = vec![0.0; m.num_states()];
    for _ in 0..100_000 {
        let next = vi_sweep(m, &v, cfg);
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    v
}

pub fn plain_vi_config() -> AviConfig {
    AviConfig {
        t_avi: 1,
        scaling_enabled: false,
        sign_guard_enabled: false,
        step_size: StepSize::Fixed(1.0),
        ..AviConfig::default()
    }
}

pub fn all_states(m: &Arc<TabularMdp>) -> AllStates<TabularMdp> {
    AllStates::new(Arc::clone(m), 0..m.num_states())
}

pub fn always(
    verdict: bool,
) -> FnComparator<
    impl Fn(&LinearValueFn<IndicatorFeatures>, &LinearValueFn<IndicatorFeatures>, u64) -> bool + Sync,
> {
    FnComparator(
        move |_: &LinearValueFn<IndicatorFeatures>, _: &LinearValueFn<IndicatorFeatures>, _| {
            verdict
        },
    )
}

/// Every live state of one MDP, with a training success drawn from the seed
/// (or fixed), so success drops can be scripted.
pub struct Scripted {
    pub mdp: Arc<TabularMdp>,
    pub success: Option<usize>,
}

impl TrainingSource<TabularMdp, IndicatorFeatures> for Scripted {
    fn draw(
        &self,
        _: &LinearValueFn<IndicatorFeatures>,
        _: &MdpConfig,
        seed: u64,
    ) -> Result<Draw<TabularMdp>, RolloutError> {
        let goals = self
            .success
            .unwrap_or_else(|| rng(seed).random_range(0..=4));
        let live: Vec<usize> = (0..self.mdp.num_states())
            .filter(|s| self.mdp.classify(s) == StateClass::Live)
            .collect();
        Ok(Draw {
            samples: samples(&self.mdp, &live),
            finished: (0..4)
                .map(|i| {
                    if i < goals {
                        Termination::Goal
                    } else {
                        Termination::StepCap
                    }
                })
                .collect(),
        })
    }
}

pub fn scripted_run(seed: u64, success: Option<usize>, verdict: bool) -> AviRun<IndicatorFeatures> {
    let mut r = rng(seed);
    let n = r.random_range(4..=12);
    let m = Arc::new(TabularMdp::random(&mut r, n, 3));
    let cfg = MdpConfig {
        gamma: 0.9,
        step_reward: -0.3,
        ..MdpConfig::default()
    };
    let avi_cfg = AviConfig {
        t_avi: 60,
        step_size: StepSize::Fixed(1.9),
        scaling_enabled: false,
        ..AviConfig::default()
    };
    let w0: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    avi(
        table(n, w0),
        &avi_cfg,
        &cfg,
        &Scripted { mdp: m, success },
        Some(&always(verdict)),
        seed,
    )
    .unwrap()
}

/// Checks that once an index is locked its sign never changes again.
pub fn assert_locks_hold(log: &[IterationLog]) {
    let mut locked_at: BTreeMap<usize, (usize, i8)> = BTreeMap::new();
    for (row, l) in log.iter().enumerate() {
        for &i in &l.locked {
            locked_at.entry(i).or_insert((row, sign(l.weights[i])));
        }
        for (&i, &(_, s)) in &locked_at {
            assert_eq!(sign(l.weights[i]), s, "index {i} changed sign at k={}", l.k);
        }
        assert!(l.reverted.is_empty() || l.reconsidered);
    }
}
