use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relavi::exec;
use relavi::feature::{parse_feature, FeatureExpr};
use relavi::model::tabular::TabularMdp;
use relavi::model::{fileworld, Mdp, StateClass};
use relavi::rollout::*;

fn tab(transitions: Vec<Vec<Vec<(f64, usize)>>>, goals: &[usize]) -> TabularMdp {
    let mut g = vec![false; transitions.len()];
    for &i in goals {
        g[i] = true;
    }
    TabularMdp {
        transitions,
        goals: g,
        initial: 0,
    }
}

/// s0 -> s1 -> s2 (goal), deterministic.
fn chain() -> TabularMdp {
    tab(
        vec![vec![vec![(1.0, 1)]], vec![vec![(1.0, 2)]], vec![]],
        &[2],
    )
}

fn first_action() -> FnPolicy<impl Fn(&TabularMdp, &usize) -> Option<usize> + Sync> {
    FnPolicy(|m: &TabularMdp, s: &usize| m.actions(s).first().copied())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn table(n: usize, w: Vec<f64>) -> LinearValueFn<IndicatorFeatures> {
    LinearValueFn::new(IndicatorFeatures(n), w).unwrap()
}

#[test]
fn draw_traces_the_chain() {
    let m = FixedInstance(Arc::new(chain()));
    let cfg = MdpConfig::default();
    let d = draw(&first_action(), 5, &m, &cfg, &mut rng(0)).unwrap();
    let states: Vec<usize> = d.states().copied().collect();
    assert_eq!(states, vec![0, 1, 0, 1, 0]);
    assert_eq!(d.finished, vec![Termination::Goal, Termination::Goal]);
    assert_eq!(d.success_rate(), 1.0);

    let d = draw(&first_action(), 0, &m, &cfg, &mut rng(0)).unwrap();
    assert!(d.samples.is_empty());
}

#[test]
fn draw_resets_on_dead_end() {
    let m = FixedInstance(Arc::new(tab(
        vec![vec![vec![(1.0, 1)]], vec![], vec![]],
        &[2],
    )));
    let d = draw(&first_action(), 7, &m, &MdpConfig::default(), &mut rng(1)).unwrap();
    assert_eq!(d.states().copied().collect::<Vec<_>>(), vec![0; 7]);
    assert_eq!(d.success_rate(), 0.0);
}

#[test]
fn draw_resets_after_step_cap() {
    // s0 loops on itself: with cap 3, four states per trajectory
    let m = FixedInstance(Arc::new(tab(vec![vec![vec![(1.0, 0)]], vec![]], &[1])));
    let cfg = MdpConfig {
        max_trajectory_length: 3,
        ..MdpConfig::default()
    };
    let d = draw(&first_action(), 9, &m, &cfg, &mut rng(2)).unwrap();
    assert_eq!(d.samples.len(), 9);
    assert_eq!(d.finished, vec![Termination::StepCap, Termination::StepCap]);
}

#[test]
fn draw_fails_when_every_start_is_terminal() {
    let m = FixedInstance(Arc::new(tab(vec![vec![]], &[0])));
    let err = draw(&first_action(), 3, &m, &MdpConfig::default(), &mut rng(3)).unwrap_err();
    assert_eq!(err, RolloutError::NoLiveInitialState);
}

#[test]
fn value_examples() {
    let cfg = MdpConfig::default();
    let inst = fileworld::p10();
    let f: Vec<FeatureExpr> = vec![parse_feature("goal-filed(x) & !filed(x)").unwrap()];
    let zero = LinearValueFn::zeros(f.clone());
    assert_eq!(value(&zero, &inst, inst.init(), &cfg), 0.0);
    let v = LinearValueFn::new(f, vec![-1.0]).unwrap();
    assert_eq!(value(&v, &inst, inst.init(), &cfg), -10.0);

    // two constant features valued 2 and 3
    struct Two;
    impl Features for Two {
        fn len(&self) -> usize {
            2
        }
        fn describe(&self, i: usize) -> String {
            i.to_string()
        }
    }
    impl FeatureMap<TabularMdp> for Two {
        fn eval_into(&self, _: &TabularMdp, _: &usize, out: &mut [f64]) {
            out.copy_from_slice(&[2.0, 3.0]);
        }
    }
    let v = LinearValueFn::new(Two, vec![0.5, -1.0]).unwrap();
    assert_eq!(value(&v, &chain(), &0, &cfg), -2.0);
    assert_eq!(value(&v, &chain(), &2, &cfg), 1.0 / (1.0 - 0.95));

    assert!(LinearValueFn::new(Two, vec![1.0]).is_err());
    assert!(LinearValueFn::new(Two, vec![1.0, f64::NAN]).is_err());
}

#[test]
fn bellman_examples() {
    let cfg = MdpConfig {
        gamma: 0.9,
        ..MdpConfig::default()
    };
    let m = tab(vec![vec![vec![(1.0, 1)]], vec![]], &[1]);
    assert_eq!(
        bellman_update(&table(2, vec![0.0; 2]), &m, &0, &cfg).unwrap(),
        1.0
    );

    let cfg = MdpConfig {
        gamma: 0.5,
        ..MdpConfig::default()
    };
    let m = tab(vec![vec![vec![(1.0, 0)]], vec![]], &[1]);
    assert_eq!(
        bellman_update(&table(2, vec![2.0, 0.0]), &m, &0, &cfg).unwrap(),
        1.0
    );

    // identical actions
    let m = tab(vec![vec![vec![(0.5, 1), (0.5, 0)]; 3], vec![]], &[1]);
    let v = table(2, vec![0.4, 0.0]);
    let q = q_value(&v, &m, &0, &0, &cfg);
    assert_eq!(bellman_update(&v, &m, &0, &cfg).unwrap(), q);

    // no action
    let m = tab(vec![vec![], vec![]], &[1]);
    assert_eq!(
        bellman_update(&table(2, vec![0.0; 2]), &m, &0, &cfg),
        Err(RolloutError::NoApplicableAction)
    );
}

#[test]
fn dead_end_successors_use_dead_end_value() {
    let cfg = MdpConfig {
        gamma: 0.9,
        step_reward: -0.1,
        dead_end_value: -5.0,
        ..MdpConfig::default()
    };
    let m = tab(vec![vec![vec![(0.5, 1), (0.5, 2)]], vec![], vec![]], &[2]);
    let u = bellman_update(&table(3, vec![0.0; 3]), &m, &0, &cfg).unwrap();
    assert!((u - (0.5 * (-0.1 - 5.0) + 0.5 * 1.0)).abs() < 1e-12);
}

#[test]
fn greedy_examples() {
    let cfg = MdpConfig::default();
    let v = table(2, vec![0.0; 2]);
    let one = tab(vec![vec![vec![(1.0, 0)]], vec![]], &[1]);
    assert_eq!(greedy_action(&v, &one, &0, &cfg).unwrap(), 0);

    let m = tab(
        vec![
            vec![vec![(0.5, 1), (0.5, 0)], vec![(0.9, 1), (0.1, 0)]],
            vec![],
        ],
        &[1],
    );
    assert_eq!(greedy_action(&v, &m, &0, &cfg).unwrap(), 1);

    let tie = tab(vec![vec![vec![(1.0, 1)], vec![(1.0, 1)]], vec![]], &[1]);
    assert_eq!(greedy_action(&v, &tie, &0, &cfg).unwrap(), 0);
}

#[test]
fn fileworld_greedy_prefers_lexicographic_first_under_zero_weights() {
    let inst = fileworld::p10();
    let v = LinearValueFn::zeros(Vec::<FeatureExpr>::new());
    let a = greedy_action(&v, &inst, inst.init(), &MdpConfig::default()).unwrap();
    assert_eq!(inst.action_label(&a), "get-folder(F0)");
}

#[test]
fn trajectory_terminations() {
    let cfg = MdpConfig::default();
    let at_goal = tab(vec![vec![]], &[0]);
    let t = run_trajectory(&first_action(), &at_goal, &cfg, &mut rng(0)).unwrap();
    assert_eq!(
        (t.states.len(), t.actions.len(), t.termination),
        (1, 0, Termination::Goal)
    );

    let looping = tab(vec![vec![vec![(1.0, 0)]]], &[]);
    let t = run_trajectory(&first_action(), &looping, &cfg, &mut rng(0)).unwrap();
    assert_eq!(t.termination, Termination::StepCap);
    assert_eq!(t.steps(), 1000);
    assert_eq!(t.states.len(), 1001);
    assert_eq!(t.live_states().len(), 1001);

    let dead = tab(vec![vec![vec![(1.0, 1)]], vec![], vec![]], &[2]);
    let t = run_trajectory(&first_action(), &dead, &cfg, &mut rng(0)).unwrap();
    assert_eq!(t.termination, Termination::DeadEnd);
    assert_eq!(t.states, vec![0, 1]);
    assert_eq!(t.live_states(), &[0]);

    let rec = TrajectoryRecord {
        seed: 9,
        instance: "p".into(),
        termination: t.termination,
        length: t.steps(),
    };
    assert_eq!(
        rec.to_string(),
        "seed=9 instance=p termination=dead_end length=1"
    );
}

#[test]
fn successor_sampling_follows_listed_order() {
    struct Fixed(u64);
    impl rand::RngCore for Fixed {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0)
        }
    }
    let dist = [(0.25, 'a'), (0.5, 'b'), (0.25, 'c')];
    // u = 0 and u just below 1
    assert_eq!(sample_successor(&dist, &mut Fixed(0)), 'a');
    assert_eq!(sample_successor(&dist, &mut Fixed(u64::MAX)), 'c');
    assert_eq!(sample_successor(&dist, &mut Fixed(u64::MAX / 2)), 'b');
}

#[test]
fn trajectory_draws_are_reproducible_across_execution_modes() {
    let sampler = fileworld::sampler(1..=3);
    let f = vec![
        parse_feature("goal-filed(x) & !filed(x)").unwrap(),
        parse_feature("exists x . have(x)").unwrap(),
    ];
    let v = LinearValueFn::new(f, vec![-1.0, 0.3]).unwrap();
    let cfg = MdpConfig {
        max_trajectory_length: 60,
        ..MdpConfig::default()
    };
    let policy = Greedy { v: &v, cfg: &cfg };
    let a = draw_trajectories(&policy, 12, &sampler, &cfg, 42).unwrap();
    exec::set_parallel(false);
    let b = draw_trajectories(&policy, 12, &sampler, &cfg, 42).unwrap();
    exec::set_parallel(true);
    assert_eq!(a.finished, b.finished);
    let sa: Vec<_> = a.states().cloned().collect();
    let sb: Vec<_> = b.states().cloned().collect();
    assert_eq!(sa, sb);
    assert!(a
        .samples
        .iter()
        .all(|s| s.mdp.classify(&s.state) == StateClass::Live));
}

// ---------------------------------------------------------------------------
// properties over random tabular MDPs

/// Plain value iteration over the transition table, independent of the
/// library's backup code.
fn brute_force_vi(m: &TabularMdp, cfg: &MdpConfig) -> Vec<f64> {
    let n = m.num_states();
    let mut v = vec![0.0; n];
    for _ in 0..100_000 {
        let mut next = v.clone();
        for s in 0..n {
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

fn random_mdp() -> impl Strategy<Value = TabularMdp> {
    (any::<u64>(), 2usize..=12, 1usize..=3)
        .prop_map(|(seed, n, k)| TabularMdp::random(&mut rng(seed), n, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn draw_has_exact_length_and_no_terminals(
        m in random_mdp(),
        n in 0usize..200,
        wseed in any::<u64>(),
        cap in 1usize..20,
    ) {
        prop_assume!(m.classify(&0) == StateClass::Live);
        let k = m.num_states();
        let w: Vec<f64> = {
            use rand::Rng;
            let mut r = rng(wseed);
            (0..k).map(|_| r.random_range(-1.0..1.0)).collect()
        };
        let v = table(k, w);
        let cfg = MdpConfig { max_trajectory_length: cap, ..MdpConfig::default() };
        let sampler = FixedInstance(Arc::new(m.clone()));
        let d = draw(&Greedy { v: &v, cfg: &cfg }, n, &sampler, &cfg, &mut rng(wseed ^ 1)).unwrap();
        prop_assert_eq!(d.samples.len(), n);
        for s in d.states() {
            prop_assert_eq!(m.classify(s), StateClass::Live);
        }
    }

    #[test]
    fn greedy_is_deterministic_and_backup_dominates(m in random_mdp(), wseed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(wseed);
        let k = m.num_states();
        let v = table(k, (0..k).map(|_| r.random_range(-2.0..2.0)).collect());
        let cfg = MdpConfig::default();
        for s in 0..k {
            if m.classify(&s) != StateClass::Live {
                continue;
            }
            let a = greedy_action(&v, &m, &s, &cfg).unwrap();
            prop_assert_eq!(a, greedy_action(&v, &m, &s, &cfg).unwrap());
            let u = bellman_update(&v, &m, &s, &cfg).unwrap();
            for b in m.actions(&s) {
                prop_assert!(u >= q_value(&v, &m, &s, &b, &cfg));
            }
            prop_assert_eq!(u, q_value(&v, &m, &s, &a, &cfg));
        }
    }

    #[test]
    fn greedy_invariant_under_reward_and_weight_scaling(
        m in random_mdp(),
        wseed in any::<u64>(),
        shift in -3i32..=3,
    ) {
        use rand::Rng;
        let scale = 2f64.powi(shift);
        let mut r = rng(wseed);
        let k = m.num_states();
        let w: Vec<f64> = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
        let v = table(k, w.clone());
        let vs = table(k, w.iter().map(|x| x * scale).collect());
        let cfg = MdpConfig { dead_end_value: -0.5, ..MdpConfig::default() };
        let cfgs = MdpConfig {
            goal_reward: cfg.goal_reward * scale,
            dead_end_value: cfg.dead_end_value * scale,
            ..cfg.clone()
        };
        for s in 0..k {
            if m.classify(&s) == StateClass::Live {
                prop_assert_eq!(
                    greedy_action(&v, &m, &s, &cfg).unwrap(),
                    greedy_action(&vs, &m, &s, &cfgs).unwrap()
                );
            }
        }
    }

    #[test]
    fn repeated_backups_reach_the_value_iteration_fixed_point(m in random_mdp()) {
        let cfg = MdpConfig { gamma: 0.9, ..MdpConfig::default() };
        let k = m.num_states();
        let mut v = table(k, vec![0.0; k]);
        for _ in 0..2000 {
            let w: Vec<f64> = (0..k)
                .map(|s| match m.classify(&s) {
                    StateClass::Live => bellman_update(&v, &m, &s, &cfg).unwrap(),
                    _ => 0.0,
                })
                .collect();
            v = table(k, w);
        }
        let oracle = brute_force_vi(&m, &cfg);
        for s in 0..k {
            if m.classify(&s) == StateClass::Live {
                prop_assert!((v.weights[s] - oracle[s]).abs() < 1e-6, "{} vs {}", v.weights[s], oracle[s]);
            }
        }
    }
}
