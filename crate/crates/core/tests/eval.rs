use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relavi::avi::PolicyComparator;
use relavi::eval::*;
use relavi::exec;
use relavi::model::tabular::TabularMdp;
use relavi::model::Mdp;
use relavi::rollout::*;

fn outcomes(successes: usize, trials: usize) -> EvalReport {
    let v: Vec<bool> = (0..trials).map(|i| i < successes).collect();
    EvalReport::from_outcomes(&v)
}

fn first_action() -> FnPolicy<impl Fn(&TabularMdp, &usize) -> Option<usize> + Sync> {
    FnPolicy(|m: &TabularMdp, s: &usize| m.actions(s).first().copied())
}

/// State 0 either reaches the goal (1) or stays put, each with probability 1/2.
fn coin() -> Arc<TabularMdp> {
    Arc::new(TabularMdp {
        transitions: vec![vec![vec![(0.5, 1), (0.5, 0)]], vec![]],
        goals: vec![false, true],
        initial: 0,
    })
}

// Reference values from an independent statistics package (Welch t on
// D = 0.9 p1 - p2 with unbiased per-sample variances).
const T_80_40: f64 = 5.237229365663818;
const DF_80_40: f64 = 181.78104676370396;
const CRIT_80_40: f64 = 1.973099984123743;
const T_80_78: f64 = -1.087780737221851;
const DF_80_78: f64 = 194.22349204372063;
const CRIT_80_78: f64 = 1.9722532879407892;
const T_3_0: f64 = 1.749815896059666;
const CRIT_3_0: f64 = 1.9842169515086827;

#[test]
fn welch_matches_reference_values() {
    let cc = ComparatorConfig::default();
    let w = welch(&outcomes(80, 100), &outcomes(40, 100), cc)
        .unwrap()
        .unwrap();
    assert!((w.d - 0.32).abs() < 1e-12);
    assert!((w.t - T_80_40).abs() < 1e-9);
    assert!((w.df - DF_80_40).abs() < 1e-9);
    assert!((w.critical - CRIT_80_40).abs() < 1e-6);
    assert!(tests_significantly_better(&outcomes(80, 100), &outcomes(40, 100)).unwrap());

    let w = welch(&outcomes(80, 100), &outcomes(78, 100), cc)
        .unwrap()
        .unwrap();
    assert!((w.t - T_80_78).abs() < 1e-9);
    assert!((w.df - DF_80_78).abs() < 1e-9);
    assert!((w.critical - CRIT_80_78).abs() < 1e-6);
    assert!(!tests_significantly_better(&outcomes(80, 100), &outcomes(78, 100)).unwrap());

    // one constant sample: degrees of freedom collapse to n - 1
    let w = welch(&outcomes(3, 100), &outcomes(0, 100), cc)
        .unwrap()
        .unwrap();
    assert!((w.t - T_3_0).abs() < 1e-9);
    assert!((w.df - 99.0).abs() < 1e-9);
    assert!((w.critical - CRIT_3_0).abs() < 1e-6);
    assert!(!tests_significantly_better(&outcomes(3, 100), &outcomes(0, 100)).unwrap());
}

#[test]
fn degenerate_and_invalid_reports() {
    assert!(tests_significantly_better(&outcomes(100, 100), &outcomes(0, 100)).unwrap());
    assert!(!tests_significantly_better(&outcomes(0, 100), &outcomes(0, 100)).unwrap());
    assert!(!tests_significantly_better(&outcomes(100, 100), &outcomes(100, 100)).unwrap());
    assert_eq!(
        tests_significantly_better(&outcomes(0, 0), &outcomes(0, 10)),
        Err(EvalError::Empty)
    );
    assert_eq!(
        tests_significantly_better(&outcomes(1, 1), &outcomes(0, 10)),
        Err(EvalError::TooFewTrials(1))
    );
}

#[test]
fn identical_reports_never_test_better() {
    for trials in [2, 5, 100] {
        for s in 0..=trials {
            let r = outcomes(s, trials);
            assert!(!tests_significantly_better(&r, &r).unwrap());
        }
    }
}

#[test]
fn equal_policies_rarely_test_better() {
    let mut positives = 0;
    for pair in 0..1000u64 {
        let mut rng = exec::rng_for(2024, pair);
        let a: Vec<bool> = (0..100).map(|_| rng.random_bool(0.5)).collect();
        let b: Vec<bool> = (0..100).map(|_| rng.random_bool(0.5)).collect();
        if tests_significantly_better(
            &EvalReport::from_outcomes(&a),
            &EvalReport::from_outcomes(&b),
        )
        .unwrap()
        {
            positives += 1;
        }
    }
    assert!(positives <= 50, "{positives} false positives");
}

#[test]
fn success_rate_examples() {
    let cfg = MdpConfig {
        max_trajectory_length: 20,
        ..MdpConfig::default()
    };
    let solved = FixedInstance(Arc::new(TabularMdp {
        transitions: vec![vec![]],
        goals: vec![true],
        initial: 0,
    }));
    let r = success_rate(&first_action(), &solved, 10, &cfg, 1).unwrap();
    assert_eq!(r.success_rate, 1.0);
    assert!(r.records.iter().all(|t| t.steps == 0));

    // no goal reachable: a self-loop and a dead end
    let hopeless = TabularMdp {
        transitions: vec![vec![vec![(0.5, 0), (0.5, 1)]], vec![], vec![]],
        goals: vec![false, false, true],
        initial: 0,
    };
    let r = success_rate(
        &first_action(),
        &FixedInstance(Arc::new(hopeless)),
        50,
        &cfg,
        2,
    )
    .unwrap();
    assert_eq!(r.success_rate, 0.0);
    assert!(r
        .records
        .iter()
        .all(|t| matches!(t.termination, Termination::StepCap | Termination::DeadEnd)));

    let r = success_rate(&first_action(), &FixedInstance(coin()), 100, &cfg, 3).unwrap();
    assert_eq!(r.trials, 100);
    assert_eq!(r.outcomes.len(), 100);
    assert_eq!(r.success_rate, r.successes as f64 / 100.0);
    assert!(r.successes > 80, "{}", r.successes);
}

#[test]
fn success_rate_is_reproducible() {
    let cfg = MdpConfig::default();
    let run = || success_rate(&first_action(), &FixedInstance(coin()), 64, &cfg, 11).unwrap();
    let a = run();
    exec::set_parallel(false);
    let b = run();
    exec::set_parallel(true);
    assert_eq!(a, b);
    assert_eq!(
        a.seeds(),
        (0..64)
            .map(|i| exec::derive_seed(11, i))
            .collect::<Vec<_>>()
    );
    let other = success_rate(&first_action(), &FixedInstance(coin()), 64, &cfg, 12).unwrap();
    assert_ne!(a.seeds(), other.seeds());
}

#[test]
fn comparator_on_policies() {
    let cfg = MdpConfig {
        max_trajectory_length: 30,
        ..MdpConfig::default()
    };
    // action 0 reaches the goal, action 1 loops
    let m = Arc::new(TabularMdp {
        transitions: vec![vec![vec![(1.0, 1)], vec![(1.0, 0)]], vec![]],
        goals: vec![false, true],
        initial: 0,
    });
    let cmp = SuccessRateComparator::new(FixedInstance(m), cfg);
    let good = LinearValueFn::new(IndicatorFeatures(2), vec![0.0, 0.0]).unwrap();
    let bad = LinearValueFn::new(IndicatorFeatures(2), vec![100.0, 0.0]).unwrap();
    assert!(cmp.significantly_better(&good, &bad, 0).unwrap());
    assert!(!cmp.significantly_better(&bad, &good, 0).unwrap());
    assert!(!cmp.significantly_better(&good, &good, 0).unwrap());
}

#[test]
fn curriculum_examples() {
    let cc = CurriculumConfig {
        levels: vec![1, 2, 3],
        threshold: 0.9,
        trials_per_check: 100,
    };
    assert!(cc.validate().is_ok());
    assert_eq!(curriculum_step(0, &outcomes(95, 100), &cc), 1);
    assert_eq!(curriculum_step(2, &outcomes(95, 100), &cc), 2);
    assert_eq!(curriculum_step(1, &outcomes(85, 100), &cc), 1);
    assert_eq!(curriculum_step(1, &outcomes(90, 100), &cc), 2);

    for bad in [
        CurriculumConfig {
            levels: Vec::<usize>::new(),
            ..cc.clone()
        },
        CurriculumConfig {
            threshold: 0.0,
            ..cc.clone()
        },
        CurriculumConfig {
            threshold: 1.5,
            ..cc.clone()
        },
        CurriculumConfig {
            trials_per_check: 0,
            ..cc.clone()
        },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn report_round_trips() {
    let cfg = MdpConfig::default();
    let r = success_rate(&first_action(), &FixedInstance(coin()), 30, &cfg, 5).unwrap();
    let mut buf = Vec::new();
    write_report(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(EVAL_REPORT_HEADER));
    assert_eq!(
        text.lines().nth(1),
        Some("trial,seed,instance,termination,steps,success")
    );
    assert_eq!(read_report(buf.as_slice()).unwrap(), r);
    assert!(read_report("# other\n".as_bytes()).is_err());
}

fn shuffled(successes: usize, trials: usize, seed: u64) -> EvalReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<bool> = (0..trials).map(|i| i < successes).collect();
    for i in (1..v.len()).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    EvalReport::from_outcomes(&v)
}

proptest! {
    #[test]
    fn order_of_outcomes_does_not_matter(s1 in 0usize..=50, s2 in 0usize..=50, seed: u64) {
        let a = tests_significantly_better(&outcomes(s1, 50), &outcomes(s2, 50)).unwrap();
        let b = tests_significantly_better(&shuffled(s1, 50, seed), &shuffled(s2, 50, seed ^ 1)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn antisymmetric(s1 in 0usize..=100, s2 in 0usize..=100, n1 in 2usize..=100, n2 in 2usize..=100) {
        let r1 = outcomes(s1.min(n1), n1);
        let r2 = outcomes(s2.min(n2), n2);
        let cc = ComparatorConfig::default();
        let both = welch(&r1, &r2, cc).unwrap().is_some() && welch(&r2, &r1, cc).unwrap().is_some();
        if both {
            prop_assert!(!(tests_significantly_better(&r1, &r2).unwrap() && tests_significantly_better(&r2, &r1).unwrap()));
        }
    }

    #[test]
    fn fewer_successes_for_the_second_never_hurt(s1 in 0usize..=100, s2 in 1usize..=100) {
        let r1 = outcomes(s1, 100);
        if tests_significantly_better(&r1, &outcomes(s2, 100)).unwrap() {
            prop_assert!(tests_significantly_better(&r1, &outcomes(s2 - 1, 100)).unwrap());
        }
    }
}
