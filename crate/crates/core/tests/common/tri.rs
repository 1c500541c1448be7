//! The three-predicate search domain with random instances.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relavi::feature::*;
use relavi::model::{parse_problem, ProblemInstance};
use relavi::pddl::{parse_domain, DomainDef};
use relavi::search::*;

pub const DOMAIN: &str = "(define (domain tri)
  (:constants k)
  (:predicates (p ?a) (q ?a) (r ?a ?b)))";

pub fn domain() -> Arc<DomainDef> {
    Arc::new(parse_domain(DOMAIN).unwrap())
}

pub fn random_instance(
    d: &Arc<DomainDef>,
    rng: &mut ChaCha8Rng,
    name: usize,
) -> Arc<ProblemInstance> {
    let names = ["k", "a", "b", "c"];
    let mut init = Vec::new();
    let mut goal = Vec::new();
    for x in names {
        for p in ["p", "q"] {
            if rng.random_bool(0.4) {
                init.push(format!("({p} {x})"));
            }
            if rng.random_bool(0.2) {
                goal.push(format!("({p} {x})"));
            }
        }
        for y in names {
            if rng.random_bool(0.2) {
                init.push(format!("(r {x} {y})"));
            }
            if rng.random_bool(0.1) {
                goal.push(format!("(r {x} {y})"));
            }
        }
    }
    if goal.is_empty() {
        goal.push("(p a)".into());
    }
    let text = format!(
        "(define (problem t{name}) (:domain tri) (:objects a b c) (:init {}) (:goal (and {})))",
        init.join(" "),
        goal.join(" ")
    );
    Arc::new(parse_problem(&text, d).unwrap())
}

pub fn training(
    seed: u64,
    n: usize,
    mut target: impl FnMut(&ProblemInstance) -> f64,
) -> Vec<TrainingPoint> {
    let d = domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let inst = random_instance(&d, &mut rng, i);
            TrainingPoint {
                state: inst.init().clone(),
                target: target(&inst),
                instance: inst,
            }
        })
        .collect()
}

/// Pearson correlation written out directly, 0 on constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

pub fn values(f: &FeatureExpr, t: &[TrainingPoint]) -> Vec<f64> {
    t.iter()
        .map(|p| f64::from(eval_feature(f, &p.state, &p.instance).unwrap()))
        .collect()
}

pub fn exhaustive() -> SearchConfig {
    SearchConfig {
        beam_width: usize::MAX,
        depth_limit: 1,
        lambda: 0.0,
        ..SearchConfig::default()
    }
}

/// Every single-literal feature over the domain, listed by hand.
pub fn depth_one_by_hand() -> Vec<FeatureExpr> {
    let mut texts = Vec::new();
    for base in ["p", "q"] {
        for pre in ["", "goal-", "correct-"] {
            for arg in ["x", "k"] {
                texts.push(format!("{pre}{base}({arg})"));
            }
        }
    }
    for pre in ["", "goal-", "correct-"] {
        for args in ["x,x", "x,k", "k,x", "k,k"] {
            texts.push(format!("{pre}r({args})"));
            texts.push(format!("{pre}r+({args})"));
        }
        for m in ["min-", "max-"] {
            for arg in ["x", "k"] {
                texts.push(format!("{m}{pre}r({arg})"));
            }
        }
    }
    let sig = Signature::of_domain(&domain());
    texts
        .iter()
        .flat_map(|t| [t.clone(), format!("!{t}")])
        .map(|t| parse_feature_with(&t, &sig).unwrap())
        .collect()
}
