//! A brute-force feature evaluator and random feature/state generators over
//! a small synthetic domain.

use std::sync::Arc;

use proptest::prelude::*;
use relavi::feature::*;
use relavi::model::{parse_problem, Atom, GroundState, ObjId, ProblemInstance};
use relavi::pddl::parse_domain;

pub const SYNTH_DOMAIN: &str = "(define (domain synth)
  (:constants k)
  (:predicates (p ?a) (q ?a) (r ?a ?b) (s ?a ?b)))";

pub const UNARY: [&str; 2] = ["p", "q"];

pub const BINARY: [&str; 2] = ["r", "s"];

pub fn synth_instance(n_objects: usize, goal: &[(usize, Vec<usize>)]) -> ProblemInstance {
    let d = Arc::new(parse_domain(SYNTH_DOMAIN).unwrap());
    let objs: Vec<String> = (1..n_objects).map(|i| format!("o{i}")).collect();
    let name = |i: usize| {
        if i == 0 {
            "k".to_string()
        } else {
            format!("o{i}")
        }
    };
    let preds = ["p", "q", "r", "s"];
    let goal_text: Vec<String> = goal
        .iter()
        .map(|(p, args)| {
            format!(
                "({} {})",
                preds[*p],
                args.iter().map(|&a| name(a)).collect::<Vec<_>>().join(" ")
            )
        })
        .collect();
    let text = format!(
        "(define (problem t) (:domain synth) (:objects {}) (:goal (and {})))",
        objs.join(" "),
        goal_text.join(" ")
    );
    parse_problem(&text, &d).unwrap()
}

/// Direct definition of each literal over an explicit assignment.
pub fn naive_holds(
    lit: &Literal,
    env: &dyn Fn(&Term) -> ObjId,
    s: &GroundState,
    inst: &ProblemInstance,
) -> bool {
    let pred = inst.pred_id(&lit.atom.pred.base).unwrap();
    let n = inst.num_objects() as ObjId;
    let base = |args: &[ObjId]| -> bool {
        let a = Atom::new(pred, args.iter().copied());
        match lit.atom.pred.enrichment {
            GoalEnrichment::None => s.contains(&a),
            GoalEnrichment::Goal => inst.goal().contains(&a),
            GoalEnrichment::Correct => s.contains(&a) && inst.goal().contains(&a),
        }
    };
    let args: Vec<ObjId> = lit.atom.args.iter().map(env).collect();
    let value = match lit.atom.pred.modifier {
        Modifier::None => base(&args),
        Modifier::Closure => {
            // Warshall
            let n = n as usize;
            let mut m = vec![vec![false; n]; n];
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = base(&[i as ObjId, j as ObjId]);
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if m[i][k] && m[k][j] {
                            m[i][j] = true;
                        }
                    }
                }
            }
            m[args[0] as usize][args[1] as usize]
        }
        Modifier::Min | Modifier::Max => {
            let x = args[0];
            let participates = (0..n).any(|y| base(&[x, y]) || base(&[y, x]));
            let blocked = if lit.atom.pred.modifier == Modifier::Min {
                (0..n).any(|z| base(&[z, x]))
            } else {
                (0..n).any(|z| base(&[x, z]))
            };
            participates && !blocked
        }
    };
    value != lit.negated
}

pub fn naive_eval(f: &FeatureExpr, s: &GroundState, inst: &ProblemInstance) -> u32 {
    let (bound, lits) = f.split();
    let free = f.free_variable();
    let mut vars: Vec<String> = free.iter().cloned().collect();
    vars.extend(bound.iter().map(|v| v.to_string()));
    let n = inst.num_objects() as ObjId;
    let satisfied_with = |fixed: Option<ObjId>| -> bool {
        let k = bound.len();
        let total = (n as usize).pow(k as u32);
        (0..total).any(|mut code| {
            let mut vals = Vec::new();
            if let Some(x) = fixed {
                vals.push(x);
            }
            for _ in 0..k {
                vals.push((code % n as usize) as ObjId);
                code /= n as usize;
            }
            let env = |t: &Term| match t {
                Term::Var(v) => vals[vars.iter().position(|w| w == v).unwrap()],
                Term::Const(c) => inst.object_id(c).unwrap(),
            };
            lits.iter().all(|l| naive_holds(l, &env, s, inst))
        })
    };
    if free.is_some() {
        (0..n).filter(|&o| satisfied_with(Some(o))).count() as u32
    } else {
        u32::from(satisfied_with(None))
    }
}

pub fn enriched() -> impl Strategy<Value = (EnrichedPredicate, usize)> {
    let goal = prop_oneof![
        Just(GoalEnrichment::None),
        Just(GoalEnrichment::Goal),
        Just(GoalEnrichment::Correct)
    ];
    prop_oneof![
        (0..2usize, goal.clone())
            .prop_map(|(i, g)| (EnrichedPredicate::new(UNARY[i], g, Modifier::None), 1)),
        (
            0..2usize,
            goal,
            prop_oneof![
                Just(Modifier::None),
                Just(Modifier::Closure),
                Just(Modifier::Min),
                Just(Modifier::Max)
            ]
        )
            .prop_map(|(i, g, m)| {
                let p = EnrichedPredicate::new(BINARY[i], g, m);
                let arity = p.effective_arity(2);
                (p, arity)
            }),
    ]
}

pub fn term() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => prop_oneof![Just("x"), Just("y"), Just("z")].prop_map(|v| Term::Var(v.into())),
        1 => Just(Term::Const("k".into())),
    ]
}

pub fn literal() -> impl Strategy<Value = Literal> {
    (
        enriched(),
        any::<bool>(),
        proptest::collection::vec(term(), 2),
    )
        .prop_map(|((pred, arity), negated, mut args)| {
            args.truncate(arity);
            Literal {
                negated,
                atom: FeatureAtom { pred, args },
            }
        })
}

pub fn feature() -> impl Strategy<Value = FeatureExpr> {
    (proptest::collection::vec(literal(), 0..4), 0..3usize)
        .prop_map(|(lits, k)| {
            let mut f = FeatureExpr::Conj(lits);
            for v in ["z", "y"].iter().take(k) {
                f = FeatureExpr::exists(*v, f);
            }
            f
        })
        .prop_filter("at most one free variable", |f| {
            f.free_variables().len() <= 1
        })
}

pub type GoalSpec = Vec<(usize, Vec<usize>)>;

pub fn world() -> impl Strategy<Value = (usize, GoalSpec, Vec<(usize, Vec<usize>)>)> {
    (1usize..=6).prop_flat_map(|n| {
        let atom = (0usize..4, proptest::collection::vec(0..n, 2)).prop_map(|(p, mut a)| {
            a.truncate(if p < 2 { 1 } else { 2 });
            (p, a)
        });
        (
            Just(n),
            proptest::collection::vec(atom.clone(), 1..5),
            proptest::collection::vec(atom, 0..12),
        )
    })
}

pub fn build(_inst: &ProblemInstance, atoms: &[(usize, Vec<usize>)]) -> GroundState {
    GroundState::new(
        atoms
            .iter()
            .map(|(p, a)| Atom::new(*p as u32, a.iter().map(|&o| o as ObjId))),
    )
}
