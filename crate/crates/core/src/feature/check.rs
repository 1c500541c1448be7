use std::fmt;

use crate::model::ProblemInstance;
use crate::pddl::DomainDef;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownPredicate(String),
    UnknownConstant(String),
    /// `+`, `min-` or `max-` on a predicate that is not binary.
    ModifierArity {
        pred: String,
        arity: usize,
    },
    Arity {
        pred: String,
        expected: usize,
        found: usize,
    },
    TooManyFreeVariables(Vec<String>),
    QuantifierBound {
        depth: usize,
        bound: usize,
    },
    /// Goal enrichments are undefined when the instance has no goal atoms.
    GoalEnrichmentWithoutGoal(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownPredicate(p) => write!(f, "unknown predicate `{p}`"),
            Violation::UnknownConstant(c) => write!(f, "unknown constant `{c}`"),
            Violation::ModifierArity { pred, arity } => write!(
                f,
                "`{pred}` has arity {arity}; `+`, `min-` and `max-` need arity 2"
            ),
            Violation::Arity {
                pred,
                expected,
                found,
            } => write!(f, "`{pred}` takes {expected} arguments, found {found}"),
            Violation::TooManyFreeVariables(vs) => {
                write!(
                    f,
                    "{} free variables ({}), at most one allowed",
                    vs.len(),
                    vs.join(", ")
                )
            }
            Violation::QuantifierBound { depth, bound } => {
                write!(f, "{depth} quantifiers in scope exceeds the bound {bound}")
            }
            Violation::GoalEnrichmentWithoutGoal(p) => {
                write!(f, "`{p}` needs a goal, but the instance goal is empty")
            }
        }
    }
}

fn check_with(
    f: &FeatureExpr,
    domain: &DomainDef,
    q: usize,
    is_constant: impl Fn(&str) -> bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for lit in f.literals() {
        let pred = &lit.atom.pred;
        match domain.predicate(&pred.base) {
            None => out.push(Violation::UnknownPredicate(pred.base.clone())),
            Some(def) => {
                let arity = def.arity();
                if !pred.modifier_allowed(arity) {
                    out.push(Violation::ModifierArity {
                        pred: pred.base.clone(),
                        arity,
                    });
                } else if pred.effective_arity(arity) != lit.atom.args.len() {
                    out.push(Violation::Arity {
                        pred: pred.to_string(),
                        expected: pred.effective_arity(arity),
                        found: lit.atom.args.len(),
                    });
                }
            }
        }
        for t in &lit.atom.args {
            if let Term::Const(c) = t {
                if !is_constant(c) {
                    out.push(Violation::UnknownConstant(c.clone()));
                }
            }
        }
    }
    let free = f.free_variables();
    if free.len() > 1 {
        out.push(Violation::TooManyFreeVariables(free.into_iter().collect()));
    }
    let depth = f.quantifier_depth();
    if depth > q {
        out.push(Violation::QuantifierBound { depth, bound: q });
    }
    out
}

/// Every well-formedness violation of `f` against a domain with quantifier
/// bound `q`. Constants must be domain constants.
pub fn check_wellformed(f: &FeatureExpr, domain: &DomainDef, q: usize) -> Vec<Violation> {
    check_with(f, domain, q, |c| {
        domain.constants.iter().any(|k| k.name == c)
    })
}

/// Like [`check_wellformed`], but constants may name any instance object, and
/// goal enrichments are rejected when the goal is empty.
pub fn check_for_instance(f: &FeatureExpr, inst: &ProblemInstance, q: usize) -> Vec<Violation> {
    let mut out = check_with(f, inst.domain(), q, |c| inst.object_id(c).is_some());
    if inst.goal().is_empty() {
        for lit in f.literals() {
            if lit.atom.pred.enrichment != GoalEnrichment::None {
                out.push(Violation::GoalEnrichmentWithoutGoal(
                    lit.atom.pred.to_string(),
                ));
            }
        }
    }
    out
}
