use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;
use std::rc::Rc;

use crate::model::{GroundState, ObjId, PredId, ProblemInstance};

use super::ast::*;
use super::check::{check_for_instance, Violation};

/// Smallest transitive relation containing `pairs`.
pub fn transitive_closure<T: Ord + Clone + Hash>(pairs: &BTreeSet<(T, T)>) -> BTreeSet<(T, T)> {
    let mut succ: HashMap<&T, Vec<&T>> = HashMap::new();
    for (a, b) in pairs {
        succ.entry(a).or_default().push(b);
    }
    let mut out = BTreeSet::new();
    for start in succ.keys() {
        let mut seen: HashSet<&T> = HashSet::new();
        let mut stack: Vec<&T> = succ[start].clone();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                out.insert(((*start).clone(), n.clone()));
                if let Some(next) = succ.get(n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Source {
    State,
    Goal,
    Correct,
}

impl From<GoalEnrichment> for Source {
    fn from(g: GoalEnrichment) -> Self {
        match g {
            GoalEnrichment::None => Source::State,
            GoalEnrichment::Goal => Source::Goal,
            GoalEnrichment::Correct => Source::Correct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CTerm {
    Var(usize),
    Obj(ObjId),
}

#[derive(Debug, Clone)]
struct CLiteral {
    negated: bool,
    pred: PredId,
    source: Source,
    modifier: Modifier,
    args: Vec<CTerm>,
}

/// A feature resolved against one instance's predicate and object ids.
#[derive(Debug, Clone)]
pub struct CompiledFeature {
    literals: Vec<CLiteral>,
    num_vars: usize,
    /// Slot 0 when the feature has a free variable.
    has_free: bool,
}

impl CompiledFeature {
    /// Resolves names; fails if the feature is not well formed for `inst`.
    /// The quantifier bound is not enforced here.
    pub fn new(f: &FeatureExpr, inst: &ProblemInstance) -> Result<Self, Vec<Violation>> {
        let violations: Vec<Violation> = check_for_instance(f, inst, usize::MAX)
            .into_iter()
            .filter(|v| !matches!(v, Violation::GoalEnrichmentWithoutGoal(_)))
            .collect();
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(Self::compile_unchecked(f, inst))
    }

    pub(crate) fn compile_unchecked(f: &FeatureExpr, inst: &ProblemInstance) -> Self {
        let (bound, lits) = f.split();
        let free = f.free_variable();
        let mut slots: HashMap<&str, usize> = HashMap::new();
        if let Some(v) = &free {
            slots.insert(v.as_str(), 0);
        }
        let base = slots.len();
        for (i, v) in bound.iter().enumerate() {
            slots.insert(v, base + i);
        }
        let literals: Vec<CLiteral> = lits
            .iter()
            .map(|l| CLiteral {
                negated: l.negated,
                pred: inst.pred_id(&l.atom.pred.base).expect("checked"),
                source: l.atom.pred.enrichment.into(),
                modifier: l.atom.pred.modifier,
                args: l
                    .atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => CTerm::Var(slots[v.as_str()]),
                        Term::Const(c) => CTerm::Obj(inst.object_id(c).expect("checked")),
                    })
                    .collect(),
            })
            .collect();
        assert!(literals.len() <= 64, "feature has more than 64 literals");
        CompiledFeature {
            literals,
            num_vars: slots.len(),
            has_free: free.is_some(),
        }
    }

    /// Binding count of the free variable, or 0/1 for a closed feature.
    pub fn count(&self, inst: &ProblemInstance, s: &GroundState) -> u32 {
        let mut ctx = Ctx {
            state: s,
            goal: inst.goal(),
            num_objects: inst.num_objects() as ObjId,
            derived: HashMap::new(),
        };
        if ctx.num_objects == 0 && self.num_vars > 0 {
            // every quantifier ranges over an empty universe
            return 0;
        }
        let mut assignment = vec![None; self.num_vars];
        if self.has_free {
            let mut n = 0;
            for o in 0..ctx.num_objects {
                assignment[0] = Some(o);
                if self.satisfy(&mut ctx, &mut assignment, 0) {
                    n += 1;
                }
            }
            n
        } else {
            u32::from(self.satisfy(&mut ctx, &mut assignment, 0))
        }
    }

    /// Backtracking search for an extension of `assignment` satisfying every
    /// literal not yet marked in `done`.
    fn satisfy(&self, ctx: &mut Ctx<'_>, assignment: &mut [Option<ObjId>], mut done: u64) -> bool {
        for (i, lit) in self.literals.iter().enumerate() {
            if done & (1 << i) != 0 {
                continue;
            }
            if let Some(args) = ground_args(&lit.args, assignment) {
                if ctx.holds(lit, &args) == lit.negated {
                    return false;
                }
                done |= 1 << i;
            }
        }
        let pending = |i: &usize| done & (1 << *i) == 0;
        if let Some(i) = (0..self.literals.len())
            .filter(pending)
            .find(|&i| !self.literals[i].negated)
        {
            // join: bind the literal's free slots from its relation's tuples
            let lit = &self.literals[i];
            let tuples = ctx.tuples(lit);
            for tuple in tuples.iter() {
                let mut newly = Vec::new();
                let mut ok = true;
                for (t, &o) in lit.args.iter().zip(tuple.iter()) {
                    ok = match *t {
                        CTerm::Obj(c) => c == o,
                        CTerm::Var(v) => match assignment[v] {
                            Some(b) => b == o,
                            None => {
                                assignment[v] = Some(o);
                                newly.push(v);
                                true
                            }
                        },
                    };
                    if !ok {
                        break;
                    }
                }
                let found = ok && self.satisfy(ctx, assignment, done | (1 << i));
                for v in newly {
                    assignment[v] = None;
                }
                if found {
                    return true;
                }
            }
            return false;
        }
        // only negative literals remain: enumerate one of their variables
        let Some(var) = (0..self.literals.len()).filter(pending).find_map(|i| {
            self.literals[i].args.iter().find_map(|t| match *t {
                CTerm::Var(v) if assignment[v].is_none() => Some(v),
                _ => None,
            })
        }) else {
            return true;
        };
        for o in 0..ctx.num_objects {
            assignment[var] = Some(o);
            if self.satisfy(ctx, assignment, done) {
                assignment[var] = None;
                return true;
            }
        }
        assignment[var] = None;
        false
    }
}

fn ground_args(args: &[CTerm], assignment: &[Option<ObjId>]) -> Option<Vec<ObjId>> {
    args.iter()
        .map(|t| match *t {
            CTerm::Obj(o) => Some(o),
            CTerm::Var(v) => assignment[v],
        })
        .collect()
}

/// Relations derived from one state, computed on first use.
struct Ctx<'a> {
    state: &'a GroundState,
    goal: &'a GroundState,
    num_objects: ObjId,
    derived: HashMap<(PredId, Source, Modifier), Derived>,
}

enum Derived {
    Tuples(Rc<Vec<Vec<ObjId>>>),
    Pairs(Rc<Vec<Vec<ObjId>>>, HashSet<(ObjId, ObjId)>),
    Set(Rc<Vec<Vec<ObjId>>>, BTreeSet<ObjId>),
}

impl Ctx<'_> {
    fn base_contains(&self, pred: PredId, source: Source, args: &[ObjId]) -> bool {
        let atom = crate::model::Atom::new(pred, args.iter().copied());
        match source {
            Source::State => self.state.contains(&atom),
            Source::Goal => self.goal.contains(&atom),
            Source::Correct => self.state.contains(&atom) && self.goal.contains(&atom),
        }
    }

    fn base_tuples(&self, pred: PredId, source: Source) -> Vec<Vec<ObjId>> {
        let from = match source {
            Source::State => self.state,
            Source::Goal | Source::Correct => self.goal,
        };
        from.with_pred(pred)
            .iter()
            .filter(|a| source != Source::Correct || self.state.contains(a))
            .map(|a| a.args.to_vec())
            .collect()
    }

    fn derive(&mut self, pred: PredId, source: Source, modifier: Modifier) -> &Derived {
        let key = (pred, source, modifier);
        if !self.derived.contains_key(&key) {
            let base = self.base_tuples(pred, source);
            let d = match modifier {
                Modifier::None => Derived::Tuples(Rc::new(base)),
                Modifier::Closure => {
                    let rel: BTreeSet<(ObjId, ObjId)> = base.iter().map(|t| (t[0], t[1])).collect();
                    let closed = transitive_closure(&rel);
                    let tuples = closed.iter().map(|&(a, b)| vec![a, b]).collect();
                    Derived::Pairs(Rc::new(tuples), closed.into_iter().collect())
                }
                Modifier::Min | Modifier::Max => {
                    let mut participants = BTreeSet::new();
                    let mut has_pred = HashSet::new();
                    let mut has_succ = HashSet::new();
                    for t in &base {
                        participants.insert(t[0]);
                        participants.insert(t[1]);
                        has_succ.insert(t[0]);
                        has_pred.insert(t[1]);
                    }
                    let excluded = if modifier == Modifier::Min {
                        has_pred
                    } else {
                        has_succ
                    };
                    let set: BTreeSet<ObjId> = participants
                        .into_iter()
                        .filter(|o| !excluded.contains(o))
                        .collect();
                    Derived::Set(Rc::new(set.iter().map(|&o| vec![o]).collect()), set)
                }
            };
            self.derived.insert(key, d);
        }
        &self.derived[&key]
    }

    fn holds(&mut self, lit: &CLiteral, args: &[ObjId]) -> bool {
        match lit.modifier {
            Modifier::None => self.base_contains(lit.pred, lit.source, args),
            m => match self.derive(lit.pred, lit.source, m) {
                Derived::Pairs(_, set) => set.contains(&(args[0], args[1])),
                Derived::Set(_, set) => set.contains(&args[0]),
                Derived::Tuples(_) => unreachable!(),
            },
        }
    }

    fn tuples(&mut self, lit: &CLiteral) -> Rc<Vec<Vec<ObjId>>> {
        match self.derive(lit.pred, lit.source, lit.modifier) {
            Derived::Tuples(t) | Derived::Pairs(t, _) | Derived::Set(t, _) => Rc::clone(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("ill-formed feature `{feature}`: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct IllFormed {
    pub feature: String,
    pub violations: Vec<Violation>,
}

/// Value of `f` in `s`: the number of objects the free variable can take,
/// or 1/0 for a closed feature.
pub fn eval_feature(
    f: &FeatureExpr,
    s: &GroundState,
    inst: &ProblemInstance,
) -> Result<u32, IllFormed> {
    let violations = check_for_instance(f, inst, usize::MAX);
    if !violations.is_empty() {
        return Err(IllFormed {
            feature: f.to_string(),
            violations,
        });
    }
    Ok(CompiledFeature::compile_unchecked(f, inst).count(inst, s))
}
