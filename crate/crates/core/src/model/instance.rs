use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::pddl::{
    self, AtomExpr, DomainDef, Effect, Formula, ParseError, ParseErrorKind, Pos, ProblemDef, Term,
    TypedName, ROOT_TYPE,
};

use super::state::{Atom, GroundState, ObjId, PredId};

/// Precondition after quantifiers and equality have been expanded away.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundFormula {
    True,
    False,
    Atom(Atom),
    Not(Box<GroundFormula>),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

impl GroundFormula {
    pub fn holds(&self, s: &GroundState) -> bool {
        match self {
            GroundFormula::True => true,
            GroundFormula::False => false,
            GroundFormula::Atom(a) => s.contains(a),
            GroundFormula::Not(f) => !f.holds(s),
            GroundFormula::And(fs) => fs.iter().all(|f| f.holds(s)),
            GroundFormula::Or(fs) => fs.iter().any(|f| f.holds(s)),
        }
    }

    fn and(parts: Vec<GroundFormula>) -> GroundFormula {
        let mut kept = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                GroundFormula::True => {}
                GroundFormula::False => return GroundFormula::False,
                GroundFormula::And(inner) => kept.extend(inner),
                other => kept.push(other),
            }
        }
        match kept.len() {
            0 => GroundFormula::True,
            1 => kept.pop().unwrap(),
            _ => GroundFormula::And(kept),
        }
    }

    fn or(parts: Vec<GroundFormula>) -> GroundFormula {
        let mut kept = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                GroundFormula::False => {}
                GroundFormula::True => return GroundFormula::True,
                GroundFormula::Or(inner) => kept.extend(inner),
                other => kept.push(other),
            }
        }
        match kept.len() {
            0 => GroundFormula::False,
            1 => kept.pop().unwrap(),
            _ => GroundFormula::Or(kept),
        }
    }

    fn not(f: GroundFormula) -> GroundFormula {
        match f {
            GroundFormula::True => GroundFormula::False,
            GroundFormula::False => GroundFormula::True,
            GroundFormula::Not(inner) => *inner,
            other => GroundFormula::Not(Box::new(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundEffect {
    Add(Atom),
    Del(Atom),
    And(Vec<GroundEffect>),
    Probabilistic(Vec<(f64, GroundEffect)>),
    When(GroundFormula, Box<GroundEffect>),
}

/// One possible result of executing an action: probability plus add/delete lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl GroundEffect {
    /// Expands the effect tree into its outcome list, evaluating conditional
    /// effects in `s`. Branch-list shortfall becomes an explicit no-op outcome.
    pub fn outcomes(&self, s: &GroundState) -> Vec<Outcome> {
        match self {
            GroundEffect::Add(a) => vec![Outcome {
                probability: 1.0,
                add: vec![a.clone()],
                del: Vec::new(),
            }],
            GroundEffect::Del(a) => vec![Outcome {
                probability: 1.0,
                add: Vec::new(),
                del: vec![a.clone()],
            }],
            GroundEffect::And(parts) => {
                let mut acc = vec![Outcome::noop(1.0)];
                for part in parts {
                    let branch = part.outcomes(s);
                    let mut next = Vec::with_capacity(acc.len() * branch.len());
                    for a in &acc {
                        for b in &branch {
                            let mut add = a.add.clone();
                            add.extend(b.add.iter().cloned());
                            let mut del = a.del.clone();
                            del.extend(b.del.iter().cloned());
                            next.push(Outcome {
                                probability: a.probability * b.probability,
                                add,
                                del,
                            });
                        }
                    }
                    acc = next;
                }
                acc
            }
            GroundEffect::Probabilistic(branches) => {
                let mut out = Vec::new();
                let mut total = 0.0;
                for (p, e) in branches {
                    total += p;
                    for mut o in e.outcomes(s) {
                        o.probability *= p;
                        out.push(o);
                    }
                }
                let shortfall = 1.0 - total;
                if shortfall > pddl::PROBABILITY_TOLERANCE {
                    out.push(Outcome::noop(shortfall));
                }
                out
            }
            GroundEffect::When(cond, e) => {
                if cond.holds(s) {
                    e.outcomes(s)
                } else {
                    vec![Outcome::noop(1.0)]
                }
            }
        }
    }
}

impl Outcome {
    fn noop(probability: f64) -> Self {
        Outcome {
            probability,
            add: Vec::new(),
            del: Vec::new(),
        }
    }
}

/// An action schema instantiated with objects.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<ObjId>,
    /// Printable form, e.g. `get-type(p0)`.
    pub label: String,
    pub precondition: GroundFormula,
    pub effect: GroundEffect,
}

impl GroundAction {
    pub fn is_applicable(&self, s: &GroundState) -> bool {
        self.precondition.holds(s)
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    Goal,
    DeadEnd,
    Live,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("action `{0}` is not applicable in this state")]
    NotApplicable(String),
    #[error("state dump line {line}: {message}")]
    StateDump { line: usize, message: String },
}

/// A grounded planning problem: object universe, initial state, goal, and
/// every well-typed ground action in lexicographic order.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    domain: Arc<DomainDef>,
    name: String,
    /// Domain constants first, then problem objects; index = [`ObjId`].
    objects: Vec<TypedName>,
    object_ids: HashMap<String, ObjId>,
    init: GroundState,
    goal: GroundState,
    actions: Vec<GroundAction>,
}

/// Parses a problem file and grounds it against `domain`.
pub fn parse_problem(text: &str, domain: &Arc<DomainDef>) -> Result<ProblemInstance, ParseError> {
    let def = pddl::parse_problem_def(text, domain)?;
    ProblemInstance::new(Arc::clone(domain), &def)
}

fn instance_error(kind: ParseErrorKind) -> ParseError {
    ParseError::new(kind, Pos::default())
}

impl ProblemInstance {
    pub fn new(domain: Arc<DomainDef>, def: &ProblemDef) -> Result<Self, ParseError> {
        let mut objects: Vec<TypedName> = domain.constants.clone();
        let untyped = infer_object_types(&domain, def)?;
        for (name, ty) in &def.objects {
            let ty = match ty {
                Some(t) => t.clone(),
                None => untyped[name].clone(),
            };
            if !domain.has_type(&ty) {
                return Err(instance_error(ParseErrorKind::UndeclaredType(ty)));
            }
            objects.push(TypedName::new(name.clone(), ty));
        }
        let mut object_ids = HashMap::new();
        for (i, o) in objects.iter().enumerate() {
            if object_ids.insert(o.name.clone(), i as ObjId).is_some() {
                return Err(instance_error(ParseErrorKind::Duplicate {
                    what: "object",
                    name: o.name.clone(),
                }));
            }
        }
        let mut inst = ProblemInstance {
            domain,
            name: def.name.clone(),
            objects,
            object_ids,
            init: GroundState::default(),
            goal: GroundState::default(),
            actions: Vec::new(),
        };
        inst.init = GroundState::new(
            def.init
                .iter()
                .map(|a| inst.resolve_ground_atom(a))
                .collect::<Result<Vec<_>, _>>()?,
        );
        inst.goal = GroundState::new(
            def.goal
                .iter()
                .map(|a| inst.resolve_ground_atom(a))
                .collect::<Result<Vec<_>, _>>()?,
        );
        inst.actions = inst.ground_all_actions();
        Ok(inst)
    }

    pub fn domain(&self) -> &Arc<DomainDef> {
        &self.domain
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn objects(&self) -> &[TypedName] {
        &self.objects
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn object_id(&self, name: &str) -> Option<ObjId> {
        self.object_ids.get(name).copied()
    }

    pub fn object_name(&self, id: ObjId) -> &str {
        &self.objects[id as usize].name
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.domain.predicate_index(name).map(|i| i as PredId)
    }

    pub fn pred_name(&self, id: PredId) -> &str {
        &self.domain.predicates[id as usize].name
    }

    pub fn init(&self) -> &GroundState {
        &self.init
    }

    /// The goal conjunction as an atom set.
    pub fn goal(&self) -> &GroundState {
        &self.goal
    }

    pub fn ground_actions(&self) -> &[GroundAction] {
        &self.actions
    }

    /// Objects whose type is `ty` or a subtype of it, in id order.
    pub fn objects_of_type(&self, ty: &str) -> Vec<ObjId> {
        (0..self.objects.len() as ObjId)
            .filter(|&i| self.domain.is_subtype(&self.objects[i as usize].ty, ty))
            .collect()
    }

    fn resolve_ground_atom(&self, a: &AtomExpr) -> Result<Atom, ParseError> {
        let pred_idx = self
            .domain
            .predicate_index(&a.pred)
            .ok_or_else(|| instance_error(ParseErrorKind::UndeclaredPredicate(a.pred.clone())))?;
        let def = &self.domain.predicates[pred_idx];
        if def.arity() != a.args.len() {
            return Err(instance_error(ParseErrorKind::Arity {
                pred: a.pred.clone(),
                expected: def.arity(),
                found: a.args.len(),
            }));
        }
        let mut args = Vec::with_capacity(a.args.len());
        for (t, slot) in a.args.iter().zip(&def.params) {
            let name = match t {
                Term::Const(c) => c,
                Term::Var(_) => return Err(instance_error(ParseErrorKind::GoalNotConjunctive)),
            };
            let id = self
                .object_id(name)
                .ok_or_else(|| instance_error(ParseErrorKind::UnknownObject(name.clone())))?;
            let ty = &self.objects[id as usize].ty;
            if !self.domain.is_subtype(ty, &slot.ty) {
                return Err(instance_error(ParseErrorKind::TypeConflict {
                    object: name.clone(),
                    a: ty.clone(),
                    b: slot.ty.clone(),
                }));
            }
            args.push(id);
        }
        Ok(Atom::new(pred_idx as PredId, args))
    }

    fn ground_all_actions(&self) -> Vec<GroundAction> {
        let mut out = Vec::new();
        for schema in &self.domain.actions {
            let domains: Vec<Vec<ObjId>> = schema
                .params
                .iter()
                .map(|p| self.objects_of_type(&p.ty))
                .collect();
            for args in cartesian(&domains) {
                let mut binding: HashMap<&str, ObjId> = HashMap::new();
                for (p, &o) in schema.params.iter().zip(&args) {
                    binding.insert(p.name.as_str(), o);
                }
                let precondition = self.ground_formula(&schema.precondition, &mut binding);
                if precondition == GroundFormula::False {
                    continue;
                }
                let effect = self.ground_effect(&schema.effect, &mut binding);
                let label = format!(
                    "{}({})",
                    schema.name,
                    args.iter()
                        .map(|&o| self.object_name(o))
                        .collect::<Vec<_>>()
                        .join(",")
                );
                out.push(GroundAction {
                    schema: schema.name.clone(),
                    args,
                    label,
                    precondition,
                    effect,
                });
            }
        }
        out.sort_by(|a, b| {
            a.schema.cmp(&b.schema).then_with(|| {
                let an = a.args.iter().map(|&o| self.object_name(o));
                let bn = b.args.iter().map(|&o| self.object_name(o));
                an.cmp(bn)
            })
        });
        out
    }

    fn term_id(&self, t: &Term, binding: &HashMap<&str, ObjId>) -> ObjId {
        match t {
            Term::Var(v) => binding[v.as_str()],
            Term::Const(c) => self.object_ids[c.as_str()],
        }
    }

    fn ground_atom_expr(&self, a: &AtomExpr, binding: &HashMap<&str, ObjId>) -> Atom {
        let pred = self
            .domain
            .predicate_index(&a.pred)
            .expect("validated at parse") as PredId;
        Atom::new(pred, a.args.iter().map(|t| self.term_id(t, binding)))
    }

    fn ground_formula<'a>(
        &self,
        f: &'a Formula,
        binding: &mut HashMap<&'a str, ObjId>,
    ) -> GroundFormula {
        match f {
            Formula::Atom(a) => GroundFormula::Atom(self.ground_atom_expr(a, binding)),
            Formula::Eq(a, b) => {
                if self.term_id(a, binding) == self.term_id(b, binding) {
                    GroundFormula::True
                } else {
                    GroundFormula::False
                }
            }
            Formula::Not(g) => GroundFormula::not(self.ground_formula(g, binding)),
            Formula::And(parts) => GroundFormula::and(
                parts
                    .iter()
                    .map(|p| self.ground_formula(p, binding))
                    .collect(),
            ),
            Formula::Or(parts) => GroundFormula::or(
                parts
                    .iter()
                    .map(|p| self.ground_formula(p, binding))
                    .collect(),
            ),
            Formula::Imply(a, b) => GroundFormula::or(vec![
                GroundFormula::not(self.ground_formula(a, binding)),
                self.ground_formula(b, binding),
            ]),
            Formula::Forall(vars, body) | Formula::Exists(vars, body) => {
                let parts =
                    self.expand_quantifier(vars, binding, |inst, b| inst.ground_formula(body, b));
                if matches!(f, Formula::Forall(..)) {
                    GroundFormula::and(parts)
                } else {
                    GroundFormula::or(parts)
                }
            }
        }
    }

    fn ground_effect<'a>(
        &self,
        e: &'a Effect,
        binding: &mut HashMap<&'a str, ObjId>,
    ) -> GroundEffect {
        match e {
            Effect::Add(a) => GroundEffect::Add(self.ground_atom_expr(a, binding)),
            Effect::Del(a) => GroundEffect::Del(self.ground_atom_expr(a, binding)),
            Effect::And(parts) => GroundEffect::And(
                parts
                    .iter()
                    .map(|p| self.ground_effect(p, binding))
                    .collect(),
            ),
            Effect::Probabilistic(branches) => GroundEffect::Probabilistic(
                branches
                    .iter()
                    .map(|(p, b)| (*p, self.ground_effect(b, binding)))
                    .collect(),
            ),
            Effect::When(c, b) => GroundEffect::When(
                self.ground_formula(c, binding),
                Box::new(self.ground_effect(b, binding)),
            ),
            Effect::Forall(vars, body) => {
                GroundEffect::And(
                    self.expand_quantifier(vars, binding, |inst, b| inst.ground_effect(body, b)),
                )
            }
        }
    }

    fn expand_quantifier<'a, T>(
        &self,
        vars: &'a [TypedName],
        binding: &mut HashMap<&'a str, ObjId>,
        mut body: impl FnMut(&Self, &mut HashMap<&'a str, ObjId>) -> T,
    ) -> Vec<T> {
        let domains: Vec<Vec<ObjId>> = vars.iter().map(|v| self.objects_of_type(&v.ty)).collect();
        let saved: Vec<Option<ObjId>> = vars
            .iter()
            .map(|v| binding.get(v.name.as_str()).copied())
            .collect();
        let mut out = Vec::new();
        for tuple in cartesian(&domains) {
            for (v, &o) in vars.iter().zip(&tuple) {
                binding.insert(v.name.as_str(), o);
            }
            out.push(body(self, binding));
        }
        for (v, old) in vars.iter().zip(saved) {
            match old {
                Some(o) => binding.insert(v.name.as_str(), o),
                None => binding.remove(v.name.as_str()),
            };
        }
        out
    }

    /// Ground actions whose precondition holds in `s`, in lexicographic
    /// (schema, argument names) order.
    pub fn applicable_actions(&self, s: &GroundState) -> Vec<&GroundAction> {
        self.actions.iter().filter(|a| a.is_applicable(s)).collect()
    }

    pub fn applicable_action_ids(&self, s: &GroundState) -> Vec<usize> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_applicable(s))
            .map(|(i, _)| i)
            .collect()
    }

    /// Full successor distribution of `a` in `s`. Successors that coincide as
    /// atom sets are merged; order follows first appearance.
    pub fn outcome_distribution(
        &self,
        s: &GroundState,
        a: &GroundAction,
    ) -> Result<Vec<(f64, GroundState)>, ModelError> {
        if !a.is_applicable(s) {
            return Err(ModelError::NotApplicable(a.label.clone()));
        }
        Ok(successors_unchecked(s, a))
    }

    pub fn is_goal(&self, s: &GroundState) -> bool {
        s.is_superset_of(self.goal.atoms())
    }

    /// Goal takes precedence over dead end.
    pub fn classify_state(&self, s: &GroundState) -> StateClass {
        if self.is_goal(s) {
            StateClass::Goal
        } else if self.actions.iter().any(|a| a.is_applicable(s)) {
            StateClass::Live
        } else {
            StateClass::DeadEnd
        }
    }

    pub fn atom_to_string(&self, a: &Atom) -> String {
        format!(
            "{}({})",
            self.pred_name(a.pred),
            a.args
                .iter()
                .map(|&o| self.object_name(o))
                .collect::<Vec<_>>()
                .join(",")
        )
    }

    /// One atom per line, `pred(arg1,...,argN)`, sorted lexicographically.
    pub fn dump_state(&self, s: &GroundState) -> String {
        let mut lines: Vec<String> = s.atoms().iter().map(|a| self.atom_to_string(a)).collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Reads the [`dump_state`](Self::dump_state) format. Blank lines and `#`
    /// comments are skipped.
    pub fn parse_state(&self, text: &str) -> Result<GroundState, ModelError> {
        let mut atoms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| ModelError::StateDump {
                line: i + 1,
                message,
            };
            let (name, rest) = line
                .split_once('(')
                .ok_or_else(|| bad(format!("expected `pred(args)`, found `{line}`")))?;
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| bad("missing `)`".to_string()))?;
            let pred = self
                .pred_id(name.trim())
                .ok_or_else(|| bad(format!("unknown predicate `{}`", name.trim())))?;
            let args: Vec<ObjId> = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|o| {
                        self.object_id(o.trim())
                            .ok_or_else(|| bad(format!("unknown object `{}`", o.trim())))
                    })
                    .collect::<Result<_, _>>()?
            };
            let arity = self.domain.predicates[pred as usize].arity();
            if args.len() != arity {
                return Err(bad(format!(
                    "`{}` takes {arity} arguments, found {}",
                    name.trim(),
                    args.len()
                )));
            }
            atoms.push(Atom::new(pred, args));
        }
        Ok(GroundState::new(atoms))
    }
}

pub(crate) fn successors_unchecked(s: &GroundState, a: &GroundAction) -> Vec<(f64, GroundState)> {
    let mut out: Vec<(f64, GroundState)> = Vec::new();
    for o in a.effect.outcomes(s) {
        let next = s.apply(&o.add, &o.del);
        match out.iter_mut().find(|(_, t)| *t == next) {
            Some((p, _)) => *p += o.probability,
            None => out.push((o.probability, next)),
        }
    }
    out
}

/// Every tuple drawn from `domains`, first position varying slowest.
fn cartesian(domains: &[Vec<ObjId>]) -> Vec<Vec<ObjId>> {
    let mut acc: Vec<Vec<ObjId>> = vec![Vec::new()];
    for d in domains {
        let mut next = Vec::with_capacity(acc.len() * d.len());
        for prefix in &acc {
            for &o in d {
                let mut t = prefix.clone();
                t.push(o);
                next.push(t);
            }
        }
        acc = next;
    }
    acc
}

/// Types for objects the problem file left untyped, taken from the predicate
/// slots they fill in init and goal atoms.
fn infer_object_types(
    domain: &DomainDef,
    def: &ProblemDef,
) -> Result<HashMap<String, String>, ParseError> {
    let mut constraints: HashMap<&str, Vec<&str>> = def
        .objects
        .iter()
        .filter(|(_, t)| t.is_none())
        .map(|(n, _)| (n.as_str(), Vec::new()))
        .collect();
    for atom in def.init.iter().chain(&def.goal) {
        let Some(pred) = domain.predicate(&atom.pred) else {
            continue;
        };
        for (t, slot) in atom.args.iter().zip(&pred.params) {
            if let Term::Const(name) = t {
                if let Some(c) = constraints.get_mut(name.as_str()) {
                    c.push(slot.ty.as_str());
                }
            }
        }
    }
    let mut out = HashMap::new();
    for (name, tys) in constraints {
        let chosen = match tys
            .iter()
            .find(|&&t| tys.iter().all(|&u| domain.is_subtype(t, u)))
        {
            Some(t) => t.to_string(),
            None if tys.is_empty() => ROOT_TYPE.to_string(),
            None => {
                return Err(instance_error(ParseErrorKind::TypeConflict {
                    object: name.to_string(),
                    a: tys[0].to_string(),
                    b: tys
                        .iter()
                        .find(|&&u| !domain.is_subtype(tys[0], u))
                        .unwrap_or(&tys[0])
                        .to_string(),
                }))
            }
        };
        out.insert(name.to_string(), chosen);
    }
    Ok(out)
}
