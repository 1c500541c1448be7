use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::sexpr::{read_all, Pos, Sexpr};
use super::{ParseError, ParseErrorKind};

/// Requirement flags this reader understands. Anything else is rejected.
pub const SUPPORTED_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":disjunctive-preconditions",
    ":equality",
    ":existential-preconditions",
    ":universal-preconditions",
    ":quantified-preconditions",
    ":conditional-effects",
    ":probabilistic-effects",
    ":adl",
];

/// Slack allowed when a probabilistic branch list sums past 1.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

type Result<T> = std::result::Result<T, ParseError>;

fn err<T>(kind: ParseErrorKind, pos: Pos) -> Result<T> {
    Err(ParseError::new(kind, pos))
}

fn expect_syntax<T>(expected: &str, node: &Sexpr) -> Result<T> {
    let found = match node {
        Sexpr::Symbol(s, _) => format!("`{s}`"),
        Sexpr::List(items, _) => match items.first().and_then(Sexpr::as_symbol) {
            Some(h) => format!("list `({h} ...)`"),
            None => "list".to_string(),
        },
    };
    err(
        ParseErrorKind::Syntax {
            expected: expected.to_string(),
            found,
        },
        node.pos(),
    )
}

fn expect_list<'a>(node: &'a Sexpr, what: &str) -> Result<&'a [Sexpr]> {
    match node.as_list() {
        Some(items) => Ok(items),
        None => expect_syntax(what, node),
    }
}

fn expect_symbol<'a>(node: &'a Sexpr, what: &str) -> Result<&'a str> {
    match node.as_symbol() {
        Some(s) => Ok(s),
        None => expect_syntax(what, node),
    }
}

fn missing<T>(what: &str, pos: Pos) -> Result<T> {
    err(
        ParseErrorKind::Syntax {
            expected: what.to_string(),
            found: "`)`".to_string(),
        },
        pos,
    )
}

/// Expects `(define (<kind> <name>) sections...)` and returns (name, sections).
fn parse_define<'a>(exprs: &'a [Sexpr], kind: &str) -> Result<(String, &'a [Sexpr])> {
    let Some(first) = exprs.first() else {
        return err(
            ParseErrorKind::Syntax {
                expected: "`(define ...)`".into(),
                found: "end of input".into(),
            },
            Pos { line: 1, col: 1 },
        );
    };
    if let Some(extra) = exprs.get(1) {
        return expect_syntax("end of input", extra);
    }
    let items = expect_list(first, "`(define ...)`")?;
    if first.head().as_deref() != Some("define") {
        return expect_syntax("`(define ...)`", first);
    }
    let Some(header) = items.get(1) else {
        return missing(&format!("`({kind} <name>)`"), first.pos());
    };
    let h = expect_list(header, &format!("`({kind} <name>)`"))?;
    if header.head().as_deref() != Some(kind) || h.len() != 2 {
        return expect_syntax(&format!("`({kind} <name>)`"), header);
    }
    let name = expect_symbol(&h[1], "name")?.to_string();
    Ok((name, &items[2..]))
}

/// Parses `a b - t c - u d` style lists. Accepts `-t` glued to its type.
/// Returns each name with its declared type (`None` when left untyped).
fn parse_typed_list(items: &[Sexpr]) -> Result<Vec<(String, Option<String>, Pos)>> {
    let mut out: Vec<(String, Option<String>, Pos)> = Vec::new();
    let mut pending_start = 0;
    let mut i = 0;
    while i < items.len() {
        let node = &items[i];
        if node.as_list().is_some() {
            if node.head().as_deref() == Some("either") {
                return err(ParseErrorKind::Unsupported("either".into()), node.pos());
            }
            return expect_syntax("name", node);
        }
        let sym = node.as_symbol().unwrap();
        let ty_node = if sym == "-" {
            i += 1;
            match items.get(i) {
                Some(t) => {
                    if t.head().as_deref() == Some("either") {
                        return err(ParseErrorKind::Unsupported("either".into()), t.pos());
                    }
                    Some((expect_symbol(t, "type name")?.to_string(), t.pos()))
                }
                None => return missing("type name", node.pos()),
            }
        } else if let Some(rest) = sym.strip_prefix('-').filter(|r| !r.is_empty()) {
            Some((rest.to_string(), node.pos()))
        } else {
            None
        };
        match ty_node {
            Some((ty, pos)) => {
                if pending_start == out.len() {
                    return err(
                        ParseErrorKind::Syntax {
                            expected: "name before type".into(),
                            found: format!("`- {ty}`"),
                        },
                        pos,
                    );
                }
                for entry in &mut out[pending_start..] {
                    entry.1 = Some(ty.clone());
                }
                pending_start = out.len();
            }
            None => out.push((sym.to_string(), None, node.pos())),
        }
        i += 1;
    }
    Ok(out)
}

fn parse_variables(items: &[Sexpr], domain: &DomainDef) -> Result<Vec<TypedName>> {
    let mut vars = Vec::new();
    for (name, ty, pos) in parse_typed_list(items)? {
        let Some(stripped) = name.strip_prefix('?') else {
            return err(
                ParseErrorKind::Syntax {
                    expected: "variable".into(),
                    found: format!("`{name}`"),
                },
                pos,
            );
        };
        let ty = ty.unwrap_or_else(|| ROOT_TYPE.to_string());
        if !domain.has_type(&ty) {
            return err(ParseErrorKind::UndeclaredType(ty), pos);
        }
        vars.push(TypedName::new(stripped, ty));
    }
    Ok(vars)
}

struct Scope<'a> {
    domain: &'a DomainDef,
    vars: Vec<HashSet<String>>,
}

impl<'a> Scope<'a> {
    fn bound(&self, v: &str) -> bool {
        self.vars.iter().any(|s| s.contains(v))
    }

    fn push(&mut self, vars: &[TypedName]) {
        self.vars
            .push(vars.iter().map(|v| v.name.clone()).collect());
    }

    fn pop(&mut self) {
        self.vars.pop();
    }

    fn term(&self, node: &Sexpr) -> Result<Term> {
        let sym = expect_symbol(node, "term")?;
        if let Some(v) = sym.strip_prefix('?') {
            if !self.bound(v) {
                return err(ParseErrorKind::UnboundVariable(v.into()), node.pos());
            }
            Ok(Term::Var(v.to_string()))
        } else {
            if !self.domain.constants.iter().any(|c| c.name == sym) {
                return err(ParseErrorKind::UnknownObject(sym.into()), node.pos());
            }
            Ok(Term::Const(sym.to_string()))
        }
    }

    fn atom(&self, node: &Sexpr) -> Result<AtomExpr> {
        let items = expect_list(node, "atom")?;
        let Some(head) = items.first() else {
            return expect_syntax("atom", node);
        };
        let pred = expect_symbol(head, "predicate name")?;
        let Some(def) = self.domain.predicate(pred) else {
            return err(ParseErrorKind::UndeclaredPredicate(pred.into()), head.pos());
        };
        if def.arity() != items.len() - 1 {
            return err(
                ParseErrorKind::Arity {
                    pred: pred.into(),
                    expected: def.arity(),
                    found: items.len() - 1,
                },
                node.pos(),
            );
        }
        let args = items[1..]
            .iter()
            .map(|t| self.term(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(AtomExpr {
            pred: pred.to_string(),
            args,
        })
    }

    fn formula(&mut self, node: &Sexpr) -> Result<Formula> {
        let items = expect_list(node, "formula")?;
        let head = node.head().unwrap_or_default();
        match head.as_str() {
            "and" | "or" => {
                let parts = items[1..]
                    .iter()
                    .map(|n| self.formula(n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(if head == "and" {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                })
            }
            "not" => {
                if items.len() != 2 {
                    return expect_syntax("`(not <formula>)`", node);
                }
                Ok(Formula::Not(Box::new(self.formula(&items[1])?)))
            }
            "imply" => {
                if items.len() != 3 {
                    return expect_syntax("`(imply <formula> <formula>)`", node);
                }
                let a = self.formula(&items[1])?;
                let b = self.formula(&items[2])?;
                Ok(Formula::Imply(Box::new(a), Box::new(b)))
            }
            "forall" | "exists" => {
                if items.len() != 3 {
                    return expect_syntax(&format!("`({head} (<vars>) <formula>)`"), node);
                }
                let vars = parse_variables(expect_list(&items[1], "variable list")?, self.domain)?;
                self.push(&vars);
                let body = self.formula(&items[2]);
                self.pop();
                let body = Box::new(body?);
                Ok(if head == "forall" {
                    Formula::Forall(vars, body)
                } else {
                    Formula::Exists(vars, body)
                })
            }
            "=" => {
                if items.len() != 3 {
                    return expect_syntax("`(= <term> <term>)`", node);
                }
                Ok(Formula::Eq(self.term(&items[1])?, self.term(&items[2])?))
            }
            _ => Ok(Formula::Atom(self.atom(node)?)),
        }
    }

    fn effect(&mut self, node: &Sexpr) -> Result<Effect> {
        let items = expect_list(node, "effect")?;
        let head = node.head().unwrap_or_default();
        match head.as_str() {
            "and" => Ok(Effect::And(
                items[1..]
                    .iter()
                    .map(|n| self.effect(n))
                    .collect::<Result<Vec<_>>>()?,
            )),
            "not" => {
                if items.len() != 2 {
                    return expect_syntax("`(not <atom>)`", node);
                }
                Ok(Effect::Del(self.atom(&items[1])?))
            }
            "probabilistic" => {
                let rest = &items[1..];
                if rest.len() % 2 != 0 {
                    return expect_syntax("probability/effect pairs", node);
                }
                let mut branches = Vec::new();
                let mut total = 0.0;
                for pair in rest.chunks(2) {
                    let p = parse_probability(&pair[0])?;
                    if !(p > 0.0 && p <= 1.0) {
                        return err(
                            ParseErrorKind::Probability(format!("probability {p} outside (0, 1]")),
                            pair[0].pos(),
                        );
                    }
                    total += p;
                    branches.push((p, self.effect(&pair[1])?));
                }
                if total > 1.0 + PROBABILITY_TOLERANCE {
                    return err(
                        ParseErrorKind::Probability("probabilities exceed 1".into()),
                        node.pos(),
                    );
                }
                Ok(Effect::Probabilistic(branches))
            }
            "when" => {
                if items.len() != 3 {
                    return expect_syntax("`(when <formula> <effect>)`", node);
                }
                let cond = self.formula(&items[1])?;
                Ok(Effect::When(cond, Box::new(self.effect(&items[2])?)))
            }
            "forall" => {
                if items.len() != 3 {
                    return expect_syntax("`(forall (<vars>) <effect>)`", node);
                }
                let vars = parse_variables(expect_list(&items[1], "variable list")?, self.domain)?;
                self.push(&vars);
                let body = self.effect(&items[2]);
                self.pop();
                Ok(Effect::Forall(vars, Box::new(body?)))
            }
            "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => {
                err(ParseErrorKind::Unsupported(head), node.pos())
            }
            _ => Ok(Effect::Add(self.atom(node)?)),
        }
    }
}

fn parse_probability(node: &Sexpr) -> Result<f64> {
    let s = expect_symbol(node, "probability")?;
    let parsed = match s.split_once('/') {
        Some((n, d)) => match (n.parse::<f64>(), d.parse::<f64>()) {
            (Ok(n), Ok(d)) if d != 0.0 => Some(n / d),
            _ => None,
        },
        None => s.parse::<f64>().ok(),
    };
    match parsed {
        Some(p) if p.is_finite() => Ok(p),
        _ => expect_syntax("probability", node),
    }
}

fn check_unique<'a>(
    names: impl IntoIterator<Item = (&'a str, Pos)>,
    what: &'static str,
) -> Result<()> {
    let mut seen = HashSet::new();
    for (name, pos) in names {
        if !seen.insert(name) {
            return err(
                ParseErrorKind::Duplicate {
                    what,
                    name: name.to_string(),
                },
                pos,
            );
        }
    }
    Ok(())
}

/// Parses a PPDDL domain in the supported subset.
pub fn parse_domain(text: &str) -> Result<DomainDef> {
    let exprs = read_all(text)?;
    let (name, sections) = parse_define(&exprs, "domain")?;
    let mut domain = DomainDef {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut action_nodes = Vec::new();
    let mut constant_nodes = Vec::new();
    let mut predicate_nodes = Vec::new();

    for section in sections {
        let items = expect_list(section, "domain section")?;
        let head = section.head().unwrap_or_default();
        match head.as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    let req = expect_symbol(r, "requirement")?.to_ascii_lowercase();
                    if !SUPPORTED_REQUIREMENTS.contains(&req.as_str()) {
                        return err(ParseErrorKind::Unsupported(req), r.pos());
                    }
                    domain.requirements.push(req);
                }
            }
            ":types" => {
                for (name, parent, pos) in parse_typed_list(&items[1..])? {
                    if name == ROOT_TYPE {
                        continue;
                    }
                    domain.types.push(TypeDecl {
                        name,
                        parent: parent.unwrap_or_else(|| ROOT_TYPE.to_string()),
                    });
                    let _ = pos;
                }
            }
            ":constants" => constant_nodes.push(section),
            ":predicates" => predicate_nodes.push(section),
            ":action" => action_nodes.push(section),
            _ => return err(ParseErrorKind::Unsupported(head), section.pos()),
        }
    }

    check_unique(
        domain
            .types
            .iter()
            .map(|t| (t.name.as_str(), Pos::default())),
        "type",
    )?;
    for t in &domain.types {
        if !domain.has_type(&t.parent) {
            return err(
                ParseErrorKind::UndeclaredType(t.parent.clone()),
                Pos::default(),
            );
        }
    }

    let mut positions = Vec::new();
    for section in constant_nodes {
        for (name, ty, pos) in parse_typed_list(&section.as_list().unwrap()[1..])? {
            let ty = ty.unwrap_or_else(|| ROOT_TYPE.to_string());
            if !domain.has_type(&ty) {
                return err(ParseErrorKind::UndeclaredType(ty), pos);
            }
            domain.constants.push(TypedName::new(name, ty));
            positions.push(pos);
        }
    }
    check_unique(
        domain
            .constants
            .iter()
            .zip(&positions)
            .map(|(c, p)| (c.name.as_str(), *p)),
        "constant",
    )?;

    let mut positions = Vec::new();
    for section in predicate_nodes {
        for p in &section.as_list().unwrap()[1..] {
            let items = expect_list(p, "predicate declaration")?;
            let Some(head) = items.first() else {
                return expect_syntax("predicate declaration", p);
            };
            let name = expect_symbol(head, "predicate name")?.to_string();
            let params = parse_variables(&items[1..], &domain)?;
            domain.predicates.push(PredicateDef { name, params });
            positions.push(p.pos());
        }
    }
    check_unique(
        domain
            .predicates
            .iter()
            .zip(&positions)
            .map(|(p, pos)| (p.name.as_str(), *pos)),
        "predicate",
    )?;

    let mut positions = Vec::new();
    for node in action_nodes {
        domain.actions.push(parse_action(node, &domain)?);
        positions.push(node.pos());
    }
    check_unique(
        domain
            .actions
            .iter()
            .zip(&positions)
            .map(|(a, p)| (a.name.as_str(), *p)),
        "action",
    )?;
    Ok(domain)
}

fn parse_action(node: &Sexpr, domain: &DomainDef) -> Result<ActionSchema> {
    let items = node.as_list().unwrap();
    let Some(name_node) = items.get(1) else {
        return missing("action name", node.pos());
    };
    let name = expect_symbol(name_node, "action name")?.to_string();
    let mut params = Vec::new();
    let mut precondition = None;
    let mut effect = None;
    let mut scope = Scope {
        domain,
        vars: Vec::new(),
    };
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let key_name = expect_symbol(key, "action keyword")?.to_ascii_lowercase();
        let Some(value) = rest.next() else {
            return missing(&format!("value for `{key_name}`"), key.pos());
        };
        match key_name.as_str() {
            ":parameters" => {
                params = parse_variables(expect_list(value, "parameter list")?, domain)?;
                check_unique(
                    params.iter().map(|p| (p.name.as_str(), value.pos())),
                    "parameter",
                )?;
            }
            ":precondition" => {
                scope.vars = vec![params.iter().map(|p| p.name.clone()).collect()];
                // `()` is an empty precondition
                precondition = Some(if value.as_list().is_some_and(|l| l.is_empty()) {
                    Formula::And(Vec::new())
                } else {
                    scope.formula(value)?
                });
            }
            ":effect" => {
                scope.vars = vec![params.iter().map(|p| p.name.clone()).collect()];
                effect = Some(if value.as_list().is_some_and(|l| l.is_empty()) {
                    Effect::And(Vec::new())
                } else {
                    scope.effect(value)?
                });
            }
            other => return err(ParseErrorKind::Unsupported(other.to_string()), key.pos()),
        }
    }
    Ok(ActionSchema {
        name,
        params,
        precondition: precondition.unwrap_or(Formula::And(Vec::new())),
        effect: effect.unwrap_or(Effect::And(Vec::new())),
    })
}

fn ground_atom(
    node: &Sexpr,
    domain: &DomainDef,
    objects: &HashMap<String, ()>,
) -> Result<AtomExpr> {
    let items = expect_list(node, "ground atom")?;
    let Some(head) = items.first() else {
        return expect_syntax("ground atom", node);
    };
    let pred = expect_symbol(head, "predicate name")?;
    let Some(def) = domain.predicate(pred) else {
        return err(ParseErrorKind::UndeclaredPredicate(pred.into()), head.pos());
    };
    if def.arity() != items.len() - 1 {
        return err(
            ParseErrorKind::Arity {
                pred: pred.into(),
                expected: def.arity(),
                found: items.len() - 1,
            },
            node.pos(),
        );
    }
    let mut args = Vec::new();
    for a in &items[1..] {
        let name = expect_symbol(a, "object name")?;
        if name.starts_with('?') {
            return err(ParseErrorKind::GoalNotConjunctive, a.pos());
        }
        if !objects.contains_key(name) && !domain.constants.iter().any(|c| c.name == name) {
            return err(ParseErrorKind::UnknownObject(name.into()), a.pos());
        }
        args.push(Term::Const(name.to_string()));
    }
    Ok(AtomExpr {
        pred: pred.to_string(),
        args,
    })
}

/// Parses a problem file against an already-parsed domain, without grounding.
pub fn parse_problem_def(text: &str, domain: &DomainDef) -> Result<ProblemDef> {
    let exprs = read_all(text)?;
    let (name, sections) = parse_define(&exprs, "problem")?;
    let mut def = ProblemDef {
        name,
        domain_name: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
    };
    let mut init_nodes = Vec::new();
    let mut goal_node = None;
    let mut object_positions = Vec::new();
    for section in sections {
        let items = expect_list(section, "problem section")?;
        let head = section.head().unwrap_or_default();
        match head.as_str() {
            ":domain" => {
                let Some(n) = items.get(1) else {
                    return missing("domain name", section.pos());
                };
                def.domain_name = expect_symbol(n, "domain name")?.to_string();
                if !def.domain_name.eq_ignore_ascii_case(&domain.name) {
                    return err(
                        ParseErrorKind::DomainMismatch {
                            expected: domain.name.clone(),
                            found: def.domain_name.clone(),
                        },
                        n.pos(),
                    );
                }
            }
            ":objects" => {
                for (name, ty, pos) in parse_typed_list(&items[1..])? {
                    if let Some(t) = &ty {
                        if !domain.has_type(t) {
                            return err(ParseErrorKind::UndeclaredType(t.clone()), pos);
                        }
                    }
                    def.objects.push((name, ty));
                    object_positions.push(pos);
                }
            }
            ":init" => init_nodes.extend(&items[1..]),
            ":goal" => {
                let Some(g) = items.get(1) else {
                    return missing("goal formula", section.pos());
                };
                goal_node = Some(g);
            }
            _ => return err(ParseErrorKind::Unsupported(head), section.pos()),
        }
    }
    check_unique(
        def.objects
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(domain.constants.iter().map(|c| c.name.as_str()))
            .zip(
                object_positions
                    .iter()
                    .copied()
                    .chain(std::iter::repeat(Pos::default())),
            ),
        "object",
    )?;
    let objects: HashMap<String, ()> = def.objects.iter().map(|(n, _)| (n.clone(), ())).collect();
    for node in init_nodes {
        match node.head().as_deref() {
            Some("not") | Some("and") | Some("probabilistic") | Some("=") => {
                return err(
                    ParseErrorKind::Unsupported(node.head().unwrap()),
                    node.pos(),
                )
            }
            _ => def.init.push(ground_atom(node, domain, &objects)?),
        }
    }
    if let Some(goal) = goal_node {
        match goal.head().as_deref() {
            Some("and") => {
                for g in &goal.as_list().unwrap()[1..] {
                    if is_connective(g) {
                        return err(ParseErrorKind::GoalNotConjunctive, g.pos());
                    }
                    def.goal.push(ground_atom(g, domain, &objects)?);
                }
            }
            _ if is_connective(goal) => return err(ParseErrorKind::GoalNotConjunctive, goal.pos()),
            _ => def.goal.push(ground_atom(goal, domain, &objects)?),
        }
    }
    Ok(def)
}

fn is_connective(node: &Sexpr) -> bool {
    matches!(
        node.head().as_deref(),
        Some("and" | "or" | "not" | "imply" | "forall" | "exists" | "when" | "=")
    )
}
