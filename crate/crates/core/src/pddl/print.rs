use std::fmt::Write;

use super::ast::*;

fn typed(list: &[TypedName], var: bool) -> String {
    list.iter()
        .map(|t| {
            let q = if var { "?" } else { "" };
            format!("{q}{} - {}", t.name, t.ty)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn atom(a: &AtomExpr) -> String {
    let mut s = format!("({}", a.pred);
    for t in &a.args {
        write!(s, " {t}").unwrap();
    }
    s.push(')');
    s
}

fn formula(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => atom(a),
        Formula::Eq(a, b) => format!("(= {a} {b})"),
        Formula::Not(g) => format!("(not {})", formula(g)),
        Formula::And(parts) | Formula::Or(parts) => {
            let head = if matches!(f, Formula::And(_)) {
                "and"
            } else {
                "or"
            };
            let mut s = format!("({head}");
            for p in parts {
                write!(s, " {}", formula(p)).unwrap();
            }
            s.push(')');
            s
        }
        Formula::Imply(a, b) => format!("(imply {} {})", formula(a), formula(b)),
        Formula::Forall(vars, body) => {
            format!("(forall ({}) {})", typed(vars, true), formula(body))
        }
        Formula::Exists(vars, body) => {
            format!("(exists ({}) {})", typed(vars, true), formula(body))
        }
    }
}

fn effect(e: &Effect) -> String {
    match e {
        Effect::Add(a) => atom(a),
        Effect::Del(a) => format!("(not {})", atom(a)),
        Effect::And(parts) => {
            let mut s = "(and".to_string();
            for p in parts {
                write!(s, " {}", effect(p)).unwrap();
            }
            s.push(')');
            s
        }
        Effect::Probabilistic(branches) => {
            let mut s = "(probabilistic".to_string();
            for (p, b) in branches {
                write!(s, " {p} {}", effect(b)).unwrap();
            }
            s.push(')');
            s
        }
        Effect::When(c, b) => format!("(when {} {})", formula(c), effect(b)),
        Effect::Forall(vars, b) => format!("(forall ({}) {})", typed(vars, true), effect(b)),
    }
}

/// Renders a domain as PPDDL text that parses back to an equal [`DomainDef`].
pub fn print_domain(d: &DomainDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        writeln!(s, "  (:requirements {})", d.requirements.join(" ")).unwrap();
    }
    if !d.types.is_empty() {
        let types = d
            .types
            .iter()
            .map(|t| format!("{} - {}", t.name, t.parent))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(s, "  (:types {types})").unwrap();
    }
    if !d.constants.is_empty() {
        writeln!(s, "  (:constants {})", typed(&d.constants, false)).unwrap();
    }
    s.push_str("  (:predicates");
    for p in &d.predicates {
        if p.params.is_empty() {
            write!(s, " ({})", p.name).unwrap();
        } else {
            write!(s, " ({} {})", p.name, typed(&p.params, true)).unwrap();
        }
    }
    s.push_str(")\n");
    for a in &d.actions {
        writeln!(s, "  (:action {}", a.name).unwrap();
        writeln!(s, "    :parameters ({})", typed(&a.params, true)).unwrap();
        writeln!(s, "    :precondition {}", formula(&a.precondition)).unwrap();
        writeln!(s, "    :effect {})", effect(&a.effect)).unwrap();
    }
    s.push(')');
    s.push('\n');
    s
}

pub fn print_problem(p: &ProblemDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (problem {})", p.name).unwrap();
    writeln!(s, "  (:domain {})", p.domain_name).unwrap();
    s.push_str("  (:objects");
    for (name, ty) in &p.objects {
        if let Some(t) = ty {
            write!(s, " {name} - {t}").unwrap();
        }
    }
    // untyped names go last or the next `- type` would claim them
    for (name, _) in p.objects.iter().filter(|(_, t)| t.is_none()) {
        write!(s, " {name}").unwrap();
    }
    s.push_str(")\n  (:init");
    for a in &p.init {
        write!(s, " {}", atom(a)).unwrap();
    }
    s.push_str(")\n  (:goal (and");
    for a in &p.goal {
        write!(s, " {}", atom(a)).unwrap();
    }
    s.push_str(")))\n");
    s
}
