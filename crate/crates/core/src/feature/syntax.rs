//! Concrete syntax: `exists y . goal-filed(x) & !filed(x) & goes-in(x,y)`.
//!
//! Enriched names are `goal-p`, `correct-p`, `p+`, `min-p`, `max-p`, and
//! their compositions such as `goal-on+` or `min-correct-on`. A bare term is
//! a variable when an enclosing `exists` binds it or when it is not a known
//! constant; `?x` is always a variable.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::*;
use super::FeatureError;
use super::FeatureErrorKind;

/// Names the parser can resolve: predicate arities and constant names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Signature {
    pub predicates: HashMap<String, usize>,
    pub constants: BTreeSet<String>,
}

impl Signature {
    pub fn empty() -> Self {
        Signature::default()
    }

    pub fn of_domain(d: &crate::pddl::DomainDef) -> Self {
        Signature {
            predicates: d
                .predicates
                .iter()
                .map(|p| (p.name.clone(), p.arity()))
                .collect(),
            constants: d.constants.iter().map(|c| c.name.clone()).collect(),
        }
    }

    /// Domain predicates plus every object of the instance as a constant.
    pub fn of_instance(inst: &crate::model::ProblemInstance) -> Self {
        let mut sig = Signature::of_domain(inst.domain());
        sig.constants
            .extend(inst.objects().iter().map(|o| o.name.clone()));
        sig
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Open,
    Close,
    Comma,
    And,
    Not,
    Dot,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Open => f.write_str("`(`"),
            Tok::Close => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::And => f.write_str("`&`"),
            Tok::Not => f.write_str("`!`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '-' | '_' | '+' | '?' | '\'')
}

/// Tokens with their 1-based column.
fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FeatureError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Tok::Open,
            ')' => Tok::Close,
            ',' => Tok::Comma,
            '&' | '∧' => Tok::And,
            '!' | '¬' | '~' => Tok::Not,
            '.' => Tok::Dot,
            c if is_ident_char(c) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
                continue;
            }
            other => {
                return Err(FeatureError::new(
                    FeatureErrorKind::Syntax {
                        expected: "feature expression".into(),
                        found: format!("`{other}`"),
                    },
                    col,
                ))
            }
        };
        out.push((tok, col));
        i += 1;
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

/// Splits an enriched predicate name into its parts.
pub fn parse_enriched_name(name: &str) -> EnrichedPredicate {
    let mut rest = name;
    let mut modifier = Modifier::None;
    if let Some(r) = rest.strip_prefix("min-") {
        modifier = Modifier::Min;
        rest = r;
    } else if let Some(r) = rest.strip_prefix("max-") {
        modifier = Modifier::Max;
        rest = r;
    }
    let mut enrichment = GoalEnrichment::None;
    if let Some(r) = rest.strip_prefix("goal-") {
        enrichment = GoalEnrichment::Goal;
        rest = r;
    } else if let Some(r) = rest.strip_prefix("correct-") {
        enrichment = GoalEnrichment::Correct;
        rest = r;
    }
    if modifier == Modifier::None {
        if let Some(r) = rest.strip_suffix('+') {
            modifier = Modifier::Closure;
            rest = r;
        }
    }
    EnrichedPredicate {
        base: rest.to_string(),
        enrichment,
        modifier,
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    sig: &'a Signature,
    bound: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn col(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, FeatureError> {
        Err(FeatureError::new(
            FeatureErrorKind::Syntax {
                expected: expected.into(),
                found: self.peek().to_string(),
            },
            self.col(),
        ))
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), FeatureError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize), FeatureError> {
        let col = self.col();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, col))
            }
            _ => self.fail(expected),
        }
    }

    fn feature(&mut self) -> Result<FeatureExpr, FeatureError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "exists") {
            self.bump();
            let (var, col) = self.ident("variable")?;
            let var = var.strip_prefix('?').unwrap_or(&var).to_string();
            if self.bound.contains(&var) {
                return Err(FeatureError::new(
                    FeatureErrorKind::Syntax {
                        expected: "fresh variable".into(),
                        found: format!("`{var}` bound twice"),
                    },
                    col,
                ));
            }
            self.expect(Tok::Dot, "`.`")?;
            self.bound.push(var.clone());
            let body = self.feature()?;
            return Ok(FeatureExpr::exists(var, body));
        }
        if matches!(self.peek(), Tok::Ident(s) if s == "true") {
            self.bump();
            return Ok(FeatureExpr::Conj(Vec::new()));
        }
        let mut lits = vec![self.literal()?];
        while *self.peek() == Tok::And {
            self.bump();
            lits.push(self.literal()?);
        }
        Ok(FeatureExpr::Conj(lits))
    }

    fn literal(&mut self) -> Result<Literal, FeatureError> {
        let negated = if *self.peek() == Tok::Not {
            self.bump();
            true
        } else {
            false
        };
        let (name, col) = self.ident("predicate")?;
        let pred = parse_enriched_name(&name);
        if pred.base.is_empty() {
            return Err(FeatureError::new(
                FeatureErrorKind::Syntax {
                    expected: "predicate".into(),
                    found: format!("`{name}`"),
                },
                col,
            ));
        }
        self.expect(Tok::Open, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::Close {
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
        }
        self.expect(Tok::Close, "`)` or `,`")?;
        if let Some(&base_arity) = self.sig.predicates.get(&pred.base) {
            if !pred.modifier_allowed(base_arity) {
                return Err(FeatureError::new(
                    FeatureErrorKind::ModifierArity {
                        pred: pred.base.clone(),
                        arity: base_arity,
                    },
                    col,
                ));
            }
            let expected = pred.effective_arity(base_arity);
            if expected != args.len() {
                return Err(FeatureError::new(
                    FeatureErrorKind::Arity {
                        pred: pred.to_string(),
                        expected,
                        found: args.len(),
                    },
                    col,
                ));
            }
        } else {
            let expected = match pred.modifier {
                Modifier::Closure => Some(2),
                Modifier::Min | Modifier::Max => Some(1),
                Modifier::None => None,
            };
            if let Some(expected) = expected.filter(|&e| e != args.len()) {
                return Err(FeatureError::new(
                    FeatureErrorKind::Arity {
                        pred: pred.to_string(),
                        expected,
                        found: args.len(),
                    },
                    col,
                ));
            }
        }
        Ok(Literal {
            negated,
            atom: FeatureAtom { pred, args },
        })
    }

    fn term(&mut self) -> Result<Term, FeatureError> {
        let (name, _) = self.ident("term")?;
        if let Some(v) = name.strip_prefix('?') {
            return Ok(Term::Var(v.to_string()));
        }
        if self.bound.contains(&name) || !self.sig.constants.contains(&name) {
            Ok(Term::Var(name))
        } else {
            Ok(Term::Const(name))
        }
    }
}

/// Parses with no known constants or predicates.
pub fn parse_feature(text: &str) -> Result<FeatureExpr, FeatureError> {
    parse_feature_with(text, &Signature::empty())
}

/// Parses against a signature, which enables arity checks and constant
/// resolution. Rejects features with more than one free variable.
pub fn parse_feature_with(text: &str, sig: &Signature) -> Result<FeatureExpr, FeatureError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        sig,
        bound: Vec::new(),
    };
    let f = p.feature()?;
    if *p.peek() != Tok::End {
        return p.fail("`&` or end of input");
    }
    let free = f.free_variables();
    if free.len() > 1 {
        return Err(FeatureError::new(
            FeatureErrorKind::TooManyFreeVariables(free.into_iter().collect()),
            1,
        ));
    }
    Ok(f)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.atom.pred)?;
        for (i, t) in self.atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureExpr::Exists(v, body) => write!(f, "exists {v} . {body}"),
            FeatureExpr::Conj(lits) if lits.is_empty() => f.write_str("true"),
            FeatureExpr::Conj(lits) => {
                for (i, l) in lits.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{l}")?;
                }
                Ok(())
            }
        }
    }
}

/// Canonical text; [`parse_feature_with`] inverts it under the same signature.
pub fn print_feature(f: &FeatureExpr) -> String {
    f.to_string()
}
