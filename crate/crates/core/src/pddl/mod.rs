//! PPDDL subset: reader, lifted AST, and a printer that round-trips.

mod ast;
mod parse;
mod print;
pub mod sexpr;

use std::fmt;

pub use ast::{
    ActionSchema, AtomExpr, DomainDef, Effect, Formula, PredicateDef, ProblemDef, Term, TypeDecl,
    TypedName, ROOT_TYPE,
};
pub use parse::{parse_domain, parse_problem_def, PROBABILITY_TOLERANCE, SUPPORTED_REQUIREMENTS};
pub use print::{print_domain, print_problem};
pub use sexpr::Pos;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found {found}")]
    Syntax { expected: String, found: String },
    #[error("unsupported construct `{0}`")]
    Unsupported(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared object or constant `{0}`")]
    UnknownObject(String),
    #[error("unbound variable `?{0}`")]
    UnboundVariable(String),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("predicate `{pred}` takes {expected} arguments, found {found}")]
    Arity {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Probability(String),
    #[error("goal must be ground conjunctive")]
    GoalNotConjunctive,
    #[error("problem refers to domain `{found}` but `{expected}` was given")]
    DomainMismatch { expected: String, found: String },
    #[error("object `{object}` is used as both `{a}` and `{b}`")]
    TypeConflict {
        object: String,
        a: String,
        b: String,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at {pos}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: Pos,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, pos: Pos) -> Self {
        ParseError { kind, pos }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}
