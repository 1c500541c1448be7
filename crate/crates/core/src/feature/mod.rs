//! Relational feature language: enriched predicates, existentially
//! quantified conjunctions with at most one free variable, and their
//! evaluation as binding counts over a state.

mod ast;
mod check;
mod eval;
mod file;
mod syntax;

use std::fmt;

pub use ast::{
    EnrichedPredicate, FeatureAtom, FeatureExpr, GoalEnrichment, Literal, Modifier, Term,
};
pub use check::{check_for_instance, check_wellformed, Violation};
pub use eval::{eval_feature, transitive_closure, CompiledFeature, IllFormed};
pub use file::{parse_feature_file, write_feature_file, FeatureFileError};
pub use syntax::{
    parse_enriched_name, parse_feature, parse_feature_with, print_feature, Signature,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureErrorKind {
    Syntax {
        expected: String,
        found: String,
    },
    Arity {
        pred: String,
        expected: usize,
        found: usize,
    },
    ModifierArity {
        pred: String,
        arity: usize,
    },
    TooManyFreeVariables(Vec<String>),
}

/// A feature-text error with the 1-based column it refers to.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {kind}")]
pub struct FeatureError {
    pub kind: FeatureErrorKind,
    pub column: usize,
}

impl FeatureError {
    pub fn new(kind: FeatureErrorKind, column: usize) -> Self {
        FeatureError { kind, column }
    }

    /// The source line with a caret under the offending column.
    pub fn caret(&self, text: &str) -> String {
        format!(
            "{text}\n{}^ {}",
            " ".repeat(self.column.saturating_sub(1)),
            self.kind
        )
    }
}

impl fmt::Display for FeatureErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureErrorKind::Syntax { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            FeatureErrorKind::Arity {
                pred,
                expected,
                found,
            } => write!(f, "`{pred}` takes {expected} arguments, found {found}"),
            FeatureErrorKind::ModifierArity { pred, arity } => write!(
                f,
                "`{pred}` has arity {arity}; `+`, `min-` and `max-` need arity 2"
            ),
            FeatureErrorKind::TooManyFreeVariables(vs) => {
                write!(
                    f,
                    "{} free variables ({}), at most one allowed",
                    vs.len(),
                    vs.join(", ")
                )
            }
        }
    }
}
