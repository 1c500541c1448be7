//! Lifted (name-based) representation of PPDDL domains and problems.

/// A variable or constant, typed by its declaration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedName {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<TypedName>,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Variables are stored without the leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomExpr {
    pub pred: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(AtomExpr),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Imply(Box<Formula>, Box<Formula>),
    Forall(Vec<TypedName>, Box<Formula>),
    Exists(Vec<TypedName>, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Add(AtomExpr),
    Del(AtomExpr),
    And(Vec<Effect>),
    /// Branches with their probabilities; any shortfall below 1 is a no-op.
    Probabilistic(Vec<(f64, Effect)>),
    When(Formula, Box<Effect>),
    Forall(Vec<TypedName>, Box<Effect>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Formula,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDef>,
    pub actions: Vec<ActionSchema>,
}

pub const ROOT_TYPE: &str = "object";

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == ROOT_TYPE || self.types.iter().any(|t| t.name == name)
    }

    pub fn parent_of(&self, ty: &str) -> Option<&str> {
        self.types
            .iter()
            .find(|t| t.name == ty)
            .map(|t| t.parent.as_str())
    }

    /// `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == ROOT_TYPE {
            return true;
        }
        let mut cur = sub;
        // bounded walk guards against cyclic declarations
        for _ in 0..=self.types.len() {
            if cur == sup {
                return true;
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }
}

/// A parsed but not yet grounded problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    pub name: String,
    pub domain_name: String,
    /// `None` type means the file declared the object untyped.
    pub objects: Vec<(String, Option<String>)>,
    pub init: Vec<AtomExpr>,
    pub goal: Vec<AtomExpr>,
}
