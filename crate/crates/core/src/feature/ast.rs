use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GoalEnrichment {
    None,
    /// `goal-p`: the atom is part of the goal.
    Goal,
    /// `correct-p`: the atom holds now and is part of the goal.
    Correct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modifier {
    None,
    /// `p+`: transitive closure.
    Closure,
    /// `min-p`: participates in the relation with no predecessor.
    Min,
    /// `max-p`: participates in the relation with no successor.
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnrichedPredicate {
    pub base: String,
    pub enrichment: GoalEnrichment,
    pub modifier: Modifier,
}

impl EnrichedPredicate {
    pub fn plain(base: impl Into<String>) -> Self {
        EnrichedPredicate {
            base: base.into(),
            enrichment: GoalEnrichment::None,
            modifier: Modifier::None,
        }
    }

    pub fn new(base: impl Into<String>, enrichment: GoalEnrichment, modifier: Modifier) -> Self {
        EnrichedPredicate {
            base: base.into(),
            enrichment,
            modifier,
        }
    }

    /// Arity after enrichment, given the base predicate's arity.
    pub fn effective_arity(&self, base_arity: usize) -> usize {
        match self.modifier {
            Modifier::None => base_arity,
            Modifier::Closure => 2,
            Modifier::Min | Modifier::Max => 1,
        }
    }

    /// `+`, `min-` and `max-` only apply to binary predicates.
    pub fn modifier_allowed(&self, base_arity: usize) -> bool {
        self.modifier == Modifier::None || base_arity == 2
    }
}

impl fmt::Display for EnrichedPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.modifier {
            Modifier::Min => f.write_str("min-")?,
            Modifier::Max => f.write_str("max-")?,
            _ => {}
        }
        match self.enrichment {
            GoalEnrichment::Goal => f.write_str("goal-")?,
            GoalEnrichment::Correct => f.write_str("correct-")?,
            GoalEnrichment::None => {}
        }
        f.write_str(&self.base)?;
        if self.modifier == Modifier::Closure {
            f.write_str("+")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureAtom {
    pub pred: EnrichedPredicate,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub negated: bool,
    pub atom: FeatureAtom,
}

impl Literal {
    pub fn pos(pred: EnrichedPredicate, args: Vec<Term>) -> Self {
        Literal {
            negated: false,
            atom: FeatureAtom { pred, args },
        }
    }

    pub fn neg(pred: EnrichedPredicate, args: Vec<Term>) -> Self {
        Literal {
            negated: true,
            atom: FeatureAtom { pred, args },
        }
    }
}

/// A feature expression: a (possibly empty) prefix of existential
/// quantifiers over a conjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureExpr {
    Conj(Vec<Literal>),
    Exists(String, Box<FeatureExpr>),
}

impl FeatureExpr {
    pub fn exists(var: impl Into<String>, body: FeatureExpr) -> Self {
        FeatureExpr::Exists(var.into(), Box::new(body))
    }

    /// Quantified variables outermost first, and the conjunction underneath.
    pub fn split(&self) -> (Vec<&str>, &[Literal]) {
        let mut vars = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                FeatureExpr::Exists(v, body) => {
                    vars.push(v.as_str());
                    cur = body;
                }
                FeatureExpr::Conj(lits) => return (vars, lits),
            }
        }
    }

    pub fn literals(&self) -> &[Literal] {
        self.split().1
    }

    /// Number of quantifiers in scope at the conjunction.
    pub fn quantifier_depth(&self) -> usize {
        self.split().0.len()
    }

    /// Literal count plus quantifier count.
    pub fn size(&self) -> usize {
        let (vars, lits) = self.split();
        vars.len() + lits.len()
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let (bound, lits) = self.split();
        lits.iter()
            .flat_map(|l| l.atom.args.iter())
            .filter_map(Term::var)
            .filter(|v| !bound.contains(v))
            .map(str::to_string)
            .collect()
    }

    pub fn free_variable(&self) -> Option<String> {
        self.free_variables().into_iter().next()
    }

    pub fn is_closed(&self) -> bool {
        self.free_variables().is_empty()
    }
}
