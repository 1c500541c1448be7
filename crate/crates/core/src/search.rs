//! Beam search over candidate features, scored against Bellman-error targets.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::RngCore;

use crate::avi::residuals;
use crate::exec;
use crate::feature::{
    check_wellformed, CompiledFeature, EnrichedPredicate, FeatureExpr, GoalEnrichment, Literal,
    Modifier, Term,
};
use crate::model::{GroundState, Mdp, ProblemInstance};
use crate::pddl::DomainDef;
use crate::rollout::{
    draw, FeatureMap, Greedy, InstanceSampler, LinearValueFn, MdpConfig, RolloutError, Sample,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// `usize::MAX` keeps every candidate.
    pub beam_width: usize,
    pub depth_limit: usize,
    pub lambda: f64,
    pub quantifier_bound: usize,
    pub feature_training_states: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 60,
            depth_limit: 5,
            lambda: 0.03,
            quantifier_bound: 1,
            feature_training_states: 20_000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.beam_width == 0 {
            return Err("beam_width must be at least 1".into());
        }
        if self.depth_limit == 0 {
            return Err("depth_limit must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("the feature training set is empty")]
    EmptyTrainingSet,
    #[error("invalid search config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub feature: FeatureExpr,
    pub score: f64,
    pub size: usize,
}

/// Higher score first, then smaller size, then printed form.
pub fn rank(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.size.cmp(&b.size))
        .then_with(|| a.feature.to_string().cmp(&b.feature.to_string()))
}

pub fn select_best(cands: &[ScoredCandidate]) -> Option<&ScoredCandidate> {
    cands.iter().min_by(|a, b| rank(a, b))
}

/// A scoring objective for candidate features.
pub trait Scorer: Sync {
    /// `values[j]` is the feature's value on training state `j`.
    fn score(&self, f: &FeatureExpr, values: &[f64], targets: &[f64]) -> f64;
}

/// `|corr(values, targets)| - lambda * size`. Correlation is 0 when either
/// side is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationScorer {
    pub lambda: f64,
}

impl Scorer for CorrelationScorer {
    fn score(&self, f: &FeatureExpr, values: &[f64], targets: &[f64]) -> f64 {
        correlation(values, targets).abs() - self.lambda * f.size() as f64
    }
}

/// Pearson sample correlation, 0 on constant input.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

const BOUND_NAMES: [&str; 5] = ["y", "z", "u", "v", "w"];

fn bound_name(i: usize) -> String {
    match BOUND_NAMES.get(i) {
        Some(n) => n.to_string(),
        None => format!("y{i}"),
    }
}

/// Renames the free variable to `x` and bound variables by first occurrence
/// in the conjunction, reordering the quantifier prefix to match. Alpha
/// equivalent features map to the same form.
pub fn canonical(f: &FeatureExpr) -> FeatureExpr {
    let (bound, lits) = f.split();
    let mut map: HashMap<&str, String> = HashMap::new();
    for (i, v) in f.free_variables().iter().enumerate() {
        let name = if i == 0 {
            "x".to_string()
        } else {
            format!("x{i}")
        };
        map.insert(bound_or_free(&bound, lits, v), name);
    }
    let mut order: Vec<&str> = Vec::new();
    for t in lits.iter().flat_map(|l| &l.atom.args) {
        if let Term::Var(v) = t {
            if bound.contains(&v.as_str()) && !order.contains(&v.as_str()) {
                order.push(v);
            }
        }
    }
    for v in &bound {
        if !order.contains(v) {
            order.push(v);
        }
    }
    for (i, v) in order.iter().enumerate() {
        map.insert(v, bound_name(i));
    }
    let lits = lits
        .iter()
        .map(|l| Literal {
            negated: l.negated,
            atom: crate::feature::FeatureAtom {
                pred: l.atom.pred.clone(),
                args: l
                    .atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => Term::Var(map[v.as_str()].clone()),
                        c => c.clone(),
                    })
                    .collect(),
            },
        })
        .collect();
    order.iter().rev().fold(FeatureExpr::Conj(lits), |body, v| {
        FeatureExpr::exists(map[v].clone(), body)
    })
}

// The free-variable set owns its strings; find the matching borrow in `f`.
fn bound_or_free<'a>(bound: &[&'a str], lits: &'a [Literal], v: &str) -> &'a str {
    if let Some(b) = bound.iter().find(|b| **b == v) {
        return b;
    }
    lits.iter()
        .flat_map(|l| &l.atom.args)
        .find_map(|t| t.var().filter(|x| *x == v))
        .expect("free variable occurs in a literal")
}

/// Every enriched predicate of the domain with its effective arity.
pub fn enriched_predicates(domain: &DomainDef) -> Vec<(EnrichedPredicate, usize)> {
    let mut out = Vec::new();
    for p in &domain.predicates {
        for e in [
            GoalEnrichment::None,
            GoalEnrichment::Goal,
            GoalEnrichment::Correct,
        ] {
            for m in [
                Modifier::None,
                Modifier::Closure,
                Modifier::Min,
                Modifier::Max,
            ] {
                let ep = EnrichedPredicate::new(p.name.clone(), e, m);
                if ep.modifier_allowed(p.arity()) {
                    out.push((ep.clone(), ep.effective_arity(p.arity())));
                }
            }
        }
    }
    out
}

fn tuples(choices: &[Term], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut t = prefix.clone();
                    t.push(c.clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn with_literal(f: &FeatureExpr, lit: Literal) -> FeatureExpr {
    match f {
        FeatureExpr::Exists(v, body) => FeatureExpr::exists(v.clone(), with_literal(body, lit)),
        FeatureExpr::Conj(lits) => {
            let mut lits = lits.clone();
            lits.push(lit);
            FeatureExpr::Conj(lits)
        }
    }
}

/// All one-step extensions of `f`: one more literal (either polarity, any
/// enriched predicate, arguments drawn from `f`'s variables, one fresh
/// variable and the domain constants), or an existential over `f`'s free
/// variable. Only well-formed results are kept, in canonical form and without
/// alpha-equivalent duplicates.
pub fn expand(f: &FeatureExpr, domain: &DomainDef, q: usize) -> Vec<FeatureExpr> {
    let (bound, lits) = f.split();
    let mut vars: BTreeSet<String> = bound.iter().map(|v| v.to_string()).collect();
    vars.extend(
        lits.iter()
            .flat_map(|l| &l.atom.args)
            .filter_map(Term::var)
            .map(str::to_string),
    );
    let free = f.free_variable();
    let mut choices: Vec<Term> = vars.iter().cloned().map(Term::Var).collect();
    if free.is_none() {
        let fresh = (0..)
            .map(|i| {
                if i == 0 {
                    "x".to_string()
                } else {
                    format!("x{i}")
                }
            })
            .find(|n| !vars.contains(n))
            .expect("unbounded");
        choices.push(Term::Var(fresh));
    }
    choices.extend(domain.constants.iter().map(|c| Term::Const(c.name.clone())));

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |g: FeatureExpr| {
        if check_wellformed(&g, domain, q).is_empty() {
            let c = canonical(&g);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    };
    for (pred, arity) in enriched_predicates(domain) {
        for args in tuples(&choices, arity) {
            for negated in [false, true] {
                let lit = Literal {
                    negated,
                    atom: crate::feature::FeatureAtom {
                        pred: pred.clone(),
                        args: args.clone(),
                    },
                };
                push(with_literal(f, lit));
            }
        }
    }
    if let Some(v) = free {
        push(FeatureExpr::exists(v, f.clone()));
    }
    out
}

/// One feature-training example.
#[derive(Debug, Clone)]
pub struct TrainingPoint {
    pub instance: Arc<ProblemInstance>,
    pub state: GroundState,
    pub target: f64,
}

/// Values of `f` on every training point. Features are compiled once per
/// distinct instance.
pub fn feature_values(f: &FeatureExpr, training: &[TrainingPoint]) -> Vec<f64> {
    let mut compiled: Vec<(*const ProblemInstance, CompiledFeature)> = Vec::new();
    training
        .iter()
        .map(|p| {
            let key = Arc::as_ptr(&p.instance);
            let idx = match compiled.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    compiled.push((key, CompiledFeature::compile_unchecked(f, &p.instance)));
                    compiled.len() - 1
                }
            };
            f64::from(compiled[idx].1.count(&p.instance, &p.state))
        })
        .collect()
}

/// Scores candidates in parallel and returns them best first.
pub fn score_candidates(
    cands: &[FeatureExpr],
    training: &[TrainingPoint],
    scorer: &(impl Scorer + ?Sized),
) -> Vec<ScoredCandidate> {
    let targets: Vec<f64> = training.iter().map(|p| p.target).collect();
    let mut scored = exec::par_map_slice(cands, |f| {
        let values = feature_values(f, training);
        ScoredCandidate {
            feature: f.clone(),
            score: scorer.score(f, &values, &targets),
            size: f.size(),
        }
    });
    scored.sort_by(rank);
    scored
}

/// Beam search returning every level's scored candidates, best first. Level
/// 0 holds the expansions of the empty conjunction; each later level expands
/// the `beam_width` best of the previous one. Candidates seen at an earlier
/// level are not scored again.
pub fn beam_levels(
    training: &[TrainingPoint],
    domain: &DomainDef,
    sc: &SearchConfig,
    scorer: &(impl Scorer + ?Sized),
) -> Result<Vec<Vec<ScoredCandidate>>, SearchError> {
    sc.validate().map_err(SearchError::Config)?;
    if training.is_empty() {
        return Err(SearchError::EmptyTrainingSet);
    }
    let q = sc.quantifier_bound;
    let mut seen: BTreeSet<FeatureExpr> = BTreeSet::new();
    let mut frontier = vec![FeatureExpr::Conj(Vec::new())];
    let mut levels = Vec::with_capacity(sc.depth_limit);
    for _ in 0..sc.depth_limit {
        let mut cands = Vec::new();
        for f in &frontier {
            for g in expand(f, domain, q) {
                if seen.insert(g.clone()) {
                    cands.push(g);
                }
            }
        }
        if cands.is_empty() {
            break;
        }
        let scored = score_candidates(&cands, training, scorer);
        frontier = scored
            .iter()
            .take(sc.beam_width)
            .map(|c| c.feature.clone())
            .collect();
        levels.push(scored);
    }
    Ok(levels)
}

/// The best candidate seen at any level.
pub fn beam_search(
    training: &[TrainingPoint],
    domain: &DomainDef,
    sc: &SearchConfig,
    scorer: &(impl Scorer + ?Sized),
) -> Result<ScoredCandidate, SearchError> {
    let levels = beam_levels(training, domain, sc, scorer)?;
    let best: Vec<ScoredCandidate> = levels.iter().filter_map(|l| l.first().cloned()).collect();
    Ok(select_best(&best)
        .cloned()
        .expect("the empty conjunction always expands"))
}

/// States drawn under `Greedy(v)`, each paired with its Bellman error.
pub fn build_feature_training_set<S, F>(
    v: &LinearValueFn<F>,
    sampler: &S,
    count: usize,
    cfg: &MdpConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<(Sample<S::Mdp>, f64)>, RolloutError>
where
    S: InstanceSampler + ?Sized,
    F: FeatureMap<S::Mdp>,
    S::Mdp: Mdp,
{
    let d = draw(&Greedy { v, cfg }, count, sampler, cfg, rng)?;
    let r = residuals(v, &d.samples, cfg)?;
    Ok(d.samples.into_iter().zip(r.errors).collect())
}

/// The feature training set in the form the search consumes.
pub fn training_points(set: Vec<(Sample<ProblemInstance>, f64)>) -> Vec<TrainingPoint> {
    set.into_iter()
        .map(|(s, target)| TrainingPoint {
            instance: s.mdp,
            state: s.state,
            target,
        })
        .collect()
}
