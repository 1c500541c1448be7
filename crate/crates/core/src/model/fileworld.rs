//! The bundled LIFTED-FILEWORLD3 domain and a problem generator over the
//! number of files (the folder count is fixed at three by the domain).

use std::fmt::Write;
use std::sync::{Arc, OnceLock};

use crate::pddl::{parse_domain, DomainDef};

use super::{parse_problem, ProblemInstance};

pub const DOMAIN_SOURCE: &str = include_str!("../../data/lifted-fileworld3-domain.pddl");
pub const PROBLEM_P10_SOURCE: &str = include_str!("../../data/lifted-fileworld3-p10.pddl");

pub fn domain() -> Arc<DomainDef> {
    static DOMAIN: OnceLock<Arc<DomainDef>> = OnceLock::new();
    DOMAIN
        .get_or_init(|| Arc::new(parse_domain(DOMAIN_SOURCE).expect("bundled domain parses")))
        .clone()
}

/// The bundled ten-file problem.
pub fn p10() -> ProblemInstance {
    parse_problem(PROBLEM_P10_SOURCE, &domain()).expect("bundled problem parses")
}

/// Problem text with `files` files, all to be filed, in the bundled style.
pub fn problem_source(files: usize) -> String {
    let mut s = String::from("(define (problem file-prob)\n  (:domain file-world)\n  (:objects");
    for i in 0..files {
        write!(s, " p{i}").unwrap();
    }
    s.push_str(" )\n  (:goal (and");
    for i in 0..files {
        write!(s, " (filed p{i})").unwrap();
    }
    s.push_str(")))\n");
    s
}

pub fn problem(files: usize) -> ProblemInstance {
    parse_problem(&problem_source(files), &domain()).expect("generated problem parses")
}

/// Instances with a file count drawn uniformly from `files`.
pub fn sampler(
    files: std::ops::RangeInclusive<usize>,
) -> crate::rollout::UniformInstances<ProblemInstance> {
    crate::rollout::UniformInstances(files.map(|n| Arc::new(problem(n))).collect())
}
