use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use relavi::avi::{AviConfig, StepSize};
use relavi::eval::{ComparatorConfig, CurriculumConfig};
use relavi::model::{fileworld, parse_problem, ProblemInstance};
use relavi::pddl::{parse_domain, DomainDef};
use relavi::rollout::MdpConfig;
use relavi::search::SearchConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<String>,
    #[serde(default)]
    pub problems: Vec<String>,
    #[serde(default)]
    pub features: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub mdp: MdpSection,
    #[serde(default)]
    pub avi: AviSection,
    #[serde(default)]
    pub search: SearchSection,
    pub curriculum: Option<CurriculumSection>,
    #[serde(default)]
    pub eval: EvalSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    pub gamma: Option<f64>,
    pub goal_reward: Option<f64>,
    pub step_reward: Option<f64>,
    pub dead_end_value: Option<f64>,
    pub max_trajectory_length: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AviSection {
    pub t_avi: Option<usize>,
    pub n_avi: Option<usize>,
    pub r_scale: Option<f64>,
    pub scaling_enabled: Option<bool>,
    pub sign_guard_enabled: Option<bool>,
    pub weight_training_trajectories: Option<usize>,
    /// A constant step size in place of the decaying schedule.
    pub fixed_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub beam_width: Option<usize>,
    pub depth_limit: Option<usize>,
    pub lambda: Option<f64>,
    pub quantifier_bound: Option<usize>,
    pub feature_training_states: Option<usize>,
    /// Run a feature search before every `add_every`-th iteration; 0 never.
    pub add_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSection {
    /// Problem specs per level, easiest first.
    pub levels: Vec<Vec<String>>,
    pub threshold: Option<f64>,
    pub trials_per_check: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub trials: Option<usize>,
    #[serde(default)]
    pub problems: Vec<String>,
    pub factor: Option<f64>,
    pub significance: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig {
                base: PathBuf::from("."),
                ..RunConfig::default()
            });
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        // Syntax errors are parse errors; unknown keys and bad values are
        // config errors.
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::deserialize(table)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn mdp(&self) -> Result<MdpConfig, CliError> {
        let d = MdpConfig::default();
        let m = &self.mdp;
        let c = MdpConfig {
            gamma: m.gamma.unwrap_or(d.gamma),
            goal_reward: m.goal_reward.unwrap_or(d.goal_reward),
            step_reward: m.step_reward.unwrap_or(d.step_reward),
            dead_end_value: m.dead_end_value.unwrap_or(d.dead_end_value),
            max_trajectory_length: m.max_trajectory_length.unwrap_or(d.max_trajectory_length),
        };
        c.validate()
            .map_err(|e| CliError::Config(format!("[mdp] {e}")))?;
        Ok(c)
    }

    pub fn avi(&self) -> Result<AviConfig, CliError> {
        let d = AviConfig::default();
        let a = &self.avi;
        let c = AviConfig {
            t_avi: a.t_avi.unwrap_or(d.t_avi),
            n_avi: a.n_avi.unwrap_or(d.n_avi),
            r_scale: a.r_scale.unwrap_or(d.r_scale),
            scaling_enabled: a.scaling_enabled.unwrap_or(d.scaling_enabled),
            sign_guard_enabled: a.sign_guard_enabled.unwrap_or(d.sign_guard_enabled),
            weight_training_trajectories: a
                .weight_training_trajectories
                .unwrap_or(d.weight_training_trajectories),
            step_size: a.fixed_step.map_or(StepSize::Schedule, StepSize::Fixed),
        };
        c.validate()
            .map_err(|e| CliError::Config(format!("[avi] {e}")))?;
        Ok(c)
    }

    pub fn search(&self) -> Result<SearchConfig, CliError> {
        let d = SearchConfig::default();
        let s = &self.search;
        let c = SearchConfig {
            beam_width: s.beam_width.unwrap_or(d.beam_width),
            depth_limit: s.depth_limit.unwrap_or(d.depth_limit),
            lambda: s.lambda.unwrap_or(d.lambda),
            quantifier_bound: s.quantifier_bound.unwrap_or(d.quantifier_bound),
            feature_training_states: s
                .feature_training_states
                .unwrap_or(d.feature_training_states),
        };
        c.validate()
            .map_err(|e| CliError::Config(format!("[search] {e}")))?;
        Ok(c)
    }

    pub fn comparator(&self) -> Result<ComparatorConfig, CliError> {
        let d = ComparatorConfig::default();
        let c = ComparatorConfig {
            factor: self.eval.factor.unwrap_or(d.factor),
            significance: self.eval.significance.unwrap_or(d.significance),
        };
        if !(c.factor > 0.0 && c.significance > 0.0 && c.significance < 0.5) {
            return Err(CliError::Config(
                "[eval] factor must be positive and significance in (0, 0.5)".into(),
            ));
        }
        Ok(c)
    }
}

/// The domain named by `spec`: `fileworld` for the bundled domain, otherwise
/// a PDDL file. Without a spec, the bundled domain is used when every problem
/// is a bundled one.
pub fn load_domain(
    cfg: &RunConfig,
    spec: Option<&str>,
    problems: &[String],
) -> Result<Arc<DomainDef>, CliError> {
    match spec {
        Some("fileworld") => Ok(fileworld::domain()),
        Some(path) => {
            let path = cfg.resolve(path);
            let text = read(&path)?;
            parse_domain(&text)
                .map(Arc::new)
                .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
        }
        None if !problems.is_empty() && problems.iter().all(|p| p.starts_with("fileworld:")) => {
            Ok(fileworld::domain())
        }
        None => Err(CliError::Config(
            "no domain given (--domain or `domain` in the config)".into(),
        )),
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Instances for one problem spec: a PDDL file, `fileworld:N` or
/// `fileworld:A-B` for generated instances with N (or A through B) files.
pub fn load_problems(
    cfg: &RunConfig,
    domain: &Arc<DomainDef>,
    spec: &str,
) -> Result<Vec<Arc<ProblemInstance>>, CliError> {
    if let Some(range) = spec.strip_prefix("fileworld:") {
        if !Arc::ptr_eq(domain, &fileworld::domain()) && domain.name != fileworld::domain().name {
            return Err(CliError::Config(format!(
                "`{spec}` needs the fileworld domain"
            )));
        }
        let bad = || CliError::Config(format!("bad fileworld range `{range}`"));
        let (lo, hi) = match range.split_once('-') {
            Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
            None => {
                let n: usize = range.parse().map_err(|_| bad())?;
                (n, n)
            }
        };
        if lo == 0 || lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).map(|n| Arc::new(fileworld::problem(n))).collect());
    }
    let path = cfg.resolve(spec);
    let text = read(&path)?;
    parse_problem(&text, domain)
        .map(|p| vec![Arc::new(p)])
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn load_problem_set(
    cfg: &RunConfig,
    domain: &Arc<DomainDef>,
    specs: &[String],
) -> Result<Vec<Arc<ProblemInstance>>, CliError> {
    let mut out = Vec::new();
    for s in specs {
        out.extend(load_problems(cfg, domain, s)?);
    }
    if out.is_empty() {
        return Err(CliError::Config(
            "no problems given (--problem or `problems` in the config)".into(),
        ));
    }
    Ok(out)
}

/// Curriculum levels as instance lists. Without a `[curriculum]` section, or
/// when problems are given on the command line, a single level.
pub fn curriculum(
    cfg: &RunConfig,
    domain: &Arc<DomainDef>,
    problems: &[String],
    from_flags: bool,
) -> Result<CurriculumConfig<Vec<Arc<ProblemInstance>>>, CliError> {
    let cc = match (&cfg.curriculum, from_flags) {
        (Some(c), false) => CurriculumConfig {
            levels: c
                .levels
                .iter()
                .map(|l| load_problem_set(cfg, domain, l))
                .collect::<Result<_, _>>()?,
            threshold: c.threshold.unwrap_or(0.9),
            trials_per_check: c.trials_per_check.unwrap_or(100),
        },
        _ => CurriculumConfig {
            levels: vec![load_problem_set(cfg, domain, problems)?],
            threshold: 1.0,
            trials_per_check: 1,
        },
    };
    cc.validate()
        .map_err(|e| CliError::Config(format!("[curriculum] {e}")))?;
    Ok(cc)
}
