//! Success-rate estimation, the "tests as significantly better" comparator
//! and the difficulty ladder.

use std::io::{self, BufRead, Write};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::avi::{
    avi_step, draw_training, AviConfig, GreedySource, IterationLog, PolicyComparator, TrainerState,
};
use crate::exec;
use crate::model::Mdp;
use crate::rollout::{
    run_trajectory, Draw, FeatureMap, Greedy, InstanceSampler, LinearValueFn, MdpConfig, Policy,
    RolloutError, Termination,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot compare an empty report")]
    Empty,
    #[error("the comparison needs at least 2 trials per report, got {0}")]
    TooFewTrials(usize),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub instance: String,
    pub termination: Termination,
    pub steps: usize,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.termination == Termination::Goal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Per-trial outcomes in trial order.
    pub outcomes: Vec<bool>,
    pub records: Vec<TrialRecord>,
}

impl EvalReport {
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let outcomes: Vec<bool> = records.iter().map(TrialRecord::success).collect();
        let successes = outcomes.iter().filter(|&&b| b).count();
        let trials = outcomes.len();
        EvalReport {
            trials,
            successes,
            success_rate: if trials == 0 {
                0.0
            } else {
                successes as f64 / trials as f64
            },
            outcomes,
            records,
        }
    }

    /// A report with only outcomes, for tests and simulations.
    pub fn from_outcomes(outcomes: &[bool]) -> Self {
        EvalReport::from_records(
            outcomes
                .iter()
                .enumerate()
                .map(|(i, &ok)| TrialRecord {
                    trial: i,
                    seed: 0,
                    instance: String::new(),
                    termination: if ok {
                        Termination::Goal
                    } else {
                        Termination::StepCap
                    },
                    steps: 0,
                })
                .collect(),
        )
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.seed).collect()
    }
}

/// Runs `trials` independent trajectories; trial `i` samples its instance and
/// successors from a generator seeded by `derive_seed(seed, i)`.
pub fn success_rate<S, P>(
    policy: &P,
    sampler: &S,
    trials: usize,
    cfg: &MdpConfig,
    seed: u64,
) -> Result<EvalReport, RolloutError>
where
    S: InstanceSampler + ?Sized,
    P: Policy<S::Mdp> + ?Sized,
{
    let runs = exec::par_map(trials, |i| {
        let trial_seed = exec::derive_seed(seed, i as u64);
        let mut rng = exec::rng_from_seed(trial_seed);
        let mdp = sampler.sample(&mut rng);
        run_trajectory(policy, &*mdp, cfg, &mut rng).map(|t| TrialRecord {
            trial: i,
            seed: trial_seed,
            instance: mdp.name(),
            termination: t.termination,
            steps: t.steps(),
        })
    });
    Ok(EvalReport::from_records(
        runs.into_iter().collect::<Result<_, _>>()?,
    ))
}

/// Parameters of the comparison. The defaults are a 0.9 factor at one-sided
/// significance 0.025.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorConfig {
    pub factor: f64,
    pub significance: f64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        ComparatorConfig {
            factor: 0.9,
            significance: 0.025,
        }
    }
}

/// Welch statistic for `D = c·p1 - p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub d: f64,
    pub t: f64,
    pub df: f64,
    pub critical: f64,
}

fn mean_and_var_of_mean(x: &[bool]) -> (f64, f64) {
    let n = x.len() as f64;
    let p = x.iter().filter(|&&b| b).count() as f64 / n;
    let ss: f64 = x
        .iter()
        .map(|&b| (f64::from(u8::from(b)) - p).powi(2))
        .sum();
    (p, ss / (n - 1.0) / n)
}

/// The test statistic, or `None` when both samples are constant.
pub fn welch(
    r1: &EvalReport,
    r2: &EvalReport,
    cc: ComparatorConfig,
) -> Result<Option<WelchTest>, EvalError> {
    if r1.trials == 0 || r2.trials == 0 {
        return Err(EvalError::Empty);
    }
    if r1.trials < 2 || r2.trials < 2 {
        return Err(EvalError::TooFewTrials(r1.trials.min(r2.trials)));
    }
    let (p1, v1) = mean_and_var_of_mean(&r1.outcomes);
    let (p2, v2) = mean_and_var_of_mean(&r2.outcomes);
    let a1 = cc.factor * cc.factor * v1;
    let a2 = v2;
    if a1 + a2 == 0.0 {
        return Ok(None);
    }
    let d = cc.factor * p1 - p2;
    let t = d / (a1 + a2).sqrt();
    let df = (a1 + a2).powi(2)
        / (a1 * a1 / (r1.trials as f64 - 1.0) + a2 * a2 / (r2.trials as f64 - 1.0));
    let critical = StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - cc.significance);
    Ok(Some(WelchTest { d, t, df, critical }))
}

/// Whether the policy behind `r1` tests as significantly better than the one
/// behind `r2`: a one-sided Welch test that `p2 < factor·p1`.
pub fn tests_significantly_better_with(
    r1: &EvalReport,
    r2: &EvalReport,
    cc: ComparatorConfig,
) -> Result<bool, EvalError> {
    Ok(match welch(r1, r2, cc)? {
        Some(w) => w.t > w.critical,
        None => cc.factor * r1.success_rate - r2.success_rate > 0.0,
    })
}

pub fn tests_significantly_better(r1: &EvalReport, r2: &EvalReport) -> Result<bool, EvalError> {
    tests_significantly_better_with(r1, r2, ComparatorConfig::default())
}

/// Compares greedy policies by their success rates over `trials` fresh
/// trajectories each, using the same trial seeds for both.
pub struct SuccessRateComparator<S> {
    pub sampler: S,
    pub cfg: MdpConfig,
    pub trials: usize,
    pub test: ComparatorConfig,
}

impl<S> SuccessRateComparator<S> {
    pub fn new(sampler: S, cfg: MdpConfig) -> Self {
        SuccessRateComparator {
            sampler,
            cfg,
            trials: 100,
            test: ComparatorConfig::default(),
        }
    }
}

impl<S, F> PolicyComparator<F> for SuccessRateComparator<S>
where
    S: InstanceSampler,
    F: FeatureMap<S::Mdp>,
{
    fn significantly_better(
        &self,
        a: &LinearValueFn<F>,
        b: &LinearValueFn<F>,
        seed: u64,
    ) -> Result<bool, RolloutError> {
        let ra = success_rate(
            &Greedy {
                v: a,
                cfg: &self.cfg,
            },
            &self.sampler,
            self.trials,
            &self.cfg,
            seed,
        )?;
        let rb = success_rate(
            &Greedy {
                v: b,
                cfg: &self.cfg,
            },
            &self.sampler,
            self.trials,
            &self.cfg,
            seed,
        )?;
        Ok(tests_significantly_better_with(&ra, &rb, self.test).unwrap_or(false))
    }
}

/// A monotone ladder of instance-sampler parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig<L> {
    pub levels: Vec<L>,
    pub threshold: f64,
    pub trials_per_check: usize,
}

impl<L> CurriculumConfig<L> {
    pub fn validate(&self) -> Result<(), String> {
        if self.levels.is_empty() {
            return Err("curriculum needs at least one level".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(format!(
                "threshold must be in (0,1], got {}",
                self.threshold
            ));
        }
        if self.trials_per_check == 0 {
            return Err("trials_per_check must be positive".into());
        }
        Ok(())
    }
}

/// Next level index: one up when the success rate meets the threshold and a
/// higher level exists. Never goes down.
pub fn curriculum_step<L>(current: usize, report: &EvalReport, cc: &CurriculumConfig<L>) -> usize {
    if report.success_rate >= cc.threshold && current + 1 < cc.levels.len() {
        current + 1
    } else {
        current
    }
}

/// An AVI run driven along a curriculum.
#[derive(Debug, Clone)]
pub struct CurriculumRun<F> {
    pub state: TrainerState<F>,
    /// Level index after the last iteration.
    pub level: usize,
    pub log: Vec<IterationLog>,
    /// Level each logged iteration trained on.
    pub levels: Vec<usize>,
}

const CHECK_STREAM: u64 = 3;

/// AVI along a curriculum, one iteration at a time. Training sets and the
/// sign-guard comparator use the current level's sampler. After each
/// iteration the greedy policy is evaluated over `trials_per_check` trials
/// and the level advanced by [`curriculum_step`]. A trainer rebuilt from a
/// saved state and level continues the run exactly.
pub struct CurriculumTrainer<'a, L, S: InstanceSampler, F, G> {
    pub state: TrainerState<F>,
    level: usize,
    avi_cfg: &'a AviConfig,
    cfg: &'a MdpConfig,
    cc: &'a CurriculumConfig<L>,
    sampler_for: G,
    seed: u64,
    source: GreedySource<S>,
    cmp: SuccessRateComparator<S>,
    training: Draw<S::Mdp>,
}

impl<'a, L, S, F, G> CurriculumTrainer<'a, L, S, F, G>
where
    S: InstanceSampler + Clone,
    F: FeatureMap<S::Mdp> + Clone,
    G: Fn(&L) -> S,
{
    pub fn new(
        state: TrainerState<F>,
        level: usize,
        avi_cfg: &'a AviConfig,
        cfg: &'a MdpConfig,
        cc: &'a CurriculumConfig<L>,
        sampler_for: G,
        seed: u64,
    ) -> Result<Self, RolloutError> {
        assert!(level < cc.levels.len(), "level {level} out of range");
        let sampler = sampler_for(&cc.levels[level]);
        let source = GreedySource::new(sampler.clone(), avi_cfg);
        let training = draw_training(&state, cfg, &source, seed)?;
        Ok(CurriculumTrainer {
            state,
            level,
            avi_cfg,
            cfg,
            cc,
            sampler_for,
            seed,
            source,
            cmp: SuccessRateComparator::new(sampler, cfg.clone()),
            training,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// The current level's sampler.
    pub fn sampler(&self) -> &S {
        &self.cmp.sampler
    }

    /// Replaces the value function, e.g. after adding a zero-weight feature.
    /// The pending training set is kept, so the new function should induce
    /// the same greedy policy.
    pub fn set_value_fn(&mut self, v: LinearValueFn<F>) {
        self.state.value_fn = v;
    }

    /// One iteration; returns its log row and the level it trained on.
    pub fn step(&mut self) -> Result<(IterationLog, usize), RolloutError> {
        let trained_on = self.level;
        let (row, next) = avi_step(
            &mut self.state,
            &self.training,
            self.avi_cfg,
            self.cfg,
            &self.source,
            Some(&self.cmp),
            self.seed,
        )?;
        self.training = next;
        if self.level + 1 < self.cc.levels.len() {
            let report = success_rate(
                &Greedy {
                    v: &self.state.value_fn,
                    cfg: self.cfg,
                },
                &self.cmp.sampler,
                self.cc.trials_per_check,
                self.cfg,
                exec::derive_seed(
                    exec::derive_seed(self.seed, CHECK_STREAM),
                    self.state.k as u64,
                ),
            )?;
            let next_level = curriculum_step(self.level, &report, self.cc);
            if next_level != self.level {
                self.level = next_level;
                let sampler = (self.sampler_for)(&self.cc.levels[next_level]);
                self.source = GreedySource::new(sampler.clone(), self.avi_cfg);
                self.cmp = SuccessRateComparator::new(sampler, self.cfg.clone());
                self.training = draw_training(&self.state, self.cfg, &self.source, self.seed)?;
            }
        }
        Ok((row, trained_on))
    }
}

/// Runs `iterations` curriculum iterations from `state` at `level`.
#[allow(clippy::too_many_arguments)]
pub fn avi_curriculum<L, S, F>(
    state: TrainerState<F>,
    level: usize,
    iterations: usize,
    avi_cfg: &AviConfig,
    cfg: &MdpConfig,
    cc: &CurriculumConfig<L>,
    sampler_for: impl Fn(&L) -> S,
    seed: u64,
) -> Result<CurriculumRun<F>, RolloutError>
where
    S: InstanceSampler + Clone,
    F: FeatureMap<S::Mdp> + Clone,
{
    let mut t = CurriculumTrainer::new(state, level, avi_cfg, cfg, cc, sampler_for, seed)?;
    let mut log = Vec::with_capacity(iterations);
    let mut levels = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (row, l) = t.step()?;
        log.push(row);
        levels.push(l);
    }
    Ok(CurriculumRun {
        level: t.level,
        state: t.state,
        log,
        levels,
    })
}

pub const EVAL_REPORT_HEADER: &str = "# relavi eval-report v1";

pub fn write_report<W: Write>(r: &EvalReport, mut w: W) -> io::Result<()> {
    writeln!(w, "{EVAL_REPORT_HEADER}")?;
    writeln!(w, "trial,seed,instance,termination,steps,success")?;
    for t in &r.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            t.trial,
            t.seed,
            t.instance,
            t.termination,
            t.steps,
            u8::from(t.success())
        )?;
    }
    Ok(())
}

pub fn read_report<R: BufRead>(r: R) -> Result<EvalReport, String> {
    let mut records = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if n == 0 {
            if line != EVAL_REPORT_HEADER {
                return Err(format!("unexpected report header `{line}`"));
            }
            continue;
        }
        if n == 1 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || format!("line {}: malformed record", n + 1);
        if f.len() != 6 {
            return Err(bad());
        }
        records.push(TrialRecord {
            trial: f[0].parse().map_err(|_| bad())?,
            seed: f[1].parse().map_err(|_| bad())?,
            instance: f[2].to_string(),
            termination: f[3].parse().map_err(|_| bad())?,
            steps: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(EvalReport::from_records(records))
}
