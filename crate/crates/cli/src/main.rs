//! `relavi`: train, evaluate and inspect relational value functions.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use relavi::avi::{read_run_log, write_run_log, IterationLog, TrainerState};
use relavi::eval::{
    success_rate, tests_significantly_better_with, write_report, CurriculumTrainer, EvalReport,
};
use relavi::exec;
use relavi::feature::{
    check_for_instance, eval_feature, parse_feature_with, FeatureExpr, Signature,
};
use relavi::model::ProblemInstance;
use relavi::pddl::DomainDef;
use relavi::rollout::{Greedy, LinearValueFn, MdpConfig, UniformInstances};
use relavi::search::{
    beam_levels, beam_search, build_feature_training_set, canonical, training_points,
    CorrelationScorer,
};
use relavi::snapshot::Snapshot;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "relavi",
    version,
    about = "Approximate value iteration over relational features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Domain PDDL file, or `fileworld` for the bundled domain.
    #[arg(long, global = true)]
    domain: Option<String>,
    /// Problem PDDL file or `fileworld:N` / `fileworld:A-B`; repeatable.
    #[arg(long, global = true)]
    problem: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Snapshot to resume from or evaluate; `compare` takes two.
    #[arg(long, global = true)]
    snapshot: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run AVI and write a snapshot and run log.
    Train(Common),
    /// Measure the greedy policy of a snapshot.
    Eval(Common),
    /// Evaluate one feature on a state.
    Feature {
        /// Feature text, e.g. `goal-filed(x) & !filed(x)`.
        expr: String,
        /// State dump (one `pred(args)` per line); the initial state if absent.
        #[arg(long)]
        state: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Test whether the first snapshot's policy is significantly better.
    Compare(Common),
    /// Dump scored beam-search candidates per level.
    Enumerate(Common),
}

struct Ctx {
    cfg: RunConfig,
    common: Common,
    seed: u64,
}

impl Ctx {
    fn new(common: Common) -> Result<Self, CliError> {
        let cfg = RunConfig::load(common.config.as_deref())?;
        if let Some(j) = common.jobs.or(cfg.jobs) {
            if j == 0 {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            exec::set_parallel(j > 1);
            exec::set_jobs(j);
        }
        let seed = common.seed.or(cfg.seed).unwrap_or(0);
        Ok(Ctx { cfg, common, seed })
    }

    fn problem_specs(&self) -> (Vec<String>, bool) {
        if self.common.problem.is_empty() {
            (self.cfg.problems.clone(), false)
        } else {
            (self.common.problem.clone(), true)
        }
    }

    fn domain(&self) -> Result<Arc<DomainDef>, CliError> {
        let (problems, _) = self.problem_specs();
        let mut all = problems;
        all.extend(self.cfg.eval.problems.iter().cloned());
        if let Some(c) = &self.cfg.curriculum {
            all.extend(c.levels.iter().flatten().cloned());
        }
        config::load_domain(
            &self.cfg,
            self.common.domain.as_deref().or(self.cfg.domain.as_deref()),
            &all,
        )
    }

    /// Problems for evaluation: flags, then `[eval] problems`, then the last
    /// curriculum level, then `problems`.
    fn eval_problems(
        &self,
        domain: &Arc<DomainDef>,
    ) -> Result<Vec<Arc<ProblemInstance>>, CliError> {
        let specs = if !self.common.problem.is_empty() {
            self.common.problem.clone()
        } else if !self.cfg.eval.problems.is_empty() {
            self.cfg.eval.problems.clone()
        } else if let Some(c) = self
            .cfg
            .curriculum
            .as_ref()
            .filter(|c| !c.levels.is_empty())
        {
            c.levels.last().cloned().unwrap_or_default()
        } else {
            self.cfg.problems.clone()
        };
        config::load_problem_set(&self.cfg, domain, &specs)
    }

    fn out_dir(&self) -> Option<PathBuf> {
        self.common.out.clone().or_else(|| {
            self.cfg
                .out
                .as_ref()
                .map(|o| self.cfg.resolve(&o.to_string_lossy()))
        })
    }

    fn trials(&self) -> Result<usize, CliError> {
        let t = self.common.trials.or(self.cfg.eval.trials).unwrap_or(100);
        if t == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        Ok(t)
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(runtime)?;
    tmp.write_all(contents).map_err(runtime)?;
    tmp.as_file().sync_all().map_err(runtime)?;
    tmp.persist(path)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn check_features(
    features: &[FeatureExpr],
    instances: &[Arc<ProblemInstance>],
) -> Result<(), CliError> {
    for f in features {
        for inst in instances {
            let v = check_for_instance(f, inst, usize::MAX);
            if !v.is_empty() {
                let reasons: Vec<String> = v.iter().map(ToString::to_string).collect();
                return Err(CliError::Config(format!(
                    "feature `{f}` is not well formed for problem `{}`: {}",
                    inst.name(),
                    reasons.join("; ")
                )));
            }
        }
    }
    Ok(())
}

fn parse_features(texts: &[String], sig: &Signature) -> Result<Vec<FeatureExpr>, CliError> {
    texts
        .iter()
        .map(|t| {
            parse_feature_with(t, sig)
                .map_err(|e| CliError::Parse(format!("feature:\n{}", e.caret(t))))
        })
        .collect()
}

fn load_snapshot(path: &Path, sig: &Signature) -> Result<Snapshot, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read snapshot {}: {e}", path.display())))?;
    Snapshot::parse(&text, sig).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

const SEARCH_STREAM: u64 = 4;

fn cmd_train(ctx: Ctx) -> Result<(), CliError> {
    let cfg = ctx.mdp()?;
    let avi_cfg = ctx.cfg.avi()?;
    let sc = ctx.cfg.search()?;
    let add_every = ctx.cfg.search.add_every.unwrap_or(0);
    let domain = ctx.domain()?;
    let sig = Signature::of_domain(&domain);
    let (specs, from_flags) = ctx.problem_specs();
    let cc = config::curriculum(&ctx.cfg, &domain, &specs, from_flags)?;
    let out = ctx.out_dir().ok_or_else(|| {
        CliError::Config("no output directory (--out or `out` in the config)".into())
    })?;

    let (state, level, seed) = match ctx.common.snapshot.as_slice() {
        [] => {
            let features = parse_features(&ctx.cfg.features, &sig)?;
            if features.is_empty() && add_every == 0 {
                return Err(CliError::Config(
                    "no features and feature search is off".into(),
                ));
            }
            (
                TrainerState::new(LinearValueFn::zeros(features)),
                0,
                ctx.seed,
            )
        }
        [path] => {
            let snap = load_snapshot(path, &sig)?;
            if ctx.common.seed.is_some_and(|s| s != snap.seed) {
                return Err(CliError::Config(format!(
                    "--seed {} differs from the snapshot's seed {}",
                    ctx.seed, snap.seed
                )));
            }
            if snap.level >= cc.levels.len() {
                return Err(CliError::Config(format!(
                    "snapshot level {} has no curriculum level",
                    snap.level
                )));
            }
            (snap.trainer_state(), snap.level, snap.seed)
        }
        _ => {
            return Err(CliError::Config(
                "train takes at most one --snapshot".into(),
            ))
        }
    };
    for level in &cc.levels {
        check_features(&state.value_fn.features, level)?;
    }

    let log_path = out.join("run_log.csv");
    let snap_path = out.join("snapshot.tsv");
    let mut log: Vec<IterationLog> = Vec::new();
    if state.k > 0 {
        if let Ok(text) = fs::read_to_string(&log_path) {
            log = read_run_log(text.as_bytes())
                .map_err(|e| CliError::Parse(format!("{}: {e}", log_path.display())))?;
            log.retain(|r| r.k < state.k);
        }
    }

    let sampler_for = |insts: &Vec<Arc<ProblemInstance>>| UniformInstances(insts.clone());
    let mut trainer = CurriculumTrainer::new(state, level, &avi_cfg, &cfg, &cc, sampler_for, seed)
        .map_err(runtime)?;
    while trainer.state.k < avi_cfg.t_avi {
        let k = trainer.state.k;
        if add_every > 0 && k % add_every == 0 {
            let mut rng = exec::rng_for(exec::derive_seed(seed, SEARCH_STREAM), k as u64);
            let set = build_feature_training_set(
                &trainer.state.value_fn,
                trainer.sampler(),
                sc.feature_training_states,
                &cfg,
                &mut rng,
            )
            .map_err(runtime)?;
            let points = training_points(set);
            if !points.is_empty() {
                let best = beam_search(
                    &points,
                    &domain,
                    &sc,
                    &CorrelationScorer { lambda: sc.lambda },
                )
                .map_err(runtime)?;
                let known: BTreeSet<FeatureExpr> = trainer
                    .state
                    .value_fn
                    .features
                    .iter()
                    .map(canonical)
                    .collect();
                if !known.contains(&canonical(&best.feature)) {
                    eprintln!(
                        "k={k} adding feature {} (score {:.4})",
                        best.feature, best.score
                    );
                    let mut v = trainer.state.value_fn.clone();
                    v.features.push(best.feature);
                    v.weights.push(0.0);
                    trainer.set_value_fn(v);
                }
            }
        }
        let (row, trained_on) = trainer.step().map_err(runtime)?;
        eprintln!(
            "k={} level={} training_success={:.3} b_avg={:.4} kappa={:.4}",
            row.k, trained_on, row.training_success, row.b_avg, row.kappa
        );
        log.push(row);
        let snap = Snapshot::of_state(&trainer.state, trainer.level(), seed);
        write_atomic(&snap_path, snap.to_text().as_bytes())?;
        let mut buf = Vec::new();
        write_run_log(&log, &mut buf).map_err(runtime)?;
        write_atomic(&log_path, &buf)?;
    }
    println!("wrote {} and {}", snap_path.display(), log_path.display());
    Ok(())
}

impl Ctx {
    fn mdp(&self) -> Result<MdpConfig, CliError> {
        self.cfg.mdp()
    }

    /// Greedy success rate of `v` on the evaluation problems.
    fn evaluate(
        &self,
        v: &LinearValueFn<Vec<FeatureExpr>>,
        instances: &[Arc<ProblemInstance>],
        trials: usize,
    ) -> Result<EvalReport, CliError> {
        check_features(&v.features, instances)?;
        let cfg = self.mdp()?;
        success_rate(
            &Greedy { v, cfg: &cfg },
            &UniformInstances(instances.to_vec()),
            trials,
            &cfg,
            self.seed,
        )
        .map_err(runtime)
    }
}

fn report_text(r: &EvalReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_report(r, &mut buf).map_err(runtime)?;
    Ok(buf)
}

fn cmd_eval(ctx: Ctx) -> Result<(), CliError> {
    let domain = ctx.domain()?;
    let sig = Signature::of_domain(&domain);
    let path = match ctx.common.snapshot.as_slice() {
        [p] => p,
        [] => return Err(CliError::Config("eval needs --snapshot".into())),
        _ => return Err(CliError::Config("eval takes one --snapshot".into())),
    };
    let snap = load_snapshot(path, &sig)?;
    let instances = ctx.eval_problems(&domain)?;
    let report = ctx.evaluate(&snap.value_fn(), &instances, ctx.trials()?)?;
    if let Some(out) = ctx.out_dir() {
        write_atomic(&out.join("eval_report.csv"), &report_text(&report)?)?;
    }
    println!(
        "success_rate {} ({}/{})",
        report.success_rate, report.successes, report.trials
    );
    Ok(())
}

fn cmd_feature(expr: &str, state: Option<&Path>, ctx: Ctx) -> Result<(), CliError> {
    let domain = ctx.domain()?;
    let (specs, _) = ctx.problem_specs();
    let instances = config::load_problem_set(&ctx.cfg, &domain, &specs)?;
    let [inst] = instances.as_slice() else {
        return Err(CliError::Config("feature needs exactly one problem".into()));
    };
    let f = parse_feature_with(expr, &Signature::of_instance(inst))
        .map_err(|e| CliError::Parse(e.caret(expr)))?;
    let s = match state {
        Some(p) => inst
            .parse_state(&config::read(p)?)
            .map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?,
        None => inst.init().clone(),
    };
    let n = eval_feature(&f, &s, inst).map_err(|e| CliError::Config(e.to_string()))?;
    println!("{n}");
    Ok(())
}

fn cmd_compare(ctx: Ctx) -> Result<(), CliError> {
    let domain = ctx.domain()?;
    let sig = Signature::of_domain(&domain);
    let [a, b] = ctx.common.snapshot.as_slice() else {
        return Err(CliError::Config(
            "compare needs two --snapshot arguments".into(),
        ));
    };
    let trials = ctx.trials()?;
    if trials < 2 {
        return Err(CliError::Config("compare needs at least 2 trials".into()));
    }
    let cc = ctx.cfg.comparator()?;
    let instances = ctx.eval_problems(&domain)?;
    let ra = ctx.evaluate(&load_snapshot(a, &sig)?.value_fn(), &instances, trials)?;
    let rb = ctx.evaluate(&load_snapshot(b, &sig)?.value_fn(), &instances, trials)?;
    let verdict = tests_significantly_better_with(&ra, &rb, cc).map_err(runtime)?;
    if let Some(out) = ctx.out_dir() {
        write_atomic(&out.join("compare_a.csv"), &report_text(&ra)?)?;
        write_atomic(&out.join("compare_b.csv"), &report_text(&rb)?)?;
    }
    println!(
        "a success_rate {} ({}/{})",
        ra.success_rate, ra.successes, ra.trials
    );
    println!(
        "b success_rate {} ({}/{})",
        rb.success_rate, rb.successes, rb.trials
    );
    println!("verdict {verdict}");
    Ok(())
}

pub const CANDIDATES_HEADER: &str = "# relavi candidates v1";

fn cmd_enumerate(ctx: Ctx) -> Result<(), CliError> {
    let cfg = ctx.mdp()?;
    let sc = ctx.cfg.search()?;
    let domain = ctx.domain()?;
    let sig = Signature::of_domain(&domain);
    let v = match ctx.common.snapshot.as_slice() {
        [] => LinearValueFn::zeros(parse_features(&ctx.cfg.features, &sig)?),
        [p] => load_snapshot(p, &sig)?.value_fn(),
        _ => {
            return Err(CliError::Config(
                "enumerate takes at most one --snapshot".into(),
            ))
        }
    };
    let instances = ctx.eval_problems(&domain)?;
    check_features(&v.features, &instances)?;
    let mut rng = exec::rng_for(ctx.seed, SEARCH_STREAM);
    let set = build_feature_training_set(
        &v,
        &UniformInstances(instances),
        sc.feature_training_states,
        &cfg,
        &mut rng,
    )
    .map_err(runtime)?;
    let levels = beam_levels(
        &training_points(set),
        &domain,
        &sc,
        &CorrelationScorer { lambda: sc.lambda },
    )
    .map_err(runtime)?;
    let mut text = format!("{CANDIDATES_HEADER}\nlevel,rank,score,size,feature\n");
    for (d, level) in levels.iter().enumerate() {
        for (r, c) in level.iter().enumerate() {
            text.push_str(&format!(
                "{},{},{:?},{},\"{}\"\n",
                d + 1,
                r + 1,
                c.score,
                c.size,
                c.feature
            ));
        }
    }
    match ctx.out_dir() {
        Some(out) => {
            let path = out.join("candidates.csv");
            write_atomic(&path, text.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(runtime(e)),
            _ => {}
        },
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => cmd_train(Ctx::new(c)?),
        Command::Eval(c) => cmd_eval(Ctx::new(c)?),
        Command::Feature {
            expr,
            state,
            common,
        } => cmd_feature(&expr, state.as_deref(), Ctx::new(common)?),
        Command::Compare(c) => cmd_compare(Ctx::new(c)?),
        Command::Enumerate(c) => cmd_enumerate(Ctx::new(c)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
