//! `pap`: generate suites, train, evaluate, run experiments and inspect libraries.

mod config;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pap_core::baseline::{CandidateMode, ReactiveModel};
use pap_core::bench::{
    aggregate, check_soundness, combined_library, evaluate, fixture, from_jsonl, generate_suites, hh_scene_config,
    iqa_scene_config, run_hmn, to_jsonl, train_baseline, train_hmn, Agent, Design, EvalConfig,
    BenchError, ExperimentConfig, SuiteConfig, SuiteKind, TaskSpec, FIXTURES,
};
use pap_core::env::Episode;
use pap_core::learn::TrainConfig;
use pap_core::library::{diff, load_any};
use pap_core::planner::{rule_plan, train_planner, Instruction};
use pap_core::procir::{export_ast, interpret, ExecutableProcedure, ExecutionTrace, Library, Outcome, TraceEvent};
use pap_core::world::{generate_scene, AtomicAction, SceneConfig, SceneState};

use config::{read, write_atomic, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "pap", version, about = "Procedures-as-programs agents: suites, training, evaluation and experiments")]
struct Cli {
    /// Run configuration (JSON, schema "config/1"); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate scenes as JSONL from a scene config or a built-in style.
    GenScenes(GenScenes),
    /// Generate train/seen/unseen task suites (JSONL) and check them against the oracle.
    GenTasks(GenTasks),
    /// Train a planner, learned reactors or the reactive baseline.
    #[command(subcommand)]
    Train(Train),
    /// Evaluate an agent on a task file and print metrics JSON.
    Eval(Eval),
    /// Run an experiment design and write a JSON report and CSV table.
    Experiment(Experiment),
    /// Run one task (or built-in fixture) and optionally dump its trace.
    Run(Run),
    /// Read instructions from stdin, plan and execute them in one scene.
    Repl(Repl),
    /// Export a library's ASTs as JSON or Graphviz dot.
    AstExport(AstExport),
    /// Added/removed/modified procedures between two libraries.
    LibDiff(LibDiff),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Hh,
    Iqa,
}

impl From<Kind> for SuiteKind {
    fn from(k: Kind) -> SuiteKind {
        match k {
            Kind::Hh => SuiteKind::Hh,
            Kind::Iqa => SuiteKind::Iqa,
        }
    }
}

#[derive(Args, Debug)]
struct GenScenes {
    #[arg(long, value_enum, default_value = "hh")]
    kind: Kind,
    /// Layout style id for the built-in configs.
    #[arg(long, default_value_t = 1)]
    style: u32,
    /// Scene config JSON; replaces the built-in one.
    #[arg(long)]
    scene_config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenTasks {
    #[arg(long, value_enum, default_value = "hh")]
    kind: Kind,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_eval: usize,
    /// Directory receiving train.jsonl, seen.jsonl and unseen.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    /// Suite config JSON (styles, rare-verb rate, recipes).
    #[arg(long)]
    suite_config: Option<PathBuf>,
    /// Skip the oracle soundness check.
    #[arg(long)]
    no_check: bool,
}

#[derive(Subcommand, Debug)]
enum Train {
    /// Instruction → procedure planner.
    Planner(TrainArgs),
    /// Classifier reactors from induced labels.
    Reactors(TrainArgs),
    /// Step-by-step reactive baseline.
    Baseline(TrainArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training tasks (JSONL).
    #[arg(long)]
    tasks: PathBuf,
    /// Model output (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 150)]
    max_iters: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AgentKind {
    Hmn,
    Baseline,
}

#[derive(Args, Debug)]
struct Eval {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long, value_enum, default_value = "hmn")]
    agent: AgentKind,
    /// Baseline model (JSON) for `--agent baseline`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Metrics output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-episode outcomes (JSONL).
    #[arg(long)]
    outcomes: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Experiment {
    /// head_to_head, head_to_head_iqa, data_efficiency, few_shot_longest,
    /// few_shot_random, library_ab, length_buckets or perception_sweep.
    design: String,
    /// Experiment config JSON (suite sizes, budgets, ε, training).
    #[arg(long)]
    experiment_config: Option<PathBuf>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    hh_train: Option<usize>,
    #[arg(long)]
    iqa_train_per_type: Option<usize>,
    /// Directory receiving report.json and report.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct Run {
    /// Task id from `--tasks`, or a built-in fixture name.
    task_id: String,
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Write the full execution trace (JSONL).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Repl {
    /// Scene JSON; otherwise a generated scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hh")]
    kind: Kind,
    #[arg(long, default_value_t = 1)]
    style: u32,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AstFormat {
    Json,
    Dot,
}

#[derive(Args, Debug)]
struct AstExport {
    /// Bundle id (e.g. alfred/v1) or directory.
    #[arg(long, default_value = "alfred/v1")]
    library: String,
    #[arg(long, value_enum, default_value = "json")]
    format: AstFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LibDiff {
    a: String,
    b: String,
}

/// An experiment invariant was violated (exit code 2).
#[derive(Debug)]
struct Invariant(String);

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invariant {}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(json_errors, "usage", &e.to_string(), 1),
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Invariant>() {
            Some(_) => report(cli.json_errors, "invariant", &format!("{e:#}"), 2),
            None => report(cli.json_errors, "error", &format!("{e:#}"), 1),
        },
    }
}

fn report(json: bool, kind: &str, msg: &str, code: u8) -> ExitCode {
    // clap renders its own "error:" prefix
    let msg = msg.strip_prefix("error: ").unwrap_or(msg);
    if json {
        eprintln!("{}", serde_json::json!({ "error": kind, "message": msg.trim_end(), "exit_code": code }));
    } else {
        eprintln!("error: {}", msg.trim_end());
    }
    ExitCode::from(code)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    match &cli.cmd {
        Cmd::GenScenes(a) => gen_scenes(&cfg, a),
        Cmd::GenTasks(a) => gen_tasks(&cfg, a),
        Cmd::Train(t) => train(&cfg, t),
        Cmd::Eval(a) => eval(&cfg, a),
        Cmd::Experiment(a) => experiment(&cfg, a),
        Cmd::Run(a) => run(&cfg, a),
        Cmd::Repl(a) => repl(&cfg, a),
        Cmd::AstExport(a) => ast_export(a),
        Cmd::LibDiff(a) => lib_diff(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => say(text),
    }
}

/// Print a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(text: &str) -> Result<()> {
    let mut o = std::io::stdout().lock();
    let r = o.write_all(text.as_bytes()).and_then(|_| if text.ends_with('\n') { Ok(()) } else { o.write_all(b"\n") });
    match r {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

fn scene_config(kind: Kind, style: u32) -> SceneConfig {
    match kind {
        Kind::Hh => hh_scene_config(style),
        Kind::Iqa => iqa_scene_config(style),
    }
}

fn gen_scenes(cfg: &RunConfig, a: &GenScenes) -> Result<()> {
    let sc = match &a.scene_config {
        Some(p) => SceneConfig::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => scene_config(a.kind, a.style),
    };
    let mut out = String::new();
    for i in 0..a.n {
        let s = generate_scene(&sc, cfg.seed.wrapping_add(i as u64))?;
        out.push_str(&serde_json::to_string(&s)?);
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

fn gen_tasks(cfg: &RunConfig, a: &GenTasks) -> Result<()> {
    let sc = match &a.suite_config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SuiteConfig::default(),
    };
    let suites = generate_suites(a.kind.into(), &sc, a.n_train, a.n_eval, cfg.seed).map_err(|e| match e {
        BenchError::Design(m) => anyhow::Error::new(Invariant(format!("split hygiene: {m}"))),
        e => e.into(),
    })?;
    if !a.no_check {
        let lib = combined_library();
        for t in suites.train.iter().chain(&suites.seen).chain(&suites.unseen) {
            check_soundness(t, &lib).map_err(|e| Invariant(format!("task {} is not solvable by its gold procedure: {e}", t.id)))?;
        }
    }
    for (name, tasks) in [("train", &suites.train), ("seen", &suites.seen), ("unseen", &suites.unseen)] {
        write_atomic(&a.out_dir.join(format!("{name}.jsonl")), &to_jsonl(tasks))?;
    }
    say(&format!("{} train, {} seen, {} unseen tasks in {}", suites.train.len(), suites.seen.len(), suites.unseen.len(), a.out_dir.display()))?;
    Ok(())
}

fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>> {
    from_jsonl(&read(path)?).with_context(|| format!("parsing tasks {}", path.display()))
}

/// The configured library, or the bundle matching the tasks' kind.
fn library_for(cfg: &RunConfig, tasks: &[TaskSpec]) -> Result<Library> {
    if cfg.library != "auto" {
        return Ok(load_any(&cfg.library)?.library);
    }
    let iqa = tasks.iter().filter(|t| t.is_iqa()).count();
    Ok(if iqa == 0 {
        load_any("alfred/v1")?.library
    } else if iqa == tasks.len() {
        load_any("iqa/v1")?.library
    } else {
        combined_library()
    })
}

fn budget_for(cfg: &RunConfig, tasks: &[TaskSpec]) -> usize {
    if tasks.iter().any(TaskSpec::is_iqa) {
        cfg.iqa_budget.max(cfg.hh_budget)
    } else {
        cfg.hh_budget
    }
}

fn train(cfg: &RunConfig, t: &Train) -> Result<()> {
    let (Train::Planner(a) | Train::Reactors(a) | Train::Baseline(a)) = t;
    let tasks = load_tasks(&a.tasks)?;
    if tasks.is_empty() {
        bail!("no training tasks in {}", a.tasks.display());
    }
    let lib = library_for(cfg, &tasks)?;
    let tc = TrainConfig { max_iters: a.max_iters, ..TrainConfig::default() };
    let json = match t {
        Train::Planner(_) => {
            let pairs: Vec<_> = tasks.iter().map(|t| (t.instruction.clone(), t.gold_ae.clone())).collect();
            train_planner(&pairs, &lib, &tc)?.to_json()
        }
        Train::Reactors(_) => train_hmn(&tasks, &lib, budget_for(cfg, &tasks), &tc)?.reactors.to_json(),
        Train::Baseline(_) => {
            let mode = if tasks.iter().all(TaskSpec::is_iqa) { CandidateMode::Receptacles } else { CandidateMode::All };
            train_baseline(&tasks, &lib, mode, &tc)?.to_json()
        }
    };
    write_atomic(&a.out, &json)?;
    say(&format!("trained on {} tasks → {}", tasks.len(), a.out.display()))?;
    Ok(())
}

fn eval_config(cfg: &RunConfig, tasks: &[TaskSpec]) -> EvalConfig {
    EvalConfig { noise: cfg.noise(), budget: budget_for(cfg, tasks), seed: cfg.seed }
}

fn eval(cfg: &RunConfig, a: &Eval) -> Result<()> {
    let tasks = load_tasks(&a.tasks)?;
    let agent = match a.agent {
        AgentKind::Hmn => {
            Agent::Hmn { planner: cfg.planner()?, reactors: cfg.registry()?, lib: Arc::new(library_for(cfg, &tasks)?) }
        }
        AgentKind::Baseline => {
            let path = a.model.as_ref().ok_or_else(|| anyhow!("--agent baseline needs --model"))?;
            Agent::Reactive(Arc::new(ReactiveModel::from_json(&read(path)?).context("loading baseline model")?))
        }
    };
    let outcomes = evaluate(&agent, &tasks, &eval_config(cfg, &tasks));
    if let Some(p) = &a.outcomes {
        let lines: Vec<String> = outcomes.iter().map(serde_json::to_string).collect::<Result<_, _>>()?;
        write_atomic(p, &(lines.join("\n") + if lines.is_empty() { "" } else { "\n" }))?;
    }
    let body = serde_json::json!({
        "version": "metrics/1",
        "agent": agent.name(),
        "seed": cfg.seed,
        "config": cfg,
        "metrics": aggregate(&outcomes),
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&body)?)
}

fn experiment(cfg: &RunConfig, a: &Experiment) -> Result<()> {
    let design = Design::by_name(&a.design).ok_or_else(|| anyhow!("unknown design `{}`", a.design))?;
    let mut ec = match &a.experiment_config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    ec.seed = cfg.seed;
    ec.n_eval = a.n_eval.unwrap_or(ec.n_eval);
    ec.hh_train = a.hh_train.unwrap_or(ec.hh_train);
    ec.iqa_train_per_type = a.iqa_train_per_type.unwrap_or(ec.iqa_train_per_type);
    let report = pap_core::bench::run_experiment(&design, &ec)?;
    write_atomic(&a.out_dir.join("report.json"), &report.to_json())?;
    write_atomic(&a.out_dir.join("report.csv"), &report.to_csv())?;
    for arm in &report.arms {
        say(&format!(
            "{:<10} {:<8} {:<7} param={:<5} n={:<4} sr={:.3} ssr={:.3}",
            arm.arm,
            arm.agent,
            format!("{:?}", arm.split).to_lowercase(),
            arm.param.map_or("-".to_string(), |p| p.to_string()),
            arm.metrics.n,
            arm.metrics.sr,
            arm.metrics.ssr
        ))?;
    }
    if let Some(d) = &report.diff {
        say(&format!("diff: added {:?} removed {:?} modified {:?}", d.added, d.removed, d.modified))?;
    }
    for (k, v) in &report.summary {
        say(&format!("{k} = {v:.4}"))?;
    }
    Ok(())
}

/// a^e, the atomic calls (runs of scan moves collapsed) and the outcome.
fn summarize(plan: &ExecutableProcedure, trace: &ExecutionTrace) -> String {
    let mut s = format!("a^e: {plan}\n");
    let mut scans = 0;
    let flush = |s: &mut String, scans: &mut usize| {
        if *scans > 0 {
            s.push_str(&format!("  … {scans} scan moves\n"));
            *scans = 0;
        }
    };
    for e in &trace.events {
        let TraceEvent::AtomicIssued { call, error, action, .. } = e else { continue };
        let scan = matches!(action, AtomicAction::NavigatePos { .. } | AtomicAction::RotateTo { .. } | AtomicAction::LookTo { .. });
        if scan && error.is_none() {
            scans += 1;
            continue;
        }
        flush(&mut s, &mut scans);
        match error {
            Some(err) => s.push_str(&format!("  {call}  ✗ {err}\n")),
            None => s.push_str(&format!("  {call}\n")),
        }
    }
    flush(&mut s, &mut scans);
    let outcome = match &trace.outcome {
        Outcome::Completed => "completed".to_string(),
        Outcome::Failed { error } => format!("failed ({error})"),
        Outcome::BudgetExceeded => "budget exceeded".to_string(),
    };
    s.push_str(&format!("outcome: {outcome}"));
    if !matches!(trace.result, pap_core::procir::Value::None) {
        s.push_str(&format!("  result: {}", trace.result.render()));
    }
    s
}

fn run(cfg: &RunConfig, a: &Run) -> Result<()> {
    let (plan, trace) = if let Some(f) = fixture(&a.task_id) {
        let lib = load_any(f.library)?.library;
        let mut ep = Episode::with_noise(f.scene, cfg.noise(), cfg.seed);
        ep.instruction = f.instruction.tokens.clone();
        let trace = interpret(&f.plan, &lib, &mut ep, &cfg.registry()?, cfg.hh_budget);
        (f.plan, trace)
    } else {
        let path = a.tasks.as_ref().ok_or_else(|| {
            anyhow!("`{}` is not a built-in fixture ({}); pass --tasks", a.task_id, FIXTURES.join(", "))
        })?;
        let tasks = load_tasks(path)?;
        let task = tasks.iter().find(|t| t.id == a.task_id).ok_or_else(|| anyhow!("no task `{}` in {}", a.task_id, path.display()))?;
        let one = std::slice::from_ref(task);
        let planner = cfg.planner()?;
        let lib = library_for(cfg, one)?;
        let (out, trace) = run_hmn(task, &planner, &cfg.registry()?, &lib, &eval_config(cfg, one));
        eprintln!("success: {}  conditions: {}/{}", out.success, out.conditions_met, out.n_conditions);
        (planner.plan(task), trace)
    };
    say(&summarize(&plan, &trace))?;
    if let Some(p) = &a.trace {
        write_atomic(p, &trace.to_jsonl())?;
    }
    Ok(())
}

fn repl(cfg: &RunConfig, a: &Repl) -> Result<()> {
    let scene: SceneState = match &a.scene {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing scene {}", p.display()))?,
        None => generate_scene(&scene_config(a.kind, a.style), cfg.seed)?,
    };
    let lib = combined_library();
    let reactors = cfg.registry()?;
    let planner = cfg.planner()?;
    let mut ep = Episode::with_noise(scene.clone(), cfg.noise(), cfg.seed);
    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == ":reset" {
            ep = Episode::with_noise(scene.clone(), cfg.noise(), cfg.seed);
            say("scene reset")?;
            continue;
        }
        if text == ":quit" {
            break;
        }
        let q = Instruction::new(text);
        let plan = match &planner {
            pap_core::bench::PlannerKind::Learned(m) => m.plan(&q),
            pap_core::bench::PlannerKind::Rule => match rule_plan(&q) {
                Ok(p) => p,
                Err(e) => {
                    say(&format!("no plan: {e} (household instructions need a learned planner in --config)"))?;
                    continue;
                }
            },
        };
        ep.instruction = q.tokens.clone();
        let trace = interpret(&plan, &lib, &mut ep, &reactors, cfg.iqa_budget.max(cfg.hh_budget));
        say(&summarize(&plan, &trace))?;
    }
    Ok(())
}

fn ast_export(a: &AstExport) -> Result<()> {
    let doc = export_ast(&load_any(&a.library)?.library);
    let text = match a.format {
        AstFormat::Json => doc.to_json(),
        AstFormat::Dot => doc.to_dot(),
    };
    emit(a.out.as_deref(), &text)
}

fn lib_diff(a: &LibDiff) -> Result<()> {
    let d = diff(&load_any(&a.a)?.library, &load_any(&a.b)?.library);
    emit(None, &serde_json::to_string_pretty(&d)?)
}
