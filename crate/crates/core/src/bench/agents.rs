//! The two agents under comparison and their per-episode runners.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{score, EpisodeOutcome, FailureCause};
use super::tasks::{answer_of, TaskSpec};
use crate::baseline::{run_reactive, train_reactive, BaselineError, CandidateMode, ReactiveEpisode, ReactiveModel};
use crate::env::{Episode, PerceptionNoise};
use crate::learn::TrainConfig;
use crate::planner::{rule_plan, train_planner, PlannerError, PlannerModel};
use crate::procir::{canonicalize, interpret, ExecutableProcedure, ExecutionTrace, Library, Outcome};
use crate::reactors::{
    induce_reactor_labels, HeuristicAttrChecker, HeuristicRelChecker, NoisyDetector, ReactorLabels, ReactorModels, Registry,
    CHECK_OBJ_ATTR, CHECK_OBJ_RECEP_REL, DETECT_RECEP, MASK_GENERATOR,
};

/// Per-run settings shared by both agents (fair-comparison: same noise,
/// same budget, same pre-search map built from the same scene).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub noise: PerceptionNoise,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum PlannerKind {
    /// Template rules (question answering).
    Rule,
    Learned(Arc<PlannerModel>),
}

impl PlannerKind {
    pub fn plan(&self, task: &TaskSpec) -> ExecutableProcedure {
        match self {
            PlannerKind::Rule => rule_plan(&task.instruction).unwrap_or_default(),
            PlannerKind::Learned(m) => m.plan(&task.instruction),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Agent {
    Hmn { planner: PlannerKind, reactors: Registry, lib: Arc<Library> },
    Reactive(Arc<ReactiveModel>),
}

impl Agent {
    pub fn name(&self) -> &'static str {
        match self {
            Agent::Hmn { .. } => "hmn",
            Agent::Reactive(_) => "baseline",
        }
    }
}

fn episode_for(task: &TaskSpec, cfg: &EvalConfig) -> Episode {
    let seed = cfg.seed ^ task.scene_seed.rotate_left(17);
    let mut ep = Episode::with_noise(task.scene(), cfg.noise, seed);
    ep.instruction = task.instruction.tokens.clone();
    ep
}

/// Failure cause of an unsuccessful procedural run.
fn hmn_cause(task: &TaskSpec, plan: &ExecutableProcedure, trace: &ExecutionTrace) -> FailureCause {
    match &trace.outcome {
        Outcome::BudgetExceeded => FailureCause::Budget,
        _ if *plan != task.gold_ae => FailureCause::Planner,
        Outcome::Failed { error } if error.starts_with("navigate") => FailureCause::Navigation,
        Outcome::Failed { error } if error.contains("is not visible") => FailureCause::Grounding,
        _ => FailureCause::Reactor,
    }
}

pub fn run_hmn(
    task: &TaskSpec,
    planner: &PlannerKind,
    reactors: &Registry,
    lib: &Library,
    cfg: &EvalConfig,
) -> (EpisodeOutcome, ExecutionTrace) {
    let plan = planner.plan(task);
    let mut ep = episode_for(task, cfg);
    let initial = ep.scene.clone();
    let trace = interpret(&plan, lib, &mut ep, reactors, cfg.budget);
    let mut out = EpisodeOutcome::for_task(task);
    out.answer = if task.is_iqa() { answer_of(&trace.result) } else { None };
    out.steps = trace.atomic_attempts().len();
    out.invalid = out.steps - trace.atomic_actions().len();
    score(&mut out, task, &initial, &ep.scene);
    if !out.success {
        out.cause = Some(hmn_cause(task, &plan, &trace));
    }
    (out, trace)
}

pub fn run_baseline(task: &TaskSpec, model: &ReactiveModel, cfg: &EvalConfig) -> EpisodeOutcome {
    let mut ep = episode_for(task, cfg);
    let initial = ep.scene.clone();
    let run = run_reactive(model, &task.instruction, &mut ep, cfg.budget);
    let mut out = EpisodeOutcome::for_task(task);
    out.answer = run.answer.clone();
    out.steps = run.tokens.len();
    out.invalid = run.invalid;
    score(&mut out, task, &initial, &ep.scene);
    if !out.success {
        let ended = run.stopped || run.answer.is_some();
        out.cause = Some(if ended { FailureCause::Planner } else { FailureCause::Budget });
    }
    out
}

pub fn run_agent(agent: &Agent, task: &TaskSpec, cfg: &EvalConfig) -> EpisodeOutcome {
    match agent {
        Agent::Hmn { planner, reactors, lib } => run_hmn(task, planner, reactors, lib, cfg).0,
        Agent::Reactive(m) => run_baseline(task, m, cfg),
    }
}

/// Outcomes in task order; episodes run in parallel.
pub fn evaluate(agent: &Agent, tasks: &[TaskSpec], cfg: &EvalConfig) -> Vec<EpisodeOutcome> {
    tasks.par_iter().map(|t| run_agent(agent, t, cfg)).collect()
}

/// Reactors for question answering: box-overlap and detector heuristics over
/// the noisy perception channel, no training data.
pub fn heuristic_registry() -> Registry {
    Registry::oracle()
        .with(CHECK_OBJ_ATTR, Arc::new(HeuristicAttrChecker))
        .with(CHECK_OBJ_RECEP_REL, Arc::new(HeuristicRelChecker))
        .with(DETECT_RECEP, Arc::new(NoisyDetector::detect_recep()))
        .with(MASK_GENERATOR, Arc::new(NoisyDetector::mask_generator()))
}

/// Reactor labels induced from the canonical rollouts of the tasks' gold
/// procedures.
pub fn induce_labels(tasks: &[TaskSpec], lib: &Library, budget: usize) -> ReactorLabels {
    let per: Vec<ReactorLabels> = tasks
        .par_iter()
        .filter_map(|t| {
            let scene = t.scene();
            let trace = canonicalize(&t.gold_ae, lib, &scene, &Registry::oracle(), budget).ok()?;
            induce_reactor_labels(&trace, &scene, &t.instruction.tokens).ok()
        })
        .collect();
    let mut all = ReactorLabels::default();
    for l in per {
        all.extend(l);
    }
    all
}

pub struct HmnModels {
    pub planner: PlannerModel,
    pub reactors: ReactorModels,
}

pub fn train_hmn(tasks: &[TaskSpec], lib: &Library, budget: usize, cfg: &TrainConfig) -> Result<HmnModels, PlannerError> {
    let pairs: Vec<_> = tasks.iter().map(|t| (t.instruction.clone(), t.gold_ae.clone())).collect();
    let planner = train_planner(&pairs, lib, cfg)?;
    let reactors = ReactorModels::train(&induce_labels(tasks, lib, budget), cfg);
    Ok(HmnModels { planner, reactors })
}

impl HmnModels {
    /// Learned reactors bound over the oracle base (oracle mask generator).
    pub fn agent(&self, lib: Arc<Library>) -> Agent {
        Agent::Hmn {
            planner: PlannerKind::Learned(Arc::new(self.planner.clone())),
            reactors: self.reactors.registry(Registry::oracle()),
            lib,
        }
    }
}

pub fn train_baseline(
    tasks: &[TaskSpec],
    lib: &Library,
    mode: CandidateMode,
    cfg: &TrainConfig,
) -> Result<ReactiveModel, BaselineError> {
    let eps: Vec<ReactiveEpisode> = tasks.par_iter().filter_map(|t| t.reactive_episode(lib)).collect();
    train_reactive(&eps, mode, cfg)
}
