//! Experiment designs: each trains the models its arms need with fixed
//! seeds, evaluates them on seen and unseen suites and emits a report.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agents::{evaluate, heuristic_registry, train_baseline, train_hmn, Agent, EvalConfig, PlannerKind};
use super::metrics::{aggregate, config_hash, paired_bootstrap, EpisodeOutcome, Interval, Metrics};
use super::tasks::{generate_suites, BenchError, QuestionKind, Split, SuiteConfig, SuiteKind, Suites, TaskKind, TaskSpec};
use super::{combined_library, generate_suite, HH_BUDGET, IQA_BUDGET};
use crate::baseline::CandidateMode;
use crate::env::PerceptionNoise;
use crate::learn::TrainConfig;
use crate::library::{diff, load_any, LibraryDiff};
use crate::procir::Library;

pub const REPORT_VERSION: &str = "report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FewShotStrategy {
    RandomN,
    LongestN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Design {
    HeadToHead { suite: SuiteKind },
    DataEfficiency { fractions: Vec<f64> },
    FewShot { strategy: FewShotStrategy, n: usize, shots: usize },
    LibraryAb { a: String, b: String },
    LengthBuckets,
    PerceptionSweep { eps: Vec<f64> },
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::HeadToHead { .. } => "head_to_head",
            Design::DataEfficiency { .. } => "data_efficiency",
            Design::FewShot { .. } => "few_shot",
            Design::LibraryAb { .. } => "library_ab",
            Design::LengthBuckets => "length_buckets",
            Design::PerceptionSweep { .. } => "perception_sweep",
        }
    }

    /// The design with its default parameters.
    pub fn by_name(name: &str) -> Option<Design> {
        Some(match name {
            "head_to_head" => Design::HeadToHead { suite: SuiteKind::Hh },
            "head_to_head_iqa" => Design::HeadToHead { suite: SuiteKind::Iqa },
            "data_efficiency" => Design::DataEfficiency { fractions: vec![0.05, 0.1, 0.2, 0.5, 1.0] },
            "few_shot" | "few_shot_longest" => Design::FewShot { strategy: FewShotStrategy::LongestN, n: 4, shots: 20 },
            "few_shot_random" => Design::FewShot { strategy: FewShotStrategy::RandomN, n: 4, shots: 20 },
            "library_ab" => Design::LibraryAb { a: "iqa/v1".into(), b: "iqa/v0.1".into() },
            "length_buckets" => Design::LengthBuckets,
            "perception_sweep" => Design::PerceptionSweep { eps: vec![0.0, 0.05, 0.1, 0.2, 0.3] },
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Design(m));
        match self {
            Design::DataEfficiency { fractions } => {
                if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                    return bad(format!("fractions must lie in (0, 1]: {fractions:?}"));
                }
            }
            Design::FewShot { n, shots, .. } => {
                if *n == 0 || *shots == 0 || *shots > 20 {
                    return bad(format!("few-shot needs n > 0 and 1..=20 shots (n={n}, shots={shots})"));
                }
            }
            Design::PerceptionSweep { eps } => {
                if eps.is_empty() || eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return bad(format!("eps values must lie in [0, 1]: {eps:?}"));
                }
            }
            Design::LibraryAb { a, b } if a == b => return bad("library_ab needs two different bundles".into()),
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: String,
    pub seed: u64,
    pub suite: SuiteConfig,
    /// Household training tasks.
    pub hh_train: usize,
    /// Question-answering training tasks per question type (baseline only).
    pub iqa_train_per_type: usize,
    /// Evaluation tasks per split.
    pub n_eval: usize,
    pub hh_budget: usize,
    pub iqa_budget: usize,
    /// Detector class-flip rate for question answering.
    pub eps: f64,
    pub train: TrainConfig,
    /// Bootstrap resamples for paired confidence intervals.
    pub resamples: usize,
    /// Splits averaged by random few-shot selection.
    pub few_shot_splits: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: crate::world::CONFIG_VERSION.into(),
            seed: 0,
            suite: SuiteConfig::default(),
            hh_train: 500,
            iqa_train_per_type: 1000,
            n_eval: 200,
            hh_budget: HH_BUDGET,
            iqa_budget: IQA_BUDGET,
            eps: 0.1,
            train: TrainConfig::default(),
            resamples: 1000,
            few_shot_splits: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid design: {0}")]
    Design(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("training failed: {0}")]
    Training(String),
    #[error(transparent)]
    Library(#[from] crate::library::LibraryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: String,
    pub agent: String,
    pub split: Split,
    /// Swept parameter (fraction, eps, ...), when the design has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<EpisodeOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub design: Design,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub arms: Vec<ArmReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<LibraryDiff>,
    /// Named scalar results specific to the design (retention ratios,
    /// confidence intervals, ...).
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
}

impl Report {
    pub fn arm(&self, arm: &str, split: Split) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm && a.split == split)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// One row per (arm, split, kind) plus an `all` row, plot-ready.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["design", "arm", "agent", "split", "param", "group", "n", "sr", "ssr"]).expect("in-memory");
        let split_name = |s: Split| serde_json::to_value(s).unwrap().as_str().unwrap().to_string();
        for a in &self.arms {
            let param = a.param.map(|p| p.to_string()).unwrap_or_default();
            let mut row = |group: &str, n: usize, sr: f64, ssr: String| {
                w.write_record([
                    self.design.name(),
                    &a.arm,
                    &a.agent,
                    &split_name(a.split),
                    &param,
                    group,
                    &n.to_string(),
                    &format!("{sr:.4}"),
                    &ssr,
                ])
                .expect("in-memory");
            };
            row("all", a.metrics.n, a.metrics.sr, format!("{:.4}", a.metrics.ssr));
            for (k, r) in &a.metrics.per_kind {
                row(&format!("kind:{k}"), r.n, r.rate, String::new());
            }
            for (k, r) in &a.metrics.per_bucket {
                row(&format!("len:{k}"), r.n, r.rate, String::new());
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
    }
}

/// Evaluation suites are generated once per (kind, config, seed).
struct Data {
    suites: Suites,
}

fn hh_data(cfg: &ExperimentConfig, seed: u64) -> Result<Data, ExperimentError> {
    Ok(Data { suites: generate_suites(SuiteKind::Hh, &cfg.suite, cfg.hh_train, cfg.n_eval, seed)? })
}

fn iqa_data(cfg: &ExperimentConfig, seed: u64) -> Result<Data, ExperimentError> {
    Ok(Data { suites: generate_suites(SuiteKind::Iqa, &cfg.suite, 3 * cfg.iqa_train_per_type, cfg.n_eval, seed)? })
}

fn training(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Training(e.to_string())
}

struct Arms {
    arms: Vec<ArmReport>,
}

impl Arms {
    fn eval(&mut self, arm: &str, agent: &Agent, tasks: &[TaskSpec], split: Split, param: Option<f64>, ecfg: &EvalConfig) {
        let outcomes = evaluate(agent, tasks, ecfg);
        self.arms.push(ArmReport {
            arm: arm.into(),
            agent: agent.name().into(),
            split,
            param,
            metrics: aggregate(&outcomes),
            outcomes,
        });
    }
}

fn hh_eval(cfg: &ExperimentConfig, seed: u64) -> EvalConfig {
    EvalConfig { noise: PerceptionNoise::default(), budget: cfg.hh_budget, seed }
}

fn iqa_eval(cfg: &ExperimentConfig, eps: f64, seed: u64) -> EvalConfig {
    EvalConfig { noise: PerceptionNoise { class_flip: eps, miss_rate: 0.0 }, budget: cfg.iqa_budget, seed }
}

/// Trained HMN and baseline agents for household tasks.
fn hh_agents(tasks: &[TaskSpec], lib: &Arc<Library>, cfg: &ExperimentConfig) -> Result<(Agent, Agent), ExperimentError> {
    let hmn = train_hmn(tasks, lib, cfg.hh_budget, &cfg.train).map_err(training)?;
    let base = train_baseline(tasks, lib, CandidateMode::All, &cfg.train).map_err(training)?;
    Ok((hmn.agent(lib.clone()), Agent::Reactive(Arc::new(base))))
}

fn iqa_hmn(lib: Library) -> Agent {
    Agent::Hmn { planner: PlannerKind::Rule, reactors: heuristic_registry(), lib: Arc::new(lib) }
}

fn iqa_baseline(tasks: &[TaskSpec], lib: &Library, cfg: &ExperimentConfig) -> Result<Agent, ExperimentError> {
    let m = train_baseline(tasks, lib, CandidateMode::Receptacles, &cfg.train).map_err(training)?;
    Ok(Agent::Reactive(Arc::new(m)))
}

fn splits(s: &Suites) -> [(Split, &[TaskSpec]); 2] {
    [(Split::Seen, &s.seen), (Split::Unseen, &s.unseen)]
}

pub fn run_experiment(design: &Design, cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    design.validate()?;
    let seed = cfg.seed;
    let mut arms = Arms { arms: vec![] };
    let mut summary = BTreeMap::new();
    let mut lib_diff = None;
    let lib = Arc::new(combined_library());
    match design {
        Design::HeadToHead { suite: SuiteKind::Hh } | Design::LengthBuckets => {
            let d = hh_data(cfg, seed)?;
            let (hmn, base) = hh_agents(&d.suites.train, &lib, cfg)?;
            for (split, tasks) in splits(&d.suites) {
                arms.eval("hmn", &hmn, tasks, split, None, &hh_eval(cfg, seed));
                arms.eval("baseline", &base, tasks, split, None, &hh_eval(cfg, seed));
            }
        }
        Design::HeadToHead { suite: SuiteKind::Iqa } => {
            let d = iqa_data(cfg, seed)?;
            let hmn = iqa_hmn(load_any("iqa/v1")?.library);
            let base = iqa_baseline(&d.suites.train, &lib, cfg)?;
            for (split, tasks) in splits(&d.suites) {
                arms.eval("hmn", &hmn, tasks, split, None, &iqa_eval(cfg, cfg.eps, seed));
                arms.eval("baseline", &base, tasks, split, None, &iqa_eval(cfg, cfg.eps, seed));
            }
        }
        Design::PerceptionSweep { eps } => {
            let d = iqa_data(cfg, seed)?;
            let hmn = iqa_hmn(load_any("iqa/v1")?.library);
            let base = iqa_baseline(&d.suites.train, &lib, cfg)?;
            for &e in eps {
                for (split, tasks) in splits(&d.suites) {
                    arms.eval("hmn", &hmn, tasks, split, Some(e), &iqa_eval(cfg, e, seed));
                    arms.eval("baseline", &base, tasks, split, Some(e), &iqa_eval(cfg, e, seed));
                }
            }
        }
        Design::DataEfficiency { fractions } => {
            let d = hh_data(cfg, seed)?;
            let mut order: Vec<usize> = (0..d.suites.train.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xDA7A));
            for &f in fractions {
                let k = ((f * order.len() as f64).ceil() as usize).clamp(1, order.len());
                let subset: Vec<TaskSpec> = order[..k].iter().map(|&i| d.suites.train[i].clone()).collect();
                let (hmn, base) = hh_agents(&subset, &lib, cfg)?;
                if let Agent::Hmn { planner: PlannerKind::Learned(m), .. } = &hmn {
                    let acc = d.suites.train.iter().filter(|t| m.plan(&t.instruction) == t.gold_ae).count() as f64
                        / d.suites.train.len() as f64;
                    summary.insert(format!("planner_train_acc@{f}"), acc);
                }
                for (split, tasks) in splits(&d.suites) {
                    arms.eval("hmn", &hmn, tasks, split, Some(f), &hh_eval(cfg, seed));
                    arms.eval("baseline", &base, tasks, split, Some(f), &hh_eval(cfg, seed));
                }
            }
            let full = fractions.iter().copied().fold(f64::MIN, f64::max);
            for agent in ["hmn", "baseline"] {
                for split in [Split::Seen, Split::Unseen] {
                    let sr = |p: f64| {
                        arms.arms.iter().find(|a| a.arm == agent && a.split == split && a.param == Some(p)).map(|a| a.metrics.sr)
                    };
                    let full_sr = sr(full).unwrap_or(0.0);
                    for &f in fractions {
                        let r = if full_sr > 0.0 { sr(f).unwrap_or(0.0) / full_sr } else { 0.0 };
                        summary.insert(format!("{agent}.{}.retention@{f}", split_str(split)), r);
                    }
                }
            }
        }
        Design::FewShot { strategy, n, shots } => {
            let d = hh_data(cfg, seed)?;
            let runs = match strategy {
                FewShotStrategy::LongestN => 1,
                FewShotStrategy::RandomN => cfg.few_shot_splits.max(1),
            };
            let mut acc: BTreeMap<(String, Split), Vec<f64>> = BTreeMap::new();
            for run in 0..runs {
                let held = held_out_signatures(&d.suites.train, *strategy, *n, seed.wrapping_add(run as u64));
                summary.insert(format!("run{run}.held_out"), held.len() as f64);
                let train = cap_shots(&d.suites.train, &held, *shots, seed.wrapping_add(run as u64));
                let (hmn, base) = hh_agents(&train, &lib, cfg)?;
                for (split, tasks) in splits(&d.suites) {
                    let eval: Vec<TaskSpec> = tasks.iter().filter(|t| held.contains(&t.signature)).cloned().collect();
                    for (arm, agent) in [("hmn", &hmn), ("baseline", &base)] {
                        arms.eval(arm, agent, &eval, split, Some(run as f64), &hh_eval(cfg, seed));
                        acc.entry((arm.to_string(), split)).or_default().push(arms.arms.last().unwrap().metrics.sr);
                    }
                }
            }
            for ((arm, split), v) in acc {
                summary.insert(format!("{arm}.{}.mean_sr", split_str(split)), v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        Design::LibraryAb { a, b } => {
            let la = load_any(a)?.library;
            let lb = load_any(b)?.library;
            lib_diff = Some(diff(&la, &lb));
            // contain questions on scenes with a receptacle hidden from the start pose
            let mut scfg = cfg.suite.clone();
            scfg.recipes.clear();
            let mut eval = Vec::new();
            let mut round = 0u64;
            while eval.len() < cfg.n_eval && round < 200 {
                let batch = generate_suite(SuiteKind::Iqa, &scfg, Split::Seen, cfg.n_eval, seed.wrapping_add(round))?;
                eval.extend(
                    batch
                        .into_iter()
                        .filter(|t| t.kind == TaskKind::Iqa { question: QuestionKind::Contain } && t.hidden_receptacle),
                );
                round += 1;
            }
            eval.truncate(cfg.n_eval);
            for (i, t) in eval.iter_mut().enumerate() {
                t.id = format!("contain-hidden-{i}");
            }
            let ecfg = iqa_eval(cfg, cfg.eps, seed);
            arms.eval(a, &iqa_hmn(la), &eval, Split::Seen, None, &ecfg);
            arms.eval(b, &iqa_hmn(lb), &eval, Split::Seen, None, &ecfg);
            let score = |o: &[EpisodeOutcome]| o.iter().map(|x| f64::from(u8::from(x.success))).collect::<Vec<_>>();
            let ci: Interval =
                paired_bootstrap(&score(&arms.arms[0].outcomes), &score(&arms.arms[1].outcomes), cfg.resamples, seed ^ 0xB007);
            summary.insert("diff.mean".into(), ci.mean);
            summary.insert("diff.ci_lo".into(), ci.lo);
            summary.insert("diff.ci_hi".into(), ci.hi);
        }
    }
    Ok(Report {
        version: REPORT_VERSION.into(),
        design: design.clone(),
        config: cfg.clone(),
        config_hash: config_hash(&(design, cfg)),
        seeds: vec![seed],
        arms: arms.arms,
        diff: lib_diff,
        summary,
    })
}

fn split_str(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Seen => "seen",
        Split::Unseen => "unseen",
    }
}

/// Signatures withheld from full training: the `n` with the most procedure
/// calls (ties by id), or `n` drawn at random.
pub fn held_out_signatures(train: &[TaskSpec], strategy: FewShotStrategy, n: usize, seed: u64) -> BTreeSet<String> {
    let mut sigs: Vec<(usize, String)> = train
        .iter()
        .map(|t| (t.gold_ae.calls.len(), t.signature.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    match strategy {
        FewShotStrategy::LongestN => sigs.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1))),
        FewShotStrategy::RandomN => sigs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xF5)),
    }
    let mut out = BTreeSet::new();
    for (_, s) in sigs {
        if out.len() == n {
            break;
        }
        out.insert(s);
    }
    out
}

/// Training set with at most `shots` examples of each held-out signature.
pub fn cap_shots(train: &[TaskSpec], held: &BTreeSet<String>, shots: usize, seed: u64) -> Vec<TaskSpec> {
    let mut order: Vec<&TaskSpec> = train.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5407));
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for t in order {
        if held.contains(&t.signature) {
            let c = seen.entry(&t.signature).or_default();
            if *c >= shots {
                continue;
            }
            *c += 1;
        }
        out.push(t.clone());
    }
    out
}
