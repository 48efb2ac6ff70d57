//! Reactive baseline: one atomic action (plus one pointed-to argument) per
//! step, predicted from the instruction, the last few actions and the
//! current observation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Episode;
use crate::learn::{ngram_features, LearnError, Pointer, Softmax, TrainConfig};
use crate::planner::{class_mentions, Instruction};
use crate::world::{catalog, ActionError, AtomicAction, Location, Observation, SceneState};

pub const STOP_TOKEN: &str = "stop";
pub const ANSWER_PREFIX: &str = "answer=";
const LAST_K: usize = 3;

/// Which objects the pointer may select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Every object in the scene.
    All,
    /// Receptacles only (question answering).
    Receptacles,
}

/// Candidate ids ordered near-to-far from the agent's current position
/// (by pre-searched interaction pose), ties by id.
pub fn candidates(ep: &Episode, mode: CandidateMode) -> Vec<String> {
    let me = ep.scene.agent.cell;
    let mut v: Vec<(f64, String)> = ep
        .scene
        .objects
        .values()
        .filter(|o| mode == CandidateMode::All || o.attrs.is_receptacle)
        .map(|o| {
            let d = crate::world::navigation_pose(&ep.scene, &ep.map, &o.id)
                .ok()
                .flatten()
                .map_or(f64::INFINITY, |p| p.cell.dist(me));
            (d, o.id.clone())
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    v.into_iter().map(|(_, id)| id).collect()
}

fn action_token(a: &AtomicAction) -> &'static str {
    a.name()
}

fn needs_pointer(token: &str) -> bool {
    !matches!(token, STOP_TOKEN) && !token.starts_with(ANSWER_PREFIX)
}

/// Pointer target of an action: the receptacle for put, else the object.
fn pointer_target(a: &AtomicAction) -> Option<&str> {
    match a {
        AtomicAction::Put { recep, .. } => Some(recep),
        other => other.object_args().first().copied(),
    }
}

fn build_action(token: &str, target: &str, ep: &Episode) -> Result<AtomicAction, ActionError> {
    let obj = target.to_string();
    Ok(match token {
        "navigate" => AtomicAction::Navigate { dest: obj },
        "open_object" => AtomicAction::Open { obj },
        "close_object" => AtomicAction::Close { obj },
        "pickup_object" => AtomicAction::Pickup { obj },
        "toggleon_object" => AtomicAction::ToggleOn { obj },
        "toggleoff_object" => AtomicAction::ToggleOff { obj },
        "slice_object" => AtomicAction::Slice { obj },
        "put_object" => match &ep.scene.inventory {
            Some(h) => AtomicAction::Put { obj: h.clone(), recep: obj },
            None => return Err(ActionError::PreconditionFailed("put with empty hands".into())),
        },
        other => return Err(ActionError::PreconditionFailed(format!("`{other}` is not an executable action"))),
    })
}

/// History kept by the decoder: emitted tokens and their targets.
#[derive(Default)]
struct History {
    tokens: Vec<String>,
    targets: Vec<Option<String>>,
    /// Distinct instance ids detected so far, per class.
    seen: BTreeMap<String, BTreeSet<String>>,
}

impl History {
    fn observe(&mut self, obs: &Observation) {
        for d in &obs.detections {
            self.seen.entry(d.class_name.clone()).or_default().insert(d.id.clone());
        }
    }

    fn seen_count(&self, class: &str) -> usize {
        self.seen.get(class).map_or(0, BTreeSet::len)
    }

    fn push(&mut self, token: &str, target: Option<&str>) {
        self.tokens.push(token.to_string());
        self.targets.push(target.map(str::to_string));
    }

    fn last_target(&self) -> Option<&str> {
        self.targets.last().and_then(|t| t.as_deref())
    }

    fn last_nav(&self) -> Option<&str> {
        self.tokens
            .iter()
            .zip(&self.targets)
            .rev()
            .find(|(t, _)| t.as_str() == "navigate")
            .and_then(|(_, x)| x.as_deref())
    }
}

fn step_features(q: &Instruction, mentions: &[&str], scene: &SceneState, cands: &[String], obs: &Observation, hist: &History) -> Vec<String> {
    let mut f = vec!["bias".to_string()];
    let ng = ngram_features(&q.tokens);
    let last: Vec<&str> = hist.tokens.iter().rev().take(LAST_K).map(String::as_str).collect();
    for (j, t) in last.iter().enumerate() {
        f.push(format!("last{j}={t}"));
    }
    let l0 = last.first().copied().unwrap_or("<s>");
    let l1 = last.get(1).copied().unwrap_or("<s>");
    f.push(format!("l0={l0}&l1={l1}"));
    for g in &ng {
        f.push(format!("l0={l0}&{g}"));
    }
    f.extend(ng);
    for d in &obs.detections {
        f.push(format!("obs={}", d.class_name));
    }
    for (r, m) in mentions.iter().enumerate().take(3) {
        if obs.detections.iter().any(|d| d.class_name == *m) {
            f.push(format!("vis_m{r}"));
            f.push(format!("l0={l0}&vis_m{r}"));
        }
    }
    // visible state of the last target
    if let Some(t) = hist.last_target() {
        let cue = match obs.find(t) {
            Some(d) => match d.open {
                Some(true) => "open",
                Some(false) => "closed",
                None => "fixed",
            },
            None => "unseen",
        };
        f.push(format!("l0={l0}&tgt={cue}"));
        for (r, m) in mentions.iter().enumerate().take(1) {
            let inside = scene.contents(t).any(|o| o.class_name == *m && obs.find(&o.id).is_some());
            f.push(format!("l0={l0}&tgt={cue}&m{r}_inside={inside}"));
        }
    }
    // progress through the candidate list
    let unvisited = |class: Option<&str>| {
        cands
            .iter()
            .filter(|c| class.is_none_or(|k| scene.class_of(c) == Some(k)))
            .filter(|c| !hist.targets.iter().any(|t| t.as_deref() == Some(c.as_str())))
            .count()
            .min(3)
    };
    let left = unvisited(None);
    f.push(format!("left={left}"));
    f.push(format!("l0={l0}&left={left}"));
    for (r, m) in mentions.iter().enumerate().take(2) {
        if catalog::is_receptacle(m) {
            let k = unvisited(Some(m));
            f.push(format!("left_m{r}={k}"));
            f.push(format!("l0={l0}&left_m{r}={k}"));
        }
    }
    for (r, m) in mentions.iter().enumerate().take(2) {
        let n = hist.seen_count(m).min(4);
        f.push(format!("nseen_m{r}={n}"));
        f.push(format!("l0={l0}&nseen_m{r}={n}"));
    }
    let mut done: Vec<&str> = hist.tokens.iter().map(String::as_str).filter(|t| *t != "navigate").collect();
    done.sort_unstable();
    done.dedup();
    for d in &done {
        f.push(format!("done={d}"));
        f.push(format!("l0={l0}&done={d}"));
    }
    let puts = hist.tokens.iter().filter(|t| t.as_str() == "put_object").count().min(4);
    f.push(format!("l0={l0}&nput={puts}"));
    for g in ngram_features(&q.tokens) {
        f.push(format!("l0={l0}&nput={puts}&{g}"));
    }
    match &obs.held_class {
        Some(h) => {
            f.push(format!("held={h}"));
            if let Some(r) = mentions.iter().position(|m| m == h) {
                f.push(format!("held_m{r}"));
                f.push(format!("l0={l0}&held_m{r}"));
            }
        }
        None => {
            f.push("held_none".into());
            f.push(format!("l0={l0}&held_none"));
        }
    }
    f
}

/// Hand state relative to the instruction: empty, a mentioned class
/// (by mention rank), the knife, or something else.
fn hand_state(ep: &Episode, mentions: &[&str]) -> String {
    match ep.scene.inventory.as_deref().and_then(|h| ep.scene.class_of(h)) {
        None => "none".into(),
        Some(c) => match mentions.iter().position(|m| *m == c) {
            Some(r) => format!("m{}", r.min(3)),
            None if c == catalog::KNIFE => "knife".into(),
            None => "other".into(),
        },
    }
}

/// Visible state of the held object (temperature and cleanliness are not
/// visible).
fn held_state(ep: &Episode) -> &'static str {
    match ep.scene.inventory.as_deref().and_then(|h| ep.scene.object(h)) {
        None => "-",
        Some(o) if o.attrs.is_sliced => "sliced",
        Some(_) => "whole",
    }
}

#[allow(clippy::too_many_arguments)]
fn candidate_features(
    q: &Instruction,
    token: &str,
    mentions: &[&str],
    ep: &Episode,
    obs: &Observation,
    cands: &[String],
    i: usize,
    hist: &History,
) -> Vec<String> {
    let id = &cands[i];
    let o = &ep.scene.objects[id];
    let c = o.class_name.as_str();
    let a = token;
    let kind = match catalog::lookup(c).map(|s| s.kind) {
        Some(catalog::ClassKind::Receptacle) => "recep",
        Some(catalog::ClassKind::Item) => "item",
        _ => "fixture",
    };
    let mut f = vec![format!("a={a}&c={c}"), format!("a={a}&kind={kind}"), format!("a={a}&rank={}", i.min(6))];
    if let Some(r) = mentions.iter().position(|m| *m == c) {
        f.push(format!("a={a}&m{}", r.min(3)));
        f.push(format!("a={a}&mentioned"));
    }
    let container = ep.scene.container_of(id);
    if let Some(r) = container.and_then(|r| ep.scene.class_of(r)).and_then(|rc| mentions.iter().position(|m| *m == rc)) {
        f.push(format!("a={a}&in_m{}", r.min(3)));
    }
    if let Some(last) = hist.last_target() {
        if last == id {
            f.push(format!("a={a}&is_last"));
        }
        if container == Some(last) {
            f.push(format!("a={a}&in_last"));
        }
        if ep.scene.container_of(last) == Some(id.as_str()) {
            f.push(format!("a={a}&holds_last"));
        }
    }
    let last_nav_idx = hist.last_nav().and_then(|n| cands.iter().position(|c| c == n));
    let after = last_nav_idx.map_or(0, |k| k + 1);
    if i == after {
        f.push(format!("a={a}&next"));
    }
    if i >= after && !cands[after.min(cands.len())..i].iter().any(|x| ep.scene.class_of(x) == Some(c)) {
        f.push(format!("a={a}&next_of_class"));
    }
    if ep.scene.inventory.as_deref() == Some(id.as_str()) {
        f.push(format!("a={a}&held"));
    }
    if o.attrs.openable {
        f.push(format!("a={a}&open={}", o.attrs.is_open));
    }
    if obs.find(id).is_some() {
        f.push(format!("a={a}&visible"));
    }
    // phase: hand contents, held-object state and what has been done so far
    let hs = hand_state(ep, mentions);
    let st = held_state(ep);
    let mention = mentions.iter().position(|m| *m == c).map_or("u".to_string(), |r| format!("m{}", r.min(3)));
    f.push(format!("a={a}&hs={hs}&{mention}"));
    f.push(format!("a={a}&hs={hs}&c={c}"));
    f.push(format!("a={a}&hs={hs}&st={st}&c={c}"));
    f.push(format!("a={a}&hs={hs}&st={st}&{mention}"));
    if let Some(r) = container.and_then(|r| ep.scene.class_of(r)).and_then(|rc| mentions.iter().position(|m| *m == rc)) {
        f.push(format!("a={a}&hs={hs}&{mention}&in_m{}", r.min(3)));
    }
    let mut done: Vec<&str> = hist.tokens.iter().map(String::as_str).filter(|t| *t != "navigate").collect();
    done.sort_unstable();
    done.dedup();
    for d in done {
        f.push(format!("a={a}&hs={hs}&done={d}&{mention}"));
        f.push(format!("a={a}&hs={hs}&done={d}&c={c}"));
    }
    if hist.targets.iter().any(|t| t.as_deref() == Some(id.as_str())) {
        f.push(format!("a={a}&hs={hs}&visited"));
    }
    for w in &q.tokens {
        f.push(format!("a={a}&c={c}&w={w}"));
    }
    f
}

/// One supervised episode: instruction, scene and the gold atomic trace,
/// optionally followed by an answer token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactiveEpisode {
    pub instruction: Instruction,
    pub scene: SceneState,
    pub trace: Vec<AtomicAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("no training episodes")]
    EmptyEpisodes,
    #[error("gold step {index} of episode {episode} cannot be replayed: {reason}")]
    NonReplayable { episode: usize, index: usize, reason: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone)]
pub struct ReactiveModel {
    pub action: Softmax,
    pub pointer: Pointer,
    pub mode: CandidateMode,
}

impl ReactiveModel {
    pub fn to_json(&self) -> String {
        let sub = |t: String| serde_json::from_str::<serde_json::Value>(&t).expect("valid json");
        serde_json::json!({
            "kind": "reactive",
            "mode": self.mode,
            "action": sub(self.action.to_json()),
            "pointer": sub(self.pointer.to_json()),
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<ReactiveModel, LearnError> {
        let bad = |m: String| LearnError::DimensionMismatch(m);
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if v["kind"] != "reactive" {
            return Err(bad("not a reactive model".into()));
        }
        Ok(ReactiveModel {
            action: Softmax::from_json(&v["action"].to_string())?,
            pointer: Pointer::from_json(&v["pointer"].to_string())?,
            mode: serde_json::from_value(v["mode"].clone()).map_err(|e| bad(e.to_string()))?,
        })
    }
}

/// Fit the action and pointer models by teacher forcing along gold traces.
pub fn train_reactive(
    episodes: &[ReactiveEpisode],
    mode: CandidateMode,
    cfg: &TrainConfig,
) -> Result<ReactiveModel, BaselineError> {
    if episodes.is_empty() {
        return Err(BaselineError::EmptyEpisodes);
    }
    let mut act_data = Vec::new();
    let mut groups = Vec::new();
    for (ei, e) in episodes.iter().enumerate() {
        let mut ep = Episode::new(e.scene.clone());
        let cands = candidates(&ep, mode);
        let mentions: Vec<&str> = class_mentions(&e.instruction.tokens).into_iter().map(|(_, c)| c).collect();
        let mut hist = History::default();
        for (i, a) in e.trace.iter().enumerate() {
            let obs = ep.perceive();
            hist.observe(&obs);
            let token = action_token(a);
            act_data.push((step_features(&e.instruction, &mentions, &ep.scene, &cands, &obs, &hist), token.to_string()));
            let target = pointer_target(a);
            if let Some(gi) = target.and_then(|t| cands.iter().position(|c| c == t)) {
                let cf = (0..cands.len()).map(|k| candidate_features(&e.instruction, token, &mentions, &ep, &obs, &cands, k, &hist)).collect();
                groups.push((cf, gi));
            }
            ep.step(a).map_err(|err| BaselineError::NonReplayable { episode: ei, index: i, reason: err.to_string() })?;
            hist.push(token, target);
        }
        let obs = ep.perceive();
        hist.observe(&obs);
        let last = match &e.answer {
            Some(ans) => format!("{ANSWER_PREFIX}{ans}"),
            None => STOP_TOKEN.to_string(),
        };
        act_data.push((step_features(&e.instruction, &mentions, &ep.scene, &cands, &obs, &hist), last));
    }
    let action = Softmax::train(&act_data, cfg)?;
    let pointer = if groups.is_empty() { Pointer::train(&[(vec![vec![]], 0)], cfg)? } else { Pointer::train(&groups, cfg)? };
    Ok(ReactiveModel { action, pointer, mode })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactiveRun {
    /// Decoded tokens, including invalid ones.
    pub tokens: Vec<String>,
    pub answer: Option<String>,
    pub stopped: bool,
    /// Steps whose action failed or could not be formed.
    pub invalid: usize,
}

/// Greedy decoding until STOP, an answer, or `budget` decoded steps.
pub fn run_reactive(model: &ReactiveModel, q: &Instruction, ep: &mut Episode, budget: usize) -> ReactiveRun {
    let cands = candidates(ep, model.mode);
    let mentions: Vec<&str> = class_mentions(&q.tokens).into_iter().map(|(_, c)| c).collect();
    let mut hist = History::default();
    let mut run = ReactiveRun::default();
    while run.tokens.len() < budget {
        let obs = ep.perceive();
        hist.observe(&obs);
        let token = model.action.predict(&step_features(q, &mentions, &ep.scene, &cands, &obs, &hist)).to_string();
        run.tokens.push(token.clone());
        if let Some(ans) = token.strip_prefix(ANSWER_PREFIX) {
            run.answer = Some(ans.to_string());
            break;
        }
        if token == STOP_TOKEN {
            run.stopped = true;
            break;
        }
        if !needs_pointer(&token) || cands.is_empty() {
            run.invalid += 1;
            hist.push(&token, None);
            continue;
        }
        let cf: Vec<Vec<String>> =
            (0..cands.len()).map(|k| candidate_features(q, &token, &mentions, ep, &obs, &cands, k, &hist)).collect();
        let i = model.pointer.choose(&cf).expect("non-empty candidates");
        debug_assert!(i < cands.len());
        let target = cands[i].clone();
        match build_action(&token, &target, ep) {
            Ok(a) => {
                if ep.step(&a).is_err() {
                    run.invalid += 1;
                }
            }
            Err(e) => {
                let a = AtomicAction::Navigate { dest: target.clone() };
                ep.record_failure(&a, e);
                run.invalid += 1;
            }
        }
        hist.push(&token, Some(&target));
    }
    run
}

/// A step where teacher-forced decoding disagrees with the gold trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMismatch {
    pub index: usize,
    pub gold: String,
    pub predicted: String,
}

/// Teacher-forced replay of a gold episode, reporting every step whose
/// predicted token or pointed-to target differs from the gold one.
pub fn teacher_forced_mismatches(model: &ReactiveModel, e: &ReactiveEpisode) -> Vec<StepMismatch> {
    let mut ep = Episode::new(e.scene.clone());
    let cands = candidates(&ep, model.mode);
    let mentions: Vec<&str> = class_mentions(&e.instruction.tokens).into_iter().map(|(_, c)| c).collect();
    let mut hist = History::default();
    let mut out = Vec::new();
    let render = |t: &str, x: Option<&str>| match x {
        Some(x) => format!("{t}({x})"),
        None => t.to_string(),
    };
    for (i, a) in e.trace.iter().enumerate() {
        let obs = ep.perceive();
        hist.observe(&obs);
        let token = action_token(a);
        let pred = model.action.predict(&step_features(&e.instruction, &mentions, &ep.scene, &cands, &obs, &hist)).to_string();
        let target = pointer_target(a);
        let pred_target = if needs_pointer(&pred) && !cands.is_empty() {
            let cf: Vec<Vec<String>> =
                (0..cands.len()).map(|k| candidate_features(&e.instruction, &pred, &mentions, &ep, &obs, &cands, k, &hist)).collect();
            model.pointer.choose(&cf).map(|k| cands[k].as_str())
        } else {
            None
        };
        if pred != token || pred_target != target {
            out.push(StepMismatch { index: i, gold: render(token, target), predicted: render(&pred, pred_target) });
        }
        if ep.step(a).is_err() {
            break;
        }
        hist.push(token, target);
    }
    let obs = ep.perceive();
    hist.observe(&obs);
    let last = match &e.answer {
        Some(ans) => format!("{ANSWER_PREFIX}{ans}"),
        None => STOP_TOKEN.to_string(),
    };
    let pred = model.action.predict(&step_features(&e.instruction, &mentions, &ep.scene, &cands, &obs, &hist)).to_string();
    if pred != last {
        out.push(StepMismatch { index: e.trace.len(), gold: last, predicted: pred });
    }
    out
}

/// Near-to-far question-answering trace: visit the relevant receptacles,
/// opening closed ones, and stop early once an existence question is
/// settled.
pub fn iqa_gold_trace(scene: &SceneState, kind: &str, obj: &str, recep: Option<&str>) -> (Vec<AtomicAction>, String) {
    let ep = Episode::new(scene.clone());
    let mut trace = Vec::new();
    let mut count = 0;
    for r in candidates(&ep, CandidateMode::Receptacles) {
        let rc = scene.class_of(&r).unwrap_or_default();
        if recep.is_some_and(|want| want != rc) {
            continue;
        }
        trace.push(AtomicAction::Navigate { dest: r.clone() });
        let closed = scene.objects[&r].attrs.openable && !scene.objects[&r].attrs.is_open;
        if closed {
            trace.push(AtomicAction::Open { obj: r.clone() });
            trace.push(AtomicAction::Close { obj: r.clone() });
        }
        let here = scene
            .objects
            .values()
            .any(|o| o.class_name == obj && matches!(&o.location, Location::In { receptacle } if *receptacle == r));
        if here {
            count += 1;
            if kind != "count" {
                return (trace, "yes".into());
            }
        }
    }
    let ans = if kind == "count" { count.to_string() } else { "no".into() };
    (trace, ans)
}
