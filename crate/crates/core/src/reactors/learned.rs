//! Learned reactors: softmax models over sparse situational features, plus
//! label induction from gold atomic traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::*;
use crate::learn::{ngram_features, LearnError, Softmax, TrainConfig};
use crate::world::{catalog, AtomicAction, Observation, SceneState};

/// Attribute classes for the multiclass AttrChecker.
pub const ATTR_NOT_OPENABLE: &str = "not_openable";
pub const ATTR_OPEN: &str = "open";
pub const ATTR_CLOSED: &str = "closed";

const LAST_K: usize = 3;

fn attr_label(openable: bool, open: bool) -> &'static str {
    match (openable, open) {
        (false, _) => ATTR_NOT_OPENABLE,
        (true, true) => ATTR_OPEN,
        (true, false) => ATTR_CLOSED,
    }
}

fn attr_from_label(label: &str) -> Value {
    match label {
        ATTR_OPEN => attr_record(true, true),
        ATTR_CLOSED => attr_record(true, false),
        _ => attr_record(false, false),
    }
}

/// Features shared by every reactor: detected classes, the largest visible
/// receptacle, instruction n-grams, and the last few action names.
fn context_features(ep: &Episode, obs: &Observation) -> Vec<String> {
    let mut f = vec!["bias".to_string()];
    for d in &obs.detections {
        f.push(format!("det={}", d.class_name));
    }
    let big = obs
        .detections
        .iter()
        .filter(|d| catalog::is_receptacle(&d.class_name))
        .max_by(|a, b| a.bbox.area().total_cmp(&b.bbox.area()).then_with(|| b.id.cmp(&a.id)));
    if let Some(d) = big {
        f.push(format!("big={}", d.class_name));
    }
    if let Some(h) = &obs.held_class {
        f.push(format!("held={h}"));
    }
    f.extend(ngram_features(&ep.instruction));
    let done: Vec<&str> = ep.log.iter().rev().filter(|r| r.error.is_none()).take(LAST_K).map(|r| r.action.name()).collect();
    for (j, n) in done.iter().enumerate() {
        f.push(format!("last{j}={n}"));
    }
    f
}

pub fn attr_features(ep: &Episode, obs: &Observation, target: &str) -> Vec<String> {
    let mut f = context_features(ep, obs);
    let class = ep.scene.class_of(target).unwrap_or("?");
    f.push(format!("arg0={class}"));
    let cue = match obs.find(target).map(|d| d.open) {
        Some(Some(true)) => "open",
        Some(Some(false)) => "closed",
        Some(None) => "none",
        None => "unseen",
    };
    f.push(format!("cue={cue}"));
    f.push(format!("arg0={class}&cue={cue}"));
    f
}

pub fn refinder_features(ep: &Episode, obs: &Observation, obj_class: &str) -> Vec<String> {
    let mut f = context_features(ep, obs);
    f.push(format!("arg0={obj_class}"));
    f
}

pub fn rel_features(ep: &Episode, obs: &Observation, obj_class: &str, recep: &str) -> Vec<String> {
    let mut f = context_features(ep, obs);
    let rclass = ep.scene.class_of(recep).unwrap_or("?");
    f.push(format!("arg0={obj_class}"));
    f.push(format!("arg1={rclass}"));
    f.push(format!("pair={obj_class}|{rclass}"));
    let rbox = obs.find(recep).map(|d| d.bbox);
    let best = obs
        .detections
        .iter()
        .filter(|d| d.class_name == obj_class && d.id != recep)
        .filter_map(|d| rbox.map(|r| d.bbox.intersection(&r) / d.bbox.area().max(1e-12)))
        .fold(None::<f64>, |m, v| Some(m.map_or(v, |m| m.max(v))));
    let ov = match best {
        None => "none",
        Some(v) if v > 0.7 => "high",
        Some(v) if v > 0.0 => "low",
        Some(_) => "zero",
    };
    f.push(format!("ov={ov}"));
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Instance the label is about.
    pub target: String,
    pub features: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactorLabels {
    pub attr: Vec<LabeledExample>,
    pub refinder: Vec<LabeledExample>,
    pub rel: Vec<LabeledExample>,
}

impl ReactorLabels {
    pub fn extend(&mut self, other: ReactorLabels) {
        self.attr.extend(other.attr);
        self.refinder.extend(other.refinder);
        self.rel.extend(other.rel);
    }

    pub fn len(&self) -> usize {
        self.attr.len() + self.refinder.len() + self.rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One JSON object per line, tagged with the reactor name.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (name, set) in [(CHECK_OBJ_ATTR, &self.attr), (FIND_OBJ_RECEP, &self.refinder), (CHECK_OBJ_RECEP_REL, &self.rel)] {
            for ex in set {
                let v = serde_json::json!({"reactor": name, "target": ex.target, "features": ex.features, "label": ex.label});
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InduceError {
    #[error("trace step {index} ({action}) cannot be replayed: {reason}")]
    NonReplayableTrace { index: usize, action: String, reason: String },
}

/// Replay a gold trace and emit reactor labels at the points where the
/// procedures would have queried them:
/// - every Pickup/Put/Slice involving a receptacle `r` yields an AttrChecker
///   label for `r` in the state right after the preceding navigation, so an
///   `Open(r)` directly before the interaction yields `{openable, closed}`;
/// - a `Close(o)` directly before `Pickup(o)` yields an `open` label for `o`;
/// - containment at Pickup/Slice time yields a ReFinder label `o → class(r)`;
/// - at Pickup, the source receptacle yields an `OBJ_IN_RECEP` RelChecker
///   label and every other visible receptacle a `NOT_IN` one.
pub fn induce_reactor_labels(
    trace: &[AtomicAction],
    scene: &SceneState,
    instruction: &[String],
) -> Result<ReactorLabels, InduceError> {
    let mut ep = Episode::new(scene.clone());
    ep.instruction = instruction.to_vec();
    let mut labels = ReactorLabels::default();
    // State right after the latest navigation: where receptacle queries run.
    let mut after_nav: Option<Episode> = None;
    for (i, action) in trace.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| &trace[j]);
        match action {
            AtomicAction::Pickup { obj } | AtomicAction::Slice { obj } => {
                let q = after_nav.as_ref().unwrap_or(&ep);
                if let Some(r) = ep.scene.container_of(obj).map(str::to_string) {
                    let qobs = q.observe();
                    let o_class = ep.scene.class_of(obj).unwrap_or("?").to_string();
                    let a = &q.scene.object(&r).expect("container exists").attrs;
                    labels.attr.push(LabeledExample {
                        target: r.clone(),
                        features: attr_features(q, &qobs, &r),
                        label: attr_label(a.openable, a.is_open).into(),
                    });
                    labels.refinder.push(LabeledExample {
                        target: obj.clone(),
                        features: refinder_features(q, &qobs, &o_class),
                        label: ep.scene.class_of(&r).unwrap_or("?").into(),
                    });
                    if matches!(action, AtomicAction::Pickup { .. }) {
                        // Relation is checked once the receptacle is accessible.
                        let obs = ep.observe();
                        for d in obs.detections.iter().filter(|d| catalog::is_receptacle(&d.class_name)) {
                            labels.rel.push(LabeledExample {
                                target: d.id.clone(),
                                features: rel_features(&ep, &obs, &o_class, &d.id),
                                label: if d.id == r { OBJ_IN_RECEP } else { NOT_IN }.into(),
                            });
                        }
                    }
                }
                if matches!(prev, Some(AtomicAction::Close { obj: c }) if c == obj) {
                    // The close happened because the item itself was open.
                    let before = replay_prefix(scene, instruction, &trace[..i - 1]);
                    let obs = before.observe();
                    labels.attr.push(LabeledExample {
                        target: obj.clone(),
                        features: attr_features(&before, &obs, obj),
                        label: ATTR_OPEN.into(),
                    });
                }
            }
            AtomicAction::Put { recep, .. } => {
                let q = after_nav.as_ref().unwrap_or(&ep);
                let qobs = q.observe();
                let a = &q.scene.object(recep).map(|o| o.attrs.clone()).unwrap_or_else(|| ep.scene.objects[recep].attrs.clone());
                labels.attr.push(LabeledExample {
                    target: recep.clone(),
                    features: attr_features(q, &qobs, recep),
                    label: attr_label(a.openable, a.is_open).into(),
                });
            }
            _ => {}
        }
        ep.step(action).map_err(|e| InduceError::NonReplayableTrace {
            index: i,
            action: action.to_string(),
            reason: e.to_string(),
        })?;
        if matches!(action, AtomicAction::Navigate { .. }) {
            after_nav = Some(ep.clone());
        }
    }
    Ok(labels)
}

fn replay_prefix(scene: &SceneState, instruction: &[String], prefix: &[AtomicAction]) -> Episode {
    let mut ep = Episode::new(scene.clone());
    ep.instruction = instruction.to_vec();
    for a in prefix {
        let _ = ep.step(a);
    }
    ep
}

/// Multiclass AttrChecker (not_openable / open / closed) with the agent's
/// own open/close actions taking precedence.
pub struct LearnedAttr(pub Arc<Softmax>);

impl Reactor for LearnedAttr {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let Some(id) = obj_arg(CHECK_OBJ_ATTR, args, 0)?.and_then(|o| ep.resolve(o)) else {
            return Ok(attr_record(false, false));
        };
        if let Some(open) = opened_by_agent(ep, &id) {
            return Ok(attr_record(true, open));
        }
        let obs = ep.perceive();
        Ok(attr_from_label(self.0.predict(&attr_features(ep, &obs, &id))))
    }

    fn describe(&self) -> String {
        "learned".into()
    }
}

/// ReFinder restricted to receptacle classes present in the scene.
pub struct LearnedReFinder(pub Arc<Softmax>);

impl LearnedReFinder {
    /// The `n` most likely receptacle classes present in the scene.
    pub fn top_n(&self, ep: &mut Episode, obj_class: &str, n: usize) -> Vec<(String, f64)> {
        let obs = ep.perceive();
        let feats = refinder_features(ep, &obs, obj_class);
        self.0
            .top_n(&feats, self.0.classes.len())
            .into_iter()
            .filter(|(c, _)| ep.scene.instances_of(c).next().is_some())
            .take(n)
            .map(|(c, p)| (c.to_string(), p))
            .collect()
    }
}

impl Reactor for LearnedReFinder {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let Some(obj) = obj_arg(FIND_OBJ_RECEP, args, 0)?.cloned() else { return Ok(Value::None) };
        Ok(match self.top_n(ep, &obj.class, 1).into_iter().next() {
            Some((c, _)) => Value::obj(&c),
            None => Value::None,
        })
    }

    fn describe(&self) -> String {
        "learned".into()
    }
}

pub struct LearnedRel(pub Arc<Softmax>);

impl Reactor for LearnedRel {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let obj = obj_arg(CHECK_OBJ_RECEP_REL, args, 0)?.cloned();
        let recep = obj_arg(CHECK_OBJ_RECEP_REL, args, 1)?.and_then(|r| ep.resolve(r));
        let (Some(obj), Some(recep)) = (obj, recep) else { return Ok(rel_value(false)) };
        let obs = ep.perceive();
        let label = self.0.predict(&rel_features(ep, &obs, &obj.class, &recep));
        Ok(rel_value(label == OBJ_IN_RECEP))
    }

    fn describe(&self) -> String {
        "learned".into()
    }
}

/// Fit a learned implementation for one reactor name.
pub fn train_learned_reactor(
    name: &str,
    data: &[(Vec<String>, String)],
    cfg: &TrainConfig,
) -> Result<Arc<dyn Reactor>, LearnError> {
    let model = Arc::new(Softmax::train(data, cfg)?);
    Ok(match name {
        CHECK_OBJ_ATTR => Arc::new(LearnedAttr(model)),
        CHECK_OBJ_RECEP_REL => Arc::new(LearnedRel(model)),
        _ => Arc::new(LearnedReFinder(model)),
    })
}

/// The trained reactor models of one experiment arm.
#[derive(Debug, Clone, Default)]
pub struct ReactorModels {
    pub attr: Option<Arc<Softmax>>,
    pub refinder: Option<Arc<Softmax>>,
    pub rel: Option<Arc<Softmax>>,
}

#[derive(Serialize, Deserialize)]
struct ModelsJson {
    version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attr: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refinder: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rel: Option<serde_json::Value>,
}

fn pairs(set: &[LabeledExample]) -> Vec<(Vec<String>, String)> {
    set.iter().map(|e| (e.features.clone(), e.label.clone())).collect()
}

impl ReactorModels {
    /// Fit every reactor with at least one label; sets with a single class
    /// are skipped (nothing to discriminate).
    pub fn train(labels: &ReactorLabels, cfg: &TrainConfig) -> ReactorModels {
        let fit = |set: &[LabeledExample]| match Softmax::train(&pairs(set), cfg) {
            Ok(m) if m.classes.len() > 1 => Some(Arc::new(m)),
            _ => None,
        };
        ReactorModels { attr: fit(&labels.attr), refinder: fit(&labels.refinder), rel: fit(&labels.rel) }
    }

    /// `base` with every trained model bound over its reactor name(s).
    pub fn registry(&self, base: Registry) -> Registry {
        let mut r = base;
        if let Some(m) = &self.attr {
            r.bind(CHECK_OBJ_ATTR, Arc::new(LearnedAttr(m.clone())));
        }
        if let Some(m) = &self.refinder {
            r.bind(FIND_OBJ_RECEP, Arc::new(LearnedReFinder(m.clone())));
            r.bind(FIND_RECEP, Arc::new(LearnedReFinder(m.clone())));
        }
        if let Some(m) = &self.rel {
            r.bind(CHECK_OBJ_RECEP_REL, Arc::new(LearnedRel(m.clone())));
        }
        r
    }

    pub fn to_json(&self) -> String {
        let enc = |m: &Option<Arc<Softmax>>| m.as_ref().map(|m| serde_json::from_str(&m.to_json()).expect("valid json"));
        serde_json::to_string(&ModelsJson {
            version: "reactors/1".into(),
            attr: enc(&self.attr),
            refinder: enc(&self.refinder),
            rel: enc(&self.rel),
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<ReactorModels, LearnError> {
        let j: ModelsJson = serde_json::from_str(text).map_err(|e| LearnError::DimensionMismatch(e.to_string()))?;
        let dec = |v: Option<serde_json::Value>| -> Result<Option<Arc<Softmax>>, LearnError> {
            v.map(|v| Softmax::from_json(&v.to_string()).map(Arc::new)).transpose()
        };
        Ok(ReactorModels { attr: dec(j.attr)?, refinder: dec(j.refinder)?, rel: dec(j.rel)? })
    }
}
