//! Instruction → executable procedure: regex templates for questions, a
//! learned greedy decoder for household instructions, and subgoal-sequence
//! label induction.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{ngram_features, tokenize, LearnError, Pointer, Softmax, TrainConfig};
use crate::procir::{Call, ExecutableProcedure, Library};
use crate::world::{catalog, ATOMIC_NAMES};

pub const STOP: &str = "<stop>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
}

impl Instruction {
    pub fn new(text: &str) -> Instruction {
        Instruction { text: text.to_string(), tokens: tokenize(text), template_id: None }
    }

    pub fn with_template(text: &str, template_id: &str) -> Instruction {
        Instruction { template_id: Some(template_id.to_string()), ..Instruction::new(text) }
    }
}

/// Catalog class a token names, accepting regular plurals.
pub fn token_class(tok: &str) -> Option<&'static str> {
    let mut forms = vec![tok.to_string()];
    if let Some(s) = tok.strip_suffix("ies") {
        forms.push(format!("{s}y"));
    }
    if let Some(s) = tok.strip_suffix("ves") {
        forms.push(format!("{s}fe"));
        forms.push(format!("{s}f"));
    }
    if let Some(s) = tok.strip_suffix("es") {
        forms.push(s.to_string());
    }
    if let Some(s) = tok.strip_suffix('s') {
        forms.push(s.to_string());
    }
    forms.iter().find_map(|f| catalog::lookup(f).map(|c| c.name))
}

/// `(token position, class)` for every token naming a class.
pub fn class_mentions(tokens: &[String]) -> Vec<(usize, &'static str)> {
    tokens.iter().enumerate().filter_map(|(i, t)| token_class(t).map(|c| (i, c))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("question does not match any template: `{0}`")]
    UnmatchedTemplate(String),
    #[error("gold token `{0}` is outside the planner vocabulary")]
    OOVGoldToken(String),
    #[error("no training pairs")]
    EmptyTraining,
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("subgoal sequence has no procedure annotation: {0}")]
    UnmappedSequence(String),
}

struct Template {
    id: &'static str,
    re: Regex,
    proc_name: &'static str,
    /// Captures appear as (receptacle, object).
    swap: bool,
}

fn templates() -> &'static [Template] {
    static T: OnceLock<Vec<Template>> = OnceLock::new();
    T.get_or_init(|| {
        let t = |id, pat: &str, proc_name| Template { id, re: Regex::new(pat).expect("valid template"), proc_name, swap: false };
        vec![
            t("contain", r"^(?:is|are) there (?:an? |any )?(\w+) in (?:the |a |an )?(\w+)(?: in the room)?\s*\?$", "udp_check_contain"),
            Template { swap: true, ..t("contain", r"^does (?:the |a |an )?(\w+) (?:contain|have|hold) (?:an? |any )?(\w+)(?: in it)?\s*\?$", "udp_check_contain") },
            t("count", r"^how many (\w+) are (?:there|in the room)(?: in the room)?\s*\?$", "udp_count_obj"),
            t("count", r"^(?:what is the number of|count the) (\w+)(?: in the room)?\s*\??$", "udp_count_obj"),
            t("exist", r"^(?:is|are) there (?:an? |any )?(\w+)(?: (?:somewhere )?in the room| anywhere)?\s*\?$", "udp_check_obj_exist"),
            t("exist", r"^(?:does|do) (?:the room|this room) (?:contain|have) (?:an? |any )?(\w+)\s*\?$", "udp_check_obj_exist"),
        ]
    })
}

/// Map a question to one of the three question-answering procedures.
/// Returns the template id alongside the procedure.
pub fn rule_plan_with_id(q: &Instruction) -> Result<(&'static str, ExecutableProcedure), PlannerError> {
    let text = q.tokens.join(" ");
    for t in templates() {
        let Some(caps) = t.re.captures(&text) else { continue };
        let words: Vec<&str> = caps.iter().skip(1).flatten().map(|m| m.as_str()).collect();
        let classes: Option<Vec<&str>> = words.iter().map(|w| token_class(w)).collect();
        let Some(mut classes) = classes else { continue };
        if t.swap {
            classes.reverse();
        }
        return Ok((t.id, ExecutableProcedure::new(vec![Call::new(t.proc_name, &classes)])));
    }
    Err(PlannerError::UnmatchedTemplate(q.text.clone()))
}

pub fn rule_plan(q: &Instruction) -> Result<ExecutableProcedure, PlannerError> {
    rule_plan_with_id(q).map(|(_, p)| p)
}

// ---------------------------------------------------------------------------
// Learned planner

#[derive(Debug, Clone)]
pub struct PlannerModel {
    /// Function decoder over library procedure names and STOP.
    pub func: Softmax,
    /// Argument slot scorer over catalog classes.
    pub arg: Pointer,
    /// Procedure name → arity.
    pub arity: Vec<(String, usize)>,
    pub max_len: usize,
}

fn step_features(tokens: &[String], prefix: &[Call]) -> Vec<String> {
    let mut f = vec!["bias".to_string()];
    let ng = ngram_features(tokens);
    f.extend(ng.iter().cloned());
    f.push(format!("step={}", prefix.len().min(6)));
    let p1 = prefix.last().map_or("<s>", |c| c.name.as_str());
    let p2 = if prefix.len() >= 2 { prefix[prefix.len() - 2].name.as_str() } else { "<s>" };
    f.push(format!("p1={p1}"));
    f.push(format!("p2={p2}&p1={p1}"));
    let same = prefix.iter().filter(|c| c.name == p1).count();
    f.push(format!("p1={p1}&n={}", same.min(4)));
    for g in &ng {
        f.push(format!("p1={p1}&{g}"));
    }
    for c in prefix {
        f.push(format!("has={}", c.name));
    }
    f
}

/// Features of class `c` as argument `slot` of `func`.
fn slot_features(tokens: &[String], mentions: &[(usize, &str)], prefix: &[Call], func: &str, slot: usize, c: &str) -> Vec<String> {
    let key = format!("{func}/{slot}");
    let mut f = vec![format!("{key}&c={c}")];
    let kind = match catalog::lookup(c).map(|s| s.kind) {
        Some(catalog::ClassKind::Receptacle) => "recep",
        Some(catalog::ClassKind::Item) => "item",
        _ => "fixture",
    };
    f.push(format!("{key}&kind={kind}"));
    let distinct: Vec<&str> = mentions.iter().fold(Vec::new(), |mut v, (_, m)| {
        if !v.contains(m) {
            v.push(*m);
        }
        v
    });
    match mentions.iter().find(|(_, m)| *m == c) {
        Some((pos, _)) => {
            f.push("mentioned".into());
            f.push(format!("{key}&mentioned"));
            let rank = distinct.iter().position(|m| *m == c).unwrap_or(0);
            f.push(format!("{key}&rank={}", rank.min(3)));
            if rank + 1 == distinct.len() {
                f.push(format!("{key}&rank=last"));
            }
            f.push(format!("{key}&kind={kind}&mentioned"));
            let prev = |k: usize| if *pos >= k { tokens[pos - k].as_str() } else { "<s>" };
            f.push(format!("{key}&prev={}", prev(1)));
            f.push(format!("{key}&prev2={}", prev(2)));
        }
        None => f.push(format!("{key}&c={c}&unmentioned")),
    }
    if let Some(last) = prefix.last() {
        for (j, a) in last.args.iter().enumerate() {
            if a == c {
                f.push(format!("{key}&same_prev_arg{j}"));
            }
        }
    }
    if prefix.iter().any(|p| p.args.iter().any(|a| a == c)) {
        f.push(format!("{key}&used_before"));
    }
    f
}

/// Callable names with their arity: library procedures plus `atomic_<name>`
/// for every atomic action taking arguments.
pub fn planner_arity(lib: &Library) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = lib.procs.iter().map(|p| (p.name.clone(), p.params.len())).collect();
    v.extend(ATOMIC_NAMES.iter().filter(|(_, a)| *a > 0).map(|(n, a)| (format!("atomic_{n}"), *a)));
    v
}

fn arg_candidates() -> Vec<&'static str> {
    catalog::class_names().collect()
}

impl PlannerModel {
    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.arity.iter().find(|(n, _)| n == name).map(|(_, a)| *a)
    }

    /// Greedy decode: function, then each argument slot, until STOP.
    pub fn plan(&self, q: &Instruction) -> ExecutableProcedure {
        let mentions = class_mentions(&q.tokens);
        let cands = arg_candidates();
        let mut calls: Vec<Call> = Vec::new();
        while calls.len() < self.max_len {
            let feats = step_features(&q.tokens, &calls);
            let Some(name) = self.func.predict_masked(&feats, &|c| c == STOP || self.arity_of(c).is_some()) else {
                break;
            };
            if name == STOP {
                break;
            }
            let arity = self.arity_of(name).unwrap_or(0);
            let mut args = Vec::with_capacity(arity);
            for slot in 0..arity {
                let cf: Vec<Vec<String>> =
                    cands.iter().map(|c| slot_features(&q.tokens, &mentions, &calls, name, slot, c)).collect();
                let i = self.arg.choose(&cf).unwrap_or(0);
                args.push(cands[i].to_string());
            }
            calls.push(Call { name: name.to_string(), args });
        }
        ExecutableProcedure::new(calls)
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "version": "planner/1",
            "max_len": self.max_len,
            "arity": self.arity,
            "func": serde_json::from_str::<serde_json::Value>(&self.func.to_json()).expect("json"),
            "arg": serde_json::from_str::<serde_json::Value>(&self.arg.to_json()).expect("json"),
        });
        v.to_string()
    }

    pub fn from_json(text: &str) -> Result<PlannerModel, LearnError> {
        let bad = |e: String| LearnError::DimensionMismatch(e);
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let arity: Vec<(String, usize)> = serde_json::from_value(v["arity"].clone()).map_err(|e| bad(e.to_string()))?;
        let max_len = v["max_len"].as_u64().ok_or_else(|| bad("max_len".into()))? as usize;
        Ok(PlannerModel {
            func: Softmax::from_json(&v["func"].to_string())?,
            arg: Pointer::from_json(&v["arg"].to_string())?,
            arity,
            max_len,
        })
    }
}

/// Fit the decoder on (instruction, gold procedure) pairs. The training
/// optimizer is deterministic, so `seed` only documents the run.
pub fn train_planner(
    pairs: &[(Instruction, ExecutableProcedure)],
    lib: &Library,
    cfg: &TrainConfig,
) -> Result<PlannerModel, PlannerError> {
    if pairs.is_empty() {
        return Err(PlannerError::EmptyTraining);
    }
    let cands = arg_candidates();
    let arity = planner_arity(lib);
    let arity_of = |n: &str| arity.iter().find(|(m, _)| m == n).map(|(_, a)| *a);
    let mut func_data = Vec::new();
    let mut arg_groups = Vec::new();
    let mut max_len = 1;
    for (q, gold) in pairs {
        let mentions = class_mentions(&q.tokens);
        for (i, call) in gold.calls.iter().enumerate() {
            let Some(n) = arity_of(&call.name) else { return Err(PlannerError::OOVGoldToken(call.name.clone())) };
            if n != call.args.len() {
                return Err(PlannerError::OOVGoldToken(call.to_string()));
            }
            let prefix = &gold.calls[..i];
            func_data.push((step_features(&q.tokens, prefix), call.name.clone()));
            for (slot, a) in call.args.iter().enumerate() {
                let Some(gi) = cands.iter().position(|c| c == a) else {
                    return Err(PlannerError::OOVGoldToken(a.clone()));
                };
                let cf = cands.iter().map(|c| slot_features(&q.tokens, &mentions, prefix, &call.name, slot, c)).collect();
                arg_groups.push((cf, gi));
            }
        }
        func_data.push((step_features(&q.tokens, &gold.calls), STOP.to_string()));
        max_len = max_len.max(gold.calls.len() + 1);
    }
    let func = Softmax::train(&func_data, cfg)?;
    let arg = if arg_groups.is_empty() {
        // Nothing to learn; a zero model picks the first candidate.
        Pointer::train(&[(vec![vec![]], 0)], cfg)?
    } else {
        Pointer::train(&arg_groups, cfg)?
    };
    Ok(PlannerModel { func, arg, arity, max_len })
}

// ---------------------------------------------------------------------------
// Subgoal annotation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubgoalKind {
    Goto,
    Pick,
    Pickup,
    Put,
    Clean,
    Heat,
    Cool,
    Slice,
    Toggle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub kind: SubgoalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<String>,
}

impl Subgoal {
    pub fn new(kind: SubgoalKind, arg: Option<&str>) -> Subgoal {
        Subgoal { kind, arg: arg.map(str::to_string) }
    }

    pub fn bare(kind: SubgoalKind) -> Subgoal {
        Subgoal { kind, arg: None }
    }
}

/// Default destination for the knife after slicing.
pub const DEFAULT_TOOL_DST: &str = "countertop";

fn call(name: &str, args: &[Option<&str>]) -> Call {
    Call { name: name.into(), args: args.iter().map(|a| a.unwrap_or("?").to_string()).collect() }
}

/// Table-driven subgoal → procedure annotation. Navigation subgoals are
/// dropped and `Pickup` is read as `Pick`, so different orderings of the same
/// manipulation map to the same procedure sequence.
pub fn induce_planner_labels(seq: &[Subgoal]) -> Result<ExecutableProcedure, PlannerError> {
    use SubgoalKind::*;
    let unmapped = || PlannerError::UnmappedSequence(format!("{:?}", seq.iter().map(|s| s.kind).collect::<Vec<_>>()));
    let s: Vec<(SubgoalKind, Option<&str>)> = seq
        .iter()
        .filter(|g| g.kind != Goto)
        .map(|g| (if g.kind == Pickup { Pick } else { g.kind }, g.arg.as_deref()))
        .collect();
    if s.is_empty() {
        return Err(unmapped());
    }
    let mut out = Vec::new();
    // Object currently in hand, and whether it sits in an appliance instead.
    let mut held: Option<Option<&str>> = None;
    let mut in_appliance: Option<Option<&str>> = None;
    let mut i = 0;
    while i < s.len() {
        let kind = |j: usize| s.get(j).map(|x| x.0);
        match (s[i].0, kind(i + 1), kind(i + 2)) {
            (Pick, Some(Slice), next) if s[i].1.is_none_or(|a| a == catalog::KNIFE) => {
                let tool_dst = if next == Some(Put) { s[i + 2].1 } else { Some(DEFAULT_TOOL_DST) };
                out.push(call("udp_slice_object", &[s[i + 1].1, tool_dst]));
                i += if next == Some(Put) { 3 } else { 2 };
            }
            (Pick, Some(k @ (Clean | Heat | Cool)), _) => {
                let obj = s[i].1;
                let name = match k {
                    Clean => "udp_clean_object",
                    Heat => "udp_heat_object",
                    _ => "udp_cool_object",
                };
                out.push(call(name, &[obj]));
                if k == Clean {
                    held = Some(obj);
                } else {
                    in_appliance = Some(obj);
                }
                i += 2;
            }
            (Pick, Some(Put), _) => {
                out.push(call("udp_pick_and_put_object", &[s[i].1, s[i + 1].1]));
                i += 2;
            }
            (Pick, Some(Toggle), _) => {
                out.push(call("udp_pick_object", &[s[i].1]));
                out.push(call("atomic_navigate", &[s[i + 1].1]));
                out.push(call("atomic_toggleon_object", &[s[i + 1].1]));
                i += 2;
            }
            (Toggle, _, _) if held.is_some() || in_appliance.is_some() => {
                if let Some(obj) = in_appliance.take() {
                    out.push(call("udp_pick_object", &[obj]));
                }
                held = None;
                out.push(call("atomic_navigate", &[s[i].1]));
                out.push(call("atomic_toggleon_object", &[s[i].1]));
                i += 1;
            }
            (Put, _, _) if held.is_some() => {
                out.push(call("udp_put_object", &[held.take().flatten(), s[i].1]));
                i += 1;
            }
            (Put, _, _) if in_appliance.is_some() => {
                out.push(call("udp_pick_and_put_object", &[in_appliance.take().flatten(), s[i].1]));
                i += 1;
            }
            _ => return Err(unmapped()),
        }
    }
    Ok(ExecutableProcedure::new(out))
}

/// Distinct procedure names a model may emit, for fuzzing.
pub fn vocabulary(model: &PlannerModel) -> BTreeSet<String> {
    model.arity.iter().map(|(n, _)| n.clone()).collect()
}

#[cfg(test)]
mod tests;
