use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::Value;
use crate::world::{AtomicAction, WorldEvent};

pub const TRACE_VERSION: &str = "trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    AtomicIssued {
        /// Surface call, e.g. `open_object(fridge)`.
        call: String,
        /// Grounded action sent to the environment.
        action: AtomicAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        events: Vec<WorldEvent>,
    },
    ReactorQueried { name: String, query: Vec<Value>, answer: Value },
    BranchTaken { proc: String, stmt: usize, value: bool },
    LoopIter { proc: String, stmt: usize, index: usize },
    ProcEnter { name: String, args: Vec<Value> },
    ProcExit { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Failed { error: String },
    BudgetExceeded,
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
    /// Value returned by the last top-level call.
    pub result: Value,
}

/// Prefix a serialized JSON object with the version tag.
fn tagged(v: &impl Serialize) -> String {
    let body = serde_json::to_string(v).expect("serializable");
    let rest = body.strip_prefix('{').unwrap_or(&body);
    let sep = if rest == "}" { "" } else { "," };
    format!("{{\"version\":\"{TRACE_VERSION}\"{sep}{rest}")
}

impl ExecutionTrace {
    /// Atomic actions the environment accepted, in order.
    pub fn atomic_actions(&self) -> Vec<AtomicAction> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::AtomicIssued { action, error: None, .. } => Some(action.clone()),
                _ => None,
            })
            .collect()
    }

    /// Every atomic attempt, successful or not.
    pub fn atomic_attempts(&self) -> Vec<&AtomicAction> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::AtomicIssued { action, .. } => Some(action),
                _ => None,
            })
            .collect()
    }

    pub fn reactor_queries(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::ReactorQueried { .. })).count()
    }

    /// Checks ProcEnter/ProcExit nesting; returns the max depth.
    pub fn nesting_depth(&self) -> Result<usize, String> {
        let mut stack: Vec<&str> = Vec::new();
        let mut max = 0;
        for e in &self.events {
            match e {
                TraceEvent::ProcEnter { name, .. } => {
                    stack.push(name);
                    max = max.max(stack.len());
                }
                TraceEvent::ProcExit { name } => match stack.pop() {
                    Some(top) if top == name => {}
                    other => return Err(format!("exit of {name} while {other:?} is open")),
                },
                _ => {}
            }
        }
        if stack.is_empty() {
            Ok(max)
        } else {
            Err(format!("unclosed: {stack:?}"))
        }
    }

    /// One JSON object per line: events, then a final outcome line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&tagged(e));
            out.push('\n');
        }
        let end = serde_json::json!({ "event": "outcome", "outcome": self.outcome, "result": self.result });
        out.push_str(&tagged(&end));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<ExecutionTrace, String> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let at = |e: &dyn std::fmt::Display| format!("line {}: {e}", i + 1);
            let mut v: Json = serde_json::from_str(line).map_err(|e| at(&e))?;
            let obj = v.as_object_mut().ok_or_else(|| at(&"not an object"))?;
            match obj.remove("version") {
                Some(Json::String(s)) if s == TRACE_VERSION => {}
                other => return Err(at(&format!("unsupported version {other:?}"))),
            }
            if obj.get("event").and_then(Json::as_str) == Some("outcome") {
                let outcome = serde_json::from_value(obj.remove("outcome").unwrap_or_default()).map_err(|e| at(&e))?;
                let result = serde_json::from_value(obj.remove("result").unwrap_or_default()).map_err(|e| at(&e))?;
                return Ok(ExecutionTrace { events, outcome, result });
            }
            events.push(serde_json::from_value(v).map_err(|e| at(&e))?);
        }
        Err("missing outcome line".into())
    }
}
