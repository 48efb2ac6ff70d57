use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::trace::{ExecutionTrace, Outcome, TraceEvent};
use super::validate::{atomic_target, referenced_reactors};
use super::value::{ObjRef, Value};
use crate::env::Episode;
use crate::reactors::{Registry, MASK_GENERATOR};
use crate::world::{atomic_arity, canonical_atomic_name, ActionError, AtomicAction, Horizon, Rotation, SceneState};

pub const DEFAULT_BUDGET: usize = 1000;

/// One call of an executable procedure: a library procedure or an
/// `atomic_*` action with concrete arguments (class names or ids).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<String>,
}

impl Call {
    pub fn new(name: &str, args: &[&str]) -> Call {
        Call { name: name.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// Planner output: an ordered list of calls.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecutableProcedure {
    pub calls: Vec<Call>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error("malformed call `{0}`")]
    Malformed(String),
    #[error("`{0}` is neither a library procedure nor an atomic action")]
    Unresolved(String),
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
}

impl ExecutableProcedure {
    pub fn new(calls: Vec<Call>) -> ExecutableProcedure {
        ExecutableProcedure { calls }
    }

    /// Parse `name(a, b); other(c)`; separators may be `;` or newlines.
    pub fn parse(text: &str) -> Result<ExecutableProcedure, CallError> {
        let mut calls = Vec::new();
        for part in text.split([';', '\n']).map(str::trim).filter(|p| !p.is_empty()) {
            let (name, rest) = part.split_once('(').ok_or_else(|| CallError::Malformed(part.into()))?;
            let inner = rest.trim_end().strip_suffix(')').ok_or_else(|| CallError::Malformed(part.into()))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CallError::Malformed(part.into()));
            }
            let args = if inner.trim().is_empty() {
                vec![]
            } else {
                inner.split(',').map(|a| a.trim().to_string()).collect()
            };
            calls.push(Call { name: name.to_string(), args });
        }
        Ok(ExecutableProcedure { calls })
    }

    /// Every name must resolve in the library or the atomic set, with matching arity.
    pub fn check(&self, lib: &Library) -> Result<(), CallError> {
        for c in &self.calls {
            let expected = match (lib.get(&c.name), atomic_target(&c.name)) {
                (Some(p), _) => p.params.len(),
                (None, Some(a)) => atomic_arity(a).unwrap_or(0),
                _ => return Err(CallError::Unresolved(c.name.clone())),
            };
            if expected != c.args.len() {
                return Err(CallError::Arity { name: c.name.clone(), expected, got: c.args.len() });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExecutableProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.calls.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

enum Abort {
    Failed(String),
    Budget,
}

enum Flow {
    Next,
    Return(Value),
}

struct Interp<'a> {
    lib: &'a Library,
    ep: &'a mut Episode,
    reactors: &'a Registry,
    budget: usize,
    steps: usize,
    loop_iters: usize,
    events: Vec<TraceEvent>,
}

type Frame = BTreeMap<String, Value>;

/// Run `a_e` against the episode. The episode is left in its final (or
/// post-failure) state.
pub fn interpret(
    a_e: &ExecutableProcedure,
    lib: &Library,
    ep: &mut Episode,
    reactors: &Registry,
    budget: usize,
) -> ExecutionTrace {
    let fail = |error: String| ExecutionTrace { events: vec![], outcome: Outcome::Failed { error }, result: Value::None };
    if let Err(e) = a_e.check(lib) {
        return fail(e.to_string());
    }
    let roots: Vec<&str> = a_e.calls.iter().map(|c| c.name.as_str()).collect();
    let mut needed = referenced_reactors(lib, &roots);
    needed.insert(MASK_GENERATOR.to_string());
    if let Some(missing) = needed.iter().find(|n| !reactors.has(n)) {
        return fail(format!("unknown reactor `{missing}`"));
    }
    let mut it = Interp { lib, ep, reactors, budget, steps: 0, loop_iters: 0, events: Vec::new() };
    let mut result = Value::None;
    let mut outcome = Outcome::Completed;
    for c in &a_e.calls {
        let args: Vec<Value> = c.args.iter().map(|a| it.ep.arg_value(a)).collect();
        match it.call(&c.name, args) {
            Ok(v) => result = v,
            Err(Abort::Failed(error)) => {
                outcome = Outcome::Failed { error };
                break;
            }
            Err(Abort::Budget) => {
                outcome = Outcome::BudgetExceeded;
                break;
            }
        }
    }
    ExecutionTrace { events: it.events, outcome, result }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalizeError {
    #[error("execution failed: {0}")]
    Failed(String),
    #[error("execution exceeded the step budget")]
    BudgetExceeded,
}

/// Flat atomic rollout of `a_e` on a copy of `scene`.
pub fn canonicalize(
    a_e: &ExecutableProcedure,
    lib: &Library,
    scene: &SceneState,
    reactors: &Registry,
    budget: usize,
) -> Result<Vec<AtomicAction>, CanonicalizeError> {
    let mut ep = Episode::new(scene.clone());
    let trace = interpret(a_e, lib, &mut ep, reactors, budget);
    match trace.outcome {
        Outcome::Completed => Ok(trace.atomic_actions()),
        Outcome::Failed { error } => Err(CanonicalizeError::Failed(error)),
        Outcome::BudgetExceeded => Err(CanonicalizeError::BudgetExceeded),
    }
}

fn runtime(msg: impl Into<String>) -> Abort {
    Abort::Failed(msg.into())
}

fn truthy(v: &Value) -> Result<bool, Abort> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::None => Ok(false),
        other => Err(runtime(format!("condition is a {}, not a bool", other.type_name()))),
    }
}

impl Interp<'_> {
    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Abort> {
        if let Some(p) = self.lib.get(name) {
            if p.params.len() != args.len() {
                return Err(runtime(format!("{name} takes {} argument(s), got {}", p.params.len(), args.len())));
            }
            self.events.push(TraceEvent::ProcEnter { name: name.to_string(), args: args.clone() });
            let mut frame: Frame = p.params.iter().cloned().zip(args).collect();
            let r = self.block(p, &p.body, 0, &mut frame);
            self.events.push(TraceEvent::ProcExit { name: name.to_string() });
            return match r? {
                Flow::Return(v) => Ok(v),
                Flow::Next => Ok(Value::None),
            };
        }
        match atomic_target(name) {
            Some(a) => self.atomic(a, &args).map(|_| Value::None),
            None => Err(runtime(format!("undefined procedure `{name}`"))),
        }
    }

    fn block(&mut self, p: &ProcDef, body: &[Stmt], first_id: usize, frame: &mut Frame) -> Result<Flow, Abort> {
        let mut id = first_id;
        for s in body {
            if let Flow::Return(v) = self.stmt(p, s, id, frame)? {
                return Ok(Flow::Return(v));
            }
            id += s.size();
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, p: &ProcDef, s: &Stmt, id: usize, frame: &mut Frame) -> Result<Flow, Abort> {
        match s {
            Stmt::AtomicCall { action, args } => {
                let vals = self.eval_all(args, frame)?;
                self.atomic(canonical_atomic_name(action), &vals)?;
            }
            Stmt::ProcCall { bind, name, args } => {
                let vals = self.eval_all(args, frame)?;
                let v = self.call(name, vals)?;
                if let Some(b) = bind {
                    frame.insert(b.clone(), v);
                }
            }
            Stmt::ReactorBind { var, reactor } => {
                frame.insert(var.clone(), Value::Reactor(reactor.clone()));
            }
            Stmt::ReactorCall { var, target, args } => {
                let name = match target {
                    ReactorTarget::Named(n) => n.clone(),
                    ReactorTarget::Var(v) => match frame.get(v) {
                        Some(Value::Reactor(n)) => n.clone(),
                        _ => return Err(runtime(format!("`{v}` is not bound to a reactor"))),
                    },
                };
                let vals = self.eval_all(args, frame)?;
                let answer = self.query(&name, vals)?;
                frame.insert(var.clone(), answer);
            }
            Stmt::If { cond, then_body, else_body } => {
                let value = truthy(&self.eval(cond, frame)?)?;
                self.events.push(TraceEvent::BranchTaken { proc: p.name.clone(), stmt: id, value });
                let then_first = id + 1;
                if value {
                    return self.block(p, then_body, then_first, frame);
                } else if let Some(e) = else_body {
                    return self.block(p, e, then_first + block_size(then_body), frame);
                }
            }
            Stmt::For { var, iter, body } => {
                let items = match self.eval(iter, frame)? {
                    Value::List(items) => items,
                    Value::None => vec![],
                    other => return Err(runtime(format!("cannot iterate over a {}", other.type_name()))),
                };
                for (index, item) in items.into_iter().enumerate() {
                    self.tick_loop()?;
                    self.events.push(TraceEvent::LoopIter { proc: p.name.clone(), stmt: id, index });
                    frame.insert(var.clone(), item);
                    if let Flow::Return(v) = self.block(p, body, id + 1, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::While { cond, body } => {
                let mut index = 0;
                while truthy(&self.eval(cond, frame)?)? {
                    self.tick_loop()?;
                    self.events.push(TraceEvent::LoopIter { proc: p.name.clone(), stmt: id, index });
                    if let Flow::Return(v) = self.block(p, body, id + 1, frame)? {
                        return Ok(Flow::Return(v));
                    }
                    index += 1;
                }
            }
            Stmt::Assign { var, expr } => {
                let v = self.eval(expr, frame)?;
                frame.insert(var.clone(), v);
            }
            Stmt::Return { expr } => {
                let v = match expr {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    /// Loops without atomic actions still consume budget so they terminate.
    fn tick_loop(&mut self) -> Result<(), Abort> {
        self.loop_iters += 1;
        if self.loop_iters > self.budget.saturating_mul(4).max(64) {
            return Err(Abort::Budget);
        }
        Ok(())
    }

    fn query(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Abort> {
        let answer = self.reactors.query(name, self.ep, &args).map_err(|e| runtime(e.to_string()))?;
        self.events.push(TraceEvent::ReactorQueried { name: name.to_string(), query: args, answer: answer.clone() });
        Ok(answer)
    }

    fn eval_all(&mut self, args: &[Expr], frame: &Frame) -> Result<Vec<Value>, Abort> {
        args.iter().map(|a| self.eval(a, frame)).collect()
    }

    fn eval(&mut self, e: &Expr, frame: &Frame) -> Result<Value, Abort> {
        Ok(match e {
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Int(v) => Value::Int(*v),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Enum(s) => Value::Enum(s.clone()),
            Expr::Var(v) => match frame.get(v) {
                Some(val) => val.clone(),
                None => self.ep.global(v).ok_or_else(|| runtime(format!("unbound identifier `{v}`")))?,
            },
            Expr::Attr(base, attr) => {
                let b = self.eval(base, frame)?;
                attribute(&b, attr)?
            }
            Expr::Cmp(op, a, b) => {
                let eq = self.eval(a, frame)?.loose_eq(&self.eval(b, frame)?);
                Value::Bool(match op {
                    CmpOp::Eq => eq,
                    CmpOp::Ne => !eq,
                })
            }
            Expr::In(a, b) => {
                let needle = self.eval(a, frame)?;
                match self.eval(b, frame)? {
                    Value::List(items) => Value::Bool(items.iter().any(|x| x.loose_eq(&needle))),
                    Value::None => Value::Bool(false),
                    other => return Err(runtime(format!("`in` needs a list, got a {}", other.type_name()))),
                }
            }
            Expr::And(a, b) => Value::Bool(truthy(&self.eval(a, frame)?)? && truthy(&self.eval(b, frame)?)?),
            Expr::Or(a, b) => Value::Bool(truthy(&self.eval(a, frame)?)? || truthy(&self.eval(b, frame)?)?),
            Expr::Not(a) => Value::Bool(!truthy(&self.eval(a, frame)?)?),
            Expr::List(items) => Value::List(self.eval_all(items, frame)?),
            Expr::Add(a, b) => match (self.eval(a, frame)?, self.eval(b, frame)?) {
                (Value::Int(x), Value::Int(y)) => Value::Int(x.checked_add(y).ok_or_else(|| runtime("integer overflow"))?),
                (Value::List(mut x), Value::List(y)) => {
                    x.extend(y);
                    Value::List(x)
                }
                (Value::List(x), Value::None) | (Value::None, Value::List(x)) => Value::List(x),
                (x, y) => return Err(runtime(format!("cannot add {} and {}", x.type_name(), y.type_name()))),
            },
        })
    }

    fn ground_object(&mut self, v: &Value) -> Result<Result<String, String>, Abort> {
        let obj = match v {
            Value::Obj(o) => o.clone(),
            Value::Str(s) => ObjRef::class(s),
            Value::None => return Ok(Err("none".into())),
            other => return Err(runtime(format!("expected an object, got a {}", other.type_name()))),
        };
        if let Some(id) = &obj.id {
            return Ok(Ok(id.clone()));
        }
        match self.query(MASK_GENERATOR, vec![Value::Obj(obj.clone())])? {
            Value::Obj(ObjRef { id: Some(id), .. }) => Ok(Ok(id)),
            _ => Ok(Err(obj.class)),
        }
    }

    fn atomic(&mut self, name: &str, args: &[Value]) -> Result<(), Abort> {
        let name = canonical_atomic_name(name);
        if atomic_arity(name) != Some(args.len()) {
            return Err(runtime(format!("atomic {name} called with {} argument(s)", args.len())));
        }
        if self.steps >= self.budget {
            return Err(Abort::Budget);
        }
        let call = format!("{name}({})", args.iter().map(Value::render).collect::<Vec<_>>().join(", "));
        // grounding failures become NotVisible on the surface name
        let mut unresolved: Option<String> = None;
        let mut obj = |it: &mut Self, v: &Value| -> Result<String, Abort> {
            Ok(match it.ground_object(v)? {
                Ok(id) => id,
                Err(class) => {
                    unresolved.get_or_insert(class.clone());
                    class
                }
            })
        };
        let action = match name {
            "navigate" => match &args[0] {
                Value::Pos(c) => AtomicAction::NavigatePos { cell: *c },
                Value::Obj(o) => match self.ep.ground_navigate(o) {
                    Some(dest) => AtomicAction::Navigate { dest },
                    None => {
                        unresolved = Some(o.class.clone());
                        AtomicAction::Navigate { dest: o.class.clone() }
                    }
                },
                other => return Err(runtime(format!("cannot navigate to a {}", other.type_name()))),
            },
            "navigate_pos" => match &args[0] {
                Value::Pos(c) => AtomicAction::NavigatePos { cell: *c },
                other => return Err(runtime(format!("navigate_pos needs a position, got a {}", other.type_name()))),
            },
            "rotate" => match &args[0] {
                Value::Int(d) => AtomicAction::RotateTo {
                    rotation: Rotation::from_degrees(*d).ok_or_else(|| runtime(format!("bad rotation {d}")))?,
                },
                other => return Err(runtime(format!("rotate needs degrees, got a {}", other.type_name()))),
            },
            "look" => match &args[0] {
                Value::Int(d) => AtomicAction::LookTo {
                    horizon: Horizon::from_degrees(*d).ok_or_else(|| runtime(format!("bad horizon {d}")))?,
                },
                other => return Err(runtime(format!("look needs degrees, got a {}", other.type_name()))),
            },
            "open_object" => AtomicAction::Open { obj: obj(self, &args[0])? },
            "close_object" => AtomicAction::Close { obj: obj(self, &args[0])? },
            "pickup_object" => AtomicAction::Pickup { obj: obj(self, &args[0])? },
            "put_object" => {
                let o = obj(self, &args[0])?;
                AtomicAction::Put { obj: o, recep: obj(self, &args[1])? }
            }
            "toggleon_object" => AtomicAction::ToggleOn { obj: obj(self, &args[0])? },
            "toggleoff_object" => AtomicAction::ToggleOff { obj: obj(self, &args[0])? },
            "slice_object" => AtomicAction::Slice { obj: obj(self, &args[0])? },
            "stop" => AtomicAction::Stop,
            other => return Err(runtime(format!("unknown atomic action `{other}`"))),
        };
        self.steps += 1;
        let result = match unresolved {
            Some(class) => {
                let err = ActionError::NotVisible(class);
                self.ep.record_failure(&action, err.clone());
                Err(err)
            }
            None => self.ep.step(&action),
        };
        match result {
            Ok(events) => {
                self.events.push(TraceEvent::AtomicIssued { call, action, error: None, events });
                Ok(())
            }
            Err(e) => {
                let msg = format!("{action}: {e}");
                self.events.push(TraceEvent::AtomicIssued { call, action, error: Some(e.to_string()), events: vec![] });
                Err(Abort::Failed(msg))
            }
        }
    }
}

fn attribute(v: &Value, attr: &str) -> Result<Value, Abort> {
    match (v, attr) {
        (Value::Obj(o), "desc" | "class") => Ok(Value::Str(o.class.clone())),
        (Value::Obj(o), "id") => Ok(o.id.clone().map_or(Value::None, Value::Str)),
        (Value::Record(m), a) => m.get(a).cloned().ok_or_else(|| runtime(format!("no attribute `{a}`"))),
        (other, a) => Err(runtime(format!("cannot read `.{a}` from a {}", other.type_name()))),
    }
}
