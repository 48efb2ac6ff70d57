use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use crate::world::{atomic_arity, catalog};

/// Scene globals available to every procedure besides class names.
pub const SPECIAL_GLOBALS: &[&str] = &["reachable_pos"];

pub fn is_global(name: &str) -> bool {
    catalog::is_class(name) || SPECIAL_GLOBALS.contains(&name)
}

/// Atomic action name for a call target written `atomic_<name>`, if any.
pub fn atomic_target(name: &str) -> Option<&str> {
    name.strip_prefix("atomic_").filter(|n| atomic_arity(n).is_some())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("call to undefined procedure `{name}`")]
    UndefinedProc { name: String },
    #[error("unknown atomic action `{name}`")]
    UnknownAtomic { name: String },
    #[error("call graph has a cycle: {}", cycle.join(" -> "))]
    CyclicCallGraph { cycle: Vec<String> },
    #[error("`{callee}` takes {expected} argument(s), got {got}")]
    ArityMismatch { callee: String, expected: usize, got: usize },
    #[error("unknown reactor `{name}`")]
    UnknownReactor { name: String },
    #[error("condition uses a disallowed construct: {detail}")]
    ConditionConstraint { detail: String },
    #[error("undefined identifier `{name}`")]
    UndefinedIdentifier { name: String },
    #[error("duplicate parameter `{name}`")]
    DuplicateParam { name: String },
    #[error("attribute `.{attr}` read from a {ty} value")]
    AttrOnNonObject { attr: String, ty: String },
    #[error("`{var}` is not bound to a reactor")]
    NotAReactor { var: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub proc: String,
    pub stmt: Option<usize>,
    pub violation: Violation,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stmt {
            Some(id) => write!(f, "{} (stmt {id}): {}", self.proc, self.violation),
            None => write!(f, "{}: {}", self.proc, self.violation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} validation error(s): {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ValidationError>);

/// Validate against the built-in reactor names.
pub fn validate(lib: &Library) -> Result<(), ValidationErrors> {
    validate_with(lib, &|n| crate::reactors::REACTOR_NAMES.contains(&n))
}

pub fn validate_with(lib: &Library, reactor_known: &dyn Fn(&str) -> bool) -> Result<(), ValidationErrors> {
    let mut errs = Vec::new();
    for p in &lib.procs {
        check_proc(lib, p, reactor_known, &mut errs);
    }
    if let Some(cycle) = find_cycle(lib) {
        errs.push(ValidationError {
            proc: cycle[0].clone(),
            stmt: None,
            violation: Violation::CyclicCallGraph { cycle },
        });
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errs))
    }
}

/// Coarse static types for the attribute check.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Bool,
    Int,
    Str,
    Enum,
    List,
    Any,
}

fn ty_name(t: Ty) -> &'static str {
    match t {
        Ty::Bool => "bool",
        Ty::Int => "int",
        Ty::Str => "string",
        Ty::Enum => "enum",
        Ty::List => "list",
        Ty::Any => "object",
    }
}

fn check_proc(lib: &Library, p: &ProcDef, reactor_known: &dyn Fn(&str) -> bool, errs: &mut Vec<ValidationError>) {
    let mut push = |stmt: Option<usize>, violation: Violation| {
        errs.push(ValidationError { proc: p.name.clone(), stmt, violation })
    };
    let mut seen = BTreeSet::new();
    for prm in &p.params {
        if !seen.insert(prm.as_str()) {
            push(None, Violation::DuplicateParam { name: prm.clone() });
        }
    }
    // function-scoped bindings, as in the source language
    let mut bound: BTreeSet<&str> = p.params.iter().map(String::as_str).collect();
    let mut reactor_vars = BTreeSet::new();
    walk_stmts(&p.body, &mut |_, s| {
        if let Some(v) = s.binds() {
            bound.insert(v);
        }
        if let Stmt::ReactorBind { var, .. } = s {
            reactor_vars.insert(var.as_str());
        }
    });
    walk_stmts(&p.body, &mut |id, s| {
        let here = Some(id);
        match s {
            Stmt::AtomicCall { action, args } => match atomic_arity(action) {
                None => push(here, Violation::UnknownAtomic { name: action.clone() }),
                Some(n) if n != args.len() => push(
                    here,
                    Violation::ArityMismatch { callee: action.clone(), expected: n, got: args.len() },
                ),
                _ => {}
            },
            Stmt::ProcCall { name, args, .. } => {
                let expected = match (lib.get(name), atomic_target(name)) {
                    (Some(def), _) => Some(def.params.len()),
                    (None, Some(a)) => atomic_arity(a),
                    (None, None) => {
                        push(here, Violation::UndefinedProc { name: name.clone() });
                        None
                    }
                };
                if let Some(n) = expected.filter(|n| *n != args.len()) {
                    push(here, Violation::ArityMismatch { callee: name.clone(), expected: n, got: args.len() });
                }
            }
            Stmt::ReactorBind { reactor, .. } | Stmt::ReactorCall { target: ReactorTarget::Named(reactor), .. } => {
                if !reactor_known(reactor) {
                    push(here, Violation::UnknownReactor { name: reactor.clone() });
                }
            }
            Stmt::ReactorCall { target: ReactorTarget::Var(v), .. } => {
                if !reactor_vars.contains(v.as_str()) {
                    push(here, Violation::NotAReactor { var: v.clone() });
                }
            }
            Stmt::If { cond, .. } | Stmt::While { cond, .. } => {
                if let Some(detail) = condition_violation(cond) {
                    push(here, Violation::ConditionConstraint { detail });
                } else if let t @ (Ty::Int | Ty::Str | Ty::List | Ty::Enum) = infer(cond) {
                    push(here, Violation::ConditionConstraint { detail: format!("condition has type {}", ty_name(t)) });
                }
            }
            _ => {}
        }
        for e in s.exprs() {
            let mut vars = Vec::new();
            e.vars(&mut vars);
            for v in vars {
                if !bound.contains(v.as_str()) && !is_global(&v) {
                    push(here, Violation::UndefinedIdentifier { name: v });
                }
            }
            check_attrs(e, &mut |attr, ty| {
                push(here, Violation::AttrOnNonObject { attr: attr.to_string(), ty: ty_name(ty).to_string() })
            });
        }
    });
}

fn infer(e: &Expr) -> Ty {
    match e {
        Expr::Bool(_) | Expr::Cmp(..) | Expr::And(..) | Expr::Or(..) | Expr::Not(_) | Expr::In(..) => Ty::Bool,
        Expr::Int(_) => Ty::Int,
        Expr::Str(_) => Ty::Str,
        Expr::Enum(_) => Ty::Enum,
        Expr::List(_) => Ty::List,
        Expr::Add(a, b) => match (infer(a), infer(b)) {
            (Ty::Int, Ty::Int) => Ty::Int,
            (Ty::List, _) | (_, Ty::List) => Ty::List,
            _ => Ty::Any,
        },
        Expr::Var(_) | Expr::Attr(..) => Ty::Any,
    }
}

fn check_attrs(e: &Expr, bad: &mut impl FnMut(&str, Ty)) {
    if let Expr::Attr(base, attr) = e {
        let t = infer(base);
        if t != Ty::Any {
            bad(attr, t);
        }
    }
    for c in e.children() {
        check_attrs(c, bad);
    }
}

/// Conditions may only combine attribute reads, variables, literals,
/// comparisons and logical connectives.
fn condition_violation(e: &Expr) -> Option<String> {
    match e {
        Expr::List(_) => Some("list literal".into()),
        Expr::Add(..) => Some("arithmetic".into()),
        _ => e.children().into_iter().find_map(condition_violation),
    }
}

/// Callees of a procedure that are library procedures (not atomics).
pub fn callees<'a>(lib: &Library, p: &'a ProcDef) -> Vec<&'a str> {
    let mut out = Vec::new();
    walk_stmts(&p.body, &mut |_, s| {
        if let Stmt::ProcCall { name, .. } = s {
            if lib.get(name).is_some() && !out.contains(&name.as_str()) {
                out.push(name.as_str());
            }
        }
    });
    out
}

fn find_cycle(lib: &Library) -> Option<Vec<String>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn dfs<'a>(lib: &'a Library, n: &'a str, state: &mut BTreeMap<&'a str, u8>, stack: &mut Vec<&'a str>) -> Option<Vec<String>> {
        state.insert(n, 1);
        stack.push(n);
        for c in callees(lib, lib.get(n)?) {
            match state.get(c).copied().unwrap_or(0) {
                1 => {
                    let start = stack.iter().position(|s| *s == c).unwrap_or(0);
                    let mut cyc: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cyc.push(c.to_string());
                    return Some(cyc);
                }
                0 => {
                    if let Some(c) = dfs(lib, c, state, stack) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        stack.pop();
        state.insert(n, 2);
        None
    }
    for p in &lib.procs {
        if state.get(p.name.as_str()).copied().unwrap_or(0) == 0 {
            if let Some(c) = dfs(lib, &p.name, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

/// Depth of the static call graph rooted at `name` (a leaf procedure has depth 1).
pub fn static_depth(lib: &Library, name: &str) -> usize {
    fn go(lib: &Library, name: &str, fuel: usize) -> usize {
        match lib.get(name) {
            Some(p) if fuel > 0 => 1 + callees(lib, p).into_iter().map(|c| go(lib, c, fuel - 1)).max().unwrap_or(0),
            _ => 0,
        }
    }
    go(lib, name, lib.len() + 1)
}

/// Reactor names referenced anywhere in the given procedures' call closure.
pub fn referenced_reactors(lib: &Library, roots: &[&str]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut todo: Vec<&str> = roots.to_vec();
    let mut seen = BTreeSet::new();
    while let Some(n) = todo.pop() {
        if !seen.insert(n) {
            continue;
        }
        let Some(p) = lib.get(n) else { continue };
        walk_stmts(&p.body, &mut |_, s| match s {
            Stmt::ReactorBind { reactor, .. } | Stmt::ReactorCall { target: ReactorTarget::Named(reactor), .. } => {
                out.insert(reactor.clone());
            }
            _ => {}
        });
        todo.extend(callees(lib, p));
    }
    out
}
