//! Reactors: situated classifiers queried by procedures at run time.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::env::Episode;
use crate::procir::{ObjRef, Value};

mod heuristic;
mod learned;
mod noisy;
mod oracle;

pub use heuristic::{rel_checker_heuristic, HeuristicAttrChecker, HeuristicRelChecker, OVERLAP_THRESHOLD};
pub use learned::{
    attr_features, induce_reactor_labels, refinder_features, rel_features, train_learned_reactor, InduceError,
    LabeledExample, LearnedAttr, LearnedReFinder, LearnedRel, ReactorLabels, ReactorModels, ATTR_CLOSED, ATTR_NOT_OPENABLE,
    ATTR_OPEN,
};
pub use noisy::{NoisyDetector, NoisyReactor};
pub use oracle::{oracle_reactor, OracleAttr, OracleDetectRecep, OracleFindAll, OracleMask, OracleReFinder, OracleRel};

pub const CHECK_OBJ_ATTR: &str = "check_obj_attr";
pub const CHECK_OBJ_RECEP_REL: &str = "check_obj_recep_rel";
pub const FIND_OBJ_RECEP: &str = "find_obj_recep";
pub const FIND_RECEP: &str = "find_recep";
pub const FIND_ALL_OBJ: &str = "find_all_obj";
pub const DETECT_RECEP: &str = "detect_recep";
pub const MASK_GENERATOR: &str = "mask_generator";

pub const REACTOR_NAMES: &[&str] =
    &[CHECK_OBJ_ATTR, CHECK_OBJ_RECEP_REL, FIND_OBJ_RECEP, FIND_RECEP, FIND_ALL_OBJ, DETECT_RECEP, MASK_GENERATOR];

pub const OBJ_IN_RECEP: &str = "OBJ_IN_RECEP";
pub const NOT_IN: &str = "NOT_IN";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReactorError {
    #[error("unknown reactor `{0}`")]
    UnknownReactor(String),
    #[error("reactor `{reactor}`: {detail}")]
    BadArgs { reactor: String, detail: String },
    #[error("bounding box has zero area")]
    ZeroAreaBox,
}

pub fn bad_args(reactor: &str, detail: impl Into<String>) -> ReactorError {
    ReactorError::BadArgs { reactor: reactor.to_string(), detail: detail.into() }
}

/// One reactor implementation. Answers may read the episode (observation,
/// state, step log, instruction) and draw from its RNG.
pub trait Reactor: Send + Sync {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError>;

    fn describe(&self) -> String {
        "reactor".into()
    }
}

/// Name → implementation. Cloning is cheap; implementations are shared.
#[derive(Clone, Default)]
pub struct Registry {
    bound: BTreeMap<String, Arc<dyn Reactor>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.bound.iter().map(|(k, v)| (k, v.describe()))).finish()
    }
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// Every built-in reactor name bound to its ground-truth implementation.
    pub fn oracle() -> Registry {
        let mut r = Registry::new();
        for name in REACTOR_NAMES {
            r.bind(name, oracle_reactor(name).expect("built-in"));
        }
        r
    }

    /// Oracle registry with answer noise `eps` on the classifier reactors and
    /// a noisy detector for perception-driven ones.
    pub fn noisy(eps: f64) -> Registry {
        let mut r = Registry::oracle();
        for name in [CHECK_OBJ_ATTR, CHECK_OBJ_RECEP_REL, FIND_OBJ_RECEP, FIND_RECEP] {
            let inner = oracle_reactor(name).expect("built-in");
            r.bind(name, Arc::new(NoisyReactor::new(name, inner, eps)));
        }
        r.bind(DETECT_RECEP, Arc::new(NoisyDetector::detect_recep()));
        r.bind(MASK_GENERATOR, Arc::new(NoisyDetector::mask_generator()));
        r
    }

    pub fn bind(&mut self, name: &str, imp: Arc<dyn Reactor>) -> &mut Self {
        self.bound.insert(name.to_string(), imp);
        self
    }

    pub fn with(mut self, name: &str, imp: Arc<dyn Reactor>) -> Self {
        self.bind(name, imp);
        self
    }

    pub fn has(&self, name: &str) -> bool {
        self.bound.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bound.keys().map(String::as_str)
    }

    pub fn query(&self, name: &str, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let imp = self.bound.get(name).ok_or_else(|| ReactorError::UnknownReactor(name.to_string()))?;
        imp.answer(ep, args)
    }
}

/// The AttrChecker answer record; `openable`/`close` alias the primary flags.
pub fn attr_record(openable: bool, open: bool) -> Value {
    let is_open = openable && open;
    let is_closed = openable && !open;
    let mut m = BTreeMap::new();
    m.insert("is_openable".to_string(), Value::Bool(openable));
    m.insert("is_open".to_string(), Value::Bool(is_open));
    m.insert("is_closed".to_string(), Value::Bool(is_closed));
    m.insert("openable".to_string(), Value::Bool(openable));
    m.insert("close".to_string(), Value::Bool(is_closed));
    Value::Record(m)
}

/// `(openable, open)` read back from an attribute record.
pub fn attr_flags(v: &Value) -> Option<(bool, bool)> {
    let Value::Record(m) = v else { return None };
    let get = |k: &str| matches!(m.get(k), Some(Value::Bool(true)));
    Some((get("is_openable"), get("is_open")))
}

pub fn rel_value(inside: bool) -> Value {
    Value::Enum(if inside { OBJ_IN_RECEP } else { NOT_IN }.to_string())
}

pub(crate) fn obj_arg<'a>(reactor: &str, args: &'a [Value], i: usize) -> Result<Option<&'a ObjRef>, ReactorError> {
    match args.get(i) {
        Some(Value::Obj(o)) => Ok(Some(o)),
        Some(Value::None) => Ok(None),
        Some(v) => Err(bad_args(reactor, format!("argument {i} is a {}", v.type_name()))),
        None => Err(bad_args(reactor, format!("missing argument {i}"))),
    }
}

/// Whether the agent itself opened `id` and has not closed it since.
pub fn opened_by_agent(ep: &Episode, id: &str) -> Option<bool> {
    use crate::world::AtomicAction;
    ep.log.iter().rev().filter(|r| r.error.is_none()).find_map(|r| match &r.action {
        AtomicAction::Open { obj } if obj == id => Some(true),
        AtomicAction::Close { obj } if obj == id => Some(false),
        _ => None,
    })
}

#[cfg(test)]
mod tests;
