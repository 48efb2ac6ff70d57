use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::Cell;

/// An object reference: a class, optionally pinned to an instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjRef {
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ObjRef {
    pub fn class(class: &str) -> ObjRef {
        ObjRef { class: class.to_string(), id: None }
    }

    pub fn instance(class: &str, id: &str) -> ObjRef {
        ObjRef { class: class.to_string(), id: Some(id.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "v", rename_all = "snake_case")]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Str(String),
    Enum(String),
    Obj(ObjRef),
    Pos(Cell),
    List(Vec<Value>),
    Record(BTreeMap<String, Value>),
    Reactor(String),
}

impl Value {
    pub fn obj(class: &str) -> Value {
        Value::Obj(ObjRef::class(class))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "none",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Enum(_) => "enum",
            Value::Obj(_) => "object",
            Value::Pos(_) => "position",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Reactor(_) => "reactor",
        }
    }

    pub fn as_obj(&self) -> Option<&ObjRef> {
        match self {
            Value::Obj(o) => Some(o),
            _ => None,
        }
    }

    /// Equality used by `==` and `in`. Objects compare by instance when both
    /// sides are pinned, otherwise by class.
    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Obj(a), Value::Obj(b)) => match (&a.id, &b.id) {
                (Some(x), Some(y)) => x == y,
                _ => a.class == b.class,
            },
            (Value::Obj(o), Value::Str(s)) | (Value::Str(s), Value::Obj(o)) => &o.class == s,
            (Value::List(a), Value::List(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.loose_eq(y)),
            _ => self == other,
        }
    }

    /// Compact rendering for traces and action arguments.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::None => write!(f, "none"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Enum(s) => write!(f, "{s}"),
            Value::Obj(o) => write!(f, "{}", o.id.as_deref().unwrap_or(&o.class)),
            Value::Pos(c) => write!(f, "{c}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Record(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            Value::Reactor(n) => write!(f, "<reactor {n}>"),
        }
    }
}
