//! Procedure programs: DSL front-end, validation, interpreter and exports.

mod ast;
mod export;
mod interp;
mod parser;
mod pretty;
mod trace;
mod validate;
mod value;

pub use ast::*;
pub use export::{export_ast, proc_tree, AstDocument, AstNode, AstTree, AST_VERSION};
pub use interp::{canonicalize, interpret, Call, CallError, CanonicalizeError, ExecutableProcedure, DEFAULT_BUDGET};
pub use parser::{is_keyword, parse, ParseError};
pub use pretty::{expr_str, pretty_print};
pub use trace::{ExecutionTrace, Outcome, TraceEvent, TRACE_VERSION};
pub use validate::{
    atomic_target, callees, is_global, referenced_reactors, static_depth, validate, validate_with, ValidationError,
    ValidationErrors, Violation, SPECIAL_GLOBALS,
};
pub use value::{ObjRef, Value};

#[cfg(test)]
mod tests;
