use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::pretty::expr_str;

pub const AST_VERSION: &str = "ast/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNode {
    /// `<proc>/<pre-order index>`; stable for a given source.
    pub id: String,
    pub kind: String,
    pub label: String,
    /// Position under the parent (`cond`, `then`, `else`, `arg`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    /// Target procedure of a call node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callee: Option<String>,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstTree {
    pub proc: String,
    pub root: String,
    pub nodes: Vec<AstNode>,
}

impl AstTree {
    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &AstTree, id: &str) -> usize {
            let n = t.nodes.iter().find(|n| n.id == id).expect("node exists");
            n.children.iter().map(|c| 1 + go(t, c)).max().unwrap_or(0)
        }
        go(self, &self.root)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstDocument {
    pub version: String,
    pub trees: Vec<AstTree>,
}

struct Builder {
    proc: String,
    nodes: Vec<AstNode>,
}

impl Builder {
    fn add(&mut self, kind: &str, label: String, role: Option<&str>, callee: Option<String>) -> usize {
        let id = format!("{}/{}", self.proc, self.nodes.len());
        self.nodes.push(AstNode {
            id,
            kind: kind.into(),
            label,
            role: role.map(str::to_string),
            callee,
            children: vec![],
        });
        self.nodes.len() - 1
    }

    fn link(&mut self, parent: usize, child: usize) {
        let id = self.nodes[child].id.clone();
        self.nodes[parent].children.push(id);
    }

    fn expr(&mut self, parent: usize, e: &Expr, role: &str) {
        let (kind, label) = match e {
            Expr::Bool(_) | Expr::Int(_) | Expr::Str(_) | Expr::Enum(_) => ("literal", expr_str(e, 0)),
            Expr::Var(v) => ("var", v.clone()),
            Expr::Attr(_, a) => ("attr", format!(".{a}")),
            Expr::Cmp(CmpOp::Eq, ..) => ("cmp", "==".into()),
            Expr::Cmp(CmpOp::Ne, ..) => ("cmp", "!=".into()),
            Expr::And(..) => ("and", "and".into()),
            Expr::Or(..) => ("or", "or".into()),
            Expr::Not(_) => ("not", "not".into()),
            Expr::List(_) => ("list", "[]".into()),
            Expr::In(..) => ("in", "in".into()),
            Expr::Add(..) => ("add", "+".into()),
        };
        let n = self.add(kind, label, Some(role), None);
        self.link(parent, n);
        for c in e.children() {
            self.expr(n, c, "operand");
        }
    }

    fn stmts(&mut self, parent: usize, body: &[Stmt], role: &str) {
        for s in body {
            self.stmt(parent, s, role);
        }
    }

    fn stmt(&mut self, parent: usize, s: &Stmt, role: &str) {
        let (kind, label, callee) = match s {
            Stmt::AtomicCall { action, .. } => ("atomic_call", format!("atomic {action}"), Some(format!("atomic_{action}"))),
            Stmt::ProcCall { bind, name, .. } => {
                let label = match bind {
                    Some(b) => format!("{b} = {name}"),
                    None => name.clone(),
                };
                ("proc_call", label, Some(name.clone()))
            }
            Stmt::ReactorBind { var, reactor } => ("reactor_bind", format!("{var} = get_reactor({reactor:?})"), None),
            Stmt::ReactorCall { var, target, .. } => {
                let t = match target {
                    ReactorTarget::Var(v) => v.clone(),
                    ReactorTarget::Named(n) => format!("reactor {n:?}"),
                };
                ("reactor_call", format!("{var} = {t}(..)"), None)
            }
            Stmt::If { .. } => ("if", "if".into(), None),
            Stmt::For { var, .. } => ("for", format!("for {var}"), None),
            Stmt::While { .. } => ("while", "while".into(), None),
            Stmt::Assign { var, .. } => ("assign", format!("{var} ="), None),
            Stmt::Return { .. } => ("return", "return".into(), None),
        };
        let n = self.add(kind, label, Some(role), callee);
        self.link(parent, n);
        match s {
            Stmt::If { cond, then_body, else_body } => {
                self.expr(n, cond, "cond");
                self.stmts(n, then_body, "then");
                if let Some(e) = else_body {
                    self.stmts(n, e, "else");
                }
            }
            Stmt::For { iter, body, .. } => {
                self.expr(n, iter, "iter");
                self.stmts(n, body, "body");
            }
            Stmt::While { cond, body } => {
                self.expr(n, cond, "cond");
                self.stmts(n, body, "body");
            }
            other => {
                for e in other.exprs() {
                    self.expr(n, e, "arg");
                }
            }
        }
    }
}

pub fn proc_tree(p: &ProcDef) -> AstTree {
    let mut b = Builder { proc: p.name.clone(), nodes: vec![] };
    let root = b.add("proc", format!("{}({})", p.name, p.params.join(", ")), None, None);
    b.stmts(root, &p.body, "body");
    let root = b.nodes[root].id.clone();
    AstTree { proc: p.name.clone(), root, nodes: b.nodes }
}

/// One rooted tree per procedure.
pub fn export_ast(lib: &Library) -> AstDocument {
    AstDocument { version: AST_VERSION.into(), trees: lib.procs.iter().map(proc_tree).collect() }
}

impl AstDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ast {\n");
        let q = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        for (ti, t) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{ti} {{\n    label=\"{}\";", q(&t.proc));
            for n in &t.nodes {
                let shape = match n.kind.as_str() {
                    "proc" => "doubleoctagon",
                    "proc_call" | "atomic_call" => "box",
                    "if" | "for" | "while" => "diamond",
                    _ => "ellipse",
                };
                let mut label = q(&n.label);
                if let Some(c) = &n.callee {
                    if n.kind == "proc_call" {
                        label.push_str(&format!("\\n→ {}", q(c)));
                    }
                }
                let _ = writeln!(out, "    \"{}\" [label=\"{label}\", shape={shape}];", q(&n.id));
            }
            for n in &t.nodes {
                for c in &n.children {
                    let _ = writeln!(out, "    \"{}\" -> \"{}\";", q(&n.id), q(c));
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}
