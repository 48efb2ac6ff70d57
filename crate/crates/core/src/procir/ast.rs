use serde::{Deserialize, Serialize};

/// A parsed procedure library, in source order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Library {
    pub procs: Vec<ProcDef>,
}

impl Library {
    pub fn get(&self, name: &str) -> Option<&ProcDef> {
        self.procs.iter().find(|p| p.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.procs.iter().map(|p| p.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.procs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.procs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

/// How a reactor query names its reactor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum ReactorTarget {
    /// A variable previously bound with `get_reactor`.
    Var(String),
    /// Inline form `reactor "name"(...)`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum Stmt {
    AtomicCall { action: String, args: Vec<Expr> },
    ProcCall { bind: Option<String>, name: String, args: Vec<Expr> },
    ReactorBind { var: String, reactor: String },
    ReactorCall { var: String, target: ReactorTarget, args: Vec<Expr> },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    For { var: String, iter: Expr, body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Assign { var: String, expr: Expr },
    Return { expr: Option<Expr> },
}

impl Stmt {
    /// Number of statements in this subtree, itself included.
    pub fn size(&self) -> usize {
        1 + self.children().map(|b| block_size(b)).sum::<usize>()
    }

    /// Nested statement blocks, in source order.
    pub fn children(&self) -> impl Iterator<Item = &Vec<Stmt>> {
        let (a, b) = match self {
            Stmt::If { then_body, else_body, .. } => (Some(then_body), else_body.as_ref()),
            Stmt::For { body, .. } | Stmt::While { body, .. } => (Some(body), None),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Expressions directly owned by this statement.
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::AtomicCall { args, .. } | Stmt::ProcCall { args, .. } | Stmt::ReactorCall { args, .. } => {
                args.iter().collect()
            }
            Stmt::If { cond, .. } | Stmt::While { cond, .. } => vec![cond],
            Stmt::For { iter, .. } => vec![iter],
            Stmt::Assign { expr, .. } => vec![expr],
            Stmt::Return { expr } => expr.iter().collect(),
            Stmt::ReactorBind { .. } => vec![],
        }
    }

    /// Variable this statement binds, if any.
    pub fn binds(&self) -> Option<&str> {
        match self {
            Stmt::ProcCall { bind: Some(v), .. }
            | Stmt::ReactorBind { var: v, .. }
            | Stmt::ReactorCall { var: v, .. }
            | Stmt::For { var: v, .. }
            | Stmt::Assign { var: v, .. } => Some(v),
            _ => None,
        }
    }
}

pub fn block_size(body: &[Stmt]) -> usize {
    body.iter().map(Stmt::size).sum()
}

/// Visit every statement in pre-order with its id (pre-order index).
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(usize, &'a Stmt)) {
    fn go<'a>(body: &'a [Stmt], next: &mut usize, f: &mut impl FnMut(usize, &'a Stmt)) {
        for s in body {
            f(*next, s);
            *next += 1;
            for b in s.children() {
                go(b, next, f);
            }
        }
    }
    let mut next = 0;
    go(body, &mut next, f);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expr", content = "v", rename_all = "snake_case")]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Str(String),
    Enum(String),
    Var(String),
    Attr(Box<Expr>, String),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    List(Vec<Expr>),
    In(Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Bool(_) | Expr::Int(_) | Expr::Str(_) | Expr::Enum(_) | Expr::Var(_) => vec![],
            Expr::Attr(e, _) | Expr::Not(e) => vec![e],
            Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) | Expr::In(a, b) | Expr::Add(a, b) => vec![a, b],
            Expr::List(items) => items.iter().collect(),
        }
    }

    /// Number of expression nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    /// Variables read by this expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        if let Expr::Var(v) = self {
            out.push(v.clone());
        }
        for c in self.children() {
            c.vars(out);
        }
    }
}

/// True for identifiers spelled as enum literals (`OBJ_IN_RECEP`).
pub fn is_enum_ident(s: &str) -> bool {
    s.len() >= 2
        && s.starts_with(|c: char| c.is_ascii_uppercase())
        && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}
