use std::fmt::Write;

use super::ast::*;

/// Render a library back to DSL source. `parse(pretty_print(l)) == l`.
pub fn pretty_print(lib: &Library) -> String {
    let mut out = String::new();
    for (i, p) in lib.procs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "proc {}({}) {{", p.name, p.params.join(", "));
        block(&mut out, &p.body, 1);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn args(a: &[Expr]) -> String {
    a.iter().map(|e| expr_str(e, 0)).collect::<Vec<_>>().join(", ")
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::AtomicCall { action, args: a } => {
            let _ = writeln!(out, "atomic {action}({});", args(a));
        }
        Stmt::ProcCall { bind, name, args: a } => {
            if let Some(v) = bind {
                let _ = write!(out, "let {v} = ");
            }
            let _ = writeln!(out, "{name}({});", args(a));
        }
        Stmt::ReactorBind { var, reactor } => {
            let _ = writeln!(out, "let {var} = get_reactor({});", quote(reactor));
        }
        Stmt::ReactorCall { var, target, args: a } => {
            let callee = match target {
                ReactorTarget::Var(v) => v.clone(),
                ReactorTarget::Named(n) => format!("reactor {}", quote(n)),
            };
            let _ = writeln!(out, "let {var} = {callee}({});", args(a));
        }
        Stmt::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "if {} {{", expr_str(cond, 0));
            block(out, then_body, depth + 1);
            indent(out, depth);
            match else_body {
                Some(e) => {
                    out.push_str("} else {\n");
                    block(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        Stmt::For { var, iter, body } => {
            let _ = writeln!(out, "for {var} in {} {{", expr_str(iter, 0));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        Stmt::While { cond, body } => {
            let _ = writeln!(out, "while {} {{", expr_str(cond, 0));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        Stmt::Assign { var, expr } => {
            let _ = writeln!(out, "let {var} = {};", expr_str(expr, 0));
        }
        Stmt::Return { expr: None } => out.push_str("return;\n"),
        Stmt::Return { expr: Some(e) } => {
            let _ = writeln!(out, "return {};", expr_str(e, 0));
        }
    }
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        Expr::Not(..) => 3,
        Expr::Cmp(..) | Expr::In(..) => 4,
        Expr::Add(..) => 5,
        Expr::Attr(..) => 6,
        _ => 7,
    }
}

/// Render `e`, parenthesized if it binds looser than `min`.
pub fn expr_str(e: &Expr, min: u8) -> String {
    let s = match e {
        Expr::Bool(b) => b.to_string(),
        Expr::Int(v) => v.to_string(),
        Expr::Str(s) => quote(s),
        Expr::Enum(s) | Expr::Var(s) => s.clone(),
        Expr::Attr(b, a) => format!("{}.{a}", expr_str(b, 6)),
        Expr::Cmp(op, a, b) => {
            let op = match op {
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
            };
            format!("{} {op} {}", expr_str(a, 5), expr_str(b, 5))
        }
        Expr::In(a, b) => format!("{} in {}", expr_str(a, 5), expr_str(b, 5)),
        Expr::Add(a, b) => format!("{} + {}", expr_str(a, 5), expr_str(b, 6)),
        Expr::And(a, b) => format!("{} and {}", expr_str(a, 2), expr_str(b, 3)),
        Expr::Or(a, b) => format!("{} or {}", expr_str(a, 1), expr_str(b, 2)),
        Expr::Not(a) => format!("not {}", expr_str(a, 3)),
        Expr::List(items) => format!("[{}]", args(items)),
    };
    if level(e) < min {
        format!("({s})")
    } else {
        s
    }
}
