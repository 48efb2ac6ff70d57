//! Lexer and recursive-descent parser for `.proc` sources.

use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: duplicate definition of `{name}`")]
    DuplicateDefinition { name: String, line: usize, col: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::DuplicateDefinition { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "proc", "atomic", "let", "if", "else", "for", "in", "while", "return", "true", "false", "and", "or", "not",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut out = Vec::new();
    let err = |line, col, message: String| ParseError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut adv = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            adv(1, &mut i);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                adv(1, &mut i);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                adv(1, &mut i);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            adv(1, &mut i);
            while i < chars.len() && chars[i].is_ascii_digit() {
                adv(1, &mut i);
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| err(tl, tc, format!("integer out of range: {text}")))?;
            out.push(Token { tok: Tok::Int(v), line: tl, col: tc });
            continue;
        }
        if c == '"' {
            adv(1, &mut i);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => {
                        adv(1, &mut i);
                        break;
                    }
                    Some('\\') => {
                        let e = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(err(line, col, "bad escape".into())),
                        };
                        s.push(e);
                        adv(2, &mut i);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        adv(1, &mut i);
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let punct = match two.as_str() {
            "==" => Some("=="),
            "!=" => Some("!="),
            _ => None,
        };
        if let Some(p) = punct {
            adv(2, &mut i);
            out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
            continue;
        }
        let p = match c {
            '(' => "(",
            ')' => ")",
            '{' => "{",
            '}' => "}",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            ';' => ";",
            '.' => ".",
            '=' => "=",
            '+' => "+",
            _ => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
        };
        adv(1, &mut i);
        out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    reactor_vars: BTreeSet<String>,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, message: message.into() })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            t => self.error(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            t => self.error(format!("expected string, found {}", describe(&t))),
        }
    }

    fn program(&mut self) -> Result<Library, ParseError> {
        let mut lib = Library::default();
        while *self.peek() != Tok::Eof {
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            let p = self.procdef()?;
            if lib.get(&p.name).is_some() {
                return Err(ParseError::DuplicateDefinition { name: p.name, line, col });
            }
            lib.procs.push(p);
        }
        Ok(lib)
    }

    fn procdef(&mut self) -> Result<ProcDef, ParseError> {
        self.expect_kw("proc")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.reactor_vars.clear();
        let body = self.block()?;
        Ok(ProcDef { name, params, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(ParseError::Syntax { line, col, message: "unclosed block: missing `}`".into() });
            }
            body.push(self.stmt()?);
        }
        self.bump();
        Ok(body)
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if !self.is_punct(close) {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(close)?;
        Ok(args)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        self.args(")")
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_kw("atomic") {
            let action = self.ident()?;
            let args = self.call_args()?;
            self.expect_punct(";")?;
            return Ok(Stmt::AtomicCall { action, args });
        }
        if self.eat_kw("let") {
            let var = self.ident()?;
            self.expect_punct("=")?;
            // `reactor` is only a keyword when followed by a string
            let inline = self.is_kw("reactor") && matches!(self.peek_at(1), Tok::Str(_));
            let stmt = if inline {
                self.bump();
                let name = self.string()?;
                let args = self.call_args()?;
                Stmt::ReactorCall { var, target: ReactorTarget::Named(name), args }
            } else if matches!(self.peek(), Tok::Ident(s) if s == "get_reactor") && self.peek_at(1) == &Tok::Punct("(") {
                self.bump();
                self.expect_punct("(")?;
                let reactor = self.string()?;
                self.expect_punct(")")?;
                self.reactor_vars.insert(var.clone());
                Stmt::ReactorBind { var, reactor }
            } else if matches!(self.peek(), Tok::Ident(s) if !is_keyword(s)) && self.peek_at(1) == &Tok::Punct("(") {
                let name = self.ident()?;
                let args = self.call_args()?;
                if self.reactor_vars.contains(&name) {
                    Stmt::ReactorCall { var, target: ReactorTarget::Var(name), args }
                } else {
                    Stmt::ProcCall { bind: Some(var), name, args }
                }
            } else {
                Stmt::Assign { var, expr: self.expr()? }
            };
            self.expect_punct(";")?;
            return Ok(stmt);
        }
        if self.eat_kw("if") {
            return self.if_rest();
        }
        if self.eat_kw("for") {
            let var = self.ident()?;
            self.expect_kw("in")?;
            let iter = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::For { var, iter, body });
        }
        if self.eat_kw("while") {
            let cond = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw("return") {
            let expr = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            return Ok(Stmt::Return { expr });
        }
        let name = self.ident()?;
        if self.reactor_vars.contains(&name) {
            return self.error(format!("result of reactor `{name}` must be bound with `let`"));
        }
        let args = self.call_args()?;
        self.expect_punct(";")?;
        Ok(Stmt::ProcCall { bind: None, name, args })
    }

    fn if_rest(&mut self) -> Result<Stmt, ParseError> {
        let cond = self.expr()?;
        let then_body = self.block()?;
        let else_body = if self.eat_kw("else") {
            if self.eat_kw("if") {
                Some(vec![self.if_rest()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If { cond, then_body, else_body })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("or") {
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.not_expr()?;
        while self.eat_kw("and") {
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let e = if self.eat_punct("==") {
            Expr::Cmp(CmpOp::Eq, Box::new(lhs), Box::new(self.add_expr()?))
        } else if self.eat_punct("!=") {
            Expr::Cmp(CmpOp::Ne, Box::new(lhs), Box::new(self.add_expr()?))
        } else if self.eat_kw("in") {
            Expr::In(Box::new(lhs), Box::new(self.add_expr()?))
        } else {
            return Ok(lhs);
        };
        if self.is_punct("==") || self.is_punct("!=") || self.is_kw("in") {
            return self.error("comparisons do not chain; add parentheses");
        }
        Ok(e)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.postfix()?;
        while self.eat_punct("+") {
            e = Expr::Add(Box::new(e), Box::new(self.postfix()?));
        }
        Ok(e)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.eat_punct(".") {
            e = Expr::Attr(Box::new(e), self.ident()?);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                if self.is_punct("(") {
                    return self.error(format!("call to `{s}` is not an expression; bind it with `let`"));
                }
                Ok(if is_enum_ident(&s) { Expr::Enum(s) } else { Expr::Var(s) })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => {
                self.bump();
                Ok(Expr::List(self.args("]")?))
            }
            t => self.error(format!("expected expression, found {}", describe(&t))),
        }
    }
}

/// Parse a `.proc` source into a library.
pub fn parse(src: &str) -> Result<Library, ParseError> {
    let toks = lex(src)?;
    Parser { toks, pos: 0, reactor_vars: BTreeSet::new() }.program()
}
