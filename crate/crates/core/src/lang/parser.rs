use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, SyntaxError};

/// Parses and resolves a complete program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_with_base(source, None)
}

/// Parses `source` and resolves type, field and action references against
/// both the parsed declarations and `base` (used when injecting walkers
/// into a live program).
pub fn parse_with_base(source: &str, base: Option<&Program>) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        checks: Vec::new(),
    };
    let program = match parser.program() {
        Ok(p) => p,
        Err(err_at) => return Err(parser.locate(err_at).into()),
    };
    resolve(&program, base, &parser.checks)?;
    Ok(program)
}

/// A reference whose validity depends on declarations that may appear later.
#[derive(Debug)]
enum Check {
    NodeType(String, u32),
    EdgeType(String, u32),
    HereField(String, u32),
    SpawnField { node_type: String, field: String, line: u32 },
    Action { walker_can: Vec<String>, name: String, line: u32 },
    Failed { name: String, line: u32, message: &'static str },
}

/// A syntax failure before it has been mapped to a reported position.
struct ErrAt {
    index: usize,
    expected: Vec<String>,
}

type PResult<T> = Result<T, ErrAt>;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    checks: Vec<Check>,
}

struct Scope<'w> {
    has: &'w [String],
    can: &'w [String],
    vars: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn line(&self) -> u32 {
        self.tokens[self.pos].line
    }

    fn bump(&mut self) -> &Tok {
        let t = &self.tokens[self.pos].tok;
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ErrAt {
            index: self.pos,
            expected: expected.iter().map(|s| format!("\"{s}\"")).collect(),
        })
    }

    fn fail_desc<T>(&self, expected: &str) -> PResult<T> {
        Err(ErrAt {
            index: self.pos,
            expected: vec![expected.to_owned()],
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(q) if *q == k)
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

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.fail(&[p])
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.fail(&[k])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => self.fail_desc("identifier"),
        }
    }

    /// Maps a raw failure to a reported position.
    ///
    /// When the offending token starts a later line than the previous token,
    /// the error is placed right after the previous token, where the missing
    /// text belongs. A block whose closing brace is missing is detected from
    /// indentation: the first line that dedents to or past the line that
    /// opened an unclosed block marks where the `}` was expected.
    fn locate(&self, err: ErrAt) -> SyntaxError {
        let (index, expected) = match self.unclosed_block() {
            Some(anomaly) if anomaly <= err.index => (anomaly, vec!["\"}\"".to_owned()]),
            _ => (err.index, err.expected),
        };
        let found = &self.tokens[index];
        let (line, col) = match index.checked_sub(1).map(|i| &self.tokens[i]) {
            Some(prev) if prev.line < found.line => (prev.line, prev.end_col),
            _ => (found.line, found.col),
        };
        SyntaxError {
            line,
            col,
            expected,
            found: found.tok.describe(),
        }
    }

    fn unclosed_block(&self) -> Option<usize> {
        let mut open: Vec<u32> = Vec::new();
        for (i, t) in self.tokens.iter().enumerate() {
            match &t.tok {
                Tok::Punct("}") => {
                    open.pop();
                }
                Tok::Eof => return None,
                _ => {
                    let starts_line = t.col == t.line_indent;
                    if starts_line && open.last().is_some_and(|&indent| t.col <= indent) {
                        return Some(i);
                    }
                    if t.tok == Tok::Punct("{") {
                        open.push(t.line_indent);
                    }
                }
            }
        }
        None
    }

    fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        let mut seen: HashSet<(&'static str, String)> = HashSet::new();
        loop {
            let line = self.line();
            let (kind, name) = match self.peek() {
                Tok::Keyword("node") => {
                    let d = self.node_decl()?;
                    let name = d.name.clone();
                    program.node_decls.push(d);
                    ("node", name)
                }
                Tok::Keyword("edge") => {
                    let d = self.edge_decl()?;
                    let name = d.name.clone();
                    program.edge_decls.push(d);
                    ("edge", name)
                }
                Tok::Keyword("walker") => {
                    let d = self.walker_decl()?;
                    let name = d.name.clone();
                    program.walker_decls.push(d);
                    ("walker", name)
                }
                Tok::Eof => return Ok(program),
                _ => return self.fail(&["node", "edge", "walker"]),
            };
            if !seen.insert((kind, name.clone())) {
                self.checks.push(Check::Failed {
                    name,
                    line,
                    message: "duplicate declaration",
                });
            }
        }
    }

    fn has_stmt(&mut self, into: &mut Vec<String>) -> PResult<()> {
        self.expect_kw("has")?;
        loop {
            let line = self.line();
            let name = self.ident()?;
            if into.contains(&name) {
                self.checks.push(Check::Failed {
                    name: name.clone(),
                    line,
                    message: "duplicate field",
                });
            }
            into.push(name);
            if self.eat_punct(";") {
                return Ok(());
            }
            if !self.eat_punct(",") {
                return self.fail(&[",", ";"]);
            }
        }
    }

    fn can_stmt(&mut self, into: &mut Vec<String>) -> PResult<()> {
        self.expect_kw("can")?;
        let line = self.line();
        let name = self.ident()?;
        if into.contains(&name) {
            self.checks.push(Check::Failed {
                name: name.clone(),
                line,
                message: "duplicate action",
            });
        }
        into.push(name);
        self.expect_punct(";")
    }

    fn node_decl(&mut self) -> PResult<NodeDecl> {
        self.expect_kw("node")?;
        let name = self.ident()?;
        let mut access = None;
        if self.eat_kw("access") {
            self.expect_punct("(")?;
            let mut set = BTreeSet::new();
            set.insert(self.ident()?);
            while self.eat_punct(",") {
                set.insert(self.ident()?);
            }
            self.expect_punct(")")?;
            access = Some(set);
        }
        self.expect_punct("{")?;
        let mut has_fields = Vec::new();
        let mut can_actions = Vec::new();
        loop {
            if self.is_kw("has") {
                self.has_stmt(&mut has_fields)?;
            } else if self.is_kw("can") {
                self.can_stmt(&mut can_actions)?;
            } else if self.eat_punct("}") {
                break;
            } else {
                return self.fail(&["has", "can", "}"]);
            }
        }
        Ok(NodeDecl {
            name,
            has_fields,
            access_walkers: access,
            can_actions,
        })
    }

    fn edge_decl(&mut self) -> PResult<EdgeDecl> {
        self.expect_kw("edge")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut has_fields = Vec::new();
        loop {
            if self.is_kw("has") {
                self.has_stmt(&mut has_fields)?;
            } else if self.eat_punct("}") {
                break;
            } else {
                return self.fail(&["has", "}"]);
            }
        }
        Ok(EdgeDecl { name, has_fields })
    }

    fn walker_decl(&mut self) -> PResult<WalkerDecl> {
        self.expect_kw("walker")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut has_fields = Vec::new();
        let mut can_actions = Vec::new();
        loop {
            if self.is_kw("has") {
                self.has_stmt(&mut has_fields)?;
            } else if self.is_kw("can") {
                self.can_stmt(&mut can_actions)?;
            } else {
                break;
            }
        }
        let mut scope = Scope {
            has: &has_fields,
            can: &can_actions,
            vars: Vec::new(),
        };
        let mut body = Vec::new();
        while !self.eat_punct("}") {
            body.push(self.stmt(&mut scope)?);
        }
        Ok(WalkerDecl {
            name,
            has_fields,
            can_actions,
            body,
        })
    }

    fn block(&mut self, scope: &mut Scope) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            stmts.push(self.stmt(scope)?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self, scope: &mut Scope) -> PResult<Stmt> {
        match self.peek() {
            Tok::Keyword("take") => self.take(),
            Tok::Keyword("spawn") => self.spawn(scope),
            Tok::Keyword("if") => {
                self.bump();
                let cond = self.expr(scope)?;
                let then = self.block(scope)?;
                let otherwise = if self.eat_kw("else") {
                    self.block(scope)?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If(cond, then, otherwise))
            }
            Tok::Keyword("for") => {
                self.bump();
                let line = self.line();
                let var = self.ident()?;
                if scope.has.contains(&var) || scope.vars.contains(&var) {
                    self.checks.push(Check::Failed {
                        name: var.clone(),
                        line,
                        message: "loop variable shadows",
                    });
                }
                self.expect_kw("in")?;
                let iter = self.expr(scope)?;
                scope.vars.push(var.clone());
                let body = self.block(scope);
                scope.vars.pop();
                Ok(Stmt::ForIn(var, iter, body?))
            }
            Tok::Keyword("report") => {
                self.bump();
                let e = self.expr(scope)?;
                self.expect_punct(";")?;
                Ok(Stmt::Report(e))
            }
            Tok::Keyword("disengage") => {
                self.bump();
                self.expect_punct(";")?;
                Ok(Stmt::Disengage)
            }
            Tok::Keyword("has") | Tok::Keyword("can") => {
                self.fail_desc("statement (declarations must precede statements)")
            }
            _ => {
                let start = self.pos;
                let e = self.expr(scope)?;
                if self.is_punct("=") {
                    let target = match e {
                        Expr::Var(v) => LValue::Var(v),
                        Expr::WalkerField(f) => LValue::WalkerField(f),
                        Expr::HereField(f) => LValue::HereField(f),
                        _ => {
                            return Err(ErrAt {
                                index: start,
                                expected: vec!["assignable name or here.field".into()],
                            })
                        }
                    };
                    self.bump();
                    let value = self.expr(scope)?;
                    self.expect_punct(";")?;
                    Ok(Stmt::Assign(target, value))
                } else {
                    if !self.is_punct(";") {
                        return self.fail(&[";", "="]);
                    }
                    self.bump();
                    Ok(Stmt::Expr(e))
                }
            }
        }
    }

    fn take(&mut self) -> PResult<Stmt> {
        self.expect_kw("take")?;
        let direction = match self.peek() {
            Tok::Punct("-->") => Direction::Out,
            Tok::Punct("<--") => Direction::In,
            Tok::Punct("<-->") => Direction::Both,
            _ => return self.fail(&["-->", "<--", "<-->"]),
        };
        self.bump();
        let mut edge_type = None;
        if self.eat_punct(":") {
            let line = self.line();
            let name = self.ident()?;
            self.checks.push(Check::EdgeType(name.clone(), line));
            edge_type = Some(name);
        }
        let mut node_type = None;
        if self.eat_punct("(") {
            let line = self.line();
            let name = self.ident()?;
            self.checks.push(Check::NodeType(name.clone(), line));
            node_type = Some(name);
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        Ok(Stmt::Take {
            direction,
            edge_type,
            node_type,
        })
    }

    fn spawn(&mut self, scope: &mut Scope) -> PResult<Stmt> {
        self.expect_kw("spawn")?;
        self.expect_kw("here")?;
        let direction = if self.eat_punct("++>") {
            SpawnDirection::Out
        } else if self.eat_punct("<++") {
            SpawnDirection::In
        } else {
            return self.fail(&["++>", "<++"]);
        };
        self.expect_punct(":")?;
        let line = self.line();
        let edge_type = self.ident()?;
        self.checks.push(Check::EdgeType(edge_type.clone(), line));
        let line = self.line();
        let node_type = self.ident()?;
        self.checks.push(Check::NodeType(node_type.clone(), line));
        self.expect_punct("{")?;
        let mut init: Vec<(String, Expr)> = Vec::new();
        while !self.eat_punct("}") {
            let line = self.line();
            let field = match self.ident() {
                Ok(f) => f,
                Err(_) => return self.fail_desc("identifier or \"}\""),
            };
            if init.iter().any(|(f, _)| *f == field) {
                self.checks.push(Check::Failed {
                    name: field.clone(),
                    line,
                    message: "duplicate initializer",
                });
            }
            self.checks.push(Check::SpawnField {
                node_type: node_type.clone(),
                field: field.clone(),
                line,
            });
            self.expect_punct("=")?;
            let e = self.expr(scope)?;
            self.expect_punct(";")?;
            init.push((field, e));
        }
        self.expect_punct(";")?;
        Ok(Stmt::SpawnNode {
            direction,
            edge_type,
            node_type,
            init,
        })
    }

    fn expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let mut lhs = self.and_expr(scope)?;
        while self.eat_kw("or") {
            let rhs = self.and_expr(scope)?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let mut lhs = self.not_expr(scope)?;
        while self.eat_kw("and") {
            let rhs = self.not_expr(scope)?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        if self.eat_kw("not") {
            let inner = self.not_expr(scope)?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(inner)));
        }
        self.cmp_expr(scope)
    }

    fn cmp_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let mut lhs = self.add_expr(scope)?;
        loop {
            let op = match self.peek() {
                Tok::Punct("==") => BinOp::Eq,
                Tok::Punct("!=") => BinOp::Ne,
                Tok::Punct("<") => BinOp::Lt,
                Tok::Punct(">") => BinOp::Gt,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.add_expr(scope)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn add_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let mut lhs = self.mul_expr(scope)?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr(scope)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let mut lhs = self.unary_expr(scope)?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_expr(scope)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_expr(&mut self, scope: &mut Scope) -> PResult<Expr> {
        if self.eat_punct("-") {
            let inner = self.unary_expr(scope)?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        let mut e = self.primary(scope)?;
        while self.eat_punct("[") {
            let index = self.expr(scope)?;
            self.expect_punct("]")?;
            e = Expr::Index(Box::new(e), Box::new(index));
        }
        Ok(e)
    }

    fn args(&mut self, scope: &mut Scope, close: &str) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        if self.eat_punct(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr(scope)?);
            if self.eat_punct(close) {
                return Ok(items);
            }
            if !self.eat_punct(",") {
                return self.fail(&[",", close]);
            }
        }
    }

    fn primary(&mut self, scope: &mut Scope) -> PResult<Expr> {
        let line = self.line();
        let tok = self.peek().clone();
        let e = match tok {
            Tok::Int(i) => {
                self.bump();
                Expr::Literal(Literal::Int(i))
            }
            Tok::Float(f) => {
                self.bump();
                Expr::Literal(Literal::Float(f))
            }
            Tok::Str(s) => {
                self.bump();
                Expr::Literal(Literal::Str(s))
            }
            Tok::Keyword("null") => {
                self.bump();
                Expr::Literal(Literal::Null)
            }
            Tok::Keyword("true") => {
                self.bump();
                Expr::Literal(Literal::Bool(true))
            }
            Tok::Keyword("false") => {
                self.bump();
                Expr::Literal(Literal::Bool(false))
            }
            Tok::Keyword("here") => {
                self.bump();
                self.expect_punct(".")?;
                let line = self.line();
                let field = self.ident()?;
                self.checks.push(Check::HereField(field.clone(), line));
                Expr::HereField(field)
            }
            Tok::Punct("[") => {
                self.bump();
                Expr::List(self.args(scope, "]")?)
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr(scope)?;
                self.expect_punct(")")?;
                e
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Punct("(") {
                    self.bump();
                    self.checks.push(Check::Action {
                        walker_can: scope.can.to_vec(),
                        name: name.clone(),
                        line,
                    });
                    let args = self.args(scope, ")")?;
                    Expr::ActionCall(name, args)
                } else if scope.vars.contains(&name) {
                    Expr::Var(name)
                } else if scope.has.contains(&name) {
                    Expr::WalkerField(name)
                } else {
                    self.checks.push(Check::Failed {
                        name: name.clone(),
                        line,
                        message: "unknown name",
                    });
                    Expr::Var(name)
                }
            }
            _ => return self.fail_desc("expression"),
        };
        Ok(e)
    }
}

fn resolve(program: &Program, base: Option<&Program>, checks: &[Check]) -> Result<(), ParseError> {
    let err = |name: &str, line: u32, message: &str| ParseError::Resolution {
        name: name.to_owned(),
        line,
        message: message.to_owned(),
    };

    let nodes = || program.node_decls.iter().chain(base.into_iter().flat_map(|b| &b.node_decls));
    let edges = || program.edge_decls.iter().chain(base.into_iter().flat_map(|b| &b.edge_decls));
    let node = |name: &str| nodes().find(|d| d.name == name);

    for check in checks {
        match check {
            Check::NodeType(name, line) => {
                if node(name).is_none() {
                    return Err(err(name, *line, "unknown node type"));
                }
            }
            Check::EdgeType(name, line) => {
                if !edges().any(|d| d.name == *name) {
                    return Err(err(name, *line, "unknown edge type"));
                }
            }
            Check::HereField(name, line) => {
                if !nodes().any(|d| d.has_fields.contains(name)) {
                    return Err(err(name, *line, "no node type declares field"));
                }
            }
            Check::SpawnField {
                node_type,
                field,
                line,
            } => {
                if let Some(decl) = node(node_type) {
                    if !decl.has_fields.contains(field) {
                        return Err(err(field, *line, "undeclared field"));
                    }
                }
            }
            Check::Action {
                walker_can,
                name,
                line,
            } => {
                let allowed = walker_can.contains(name)
                    || nodes().any(|d| d.can_actions.contains(name));
                if !allowed {
                    return Err(err(name, *line, "undeclared action"));
                }
            }
            Check::Failed {
                name,
                line,
                message,
            } => return Err(err(name, *line, message)),
        }
    }
    Ok(())
}
