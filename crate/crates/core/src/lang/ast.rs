//! Syntax tree for the walker language. Trees carry no source positions, so
//! structural equality is independent of formatting.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub node_decls: Vec<NodeDecl>,
    pub edge_decls: Vec<EdgeDecl>,
    pub walker_decls: Vec<WalkerDecl>,
}

impl Program {
    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.node_decls.iter().find(|d| d.name == name)
    }

    pub fn edge(&self, name: &str) -> Option<&EdgeDecl> {
        self.edge_decls.iter().find(|d| d.name == name)
    }

    pub fn walker(&self, name: &str) -> Option<&WalkerDecl> {
        self.walker_decls.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub has_fields: Vec<String>,
    pub access_walkers: Option<BTreeSet<String>>,
    pub can_actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDecl {
    pub name: String,
    pub has_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerDecl {
    pub name: String,
    pub has_fields: Vec<String>,
    pub can_actions: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Out,
    In,
    Both,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Out => "-->",
            Direction::In => "<--",
            Direction::Both => "<-->",
        }
    }
}

/// Which way a spawned node is connected: `++>` links here → new node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnDirection {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    /// A walker `has` field.
    WalkerField(String),
    /// A `for` loop variable.
    Var(String),
    HereField(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign(LValue, Expr),
    Take {
        direction: Direction,
        edge_type: Option<String>,
        node_type: Option<String>,
    },
    SpawnNode {
        direction: SpawnDirection,
        edge_type: String,
        node_type: String,
        init: Vec<(String, Expr)>,
    },
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    ForIn(String, Expr, Vec<Stmt>),
    Report(Expr),
    Disengage,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Var(String),
    HereField(String),
    WalkerField(String),
    ActionCall(String, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    List(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

/// Precedence levels shared by the parser and printer.
pub(crate) mod prec {
    pub const NOT: u8 = 3;
    pub const UNARY: u8 = 7;
    pub const POSTFIX: u8 = 8;
    pub const PRIMARY: u8 = 9;
}

impl Expr {
    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Unary(UnaryOp::Not, _) => prec::NOT,
            Expr::Unary(UnaryOp::Neg, _) => prec::UNARY,
            Expr::Index(_, _) => prec::POSTFIX,
            _ => prec::PRIMARY,
        }
    }
}
