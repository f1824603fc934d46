//! The walker language: lexer, recursive-descent parser with name resolution,
//! and a canonical pretty-printer.
//!
//! ```text
//! node day { has date, tasks; }
//! edge next { }
//! walker count {
//!     has n;
//!     n = n + 1;
//!     take -->:next;
//!     report n;
//! }
//! ```

pub mod ast;
pub mod lexer;
mod parser;
mod printer;

use std::fmt;

pub use ast::*;
pub use parser::{parse, parse_with_base};
pub use printer::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at {}:{}: expected {}, found {}",
            self.line,
            self.col,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("resolution error at line {line}: {message} `{name}`")]
    Resolution {
        name: String,
        line: u32,
        message: String,
    },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::Syntax(e) => e.line,
            ParseError::Resolution { line, .. } => *line,
        }
    }
}
