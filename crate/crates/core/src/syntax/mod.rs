//! Shared surface syntax for expressions: tokens, a precedence-climbing
//! parser, lowering to terms, and canonical printing.

pub mod expr;
pub mod lexer;
pub mod printer;

use thiserror::Error;

pub use expr::{parse_constraint, parse_int_expr, Lowering, Parser, Surf};
pub use lexer::{tokenize, Tok, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("{line}:{col}: unexpected character '{found}'")]
    Lexical { line: usize, col: usize, found: char },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Unexpected {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}: unmatched {what}")]
    Unmatched { line: usize, what: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}

impl SyntaxError {
    pub fn line(&self) -> usize {
        match self {
            SyntaxError::Lexical { line, .. }
            | SyntaxError::Unexpected { line, .. }
            | SyntaxError::Unmatched { line, .. }
            | SyntaxError::Semantic { line, .. } => *line,
        }
    }
}
