//! Lexing, pragma handling and a shallow structural parse of Solidity.

mod lexer;
mod model;
mod parser;
mod version;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use lexer::{is_keyword, lex, Token, TokenKind};
pub use model::*;
pub use parser::parse;
pub use version::{version_applies, ConstraintError, PragmaConstraint, Version};

/// Half-open byte range into a source file.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub fn contains_span(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}
