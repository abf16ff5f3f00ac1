//! Lossless Solidity lexer.
//!
//! Every byte of the input ends up in exactly one token, including comments
//! and whitespace, so `tokens.iter().map(|t| t.text).collect::<String>()`
//! always reproduces the source. Nothing here can fail: bytes the lexer does
//! not understand become one-character punctuation tokens.

use serde::{Deserialize, Serialize};

use super::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Punctuation,
    Comment,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    /// Whitespace and comments carry no syntax.
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == text
    }
}

const KEYWORDS: &[&str] = &[
    "pragma",
    "import",
    "contract",
    "library",
    "interface",
    "abstract",
    "is",
    "function",
    "constructor",
    "fallback",
    "receive",
    "modifier",
    "event",
    "struct",
    "enum",
    "mapping",
    "using",
    "public",
    "external",
    "internal",
    "private",
    "payable",
    "view",
    "pure",
    "constant",
    "immutable",
    "virtual",
    "override",
    "returns",
    "return",
    "if",
    "else",
    "for",
    "while",
    "do",
    "break",
    "continue",
    "throw",
    "emit",
    "new",
    "delete",
    "memory",
    "storage",
    "calldata",
    "assembly",
    "try",
    "catch",
    "unchecked",
    "var",
    "true",
    "false",
];

// Longest first so that maximal munch picks `>>>=` before `>>`.
const OPERATORS: &[&str] = &[
    ">>>=", ">>>", "<<=", ">>=", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", ":=",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

pub fn lex(source: &str) -> Vec<Token> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;

    while pos < bytes.len() {
        let start = pos;
        let c = source[pos..]
            .chars()
            .next()
            .expect("pos is on a char boundary");
        let kind = if c.is_whitespace() {
            pos = skip_while(source, pos, char::is_whitespace);
            TokenKind::Whitespace
        } else if source[pos..].starts_with("//") {
            pos = source[pos..].find('\n').map_or(bytes.len(), |n| pos + n);
            TokenKind::Comment
        } else if source[pos..].starts_with("/*") {
            pos = source[pos + 2..]
                .find("*/")
                .map_or(bytes.len(), |n| pos + 2 + n + 2);
            TokenKind::Comment
        } else if is_ident_start(c) {
            pos = skip_while(source, pos, is_ident_continue);
            if is_keyword(&source[start..pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() {
            pos = lex_number(bytes, pos);
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            pos = lex_string(bytes, pos);
            TokenKind::String
        } else {
            pos += OPERATORS
                .iter()
                .find(|op| source[pos..].starts_with(*op))
                .map_or(c.len_utf8(), |op| op.len());
            TokenKind::Punctuation
        };
        tokens.push(Token {
            kind,
            text: source[start..pos].to_string(),
            span: Span::new(start, pos),
        });
    }
    tokens
}

fn skip_while(source: &str, pos: usize, pred: impl Fn(char) -> bool) -> usize {
    source[pos..]
        .char_indices()
        .find(|&(_, c)| !pred(c))
        .map_or(source.len(), |(i, _)| pos + i)
}

/// Decimal, hex, dotted versions (`0.4.26`) and exponents.
fn lex_number(bytes: &[u8], mut pos: usize) -> usize {
    if bytes[pos] == b'0' && matches!(bytes.get(pos + 1), Some(b'x') | Some(b'X')) {
        pos += 2;
        while pos < bytes.len() && (bytes[pos].is_ascii_hexdigit() || bytes[pos] == b'_') {
            pos += 1;
        }
        return pos;
    }
    let digits = |mut p: usize| {
        while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'_') {
            p += 1;
        }
        p
    };
    pos = digits(pos);
    while pos + 1 < bytes.len() && bytes[pos] == b'.' && bytes[pos + 1].is_ascii_digit() {
        pos = digits(pos + 1);
    }
    if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
        let mut p = pos + 1;
        if p < bytes.len() && bytes[p] == b'-' {
            p += 1;
        }
        if p < bytes.len() && bytes[p].is_ascii_digit() {
            pos = digits(p);
        }
    }
    pos
}

/// Strings end at the matching quote; an unterminated one stops before the
/// newline so a stray quote cannot swallow the rest of the file.
fn lex_string(bytes: &[u8], start: usize) -> usize {
    let quote = bytes[start];
    let mut pos = start + 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'\\' if pos + 1 < bytes.len() && bytes[pos + 1] != b'\n' => pos += 2,
            b'\n' => return pos,
            b if b == quote => return pos + 1,
            _ => pos += 1,
        }
    }
    // An escape right before EOF can overshoot by one.
    pos.min(bytes.len())
}
