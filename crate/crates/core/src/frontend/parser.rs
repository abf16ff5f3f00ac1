//! Shallow structural parser.
//!
//! Recognizes the pragma, contract-level declarations, function headers and
//! a flat list of classified statements per function. It is not a grammar
//! for the whole language: anything it cannot classify becomes an opaque
//! statement, and malformed regions produce diagnostics instead of errors.

use std::collections::HashSet;

use super::lexer::{lex, Token, TokenKind};
use super::model::*;
use super::version::PragmaConstraint;
use super::Span;

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>=",
];

pub fn parse(source: &str, file_path: &str) -> SourceModel {
    let raw_tokens = lex(source);
    let sig = raw_tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_trivia())
        .map(|(i, _)| i)
        .collect();
    let mut parser = Parser {
        src: source,
        toks: &raw_tokens,
        sig,
        diags: Vec::new(),
        struct_names: HashSet::new(),
    };
    parser.collect_struct_names();
    let (pragma, contracts) = parser.parse_file();
    let diagnostics = parser.diags;
    SourceModel {
        file_path: file_path.to_string(),
        pragma,
        contracts,
        raw_tokens,
        diagnostics,
        source: source.to_string(),
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    /// Indices of non-trivia tokens; parser positions index into this.
    sig: Vec<usize>,
    diags: Vec<Diagnostic>,
    struct_names: HashSet<String>,
}

struct FnCtx<'s> {
    state_vars: &'s HashSet<String>,
    locals: HashSet<String>,
    stmts: Vec<Stmt>,
}

struct PendingFunction {
    decl: FunctionDecl,
    body: Option<(usize, usize)>,
}

impl<'a> Parser<'a> {
    fn n(&self) -> usize {
        self.sig.len()
    }

    fn tok(&self, i: usize) -> &'a Token {
        &self.toks[self.sig[i]]
    }

    fn text(&self, i: usize) -> &'a str {
        &self.tok(i).text
    }

    fn at(&self, i: usize, text: &str) -> bool {
        i < self.n() && self.tok(i).text == text
    }

    fn is_ident(&self, i: usize) -> bool {
        i < self.n() && self.tok(i).kind == TokenKind::Identifier
    }

    fn span_of(&self, lo: usize, hi_incl: usize) -> Span {
        Span::new(self.tok(lo).span.start, self.tok(hi_incl).span.end)
    }

    /// Source text from token `lo` up to (not including) token `hi`.
    fn text_between(&self, lo: usize, hi: usize) -> &'a str {
        if lo >= hi || lo >= self.n() {
            return "";
        }
        let src: &'a str = self.src;
        &src[self.tok(lo).span.start..self.tok(hi - 1).span.end]
    }

    fn diag(&mut self, i: usize, message: impl Into<String>) {
        let span = if i < self.n() {
            self.tok(i).span
        } else {
            Span::new(self.src.len(), self.src.len())
        };
        self.diags.push(Diagnostic {
            span,
            message: message.into(),
        });
    }

    fn is_open(&self, i: usize) -> bool {
        matches!(self.text(i), "(" | "[" | "{") && self.tok(i).kind == TokenKind::Punctuation
    }

    fn is_close(&self, i: usize) -> bool {
        matches!(self.text(i), ")" | "]" | "}") && self.tok(i).kind == TokenKind::Punctuation
    }

    /// Index of the bracket closing the one at `open`, searching below `limit`.
    fn matching(&self, open: usize, limit: usize) -> Option<usize> {
        let mut depth = 0usize;
        for j in open..limit.min(self.n()) {
            if self.is_open(j) {
                depth += 1;
            } else if self.is_close(j) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn matching_back(&self, close: usize, lo: usize) -> Option<usize> {
        let mut depth = 0usize;
        for j in (lo..=close).rev() {
            if self.is_close(j) {
                depth += 1;
            } else if self.is_open(j) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    /// Scans for the `;` ending a statement. Returns its index and `true`, or
    /// the index of the first unbalanced closer (or `limit`) and `false`.
    fn scan_to_semicolon(&self, from: usize, limit: usize) -> (usize, bool) {
        let mut depth = 0usize;
        for j in from..limit {
            if self.is_open(j) {
                depth += 1;
            } else if self.is_close(j) {
                if depth == 0 {
                    return (j, false);
                }
                depth -= 1;
            } else if depth == 0 && self.at(j, ";") {
                return (j, true);
            }
        }
        (limit, false)
    }

    /// Skips one top-level or member item: up to its `;` or past its
    /// braced body.
    fn skip_item(&self, from: usize, limit: usize) -> usize {
        let mut j = from;
        while j < limit {
            if self.at(j, "{") {
                return self.matching(j, limit).map_or(limit, |c| c + 1);
            }
            if self.is_open(j) {
                j = self.matching(j, limit).map_or(limit, |c| c + 1);
                continue;
            }
            if self.is_close(j) {
                return j.max(from + 1);
            }
            if self.at(j, ";") {
                return j + 1;
            }
            j += 1;
        }
        limit
    }

    fn split_top_level(&self, lo: usize, hi: usize, sep: &str) -> Vec<(usize, usize)> {
        let mut parts = Vec::new();
        let mut depth = 0usize;
        let mut start = lo;
        for j in lo..hi {
            if self.is_open(j) {
                depth += 1;
            } else if self.is_close(j) {
                depth = depth.saturating_sub(1);
            } else if depth == 0 && self.at(j, sep) {
                parts.push((start, j));
                start = j + 1;
            }
        }
        if start < hi {
            parts.push((start, hi));
        }
        parts
    }

    fn collect_struct_names(&mut self) {
        for i in 0..self.n().saturating_sub(1) {
            if self.at(i, "struct") && self.is_ident(i + 1) {
                self.struct_names.insert(self.text(i + 1).to_string());
            }
        }
    }

    fn parse_file(&mut self) -> (PragmaConstraint, Vec<ContractDecl>) {
        let n = self.n();
        let mut pragma: Option<PragmaConstraint> = None;
        let mut contracts = Vec::new();
        let mut i = 0;
        while i < n {
            match self.text(i) {
                "pragma" => {
                    let (end, found) = self.scan_to_semicolon(i + 1, n);
                    if self.at(i + 1, "solidity") {
                        let text = self.text_between(i + 2, end);
                        match PragmaConstraint::parse(text) {
                            Ok(c) => {
                                pragma = Some(match pragma {
                                    None => c,
                                    Some(p) => p.intersect(&c),
                                })
                            }
                            Err(e) => self.diag(i, e.to_string()),
                        }
                    }
                    if !found {
                        self.diag(i, "pragma without terminating `;`");
                    }
                    i = if found { end + 1 } else { end.max(i + 1) };
                }
                "contract" | "library" | "interface" => {
                    let (decl, next) = self.parse_contract(i, i);
                    contracts.extend(decl);
                    i = next;
                }
                "abstract" if self.at(i + 1, "contract") => {
                    let (decl, next) = self.parse_contract(i + 1, i);
                    contracts.extend(decl);
                    i = next;
                }
                "}" | ")" | "]" => {
                    self.diag(i, format!("unbalanced `{}`", self.text(i)));
                    i += 1;
                }
                _ => i = self.skip_item(i, n),
            }
        }
        (pragma.unwrap_or_default(), contracts)
    }

    fn parse_contract(&mut self, kw: usize, start: usize) -> (Option<ContractDecl>, usize) {
        let n = self.n();
        let kind = match self.text(kw) {
            "library" => ContractKind::Library,
            "interface" => ContractKind::Interface,
            _ => ContractKind::Contract,
        };
        let name = if self.is_ident(kw + 1) {
            self.text(kw + 1).to_string()
        } else {
            self.diag(kw, "contract without a name");
            String::new()
        };
        let mut open = kw + 1;
        while open < n && !self.at(open, "{") && !self.at(open, ";") {
            open += 1;
        }
        if !self.at(open, "{") {
            self.diag(kw, format!("`{name}` has no body"));
            return (None, (open + 1).min(n));
        }
        let close = self.matching(open, n);
        if close.is_none() {
            self.diag(open, format!("`{name}` body is not closed"));
        }
        let hi = close.unwrap_or(n);
        let end = close.map_or(self.src.len(), |c| self.tok(c).span.end);

        let mut state_vars: Vec<VarDecl> = Vec::new();
        let mut pending = Vec::new();
        let mut i = open + 1;
        while i < hi {
            match self.text(i) {
                "function" | "constructor" | "fallback" | "receive" => {
                    let (p, next) = self.parse_function_header(i, hi, &name);
                    pending.push(p);
                    i = next;
                }
                "modifier" | "struct" | "enum" | "event" | "using" | "error" => {
                    i = self.skip_item(i, hi);
                }
                ";" => i += 1,
                _ => {
                    let (end, found) = self.scan_to_semicolon(i, hi);
                    match self.parse_var_decl(i, end) {
                        Some(v) if !v.name.is_empty() => state_vars.push(v),
                        _ => self.diag(i, "unrecognized contract member"),
                    }
                    i = if found { end + 1 } else { end.max(i + 1) };
                }
            }
        }

        let mut shadowed = Vec::new();
        let mut state_names = HashSet::new();
        for v in &state_vars {
            if !state_names.insert(v.name.clone()) {
                shadowed.push(v.name.clone());
            }
        }
        let mut functions = Vec::with_capacity(pending.len());
        for PendingFunction { mut decl, body } in pending {
            for p in &decl.params {
                if state_names.contains(&p.name) {
                    shadowed.push(p.name.clone());
                }
            }
            if let Some((lo, hi)) = body {
                let mut ctx = FnCtx {
                    state_vars: &state_names,
                    locals: decl.params.iter().map(|p| p.name.clone()).collect(),
                    stmts: Vec::new(),
                };
                let mut guards = Vec::new();
                self.parse_block(lo, hi, &mut ctx, &mut guards);
                let body_span = decl.body_span.expect("set with body range");
                decl.body = self.tile(body_span, ctx.stmts);
                for v in decl.locals() {
                    if state_names.contains(&v.name) {
                        shadowed.push(v.name.clone());
                    }
                }
            }
            functions.push(decl);
        }
        shadowed.sort();
        shadowed.dedup();

        let decl = ContractDecl {
            name,
            kind,
            state_vars,
            functions,
            span: Span::new(self.tok(start).span.start, end),
            shadowed,
        };
        (Some(decl), close.map_or(n, |c| c + 1))
    }

    fn parse_function_header(
        &mut self,
        i: usize,
        hi: usize,
        contract_name: &str,
    ) -> (PendingFunction, usize) {
        let mut j = i + 1;
        let (name, is_fallback, is_constructor) = match self.text(i) {
            "constructor" => ("constructor".to_string(), false, true),
            "fallback" => ("fallback".to_string(), true, false),
            "receive" => ("receive".to_string(), false, false),
            _ if j < hi && !self.at(j, "(") && !self.is_close(j) => {
                let name = self.text(j).to_string();
                j += 1;
                let is_ctor = name == contract_name;
                (name, false, is_ctor)
            }
            _ => ("fallback".to_string(), true, false),
        };

        let mut params = Vec::new();
        if self.at(j, "(") {
            match self.matching(j, hi) {
                Some(close) => {
                    for (lo, phi) in self.split_top_level(j + 1, close, ",") {
                        match self.parse_var_decl(lo, phi) {
                            Some(v) => params.push(v),
                            None => self.diag(lo, "unrecognized parameter"),
                        }
                    }
                    j = close + 1;
                }
                None => {
                    self.diag(j, "unclosed parameter list");
                    j = hi;
                }
            }
        } else {
            self.diag(i, format!("function `{name}` has no parameter list"));
        }

        let mut visibility = Visibility::Default;
        let mut payable = false;
        let mut modifiers = Vec::new();
        while j < hi && !self.at(j, "{") && !self.at(j, ";") && !self.at(j, "}") {
            match self.text(j) {
                "public" => visibility = Visibility::Public,
                "external" => visibility = Visibility::External,
                "internal" => visibility = Visibility::Internal,
                "private" => visibility = Visibility::Private,
                "payable" => payable = true,
                "returns" | "override" if self.at(j + 1, "(") => {
                    j = self.matching(j + 1, hi).unwrap_or(hi);
                }
                "(" => j = self.matching(j, hi).unwrap_or(hi),
                _ if self.is_ident(j) => {
                    modifiers.push(self.text(j).to_string());
                    if self.at(j + 1, "(") {
                        j = self.matching(j + 1, hi).unwrap_or(hi);
                    }
                }
                _ => {}
            }
            j += 1;
        }

        let start = self.tok(i).span.start;
        let (span_end, body, body_span, next) = if self.at(j, "{") {
            match self.matching(j, hi) {
                Some(close) => (
                    self.tok(close).span.end,
                    Some((j + 1, close)),
                    Some(Span::new(self.tok(j).span.end, self.tok(close).span.start)),
                    close + 1,
                ),
                None => {
                    self.diag(j, format!("body of `{name}` is not closed"));
                    let end = if hi < self.n() {
                        self.tok(hi).span.start
                    } else {
                        self.src.len()
                    };
                    (
                        end,
                        Some((j + 1, hi)),
                        Some(Span::new(self.tok(j).span.end, end)),
                        hi,
                    )
                }
            }
        } else if self.at(j, ";") {
            (self.tok(j).span.end, None, None, j + 1)
        } else {
            self.diag(i, format!("function `{name}` has neither body nor `;`"));
            let end = if j > i {
                self.tok(j.min(hi) - 1).span.end
            } else {
                self.tok(i).span.end
            };
            (end, None, None, j.max(i + 1))
        };

        let decl = FunctionDecl {
            name,
            params,
            visibility,
            payable,
            modifiers,
            body: Vec::new(),
            body_span,
            span: Span::new(start, span_end),
            is_fallback,
            is_constructor,
        };
        (PendingFunction { decl, body }, next)
    }

    /// Parses `Type [location|modifiers] [name] [= init]` over `[lo, hi)`.
    /// The name may be missing (unnamed parameters).
    fn parse_var_decl(&self, lo: usize, hi: usize) -> Option<VarDecl> {
        if lo >= hi {
            return None;
        }
        let mut j = lo;
        let mut is_mapping = false;
        match self.text(j) {
            "mapping" if self.at(j + 1, "(") => {
                j = self.matching(j + 1, hi)? + 1;
                is_mapping = true;
            }
            "function" if self.at(j + 1, "(") => {
                j = self.matching(j + 1, hi)? + 1;
                while j < hi && self.tok(j).kind == TokenKind::Keyword {
                    if self.at(j, "returns") && self.at(j + 1, "(") {
                        j = self.matching(j + 1, hi)?;
                    }
                    j += 1;
                }
            }
            "var" => j += 1,
            _ if self.is_ident(j) => {
                j += 1;
                while self.at(j, ".") && j + 1 < hi && self.is_ident(j + 1) {
                    j += 2;
                }
                if self.at(lo, "address") && j < hi && self.at(j, "payable") {
                    j += 1;
                }
            }
            _ => return None,
        }
        let base_end = j;
        let mut is_array = false;
        while j < hi && self.at(j, "[") {
            j = self.matching(j, hi)? + 1;
            is_array = true;
        }
        let type_text = self.text_between(lo, j).to_string();

        let mut location = StorageLocation::Default;
        while j < hi && self.tok(j).kind == TokenKind::Keyword {
            match self.text(j) {
                "storage" => location = StorageLocation::Storage,
                "memory" => location = StorageLocation::Memory,
                "calldata" => location = StorageLocation::Calldata,
                "override" if self.at(j + 1, "(") => j = self.matching(j + 1, hi)?,
                _ => {}
            }
            j += 1;
        }
        let name = if j < hi && self.is_ident(j) {
            j += 1;
            self.text(j - 1).to_string()
        } else {
            String::new()
        };
        let initializer = if j < hi && self.at(j, "=") {
            Some(self.text_between(j + 1, hi).to_string())
        } else if j < hi {
            return None;
        } else {
            None
        };

        let base = self.text_between(lo, base_end);
        let type_class = if is_mapping {
            TypeClass::Mapping
        } else if is_array {
            TypeClass::Array
        } else {
            self.classify_type(base)
        };
        Some(VarDecl {
            name,
            type_text,
            type_class,
            storage_location: location,
            has_initializer: initializer.is_some(),
            initializer,
            span: self.span_of(lo, hi - 1),
        })
    }

    fn classify_type(&self, base: &str) -> TypeClass {
        let last = base.rsplit('.').next().unwrap_or(base).trim();
        let sized = |prefix: &str| {
            last.strip_prefix(prefix)
                .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
        };
        if sized("int") {
            TypeClass::SignedInt
        } else if sized("uint") {
            TypeClass::UnsignedInt
        } else if last == "address" || last.starts_with("address ") {
            TypeClass::Address
        } else if self.struct_names.contains(last) {
            TypeClass::UserComposite
        } else {
            TypeClass::Other
        }
    }

    fn parse_block(&mut self, lo: usize, hi: usize, ctx: &mut FnCtx, guards: &mut Vec<String>) {
        let scope = guards.len();
        let mut i = lo;
        while i < hi {
            i = self.parse_stmt(i, hi, ctx, guards);
        }
        guards.truncate(scope);
    }

    /// Parses a statement body in its own guard scope.
    fn parse_scoped(
        &mut self,
        i: usize,
        hi: usize,
        ctx: &mut FnCtx,
        guards: &mut Vec<String>,
    ) -> usize {
        let scope = guards.len();
        let next = if i < hi {
            self.parse_stmt(i, hi, ctx, guards)
        } else {
            i
        };
        guards.truncate(scope);
        next
    }

    fn parse_stmt(
        &mut self,
        i: usize,
        hi: usize,
        ctx: &mut FnCtx,
        guards: &mut Vec<String>,
    ) -> usize {
        match self.text(i) {
            "{" => {
                let close = self.matching(i, hi).unwrap_or_else(|| {
                    self.diag(i, "unclosed block");
                    hi
                });
                self.parse_block(i + 1, close, ctx, guards);
                (close + 1).min(hi)
            }
            "if" if self.at(i + 1, "(") => {
                let Some(close) = self.matching(i + 1, hi) else {
                    self.diag(i, "unclosed `if` condition");
                    self.push_stmt(ctx, i, hi - 1, StmtKind::Opaque, guards);
                    return hi;
                };
                let condition = self.text_between(i + 2, close).trim().to_string();
                self.push_stmt(
                    ctx,
                    i,
                    close,
                    StmtKind::IfGuard {
                        condition: condition.clone(),
                    },
                    guards,
                );
                guards.push(condition.clone());
                let mut next = self.parse_scoped(close + 1, hi, ctx, guards);
                guards.pop();
                if next < hi && self.at(next, "else") {
                    guards.push(format!("!({condition})"));
                    next = self.parse_scoped(next + 1, hi, ctx, guards);
                    guards.pop();
                }
                next
            }
            "for" | "while" if self.at(i + 1, "(") => {
                let close = self.matching(i + 1, hi).unwrap_or(hi - 1);
                self.push_stmt(ctx, i, close, StmtKind::Opaque, guards);
                self.parse_scoped(close + 1, hi, ctx, guards)
            }
            "do" => {
                self.push_stmt(ctx, i, i, StmtKind::Opaque, guards);
                let next = self.parse_scoped(i + 1, hi, ctx, guards);
                if next < hi && self.at(next, "while") {
                    let (end, found) = self.scan_to_semicolon(next, hi);
                    let last = if found {
                        end
                    } else {
                        end.saturating_sub(1).max(next)
                    };
                    self.push_stmt(ctx, next, last, StmtKind::Opaque, guards);
                    return last + 1;
                }
                next
            }
            "assembly" => {
                let mut j = i + 1;
                while j < hi && !self.at(j, "{") {
                    j += 1;
                }
                let close = if j < hi {
                    self.matching(j, hi).unwrap_or(hi - 1)
                } else {
                    hi - 1
                };
                self.push_stmt(ctx, i, close, StmtKind::Opaque, guards);
                close + 1
            }
            "unchecked" if self.at(i + 1, "{") => self.parse_stmt(i + 1, hi, ctx, guards),
            "try" | "catch" => {
                let mut j = i + 1;
                while j < hi && !self.at(j, "{") {
                    if self.is_open(j) {
                        j = self.matching(j, hi).unwrap_or(hi);
                    }
                    j += 1;
                }
                self.push_stmt(ctx, i, (j - 1).max(i), StmtKind::Opaque, guards);
                let mut next = self.parse_scoped(j, hi, ctx, guards);
                if next < hi && self.at(next, "catch") {
                    next = self.parse_stmt(next, hi, ctx, guards);
                }
                next
            }
            ";" => {
                self.push_stmt(ctx, i, i, StmtKind::Opaque, guards);
                i + 1
            }
            _ => self.parse_simple(i, hi, ctx, guards),
        }
    }

    fn parse_simple(
        &mut self,
        i: usize,
        hi: usize,
        ctx: &mut FnCtx,
        guards: &mut Vec<String>,
    ) -> usize {
        let (end, found) = self.scan_to_semicolon(i, hi);
        if !found && end == i {
            self.diag(i, format!("unexpected `{}`", self.text(i)));
            self.push_stmt(ctx, i, i, StmtKind::Opaque, guards);
            return i + 1;
        }
        if !found {
            self.diag(end.saturating_sub(1), "missing `;`");
        }
        let expr_hi = end;
        let last = if found { end } else { end - 1 };
        let kind = self.classify(i, expr_hi, ctx);
        let new_guard = kind.guard_condition().map(str::to_string);
        self.push_stmt(ctx, i, last, kind, guards);
        guards.extend(new_guard);
        last + 1
    }

    fn classify(&self, lo: usize, hi: usize, ctx: &mut FnCtx) -> StmtKind {
        if lo >= hi {
            return StmtKind::Opaque;
        }
        match self.text(lo) {
            "return" => {
                return StmtKind::Return {
                    expr: self.text_between(lo + 1, hi).to_string(),
                }
            }
            "require" | "assert" if self.at(lo + 1, "(") => {
                let close = self.matching(lo + 1, hi).unwrap_or(hi);
                let condition = self
                    .split_top_level(lo + 2, close, ",")
                    .first()
                    .map(|&(a, b)| self.text_between(a, b).to_string())
                    .unwrap_or_default();
                return StmtKind::RequireOrAssert { condition };
            }
            "revert" | "throw" | "emit" | "break" | "continue" => return StmtKind::Opaque,
            _ => {}
        }

        let decl = self.parse_var_decl(lo, hi).filter(|v| !v.name.is_empty());
        if let Some(v) = &decl {
            ctx.locals.insert(v.name.clone());
        }
        if let Some(call) = self.find_calls(lo, hi).into_iter().next() {
            return StmtKind::ExternalCall(call);
        }
        if let Some(v) = decl {
            return StmtKind::LocalVarDecl(v);
        }

        let mut depth = 0usize;
        for k in lo..hi {
            if self.is_open(k) {
                depth += 1;
            } else if self.is_close(k) {
                depth = depth.saturating_sub(1);
            } else if depth == 0
                && self.tok(k).kind == TokenKind::Punctuation
                && ASSIGN_OPS.contains(&self.text(k))
            {
                let op = self.text(k);
                let a = Assignment {
                    lhs: self.text_between(lo, k).to_string(),
                    op: op.to_string(),
                    rhs: self.text_between(k + 1, hi).to_string(),
                    lhs_is_state_var: self.lhs_is_state(lo, k, ctx),
                };
                return if op == "=" {
                    StmtKind::Assignment(a)
                } else {
                    StmtKind::CompoundAssignment(a)
                };
            }
        }

        let unary = |op: &str, lhs_lo: usize, lhs_hi: usize| {
            StmtKind::CompoundAssignment(Assignment {
                lhs: self.text_between(lhs_lo, lhs_hi).to_string(),
                op: op.to_string(),
                rhs: String::new(),
                lhs_is_state_var: self.lhs_is_state(lhs_lo, lhs_hi, ctx),
            })
        };
        match (self.text(lo), self.text(hi - 1)) {
            (op @ ("++" | "--" | "delete"), _) => unary(op, lo + 1, hi),
            (_, op @ ("++" | "--")) => unary(op, lo, hi - 1),
            _ => StmtKind::Opaque,
        }
    }

    /// Root identifier of an assignment target is a state variable not
    /// hidden by a parameter or local.
    fn lhs_is_state(&self, lo: usize, hi: usize, ctx: &FnCtx) -> bool {
        let root = (lo..hi).find(|&k| self.is_ident(k)).map(|k| self.text(k));
        root.is_some_and(|r| ctx.state_vars.contains(r) && !ctx.locals.contains(r))
    }

    fn find_calls(&self, lo: usize, hi: usize) -> Vec<CallSite> {
        let mut calls = Vec::new();
        for k in lo..hi {
            if !self.at(k, ".") || k == lo || k + 2 > hi {
                continue;
            }
            let method = match self.text(k + 1) {
                "call" => CallMethod::Call,
                "send" => CallMethod::Send,
                "transfer" => CallMethod::Transfer,
                "delegatecall" => CallMethod::DelegateCall,
                "staticcall" => CallMethod::StaticCall,
                "callcode" => CallMethod::CallCode,
                _ => continue,
            };
            if let Some(site) = self.call_site(method, k, lo, hi) {
                calls.push(site);
            }
        }
        calls
    }

    fn call_site(&self, method: CallMethod, dot: usize, lo: usize, hi: usize) -> Option<CallSite> {
        let callee_start = self.expr_start_back(dot - 1, lo)?;
        let mut j = dot + 2;
        let mut value_expr = None;
        let mut gas_specified = false;
        let mut style = CallStyle::Plain;
        loop {
            if self.at(j, ".")
                && j + 2 < hi
                && matches!(self.text(j + 1), "value" | "gas")
                && self.at(j + 2, "(")
            {
                let close = self.matching(j + 2, hi)?;
                if self.at(j + 1, "value") {
                    value_expr = Some(self.text_between(j + 3, close).to_string());
                } else {
                    gas_specified = true;
                }
                style = CallStyle::Legacy;
                j = close + 1;
            } else if j < hi && self.at(j, "{") {
                let close = self.matching(j, hi)?;
                for (a, b) in self.split_top_level(j + 1, close, ",") {
                    let key = self.text(a);
                    if !self.at(a + 1, ":") {
                        continue;
                    }
                    match key {
                        "value" => value_expr = Some(self.text_between(a + 2, b).to_string()),
                        "gas" => gas_specified = true,
                        _ => {}
                    }
                }
                style = CallStyle::Modern;
                j = close + 1;
            } else {
                break;
            }
        }
        if j >= hi || !self.at(j, "(") {
            return None;
        }
        let close = self.matching(j, hi)?;
        let args = self.text_between(j + 1, close).trim().to_string();
        let payload_empty = args.is_empty() || args == "\"\"" || args == "''";
        let (carries_value, gas_specified, payload_empty) = match method {
            CallMethod::Send | CallMethod::Transfer => {
                // `token.transfer(to, amount)` is an ERC20 call, not an ether transfer.
                if self.split_top_level(j + 1, close, ",").len() != 1 {
                    return None;
                }
                value_expr = Some(args.clone());
                (true, true, true)
            }
            _ => (value_expr.is_some(), gas_specified, payload_empty),
        };
        Some(CallSite {
            method,
            callee: self.text_between(callee_start, dot).to_string(),
            carries_value,
            gas_specified,
            payload_empty,
            style,
            value_expr,
            args,
            span: self.span_of(callee_start, close),
        })
    }

    /// Walks left over a postfix expression such as `payable(x).y[i]`.
    fn expr_start_back(&self, end: usize, lo: usize) -> Option<usize> {
        let mut s = end;
        loop {
            if self.is_close(s) {
                s = self.matching_back(s, lo)?;
                if s > lo
                    && matches!(
                        self.tok(s - 1).kind,
                        TokenKind::Identifier | TokenKind::Keyword
                    )
                {
                    s -= 1;
                }
            } else if !matches!(self.tok(s).kind, TokenKind::Identifier | TokenKind::Keyword) {
                return None;
            }
            if s >= lo + 2 && self.at(s - 1, ".") {
                s -= 2;
                continue;
            }
            return Some(s);
        }
    }

    fn push_stmt(
        &self,
        ctx: &mut FnCtx,
        lo: usize,
        hi_incl: usize,
        kind: StmtKind,
        guards: &[String],
    ) {
        let span = self.span_of(lo, hi_incl);
        let calls = self.find_calls(lo, hi_incl + 1);
        ctx.stmts.push(Stmt {
            kind,
            span,
            token_span: span,
            text: self.src[span.start..span.end].to_string(),
            tokens: self.sig[lo]..self.sig[hi_incl] + 1,
            guard_exprs: guards.to_vec(),
            calls,
        });
    }

    /// Stretches statement spans so they tile `body` exactly: each span runs
    /// from the previous statement's end to its own last token, and the last
    /// one absorbs trailing trivia and closing braces.
    fn tile(&self, body: Span, mut stmts: Vec<Stmt>) -> Vec<Stmt> {
        if stmts.is_empty() {
            if body.is_empty() {
                return stmts;
            }
            let first = self.toks.partition_point(|t| t.span.start < body.start);
            let last = self.toks.partition_point(|t| t.span.start < body.end);
            return vec![Stmt {
                kind: StmtKind::Opaque,
                span: body,
                token_span: body,
                text: self.src[body.start..body.end].to_string(),
                tokens: first..last,
                guard_exprs: Vec::new(),
                calls: Vec::new(),
            }];
        }
        let mut cursor = body.start;
        for s in &mut stmts {
            s.span = Span::new(cursor, s.token_span.end);
            cursor = s.token_span.end;
        }
        if let Some(last) = stmts.last_mut() {
            last.span.end = body.end;
        }
        stmts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stmts_of<'m>(m: &'m SourceModel, func: &str) -> &'m [Stmt] {
        &m.functions()
            .find(|(_, f)| f.name == func)
            .expect("function")
            .1
            .body
    }

    #[test]
    fn pinned_pragma_without_contracts() {
        let m = parse("pragma solidity 0.6.2;", "p.sol");
        assert_eq!(m.pragma.raw_text, "0.6.2");
        assert!(m.pragma.contains(crate::frontend::Version::new(0, 6, 2)));
        assert!(!m.pragma.contains(crate::frontend::Version::new(0, 6, 3)));
        assert!(m.contracts.is_empty());
        assert!(m.diagnostics.is_empty());
    }

    #[test]
    fn multiple_pragmas_intersect() {
        let m = parse(
            "pragma solidity >=0.4.0;\npragma solidity <0.5.0;\n",
            "p.sol",
        );
        assert_eq!(m.pragma.lower, Some(crate::frontend::Version::new(0, 4, 0)));
        assert_eq!(m.pragma.upper, Some(crate::frontend::Version::new(0, 5, 0)));
    }

    #[test]
    fn modern_call_syntax() {
        let src = r#"pragma solidity ^0.6.2;
contract W {
    mapping(address => uint) bal;
    function w(uint amount) public {
        msg.sender.call{value: amount}("");
    }
}"#;
        let m = parse(src, "w.sol");
        let body = stmts_of(&m, "w");
        assert_eq!(body.len(), 1);
        let StmtKind::ExternalCall(call) = &body[0].kind else {
            panic!("expected call, got {:?}", body[0].kind)
        };
        assert_eq!(call.style, CallStyle::Modern);
        assert_eq!(call.method, CallMethod::Call);
        assert_eq!(call.callee, "msg.sender");
        assert!(call.carries_value);
        assert!(!call.gas_specified);
        assert!(call.payload_empty);
        assert_eq!(call.value_expr.as_deref(), Some("amount"));
    }

    #[test]
    fn legacy_call_with_gas_and_payload() {
        let src = "contract C { function f(address a) public { a.call.value(1).gas(5000)(abi.encode(1)); } }";
        let m = parse(src, "c.sol");
        let StmtKind::ExternalCall(call) = &stmts_of(&m, "f")[0].kind else {
            panic!()
        };
        assert_eq!(call.style, CallStyle::Legacy);
        assert!(call.carries_value && call.gas_specified && !call.payload_empty);
    }

    #[test]
    fn erc20_transfer_is_not_an_ether_transfer() {
        let src = "contract C { function f(address to) public { token.transfer(to, 5); to.transfer(5); } }";
        let m = parse(src, "c.sol");
        let body = stmts_of(&m, "f");
        assert!(matches!(body[0].kind, StmtKind::Opaque));
        let StmtKind::ExternalCall(call) = &body[1].kind else {
            panic!()
        };
        assert_eq!(call.method, CallMethod::Transfer);
        assert_eq!(call.callee, "to");
    }

    #[test]
    fn declarations_and_type_classes() {
        let src = r#"contract C {
    struct P { address a; }
    int8 s; uint256 u; address owner; mapping(address => uint) m; uint[] xs; P p; bytes32 h;
    function f(int amount, uint) public {
        P person;
        P memory q;
        P storage r = p;
        uint[] arr;
    }
}"#;
        let m = parse(src, "c.sol");
        let c = &m.contracts[0];
        let classes: Vec<TypeClass> = c.state_vars.iter().map(|v| v.type_class).collect();
        assert_eq!(
            classes,
            [
                TypeClass::SignedInt,
                TypeClass::UnsignedInt,
                TypeClass::Address,
                TypeClass::Mapping,
                TypeClass::Array,
                TypeClass::UserComposite,
                TypeClass::Other,
            ]
        );
        let f = &c.functions[0];
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.params[0].type_class, TypeClass::SignedInt);
        assert_eq!(f.params[1].name, "");
        let locals: Vec<&VarDecl> = f.locals().collect();
        assert_eq!(locals.len(), 4);
        assert_eq!(locals[0].storage_location, StorageLocation::Default);
        assert!(!locals[0].has_initializer);
        assert_eq!(locals[1].storage_location, StorageLocation::Memory);
        assert_eq!(locals[2].storage_location, StorageLocation::Storage);
        assert!(locals[2].has_initializer);
        assert_eq!(locals[3].type_class, TypeClass::Array);
    }

    #[test]
    fn assignments_know_state_vars() {
        let src = r#"contract C {
    uint total;
    function f(uint total2) public {
        uint local;
        local = 1;
        total = 2;
        total += 3;
        total++;
        delete total;
    }
    function g(uint total) public { total = 1; }
}"#;
        let m = parse(src, "c.sol");
        let body = stmts_of(&m, "f");
        let flags: Vec<(bool, bool)> = body[1..]
            .iter()
            .map(|s| {
                let a = s.kind.assignment().unwrap();
                (
                    matches!(s.kind, StmtKind::Assignment(_)),
                    a.lhs_is_state_var,
                )
            })
            .collect();
        assert_eq!(
            flags,
            [
                (true, false),
                (true, true),
                (false, true),
                (false, true),
                (false, true)
            ]
        );
        let g = stmts_of(&m, "g");
        assert!(!g[0].kind.assignment().unwrap().lhs_is_state_var);
        assert_eq!(m.contracts[0].shadowed, ["total"]);
    }

    #[test]
    fn guards_are_lexical() {
        let src = r#"contract C {
    function f(uint a) public {
        require(a > 1);
        if (a > 5) {
            a = 1;
        } else a = 2;
        a = 3;
    }
}"#;
        let m = parse(src, "c.sol");
        let body = stmts_of(&m, "f");
        assert_eq!(body[0].guard_exprs, Vec::<String>::new());
        assert!(matches!(body[1].kind, StmtKind::IfGuard { .. }));
        assert_eq!(body[1].guard_exprs, ["a > 1"]);
        assert_eq!(body[2].guard_exprs, ["a > 1", "a > 5"]);
        assert_eq!(body[3].guard_exprs, ["a > 1", "!(a > 5)"]);
        assert_eq!(body[4].guard_exprs, ["a > 1"]);
    }

    #[test]
    fn statement_spans_tile_the_body() {
        let src = "contract C { function f() public {\n  uint a = 1; // c\n  if (a > 0) { a = 2; }\n  assembly { let x := 1 }\n  for (uint i; i < 2; i++) a++;\n} }";
        let m = parse(src, "c.sol");
        let f = &m.contracts[0].functions[0];
        let body = f.body_span.unwrap();
        let mut cursor = body.start;
        for s in &f.body {
            assert_eq!(s.span.start, cursor);
            assert!(s.span.contains_span(s.token_span));
            cursor = s.span.end;
        }
        assert_eq!(cursor, body.end);
    }

    #[test]
    fn empty_and_trivia_bodies() {
        let m = parse(
            "contract C { function f() public {} function g() public { /* x */ } }",
            "c.sol",
        );
        assert!(m.contracts[0].functions[0].body.is_empty());
        let g = &m.contracts[0].functions[1];
        assert_eq!(g.body.len(), 1);
        assert_eq!(g.body[0].span, g.body_span.unwrap());
    }

    #[test]
    fn headers() {
        let src = r#"contract Re {
    function Re() public {}
    function () payable {}
    function x() external payable onlyOwner returns (uint) { return 1; }
    fallback() external {}
    receive() external payable {}
}"#;
        let m = parse(src, "re.sol");
        let fs = &m.contracts[0].functions;
        assert!(fs[0].is_constructor);
        assert!(fs[1].is_fallback && fs[1].payable);
        assert_eq!(fs[1].visibility, Visibility::Default);
        assert_eq!(fs[2].visibility, Visibility::External);
        assert_eq!(fs[2].modifiers, ["onlyOwner"]);
        assert!(fs[3].is_fallback);
        assert_eq!(fs[4].name, "receive");
    }

    #[test]
    fn garbage_gives_diagnostics_not_panics() {
        for src in [
            "contract { function ( ",
            "}}}} contract A { uint x = ; function f( { if ( }",
            "pragma solidity banana; contract B { function f() { a = (1; } }",
            "contract C { function f() public { if (x) else } }",
            "contract D { function f() public { do x++; while (y) } }",
        ] {
            let m = parse(src, "g.sol");
            let joined: String = m.raw_tokens.iter().map(|t| t.text.as_str()).collect();
            assert_eq!(joined, src);
        }
        let m = parse("pragma solidity banana;", "g.sol");
        assert_eq!(m.diagnostics.len(), 1);
        assert!(m.pragma.is_unbounded());
    }

    fn assert_tiles(m: &SourceModel) {
        for (_, f) in m.functions() {
            let Some(body) = f.body_span else { continue };
            let mut cursor = body.start;
            for s in &f.body {
                assert_eq!(s.span.start, cursor, "gap in {}", f.name);
                assert!(s.span.contains_span(s.token_span));
                cursor = s.span.end;
            }
            if !f.body.is_empty() {
                assert_eq!(cursor, body.end);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn never_panics_and_tiles(parts in proptest::collection::vec(proptest::sample::select(vec![
            "contract C {", "function f(uint a, address b) public {", "}", "{", "(", ")", ";",
            "if (a > 0)", "else", "require(a != 0);", "x = 1;", "x =+ 1;", "b.call.value(a)();",
            "uint[] storage s;", "for (;;)", "do", "while (x)", "assembly {", "return a;",
            "pragma solidity ^0.4.24;", "\"str\"", "// c\n", "/* c */", " ", "\n", "a++;",
            "msg.sender.transfer(a);", "try", "catch", "mapping(address => uint) m;", "]", "[",
        ]), 0..40)) {
            let src = parts.concat();
            let m = parse(&src, "p.sol");
            let joined: String = m.raw_tokens.iter().map(|t| t.text.as_str()).collect();
            proptest::prop_assert_eq!(&joined, &src);
            assert_tiles(&m);
        }
    }
}
