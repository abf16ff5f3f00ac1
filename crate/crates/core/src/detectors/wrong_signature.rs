//! E-a-SW: ecrecover result used for authentication without a zero-address check.

use super::*;
use crate::frontend::StmtKind;

const EQ_OPS: &[&str] = &["==", "!="];
const STOPS: &[&str] = &["&&", "||", ",", ";", "?", ":", "=", "return"];

pub fn detect_wrong_signature_params(model: &SourceModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        let guards = all_guards(function);
        let zero_checked = |target: &[String]| {
            guards
                .iter()
                .any(|g| compares_against_zero(g, target, EQ_OPS))
        };
        // Locals holding an ecrecover result, with the span of the recovery.
        let mut holders: Vec<(Vec<String>, Span)> = Vec::new();
        for stmt in &function.body {
            let raw: Vec<_> = model.stmt_tokens(stmt).collect();
            let tk = stmt_toks(model, stmt);
            let mut comparisons = Vec::new();
            for i in 0..tk.len() {
                if tk[i] == "ecrecover" && tk.get(i + 1).is_some_and(|t| t == "(") {
                    let Some(close) = close_paren(&tk, i + 1) else {
                        continue;
                    };
                    let recovered = Span::new(raw[i].span.start, raw[close].span.end);
                    let result = tk[i..=close].to_vec();
                    if let Some(c) = compared_with(&tk, i, close) {
                        comparisons.push((result, c, recovered));
                    } else if let Some(holder) = holder_of(stmt) {
                        holders.push((holder, recovered));
                    }
                }
                for (holder, recovered) in &holders {
                    let end = i + holder.len();
                    if tk[i..].starts_with(holder)
                        && (i == 0 || tk[i - 1] != ".")
                        && tk
                            .get(end)
                            .is_none_or(|t| !matches!(t.as_str(), "." | "[" | "("))
                    {
                        if let Some(c) = compared_with(&tk, i, end - 1) {
                            comparisons.push((holder.clone(), c, *recovered));
                        }
                    }
                }
            }
            for (result, (comparand, lo, hi), recovered) in comparisons {
                if zero_len(&comparand, 0) == Some(comparand.len()) {
                    continue;
                }
                if zero_checked(&result) || zero_checked(&comparand) {
                    continue;
                }
                let span = Span::new(raw[lo].span.start, raw[hi].span.end);
                let message = format!(
                    "ecrecover result compared with `{}` but a zero-address return is never rejected",
                    comparand.concat()
                );
                out.push(finding(
                    model,
                    "E-a-SW",
                    Some(contract),
                    Some(function),
                    span,
                    message,
                    vec![recovered],
                ));
            }
        }
    }
    out
}

/// If the expression at `tk[start..=end]` is an operand of `==`/`!=`,
/// returns the other operand and the token range of the whole comparison.
fn compared_with(tk: &[String], start: usize, end: usize) -> Option<(Vec<String>, usize, usize)> {
    if tk
        .get(end + 1)
        .is_some_and(|t| EQ_OPS.contains(&t.as_str()))
    {
        let mut depth = 0i32;
        let mut j = end + 2;
        while j < tk.len() {
            match tk[j].as_str() {
                "(" | "[" => depth += 1,
                ")" | "]" if depth == 0 => break,
                ")" | "]" => depth -= 1,
                t if depth == 0 && STOPS.contains(&t) => break,
                _ => {}
            }
            j += 1;
        }
        return (j > end + 2).then(|| (tk[end + 2..j].to_vec(), start, j - 1));
    }
    if start >= 2 && EQ_OPS.contains(&tk[start - 1].as_str()) {
        let mut depth = 0i32;
        let mut j = start - 1;
        while j > 0 {
            match tk[j - 1].as_str() {
                ")" | "]" => depth += 1,
                "(" | "[" if depth == 0 => break,
                "(" | "[" => depth -= 1,
                t if depth == 0 && STOPS.contains(&t) => break,
                _ => {}
            }
            j -= 1;
        }
        return (j < start - 1).then(|| (tk[j..start - 1].to_vec(), j, end));
    }
    None
}

/// Variable directly assigned an ecrecover result.
fn holder_of(stmt: &Stmt) -> Option<Vec<String>> {
    let starts_with_recover = |rhs: &str| toks(rhs).first().is_some_and(|t| t == "ecrecover");
    match &stmt.kind {
        StmtKind::LocalVarDecl(v) if v.initializer.as_deref().is_some_and(starts_with_recover) => {
            Some(vec![v.name.clone()])
        }
        StmtKind::Assignment(a) if starts_with_recover(&a.rhs) => Some(toks(&a.lhs)),
        _ => None,
    }
}
