//! E-a-SA: externally supplied recipient and amount with no calldata length check.

use super::*;
use crate::frontend::TypeClass;

pub fn detect_short_address(model: &SourceModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        if !function.visibility.is_externally_callable() || function.body.is_empty() {
            continue;
        }
        let amounts: Vec<&str> = params_of(function, TypeClass::UnsignedInt);
        if amounts.is_empty() {
            continue;
        }
        let body_toks: Vec<String> = function
            .body
            .iter()
            .flat_map(|s| stmt_toks(model, s))
            .collect();
        let length_checked = body_toks
            .windows(5)
            .any(|w| w == ["msg", ".", "data", ".", "length"]);
        if length_checked {
            continue;
        }
        for recipient in params_of(function, TypeClass::Address) {
            let hits: Vec<Span> = function
                .body
                .iter()
                .filter(|s| credits(s, recipient, &amounts))
                .map(|s| s.token_span)
                .collect();
            if let Some(&first) = hits.first() {
                let message = format!(
                    "`{}` moves funds to caller-supplied `{recipient}` without checking msg.data.length",
                    function.name
                );
                out.push(finding(
                    model,
                    "E-a-SA",
                    Some(contract),
                    Some(function),
                    first,
                    message,
                    hits,
                ));
                break;
            }
        }
    }
    out
}

fn params_of(function: &FunctionDecl, class: TypeClass) -> Vec<&str> {
    function
        .params
        .iter()
        .filter(|p| p.type_class == class && !p.name.is_empty())
        .map(|p| p.name.as_str())
        .collect()
}

/// `m[recipient]... op= amount`-style write, or a value transfer to `recipient`.
fn credits(stmt: &Stmt, recipient: &str, amounts: &[&str]) -> bool {
    if let Some(a) = stmt.kind.assignment() {
        let lhs = toks(&a.lhs);
        let keyed = lhs.len() >= 4 && lhs[1] == "[" && lhs[2] == recipient && lhs[3] == "]";
        let rhs = toks(&a.rhs);
        if keyed && rhs.iter().any(|t| amounts.contains(&t.as_str())) {
            return true;
        }
    }
    stmt.calls
        .iter()
        .any(|c| c.carries_value && c.callee.trim() == recipient)
}
