//! F-c-T: ERC20 `approve` that overwrites a nonzero allowance with a nonzero one.

use super::*;
use crate::frontend::{StmtKind, TypeClass};

pub fn detect_tod_approve(model: &SourceModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        if function.name != "approve" || function.params.len() != 2 {
            continue;
        }
        let classes = [function.params[0].type_class, function.params[1].type_class];
        if classes != [TypeClass::Address, TypeClass::UnsignedInt] {
            continue;
        }
        let value = vec![function.params[1].name.clone()];
        for (idx, stmt) in function.body.iter().enumerate() {
            let StmtKind::Assignment(a) = &stmt.kind else {
                continue;
            };
            let lhs = toks(&a.lhs);
            if toks(&a.rhs) != value || !doubly_indexed(&lhs) {
                continue;
            }
            let guarded = preceding_guards(function, idx).iter().any(|g| {
                compares_against_zero(g, &value, &["=="]) || compares_against_zero(g, &lhs, &["=="])
            });
            if guarded {
                continue;
            }
            let message = format!(
                "`{}` can move an allowance from one nonzero value to another",
                a.lhs.trim()
            );
            out.push(finding(
                model,
                "F-c-T",
                Some(contract),
                Some(function),
                stmt.token_span,
                message,
                vec![],
            ));
        }
    }
    out
}

/// `name[..][..]` with nothing after the second index.
fn doubly_indexed(lhs: &[String]) -> bool {
    if lhs.len() < 7 || lhs[1] != "[" {
        return false;
    }
    let Some(first) = close_paren(lhs, 1) else {
        return false;
    };
    if lhs.get(first + 1).is_none_or(|t| t != "[") {
        return false;
    }
    close_paren(lhs, first + 1) == Some(lhs.len() - 1)
}
