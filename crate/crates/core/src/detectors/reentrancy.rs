//! D-a-R: value-bearing `call` with no gas limit followed by a state write.

use super::*;
use crate::frontend::CallMethod;

pub fn detect_reentrancy(model: &SourceModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        for (idx, stmt) in function.body.iter().enumerate() {
            for call in &stmt.calls {
                let risky = call.method == CallMethod::Call
                    && call.carries_value
                    && !call.gas_specified
                    && call.payload_empty;
                if !risky {
                    continue;
                }
                let late_write = function.body[idx + 1..]
                    .iter()
                    .find(|s| s.kind.assignment().is_some_and(|a| a.lhs_is_state_var));
                let Some(write) = late_write else { continue };
                let lhs = &write.kind.assignment().expect("filtered").lhs;
                let message = format!(
                    "ether sent to `{}` with all remaining gas before `{lhs}` is updated",
                    call.callee
                );
                let evidence = vec![call.span, write.token_span];
                out.push(finding(
                    model,
                    "D-a-R",
                    Some(contract),
                    Some(function),
                    call.span,
                    message,
                    evidence,
                ));
            }
        }
    }
    out
}
