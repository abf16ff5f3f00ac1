//! A-a-IS: signed value forced into an unsigned type without a sign check.

use super::*;
use crate::frontend::TypeClass;

const SIGN_CHECK_OPS: &[&str] = &[">=", ">", "<", "<="];

pub fn detect_integer_sign(model: &SourceModel) -> Vec<Finding> {
    rule(model, &Options::default())
}

pub(super) fn rule(model: &SourceModel, options: &Options) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        for (idx, stmt) in function.body.iter().enumerate() {
            let raw: Vec<_> = model.stmt_tokens(stmt).collect();
            let tk = stmt_toks(model, stmt);
            for i in 0..tk.len() {
                if tk.get(i + 1).is_none_or(|t| t != "(") || (i > 0 && tk[i - 1] == ".") {
                    continue;
                }
                let to_unsigned = is_unsigned_type(&tk[i]);
                if !to_unsigned && !(options.signed_from_unsigned && is_signed_type(&tk[i])) {
                    continue;
                }
                let Some(close) = close_paren(&tk, i + 1) else {
                    continue;
                };
                let arg = &tk[i + 2..close];
                let wanted = if to_unsigned {
                    TypeClass::SignedInt
                } else {
                    TypeClass::UnsignedInt
                };
                let Some(source) = cast_source(arg, wanted, contract, function) else {
                    continue;
                };

                if to_unsigned {
                    let mut guards = preceding_guards(function, idx);
                    if stmt.kind.guard_condition().is_some() {
                        guards.push(tk[..i].to_vec());
                    }
                    let checked = guards.iter().any(|g| {
                        compares_against_zero(g, &source, SIGN_CHECK_OPS)
                            || compares_against_zero(g, arg, SIGN_CHECK_OPS)
                    });
                    if checked {
                        continue;
                    }
                }
                let span = Span::new(raw[i].span.start, raw[close].span.end);
                let message = if to_unsigned {
                    format!(
                        "`{}` converts signed `{}` to unsigned without checking its sign",
                        model.text(span),
                        source.concat()
                    )
                } else {
                    format!(
                        "`{}` converts unsigned `{}` to signed",
                        model.text(span),
                        source.concat()
                    )
                };
                out.push(finding(
                    model,
                    "A-a-IS",
                    Some(contract),
                    Some(function),
                    span,
                    message,
                    vec![],
                ));
            }
        }
    }
    out
}

/// The variable (or inner cast operand) that makes `arg` have the
/// `wanted` signedness, if any.
fn cast_source(
    arg: &[String],
    wanted: TypeClass,
    contract: &ContractDecl,
    function: &FunctionDecl,
) -> Option<Vec<String>> {
    let inner_cast = |t: &str| match wanted {
        TypeClass::SignedInt => is_signed_type(t),
        _ => is_unsigned_type(t),
    };
    for (k, t) in arg.iter().enumerate() {
        let called = arg.get(k + 1).is_some_and(|n| n == "(");
        let member = k > 0 && arg[k - 1] == ".";
        if called && inner_cast(t) {
            let close = close_paren(arg, k + 1)?;
            return Some(arg[k + 2..close].to_vec());
        }
        let ident = t.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_');
        if ident && !called && !member {
            if let Some(v) = function.lookup(contract, t) {
                if v.type_class == wanted {
                    return Some(vec![t.clone()]);
                }
            }
        }
    }
    None
}
