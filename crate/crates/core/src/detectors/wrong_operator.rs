//! A-a-W: `=+` / `=-` written where `+=` / `-=` was meant.

use super::*;
use crate::frontend::TokenKind;

pub fn detect_wrong_operator(model: &SourceModel) -> Vec<Finding> {
    let toks = &model.raw_tokens;
    let bytes = model.source.as_bytes();
    let mut out = Vec::new();
    for (i, eq) in toks.iter().enumerate() {
        if !eq.is_punct("=") {
            continue;
        }
        let Some(sign) = toks
            .get(i + 1)
            .filter(|t| t.is_punct("+") || t.is_punct("-"))
        else {
            continue;
        };
        let before = eq.span.start.checked_sub(1).map(|p| bytes[p]);
        if before.is_some_and(|b| b"=!<>+-".contains(&b)) {
            continue;
        }
        let operand = toks[i + 2..].iter().find(|t| !t.is_trivia());
        if !operand.is_some_and(|t| matches!(t.kind, TokenKind::Identifier | TokenKind::Number)) {
            continue;
        }
        let span = Span::new(eq.span.start, sign.span.end);
        let (contract, function) = model.locate(span.start);
        let intended = if sign.text == "+" { "+=" } else { "-=" };
        let message = format!(
            "`={}` assigns a signed operand; `{intended}` was probably meant",
            sign.text
        );
        out.push(finding(
            model,
            "A-a-W",
            contract,
            function,
            span,
            message,
            vec![],
        ));
    }
    out
}
