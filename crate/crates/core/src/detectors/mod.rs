//! Rule engine for the seven detectable bug kinds.
//!
//! Every rule is a pure function of a [`SourceModel`]. [`detect_all`] runs
//! the enabled rules whose affected compiler range overlaps the file's
//! pragma and returns findings in `(file, span.start, bug_id)` order.

mod integer_sign;
mod reentrancy;
mod short_address;
mod tod_approve;
mod uninit_storage;
mod wrong_operator;
mod wrong_signature;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frontend::{
    lex, version_applies, ContractDecl, FunctionDecl, PragmaConstraint, SourceModel, Span, Stmt,
};

pub use integer_sign::detect_integer_sign;
pub use reentrancy::detect_reentrancy;
pub use short_address::detect_short_address;
pub use tod_approve::detect_tod_approve;
pub use uninit_storage::detect_uninitialized_storage;
pub use wrong_operator::detect_wrong_operator;
pub use wrong_signature::detect_wrong_signature_params;

/// Name used for `contract`/`function` when a hit is outside any.
pub const TOP_LEVEL: &str = "<top>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub bug_id: String,
    pub file: String,
    pub contract: String,
    pub function: String,
    pub span: Span,
    pub message: String,
    pub evidence: Vec<Span>,
}

impl Finding {
    fn sort_key(&self) -> (&str, usize, &str, usize, &str) {
        (
            &self.file,
            self.span.start,
            &self.bug_id,
            self.span.end,
            &self.message,
        )
    }
}

/// Sorts findings into the canonical `(file, span.start, bug_id)` order.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Knobs for rule variants that are off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Options {
    /// Also flag unchecked unsigned-to-signed conversions under A-a-IS.
    pub signed_from_unsigned: bool,
}

type Rule = fn(&SourceModel, &Options) -> Vec<Finding>;

pub struct DetectorSpec {
    pub bug_id: &'static str,
    affected: &'static str,
    rule: Rule,
}

impl DetectorSpec {
    pub fn affected_versions(&self) -> PragmaConstraint {
        if self.affected == "*" {
            PragmaConstraint::unbounded()
        } else {
            PragmaConstraint::parse(self.affected).expect("static constraint")
        }
    }

    pub fn run(&self, model: &SourceModel, options: &Options) -> Vec<Finding> {
        (self.rule)(model, options)
    }
}

pub const DETECTORS: &[DetectorSpec] = &[
    DetectorSpec {
        bug_id: "A-a-IS",
        affected: "*",
        rule: integer_sign::rule,
    },
    DetectorSpec {
        bug_id: "A-a-W",
        affected: "<=0.4.26",
        rule: |m, _| detect_wrong_operator(m),
    },
    DetectorSpec {
        bug_id: "A-c-US",
        affected: "<=0.4.26",
        rule: |m, _| detect_uninitialized_storage(m),
    },
    DetectorSpec {
        bug_id: "D-a-R",
        affected: "*",
        rule: |m, _| detect_reentrancy(m),
    },
    DetectorSpec {
        bug_id: "E-a-SA",
        affected: "*",
        rule: |m, _| detect_short_address(m),
    },
    DetectorSpec {
        bug_id: "E-a-SW",
        affected: "*",
        rule: |m, _| detect_wrong_signature_params(m),
    },
    DetectorSpec {
        bug_id: "F-c-T",
        affected: "*",
        rule: |m, _| detect_tod_approve(m),
    },
];

pub fn detector(bug_id: &str) -> Option<&'static DetectorSpec> {
    DETECTORS.iter().find(|d| d.bug_id == bug_id)
}

pub fn all_detector_ids() -> BTreeSet<String> {
    DETECTORS.iter().map(|d| d.bug_id.to_string()).collect()
}

pub fn detect_all(model: &SourceModel, enabled: &BTreeSet<String>) -> Vec<Finding> {
    detect_with(model, enabled, &Options::default())
}

pub fn detect_with(
    model: &SourceModel,
    enabled: &BTreeSet<String>,
    options: &Options,
) -> Vec<Finding> {
    let mut findings: Vec<Finding> = DETECTORS
        .iter()
        .filter(|d| enabled.contains(d.bug_id))
        .filter(|d| version_applies(&model.pragma, &d.affected_versions()))
        .flat_map(|d| d.run(model, options))
        .collect();
    sort_findings(&mut findings);
    findings.dedup();
    findings
}

fn finding(
    model: &SourceModel,
    bug_id: &str,
    contract: Option<&ContractDecl>,
    function: Option<&FunctionDecl>,
    span: Span,
    message: String,
    evidence: Vec<Span>,
) -> Finding {
    Finding {
        bug_id: bug_id.to_string(),
        file: model.file_path.clone(),
        contract: contract.map_or(TOP_LEVEL, |c| c.name.as_str()).to_string(),
        function: function.map_or(TOP_LEVEL, |f| f.name.as_str()).to_string(),
        span,
        message,
        evidence,
    }
}

/// Significant token texts of a code snippet.
fn toks(text: &str) -> Vec<String> {
    lex(text)
        .into_iter()
        .filter(|t| !t.is_trivia())
        .map(|t| t.text)
        .collect()
}

fn stmt_toks(model: &SourceModel, stmt: &Stmt) -> Vec<String> {
    model.stmt_tokens(stmt).map(|t| t.text.clone()).collect()
}

fn is_zero_literal(t: &str) -> bool {
    let digits = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .unwrap_or(t);
    !digits.is_empty() && digits.chars().all(|c| c == '0' || c == '_')
}

/// Length of a zero literal (`0`, `0x0`, `address(0)`) starting at `i`.
fn zero_len(toks: &[String], i: usize) -> Option<usize> {
    let t = toks.get(i)?;
    if is_zero_literal(t) {
        return Some(1);
    }
    let is_addr_zero = t == "address"
        && toks.get(i + 1).is_some_and(|t| t == "(")
        && toks.get(i + 2).is_some_and(|t| is_zero_literal(t))
        && toks.get(i + 3).is_some_and(|t| t == ")");
    is_addr_zero.then_some(4)
}

/// Whether `cond` contains `target OP zero` or `zero OP target` for one of
/// the given operators. `target` must match whole operands: `s.amount`
/// does not count as `amount`.
fn compares_against_zero(cond: &[String], target: &[String], ops: &[&str]) -> bool {
    let n = target.len();
    if n == 0 {
        return false;
    }
    let is_op = |j: usize| cond.get(j).is_some_and(|t| ops.contains(&t.as_str()));
    for i in 0..cond.len() {
        if cond[i..].starts_with(target)
            && (i == 0 || cond[i - 1] != ".")
            && is_op(i + n)
            && zero_len(cond, i + n + 1).is_some()
        {
            return true;
        }
        if let Some(l) = zero_len(cond, i) {
            let j = i + l;
            let continues = cond
                .get(j + 1 + n)
                .is_some_and(|t| matches!(t.as_str(), "." | "[" | "("));
            if is_op(j) && cond[j + 1..].starts_with(target) && !continues {
                return true;
            }
        }
    }
    false
}

/// Token lists of every guard that lexically precedes statement `idx`:
/// conditions of earlier `if`/`require`/`assert` statements in the
/// function plus the conditions enclosing the statement itself.
fn preceding_guards(function: &FunctionDecl, idx: usize) -> Vec<Vec<String>> {
    let earlier = function.body[..idx]
        .iter()
        .filter_map(|s| s.kind.guard_condition())
        .map(toks);
    let enclosing = function.body[idx].guard_exprs.iter().map(|g| toks(g));
    earlier.chain(enclosing).collect()
}

fn all_guards(function: &FunctionDecl) -> Vec<Vec<String>> {
    function
        .body
        .iter()
        .filter_map(|s| s.kind.guard_condition())
        .map(toks)
        .collect()
}

fn is_unsigned_type(t: &str) -> bool {
    t.strip_prefix("uint")
        .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
}

fn is_signed_type(t: &str) -> bool {
    t.strip_prefix("int")
        .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
}

/// Index of the `)` closing the `(` at `open`.
fn close_paren(toks: &[String], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        match t.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(j);
                }
            }
            _ => {}
        }
    }
    None
}
