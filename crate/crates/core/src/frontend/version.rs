//! Compiler-version constraints from `pragma solidity` directives.
//!
//! A constraint is a half-open interval `[lower, upper)` over three-part
//! versions where either end may be unbounded. Clauses are intersected, so
//! `>=0.4.22 <0.6.0` is the interval `[0.4.22, 0.6.0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Version {
            major,
            minor,
            patch,
        }
    }

    fn next_patch(self) -> Self {
        Version::new(self.major, self.minor, self.patch + 1)
    }

    fn next_minor(self) -> Self {
        Version::new(self.major, self.minor + 1, 0)
    }

    fn next_major(self) -> Self {
        Version::new(self.major + 1, 0, 0)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

/// A version literal as written, remembering how many parts were given so
/// that `0.4` can mean "any 0.4.x".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PartialVersion {
    version: Version,
    parts: usize,
}

impl PartialVersion {
    fn parse(text: &str) -> Option<Self> {
        let text = text.trim().trim_start_matches(['v', 'V']);
        let mut nums = [0u64; 3];
        let mut parts = 0;
        for piece in text.split('.') {
            if parts == 3 {
                return None;
            }
            if matches!(piece, "x" | "X" | "*") {
                break;
            }
            nums[parts] = piece.parse().ok()?;
            parts += 1;
        }
        if parts == 0 {
            return None;
        }
        Some(PartialVersion {
            version: Version::new(nums[0], nums[1], nums[2]),
            parts,
        })
    }

    /// First version past everything this literal matches.
    fn end(self) -> Version {
        match self.parts {
            1 => self.version.next_major(),
            2 => self.version.next_minor(),
            _ => self.version.next_patch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid version constraint `{text}`: {reason}")]
pub struct ConstraintError {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PragmaConstraint {
    pub raw_text: String,
    /// Inclusive.
    pub lower: Option<Version>,
    /// Exclusive.
    pub upper: Option<Version>,
}

impl Default for PragmaConstraint {
    fn default() -> Self {
        Self::unbounded()
    }
}

impl PragmaConstraint {
    pub fn unbounded() -> Self {
        PragmaConstraint {
            raw_text: String::new(),
            lower: None,
            upper: None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    /// True when no version can satisfy the constraint, e.g. `>=0.6.0 <0.5.0`.
    pub fn is_empty(&self) -> bool {
        let lo = self.lower.unwrap_or(Version::new(0, 0, 0));
        matches!(self.upper, Some(hi) if lo >= hi)
    }

    pub fn contains(&self, v: Version) -> bool {
        self.lower.is_none_or(|lo| v >= lo) && self.upper.is_none_or(|hi| v < hi)
    }

    /// Intersection of two ranges. The raw text of both sides is kept.
    pub fn intersect(&self, other: &PragmaConstraint) -> PragmaConstraint {
        let lower = match (self.lower, other.lower) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let upper = match (self.upper, other.upper) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let raw_text = match (self.raw_text.is_empty(), other.raw_text.is_empty()) {
            (true, _) => other.raw_text.clone(),
            (_, true) => self.raw_text.clone(),
            _ => format!("{} {}", self.raw_text, other.raw_text),
        };
        PragmaConstraint {
            raw_text,
            lower,
            upper,
        }
    }

    /// Parses the text after `pragma solidity`, e.g. `^0.4.24` or
    /// `>=0.4.22 <0.6.0`. Alternatives joined by `||` are widened to the
    /// smallest interval covering all of them.
    pub fn parse(text: &str) -> Result<Self, ConstraintError> {
        let raw_text = text.trim().to_string();
        let err = |reason: &str| ConstraintError {
            text: raw_text.clone(),
            reason: reason.to_string(),
        };
        if raw_text.is_empty() {
            return Err(err("empty constraint"));
        }
        let mut hull: Option<PragmaConstraint> = None;
        for alternative in raw_text.split("||") {
            let range = parse_conjunction(alternative).map_err(|r| err(&r))?;
            hull = Some(match hull {
                None => range,
                Some(h) => PragmaConstraint {
                    raw_text: String::new(),
                    lower: h.lower.zip(range.lower).map(|(a, b)| a.min(b)),
                    upper: h.upper.zip(range.upper).map(|(a, b)| a.max(b)),
                },
            });
        }
        let mut out = hull.expect("split yields at least one piece");
        out.raw_text = raw_text;
        Ok(out)
    }
}

fn parse_conjunction(text: &str) -> Result<PragmaConstraint, String> {
    let mut out = PragmaConstraint::unbounded();
    let mut clauses = split_clauses(text)?.into_iter().peekable();
    if clauses.peek().is_none() {
        return Err("empty alternative".into());
    }
    for (op, literal) in clauses {
        let v = PartialVersion::parse(&literal)
            .ok_or_else(|| format!("bad version literal `{literal}`"))?;
        let (lower, upper) = match op.as_str() {
            "" | "=" => (Some(v.version), Some(v.end())),
            "^" | "~" => (Some(v.version), Some(v.version.next_minor())),
            ">=" => (Some(v.version), None),
            ">" => (Some(v.end()), None),
            "<" => (None, Some(v.version)),
            "<=" => (None, Some(v.end())),
            other => return Err(format!("unknown operator `{other}`")),
        };
        out = out.intersect(&PragmaConstraint {
            raw_text: String::new(),
            lower,
            upper,
        });
    }
    Ok(out)
}

/// Splits `>= 0.4.22 <0.6.0` into `[(">=", "0.4.22"), ("<", "0.6.0")]`,
/// tolerating whitespace between operator and literal.
fn split_clauses(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let op_len = rest
            .find(|c: char| !matches!(c, '<' | '>' | '=' | '^' | '~'))
            .unwrap_or(rest.len());
        let op = rest[..op_len].to_string();
        rest = rest[op_len..].trim_start();
        let lit_len = rest
            .find(|c: char| c.is_whitespace() || matches!(c, '<' | '>' | '=' | '^' | '~'))
            .unwrap_or(rest.len());
        if lit_len == 0 {
            return Err(format!("operator `{op}` without a version"));
        }
        out.push((op, rest[..lit_len].to_string()));
        rest = rest[lit_len..].trim_start();
    }
    Ok(out)
}

impl FromStr for PragmaConstraint {
    type Err = ConstraintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PragmaConstraint::parse(s)
    }
}

impl fmt::Display for PragmaConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.raw_text.is_empty() {
            return f.write_str(&self.raw_text);
        }
        match (self.lower, self.upper) {
            (None, None) => f.write_str("*"),
            (Some(lo), None) => write!(f, ">={lo}"),
            (None, Some(hi)) => write!(f, "<{hi}"),
            (Some(lo), Some(hi)) => write!(f, ">={lo} <{hi}"),
        }
    }
}

// Serialized as the constraint text; `null` or `"*"` means unbounded.
impl Serialize for PragmaConstraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_unbounded() {
            s.serialize_none()
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for PragmaConstraint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(PragmaConstraint::unbounded()),
            Some(s) if s.trim() == "*" => Ok(PragmaConstraint::unbounded()),
            Some(s) => PragmaConstraint::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// True iff some compiler version satisfies both constraints. An unbounded
/// side never suppresses a match.
pub fn version_applies(pragma: &PragmaConstraint, affected: &PragmaConstraint) -> bool {
    !pragma.intersect(affected).is_empty() && !pragma.is_empty() && !affected.is_empty()
}
