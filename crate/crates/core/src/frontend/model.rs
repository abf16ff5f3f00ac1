use std::ops::Range;

use serde::Serialize;

use super::lexer::Token;
use super::version::PragmaConstraint;
use super::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

/// Structural view of one Solidity file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceModel {
    pub file_path: String,
    pub pragma: PragmaConstraint,
    pub contracts: Vec<ContractDecl>,
    #[serde(skip)]
    pub raw_tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip)]
    pub source: String,
}

impl SourceModel {
    pub fn text(&self, span: Span) -> &str {
        &self.source[span.start..span.end]
    }

    /// Non-trivia tokens of a statement, in order.
    pub fn stmt_tokens<'a>(&'a self, stmt: &Stmt) -> impl Iterator<Item = &'a Token> + 'a {
        self.raw_tokens[stmt.tokens.clone()]
            .iter()
            .filter(|t| !t.is_trivia())
    }

    /// Innermost contract and function containing `offset`.
    pub fn locate(&self, offset: usize) -> (Option<&ContractDecl>, Option<&FunctionDecl>) {
        let contract = self.contracts.iter().find(|c| c.span.contains(offset));
        let function = contract.and_then(|c| c.functions.iter().find(|f| f.span.contains(offset)));
        (contract, function)
    }

    pub fn functions(&self) -> impl Iterator<Item = (&ContractDecl, &FunctionDecl)> {
        self.contracts
            .iter()
            .flat_map(|c| c.functions.iter().map(move |f| (c, f)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractKind {
    Contract,
    Library,
    Interface,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractDecl {
    pub name: String,
    pub kind: ContractKind,
    pub state_vars: Vec<VarDecl>,
    pub functions: Vec<FunctionDecl>,
    pub span: Span,
    /// Names declared more than once, or locals/params hiding a state variable.
    pub shadowed: Vec<String>,
}

impl ContractDecl {
    pub fn state_var(&self, name: &str) -> Option<&VarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeClass {
    SignedInt,
    UnsignedInt,
    Address,
    Mapping,
    Array,
    UserComposite,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageLocation {
    Storage,
    Memory,
    Calldata,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarDecl {
    pub name: String,
    pub type_text: String,
    pub type_class: TypeClass,
    pub storage_location: StorageLocation,
    pub has_initializer: bool,
    pub initializer: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
    Default,
}

impl Visibility {
    /// Callable from outside the contract. Functions without an explicit
    /// visibility are public on every compiler that accepts them.
    pub fn is_externally_callable(self) -> bool {
        matches!(
            self,
            Visibility::Public | Visibility::External | Visibility::Default
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub visibility: Visibility,
    pub payable: bool,
    pub modifiers: Vec<String>,
    pub body: Vec<Stmt>,
    /// Bytes between the braces; `None` for declarations without a body.
    pub body_span: Option<Span>,
    pub span: Span,
    pub is_fallback: bool,
    pub is_constructor: bool,
}

impl FunctionDecl {
    pub fn param(&self, name: &str) -> Option<&VarDecl> {
        self.params
            .iter()
            .find(|p| !p.name.is_empty() && p.name == name)
    }

    pub fn locals(&self) -> impl Iterator<Item = &VarDecl> {
        self.body.iter().filter_map(|s| match &s.kind {
            StmtKind::LocalVarDecl(v) => Some(v),
            _ => None,
        })
    }

    /// Declared type of a name visible in this function: locals, then
    /// params, then the contract's state variables.
    pub fn lookup<'a>(&'a self, contract: &'a ContractDecl, name: &str) -> Option<&'a VarDecl> {
        self.locals()
            .find(|v| v.name == name)
            .or_else(|| self.param(name))
            .or_else(|| contract.state_var(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallMethod {
    Call,
    Send,
    Transfer,
    DelegateCall,
    StaticCall,
    CallCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallStyle {
    /// `.call.value(v).gas(g)(data)`
    Legacy,
    /// `.call{value: v, gas: g}(data)`
    Modern,
    /// No value/gas options at all.
    Plain,
}

/// A low-level call, send or transfer on an address expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallSite {
    pub method: CallMethod,
    pub callee: String,
    pub carries_value: bool,
    pub gas_specified: bool,
    pub payload_empty: bool,
    pub style: CallStyle,
    pub value_expr: Option<String>,
    pub args: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub lhs: String,
    pub op: String,
    pub rhs: String,
    pub lhs_is_state_var: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum StmtKind {
    LocalVarDecl(VarDecl),
    Assignment(Assignment),
    /// `+=`, `-=`, ..., `++`, `--` and `delete`.
    CompoundAssignment(Assignment),
    RequireOrAssert {
        condition: String,
    },
    IfGuard {
        condition: String,
    },
    ExternalCall(CallSite),
    Return {
        expr: String,
    },
    Opaque,
}

impl StmtKind {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            StmtKind::Assignment(a) | StmtKind::CompoundAssignment(a) => Some(a),
            _ => None,
        }
    }

    /// Condition text for `if`, `require` and `assert`.
    pub fn guard_condition(&self) -> Option<&str> {
        match self {
            StmtKind::RequireOrAssert { condition } | StmtKind::IfGuard { condition } => {
                Some(condition)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Partition of the function body: statement spans of one function tile
    /// its body exactly, leading trivia and block punctuation included.
    pub span: Span,
    /// First to last significant token of the statement itself.
    pub token_span: Span,
    pub text: String,
    /// Index range into `SourceModel::raw_tokens`.
    pub tokens: Range<usize>,
    /// Conditions of enclosing `if`s and earlier `require`/`assert`s in the
    /// same block nest, outermost first.
    pub guard_exprs: Vec<String>,
    /// Every call site in the statement, including ones nested inside a
    /// condition such as `require(a.send(x))`.
    pub calls: Vec<CallSite>,
}
