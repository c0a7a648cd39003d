//! AST for the supported Solidity subset.

use crate::frontend::lexer::Span;
use crate::rule_ir::{ParamDecl, Signature, SolType};
use primitive_types::U256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn is_entry(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }
}

/// Storage type of a contract field: a scalar or a 1-D/2-D mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    Elem(SolType),
    Mapping {
        keys: Vec<SolType>,
        value: SolType,
    },
}

impl FieldType {
    pub fn dimensionality(&self) -> usize {
        match self {
            FieldType::Elem(_) => 0,
            FieldType::Mapping { keys, .. } => keys.len(),
        }
    }

    pub fn value_type(&self) -> &SolType {
        match self {
            FieldType::Elem(t) => t,
            FieldType::Mapping { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldAst {
    pub name: String,
    pub ty: FieldType,
    pub visibility: Visibility,
    pub constant: bool,
    pub immutable: bool,
    pub initializer: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct ModifierAst {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct FunctionAst {
    pub sig: Signature,
    pub visibility: Visibility,
    pub modifiers: Vec<(String, Vec<Expr>)>,
    pub is_view: bool,
    pub is_pure: bool,
    pub body: Option<Block>,
    /// Set when the body uses a construct outside the subset; the function is
    /// still listed so API checks work, but its verdicts become `unknown`.
    pub unsupported: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct ContractAst {
    pub name: String,
    pub parents: Vec<String>,
    pub fields: Vec<FieldAst>,
    pub events: Vec<Signature>,
    pub functions: Vec<FunctionAst>,
    pub modifiers: Vec<ModifierAst>,
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

#[derive(Debug, Clone)]
pub enum LValue {
    /// Local variable or scalar field; resolved against scopes later.
    Name(String),
    /// Mapping element `name[k1][k2]`.
    Index { name: String, keys: Vec<Expr> },
}

#[derive(Debug, Clone)]
pub enum Stmt {
    VarDecl {
        ty: SolType,
        name: String,
        init: Option<Expr>,
        span: Span,
    },
    Assign {
        lhs: LValue,
        op: AssignOp,
        rhs: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then: Block,
        els: Option<Block>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Block,
        span: Span,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        post: Option<Box<Stmt>>,
        body: Block,
        span: Span,
    },
    Require {
        cond: Expr,
        msg: Option<String>,
        span: Span,
    },
    Assert {
        cond: Expr,
        span: Span,
    },
    Revert {
        msg: Option<String>,
        span: Span,
    },
    Emit {
        event: String,
        args: Vec<Expr>,
        span: Span,
    },
    Return {
        value: Option<Expr>,
        span: Span,
    },
    /// Bare call used as a statement (internal or external hook call).
    ExprStmt {
        expr: Expr,
        span: Span,
    },
    Unchecked {
        body: Block,
        span: Span,
    },
    /// `_;` inside a modifier body.
    Placeholder {
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::VarDecl { span, .. }
            | Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::For { span, .. }
            | Stmt::Require { span, .. }
            | Stmt::Assert { span, .. }
            | Stmt::Revert { span, .. }
            | Stmt::Emit { span, .. }
            | Stmt::Return { span, .. }
            | Stmt::ExprStmt { span, .. }
            | Stmt::Unchecked { span, .. }
            | Stmt::Placeholder { span } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(U256, Span),
    Bool(bool, Span),
    /// Local, parameter, or contract field.
    Name(String, Span),
    MsgSender(Span),
    MsgValue(Span),
    /// `address(0)`.
    ZeroAddress(Span),
    /// `type(uint256).max`.
    MaxUint(Span),
    Index {
        name: String,
        keys: Vec<Expr>,
        span: Span,
    },
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Not(Box<Expr>, Span),
    /// Internal call `helper(a, b)`.
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    /// External receiver-hook call `addr.hook(a, b)`; modeled as an
    /// uninterpreted call with a fresh return value.
    ExtCall {
        target: Box<Expr>,
        function: String,
        args: Vec<Expr>,
        span: Span,
    },
    /// `arr.length` on a calldata array parameter.
    Length(Box<Expr>, Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Num(_, s)
            | Expr::Bool(_, s)
            | Expr::Name(_, s)
            | Expr::MsgSender(s)
            | Expr::MsgValue(s)
            | Expr::ZeroAddress(s)
            | Expr::MaxUint(s)
            | Expr::Not(_, s)
            | Expr::Length(_, s) => *s,
            Expr::Index { span, .. } | Expr::Bin { span, .. } | Expr::Call { span, .. } | Expr::ExtCall { span, .. } => *span,
        }
    }
}
