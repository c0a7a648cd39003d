//! Solver-level expression trees.
//!
//! Two layers live here. [`Term`]/[`BoolExpr`] are ground solver expressions
//! over 256-bit words: every Solidity value (including bools, encoded 0/1)
//! becomes a `Term`, and path conditions / violation formulas become
//! [`BoolExpr`]s. [`CExpr`]/[`CValue`] are the rule-level constraint
//! expressions produced by constraint synthesis; they still mention
//! snapshot-tagged variables and state variables and are grounded into
//! `BoolExpr`s per execution path.

use crate::rule_ir::{CmpOp, OpRef};
use primitive_types::U256;
use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// A 256-bit word term. Arithmetic is wrapping; throw-on-overflow semantics
/// are modeled by explicit guard forks during symbolic execution, not here.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Sym(Rc<str>),
    Const(U256),
    Bin {
        op: TermOp,
        lhs: Rc<Term>,
        rhs: Rc<Term>,
    },
    Ite {
        cond: Rc<BoolExpr>,
        then: Rc<Term>,
        els: Rc<Term>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Lit(bool),
    Cmp {
        op: CmpOp,
        lhs: Rc<Term>,
        rhs: Rc<Term>,
    },
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
    Not(Rc<BoolExpr>),
}

pub fn wrapping_bin(op: TermOp, a: U256, b: U256) -> U256 {
    match op {
        TermOp::Add => a.overflowing_add(b).0,
        TermOp::Sub => a.overflowing_sub(b).0,
        TermOp::Mul => a.overflowing_mul(b).0,
        // EVM convention: division by zero handled by an explicit throw
        // guard; the wrapped operator itself yields zero.
        TermOp::Div => {
            if b.is_zero() {
                U256::zero()
            } else {
                a / b
            }
        }
    }
}

pub fn cmp_eval(op: CmpOp, a: U256, b: U256) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

impl Term {
    pub fn sym(name: &str) -> Rc<Term> {
        Rc::new(Term::Sym(name.into()))
    }

    pub fn constant(v: U256) -> Rc<Term> {
        Rc::new(Term::Const(v))
    }

    pub fn zero() -> Rc<Term> {
        Term::constant(U256::zero())
    }

    pub fn one() -> Rc<Term> {
        Term::constant(U256::one())
    }

    /// Binary operator with constant folding.
    pub fn bin(op: TermOp, lhs: Rc<Term>, rhs: Rc<Term>) -> Rc<Term> {
        if let (Term::Const(a), Term::Const(b)) = (&*lhs, &*rhs) {
            return Term::constant(wrapping_bin(op, *a, *b));
        }
        Rc::new(Term::Bin { op, lhs, rhs })
    }

    pub fn ite(cond: Rc<BoolExpr>, then: Rc<Term>, els: Rc<Term>) -> Rc<Term> {
        match &*cond {
            BoolExpr::Lit(true) => then,
            BoolExpr::Lit(false) => els,
            _ if then == els => then,
            _ => Rc::new(Term::Ite { cond, then, els }),
        }
    }

    pub fn as_const(&self) -> Option<U256> {
        match self {
            Term::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn collect_syms(&self, out: &mut Vec<Rc<str>>) {
        match self {
            Term::Sym(s) => {
                if !out.iter().any(|x| x == s) {
                    out.push(s.clone());
                }
            }
            Term::Const(_) => {}
            Term::Bin { lhs, rhs, .. } => {
                lhs.collect_syms(out);
                rhs.collect_syms(out);
            }
            Term::Ite { cond, then, els } => {
                cond.collect_syms(out);
                then.collect_syms(out);
                els.collect_syms(out);
            }
        }
    }
}

impl BoolExpr {
    pub fn tru() -> Rc<BoolExpr> {
        Rc::new(BoolExpr::Lit(true))
    }

    pub fn fals() -> Rc<BoolExpr> {
        Rc::new(BoolExpr::Lit(false))
    }

    pub fn cmp(op: CmpOp, lhs: Rc<Term>, rhs: Rc<Term>) -> Rc<BoolExpr> {
        if let (Term::Const(a), Term::Const(b)) = (&*lhs, &*rhs) {
            return Rc::new(BoolExpr::Lit(cmp_eval(op, *a, *b)));
        }
        Rc::new(BoolExpr::Cmp { op, lhs, rhs })
    }

    pub fn and(parts: Vec<Rc<BoolExpr>>) -> Rc<BoolExpr> {
        let mut flat = Vec::new();
        for p in parts {
            match &*p {
                BoolExpr::Lit(true) => {}
                BoolExpr::Lit(false) => return BoolExpr::fals(),
                _ => flat.push((*p).clone()),
            }
        }
        match flat.len() {
            0 => BoolExpr::tru(),
            1 => Rc::new(flat.pop().unwrap()),
            _ => Rc::new(BoolExpr::And(flat)),
        }
    }

    pub fn or(parts: Vec<Rc<BoolExpr>>) -> Rc<BoolExpr> {
        let mut flat = Vec::new();
        for p in parts {
            match &*p {
                BoolExpr::Lit(false) => {}
                BoolExpr::Lit(true) => return BoolExpr::tru(),
                _ => flat.push((*p).clone()),
            }
        }
        match flat.len() {
            0 => BoolExpr::fals(),
            1 => Rc::new(flat.pop().unwrap()),
            _ => Rc::new(BoolExpr::Or(flat)),
        }
    }

    pub fn not(e: Rc<BoolExpr>) -> Rc<BoolExpr> {
        match &*e {
            BoolExpr::Lit(b) => Rc::new(BoolExpr::Lit(!b)),
            BoolExpr::Not(inner) => inner.clone(),
            _ => Rc::new(BoolExpr::Not(e)),
        }
    }

    pub fn as_lit(&self) -> Option<bool> {
        match self {
            BoolExpr::Lit(b) => Some(*b),
            _ => None,
        }
    }

    pub fn collect_syms(&self, out: &mut Vec<Rc<str>>) {
        match self {
            BoolExpr::Lit(_) => {}
            BoolExpr::Cmp { lhs, rhs, .. } => {
                lhs.collect_syms(out);
                rhs.collect_syms(out);
            }
            BoolExpr::And(parts) | BoolExpr::Or(parts) => {
                for p in parts {
                    p.collect_syms(out);
                }
            }
            BoolExpr::Not(inner) => inner.collect_syms(out),
        }
    }
}

fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Sym(s) => write!(f, "{s}"),
        Term::Const(v) => write!(f, "{v}"),
        Term::Bin { op, lhs, rhs } => {
            let sym = match op {
                TermOp::Add => "+",
                TermOp::Sub => "-",
                TermOp::Mul => "*",
                TermOp::Div => "/",
            };
            write!(f, "(")?;
            fmt_term(lhs, f)?;
            write!(f, " {sym} ")?;
            fmt_term(rhs, f)?;
            write!(f, ")")
        }
        Term::Ite { cond, then, els } => {
            write!(f, "ite({cond}, ")?;
            fmt_term(then, f)?;
            write!(f, ", ")?;
            fmt_term(els, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, f)
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Lit(b) => write!(f, "{b}"),
            BoolExpr::Cmp { op, lhs, rhs } => write!(f, "({lhs} {op} {rhs})"),
            BoolExpr::And(parts) => {
                write!(f, "(and")?;
                for p in parts {
                    write!(f, " {p}")?;
                }
                write!(f, ")")
            }
            BoolExpr::Or(parts) => {
                write!(f, "(or")?;
                for p in parts {
                    write!(f, " {p}")?;
                }
                write!(f, ")")
            }
            BoolExpr::Not(inner) => write!(f, "(not {inner})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Rule-level constraint expressions
// ---------------------------------------------------------------------------

/// Snapshot tag: a variable's value on entry to the public function (`First`)
/// or at the end of the path (`Last`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    First,
    Last,
}

/// Base symbol of a snapshot-tagged value variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarBase {
    /// Target-function parameter (0-based).
    Param(usize),
    /// Scalar contract field.
    Field(String),
    /// Mapping element `field[keys...]`.
    MapElem { field: String, keys: Vec<CValue> },
    /// Parameter of an emitted event or called function on this path.
    ActionPara { target: String, index: usize },
    MsgSender,
    MsgValue,
}

/// Arithmetic side of a rule-level constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CValue {
    Var { base: VarBase, tag: Tag },
    Lit(U256),
}

impl CValue {
    pub fn lit_u64(v: u64) -> CValue {
        CValue::Lit(U256::from(v))
    }
}

/// Per-path state variable families tracked by symbolic execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateVar {
    /// Whether the function threw.
    Th,
    /// Whether the function emitted the named event.
    Em(String),
    /// Whether the function called the named function.
    Ca(String),
    /// Whether the named field was increased.
    Bi(String),
    /// Whether the named field was decreased.
    Bd(String),
    /// Whether the named field was modified.
    Bc(String),
}

impl fmt::Display for StateVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateVar::Th => write!(f, "TH"),
            StateVar::Em(e) => write!(f, "EM_{e}"),
            StateVar::Ca(c) => write!(f, "CA_{c}"),
            StateVar::Bi(x) => write!(f, "BI_{x}"),
            StateVar::Bd(x) => write!(f, "BD_{x}"),
            StateVar::Bc(x) => write!(f, "BC_{x}"),
        }
    }
}

/// Rule-level boolean constraint over snapshot variables, state variables,
/// and instruction-order variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CExpr {
    True,
    False,
    And(Box<CExpr>, Box<CExpr>),
    Or(Box<CExpr>, Box<CExpr>),
    Not(Box<CExpr>),
    Cmp {
        op: CmpOp,
        lhs: CValue,
        rhs: CValue,
    },
    /// `StateVar_last = expected`.
    State { var: StateVar, expected: bool },
    /// `O_a < O_b` over instruction ordinals.
    OrderLt { a: OpRef, b: OpRef },
}

impl CExpr {
    pub fn and(a: CExpr, b: CExpr) -> CExpr {
        match (&a, &b) {
            (CExpr::True, _) => b,
            (_, CExpr::True) => a,
            (CExpr::False, _) | (_, CExpr::False) => CExpr::False,
            _ => CExpr::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: CExpr, b: CExpr) -> CExpr {
        match (&a, &b) {
            (CExpr::False, _) => b,
            (_, CExpr::False) => a,
            (CExpr::True, _) | (_, CExpr::True) => CExpr::True,
            _ => CExpr::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn not(a: CExpr) -> CExpr {
        match a {
            CExpr::True => CExpr::False,
            CExpr::False => CExpr::True,
            CExpr::Not(inner) => *inner,
            _ => CExpr::Not(Box::new(a)),
        }
    }

    /// Every snapshot variable in the expression, with its tag. Used by the
    /// no-free-symbols housing check.
    pub fn snapshot_vars(&self) -> Vec<(VarBase, Tag)> {
        fn from_value(v: &CValue, out: &mut Vec<(VarBase, Tag)>) {
            if let CValue::Var { base, tag } = v {
                out.push((base.clone(), *tag));
                if let VarBase::MapElem { keys, .. } = base {
                    for k in keys {
                        from_value(k, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e {
                CExpr::And(a, b) | CExpr::Or(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                CExpr::Not(a) => stack.push(a),
                CExpr::Cmp { lhs, rhs, .. } => {
                    from_value(lhs, &mut out);
                    from_value(rhs, &mut out);
                }
                _ => {}
            }
        }
        out
    }
}

fn fmt_cvalue(v: &CValue, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        CValue::Lit(x) => write!(f, "{x}"),
        CValue::Var { base, tag } => {
            let suffix = match tag {
                Tag::First => "first",
                Tag::Last => "last",
            };
            match base {
                VarBase::Param(i) => write!(f, "para{i}_{suffix}"),
                VarBase::Field(name) => write!(f, "{name}_{suffix}"),
                VarBase::MapElem { field, keys } => {
                    write!(f, "{field}[")?;
                    for (i, k) in keys.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        fmt_cvalue(k, f)?;
                    }
                    write!(f, "]_{suffix}")
                }
                VarBase::ActionPara { target, index } => write!(f, "{target}.para{index}_{suffix}"),
                VarBase::MsgSender => write!(f, "msg.sender"),
                VarBase::MsgValue => write!(f, "msg.value"),
            }
        }
    }
}

impl fmt::Display for CValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cvalue(self, f)
    }
}

impl fmt::Display for CExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExpr::True => write!(f, "true"),
            CExpr::False => write!(f, "false"),
            CExpr::And(a, b) => write!(f, "({a} and {b})"),
            CExpr::Or(a, b) => write!(f, "({a} or {b})"),
            CExpr::Not(a) => write!(f, "(not {a})"),
            CExpr::Cmp { op, lhs, rhs } => write!(f, "({lhs} {op} {rhs})"),
            CExpr::State { var, expected } => write!(f, "({var}_last = {expected})"),
            CExpr::OrderLt { a, b } => write!(f, "(O[{}] < O[{}])", a.describe(), b.describe()),
        }
    }
}
