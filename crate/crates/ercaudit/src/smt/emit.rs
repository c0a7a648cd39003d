//! Deterministic SMT-LIB2 rendering of queries (QF_BV, 256-bit words).

use crate::constraint::{BoolExpr, Term, TermOp};
use crate::rule_ir::CmpOp;
use crate::smt::SolverQuery;
use primitive_types::U256;
use std::fmt::Write;

pub fn emit_smtlib(q: &SolverQuery) -> String {
    let mut out = String::from("(set-logic QF_BV)\n");
    for sym in &q.symbols {
        let _ = writeln!(out, "(declare-const {} (_ BitVec 256))", render_sym(sym));
    }
    for a in &q.assertions {
        let _ = writeln!(out, "(assert {})", render_bool(a));
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

/// Quote symbols that are not simple SMT-LIB identifiers.
fn render_sym(name: &str) -> String {
    let simple = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$'))
        && !name.chars().next().unwrap().is_ascii_digit();
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn render_const(v: U256) -> String {
    let mut bytes = [0u8; 32];
    v.to_big_endian(&mut bytes);
    let mut s = String::with_capacity(66);
    s.push_str("#x");
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn render_term(t: &Term) -> String {
    match t {
        Term::Sym(s) => render_sym(s),
        Term::Const(v) => render_const(*v),
        Term::Bin { op, lhs, rhs } => {
            let l = render_term(lhs);
            let r = render_term(rhs);
            match op {
                TermOp::Add => format!("(bvadd {l} {r})"),
                TermOp::Sub => format!("(bvsub {l} {r})"),
                TermOp::Mul => format!("(bvmul {l} {r})"),
                // EVM convention: x / 0 = 0
                TermOp::Div => format!(
                    "(ite (= {r} {zero}) {zero} (bvudiv {l} {r}))",
                    zero = render_const(U256::zero())
                ),
            }
        }
        Term::Ite { cond, then, els } => format!(
            "(ite {} {} {})",
            render_bool(cond),
            render_term(then),
            render_term(els)
        ),
    }
}

pub fn render_bool(b: &BoolExpr) -> String {
    match b {
        BoolExpr::Lit(true) => "true".into(),
        BoolExpr::Lit(false) => "false".into(),
        BoolExpr::Cmp { op, lhs, rhs } => {
            let l = render_term(lhs);
            let r = render_term(rhs);
            match op {
                CmpOp::Eq => format!("(= {l} {r})"),
                CmpOp::Ne => format!("(not (= {l} {r}))"),
                CmpOp::Lt => format!("(bvult {l} {r})"),
                CmpOp::Le => format!("(bvule {l} {r})"),
                CmpOp::Gt => format!("(bvugt {l} {r})"),
                CmpOp::Ge => format!("(bvuge {l} {r})"),
            }
        }
        BoolExpr::And(parts) => {
            if parts.is_empty() {
                "true".into()
            } else {
                format!(
                    "(and {})",
                    parts.iter().map(render_bool).collect::<Vec<_>>().join(" ")
                )
            }
        }
        BoolExpr::Or(parts) => {
            if parts.is_empty() {
                "false".into()
            } else {
                format!(
                    "(or {})",
                    parts.iter().map(render_bool).collect::<Vec<_>>().join(" ")
                )
            }
        }
        BoolExpr::Not(inner) => format!("(not {})", render_bool(inner)),
    }
}
