//! Bounded-enumeration reference solver.
//!
//! Assigns each symbol a value from a small domain, pruning as soon as an
//! assertion's symbols are fully assigned and the assertion is false. With
//! the default domain {0, 1, 2, 3, 2^256-1} this finds typical boundary
//! witnesses (zero addresses, wrap-around) without an external solver.

use crate::constraint::{BoolExpr, Term};
use crate::rule_ir::CmpOp;
use crate::smt::{eval_bool, Model, SolverQuery, SolverVerdict, Status};
use primitive_types::U256;
use std::rc::Rc;

pub fn default_domain() -> Vec<U256> {
    vec![
        U256::zero(),
        U256::one(),
        U256::from(2),
        U256::from(3),
        U256::MAX,
    ]
}

/// Refuse enumerations larger than this many assignments.
const MAX_ASSIGNMENTS: u128 = 5_000_000;

pub fn solve(q: &SolverQuery, domain: &[U256], exhausted_is_unsat: bool) -> SolverVerdict {
    if q.assertions.iter().any(|a| trivially_false(a)) {
        return SolverVerdict {
            status: Status::Unsat,
            model: None,
            diagnostic: String::new(),
        };
    }
    if domain.is_empty() {
        return SolverVerdict::unknown("empty enumeration domain");
    }
    let syms: Vec<Rc<str>> = q.symbols.iter().cloned().collect();
    let mut total: u128 = 1;
    for _ in &syms {
        total = total.saturating_mul(domain.len() as u128);
        if total > MAX_ASSIGNMENTS {
            return SolverVerdict::unknown(format!(
                "enumeration over {} symbols exceeds the assignment cap",
                syms.len()
            ));
        }
    }

    // assertion i becomes checkable once all its symbols are assigned;
    // precompute the depth at which that happens
    let mut ready_at: Vec<Vec<&BoolExpr>> = vec![Vec::new(); syms.len() + 1];
    for a in &q.assertions {
        let mut used = Vec::new();
        a.collect_syms(&mut used);
        let depth = used
            .iter()
            .map(|u| syms.iter().position(|s| s == u).expect("symbol indexed") + 1)
            .max()
            .unwrap_or(0);
        ready_at[depth].push(a);
    }

    let mut model = Model::new();
    if assign(&syms, domain, &ready_at, 0, &mut model) {
        SolverVerdict {
            status: Status::Sat,
            model: Some(model),
            diagnostic: String::new(),
        }
    } else if exhausted_is_unsat {
        SolverVerdict {
            status: Status::Unsat,
            model: None,
            diagnostic: String::new(),
        }
    } else {
        SolverVerdict::unknown("no witness within the enumeration domain")
    }
}

fn assign(
    syms: &[Rc<str>],
    domain: &[U256],
    ready_at: &[Vec<&BoolExpr>],
    depth: usize,
    model: &mut Model,
) -> bool {
    if ready_at[depth]
        .iter()
        .any(|a| eval_bool(a, model) != Some(true))
    {
        return false;
    }
    if depth == syms.len() {
        return true;
    }
    for v in domain {
        model.insert(syms[depth].clone(), *v);
        if assign(syms, domain, ready_at, depth + 1, model) {
            return true;
        }
    }
    model.remove(&syms[depth]);
    false
}

/// Structural unsatisfiability that holds over the full 256-bit range, so it
/// can be reported as unsat even when the enumeration domain is partial.
fn trivially_false(b: &BoolExpr) -> bool {
    match b {
        BoolExpr::Lit(v) => !v,
        BoolExpr::Cmp { op, lhs, rhs } => {
            if lhs == rhs && matches!(op, CmpOp::Ne | CmpOp::Lt | CmpOp::Gt) {
                return true;
            }
            match (op, &**rhs) {
                (CmpOp::Lt, Term::Const(c)) if c.is_zero() => true,
                (CmpOp::Gt, Term::Const(c)) if *c == U256::MAX => true,
                _ => false,
            }
        }
        BoolExpr::And(parts) => parts.iter().any(trivially_false),
        BoolExpr::Or(parts) => !parts.is_empty() && parts.iter().all(trivially_false),
        BoolExpr::Not(inner) => matches!(&**inner, BoolExpr::Lit(true)),
    }
}
