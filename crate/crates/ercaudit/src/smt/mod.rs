//! Solver backend: SMT-LIB2 rendering, an external process driver, and a
//! built-in bounded-enumeration solver used when no external solver is
//! configured.
//!
//! Every symbol is a 256-bit bitvector; booleans travel as 0/1 words, so a
//! single sort covers all queries.

pub mod builtin;
pub mod emit;
pub mod external;

use crate::constraint::{cmp_eval, wrapping_bin, BoolExpr, Term};
use primitive_types::U256;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

#[derive(Debug, Clone)]
pub struct SolverQuery {
    /// All free symbols, sorted; each is a 256-bit bitvector.
    pub symbols: BTreeSet<Rc<str>>,
    pub assertions: Vec<Rc<BoolExpr>>,
    pub timeout_ms: u64,
}

impl SolverQuery {
    pub fn new(assertions: Vec<Rc<BoolExpr>>, timeout_ms: u64) -> SolverQuery {
        let mut syms = Vec::new();
        for a in &assertions {
            a.collect_syms(&mut syms);
        }
        let symbols: BTreeSet<Rc<str>> = syms.into_iter().collect();
        SolverQuery {
            symbols,
            assertions,
            timeout_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

pub type Model = BTreeMap<Rc<str>, U256>;

#[derive(Debug, Clone)]
pub struct SolverVerdict {
    pub status: Status,
    pub model: Option<Model>,
    /// Diagnostics from the solver (stderr, timeout notes, parse issues).
    pub diagnostic: String,
}

impl SolverVerdict {
    pub fn unknown(diag: impl Into<String>) -> SolverVerdict {
        SolverVerdict {
            status: Status::Unknown,
            model: None,
            diagnostic: diag.into(),
        }
    }
}

/// How `check_sat` should decide queries.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Enumerate the given value domain per symbol. `exhausted_is_unsat`
    /// controls whether a fruitless full enumeration reports unsat (bounded
    /// completeness assumption) or unknown.
    Builtin {
        domain: Vec<U256>,
        exhausted_is_unsat: bool,
    },
    /// Child process speaking SMT-LIB2 on stdin/stdout, e.g. `z3 -in`.
    External { cmd: Vec<String> },
}

impl Backend {
    pub fn default_builtin() -> Backend {
        Backend::Builtin {
            domain: builtin::default_domain(),
            exhausted_is_unsat: true,
        }
    }
}

pub fn check_sat(q: &SolverQuery, backend: &Backend) -> SolverVerdict {
    let mut verdict = match backend {
        Backend::Builtin {
            domain,
            exhausted_is_unsat,
        } => builtin::solve(q, domain, *exhausted_is_unsat),
        Backend::External { cmd } => external::solve(q, cmd),
    };
    // never surface an unverified sat
    if verdict.status == Status::Sat {
        match &verdict.model {
            Some(m) if validate_model(q, m) => {}
            _ => {
                verdict = SolverVerdict::unknown("solver returned sat but the model failed validation");
            }
        }
    }
    verdict
}

/// Evaluate a term under a total assignment.
pub fn eval_term(t: &Term, model: &Model) -> Option<U256> {
    match t {
        Term::Sym(s) => model.get(s).copied(),
        Term::Const(v) => Some(*v),
        Term::Bin { op, lhs, rhs } => Some(wrapping_bin(
            *op,
            eval_term(lhs, model)?,
            eval_term(rhs, model)?,
        )),
        Term::Ite { cond, then, els } => {
            if eval_bool(cond, model)? {
                eval_term(then, model)
            } else {
                eval_term(els, model)
            }
        }
    }
}

pub fn eval_bool(b: &BoolExpr, model: &Model) -> Option<bool> {
    match b {
        BoolExpr::Lit(v) => Some(*v),
        BoolExpr::Cmp { op, lhs, rhs } => Some(cmp_eval(
            *op,
            eval_term(lhs, model)?,
            eval_term(rhs, model)?,
        )),
        BoolExpr::And(parts) => {
            for p in parts {
                if !eval_bool(p, model)? {
                    return Some(false);
                }
            }
            Some(true)
        }
        BoolExpr::Or(parts) => {
            for p in parts {
                if eval_bool(p, model)? {
                    return Some(true);
                }
            }
            Some(false)
        }
        BoolExpr::Not(inner) => Some(!eval_bool(inner, model)?),
    }
}

/// True iff the model is total over the query's symbols and satisfies every
/// assertion.
pub fn validate_model(q: &SolverQuery, model: &Model) -> bool {
    if q.symbols.iter().any(|s| !model.contains_key(s)) {
        return false;
    }
    q.assertions
        .iter()
        .all(|a| eval_bool(a, model) == Some(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::TermOp;
    use crate::rule_ir::CmpOp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(assertions: Vec<Rc<BoolExpr>>) -> SolverQuery {
        SolverQuery::new(assertions, 5000)
    }

    #[test]
    fn contradiction_is_unsat() {
        let x = Term::sym("x");
        let query = q(vec![
            BoolExpr::cmp(CmpOp::Gt, x.clone(), Term::zero()),
            BoolExpr::cmp(CmpOp::Lt, x, Term::zero()),
        ]);
        let v = check_sat(&query, &Backend::default_builtin());
        assert_eq!(v.status, Status::Unsat);
    }

    #[test]
    fn sat_model_is_validated() {
        // x + y = 4, x > y
        let x = Term::sym("x");
        let y = Term::sym("y");
        let sum = Term::bin(TermOp::Add, x.clone(), y.clone());
        let query = q(vec![
            BoolExpr::cmp(CmpOp::Eq, sum, Term::constant(U256::from(4))),
            BoolExpr::cmp(CmpOp::Gt, x, y),
        ]);
        let v = check_sat(&query, &Backend::default_builtin());
        assert_eq!(v.status, Status::Sat);
        let m = v.model.unwrap();
        assert!(validate_model(&query, &m));
        assert_eq!(
            m[&Rc::from("x")].overflowing_add(m[&Rc::from("y")]).0,
            U256::from(4)
        );
    }

    #[test]
    fn underflow_witness_found_at_domain_edges() {
        // x - y wraps iff x < y; ask for x - y > 10 with x <= 3
        let x = Term::sym("x");
        let y = Term::sym("y");
        let diff = Term::bin(TermOp::Sub, x.clone(), y.clone());
        let query = q(vec![
            BoolExpr::cmp(CmpOp::Le, x, Term::constant(U256::from(3))),
            BoolExpr::cmp(CmpOp::Gt, diff, Term::constant(U256::from(10))),
        ]);
        let v = check_sat(&query, &Backend::default_builtin());
        assert_eq!(v.status, Status::Sat);
    }

    #[test]
    fn perturbed_model_fails_validation() {
        let x = Term::sym("x");
        let query = q(vec![BoolExpr::cmp(
            CmpOp::Eq,
            x,
            Term::constant(U256::from(2)),
        )]);
        let v = check_sat(&query, &Backend::default_builtin());
        let mut m = v.model.unwrap();
        assert!(validate_model(&query, &m));
        *m.get_mut(&Rc::from("x")).unwrap() += U256::one();
        assert!(!validate_model(&query, &m));
    }

    #[test]
    fn evaluator_agrees_with_enumerator_on_random_pairs() {
        // differential: the substitution evaluator and the enumerator's
        // internal evaluation must agree on satisfied/unsatisfied status of
        // random assignments
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dom = builtin::default_domain();
        for _ in 0..1000 {
            let expr = random_bool(&mut rng, 3);
            let query = q(vec![expr.clone()]);
            let mut model = Model::new();
            for s in &query.symbols {
                model.insert(s.clone(), dom[rng.gen_range(0..dom.len())]);
            }
            let direct = eval_bool(&expr, &model);
            assert!(direct.is_some());
            // enumerate with a domain containing exactly the chosen values:
            // sat iff some assignment works; if this model satisfies, the
            // enumerator over the full domain must report sat too
            if direct == Some(true) {
                let v = builtin::solve(&query, &dom, true);
                assert_eq!(v.status, Status::Sat);
                assert!(validate_model(&query, v.model.as_ref().unwrap()));
            }
        }
    }

    fn random_term(rng: &mut ChaCha8Rng, depth: usize) -> Rc<Term> {
        if depth == 0 || rng.gen_bool(0.4) {
            return if rng.gen_bool(0.5) {
                Term::sym(["a", "b", "c"][rng.gen_range(0..3)])
            } else {
                Term::constant(U256::from(rng.gen_range(0..5u64)))
            };
        }
        let op = [TermOp::Add, TermOp::Sub, TermOp::Mul, TermOp::Div][rng.gen_range(0..4)];
        Term::bin(op, random_term(rng, depth - 1), random_term(rng, depth - 1))
    }

    fn random_bool(rng: &mut ChaCha8Rng, depth: usize) -> Rc<BoolExpr> {
        if depth == 0 || rng.gen_bool(0.3) {
            let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
                [rng.gen_range(0..6)];
            return BoolExpr::cmp(op, random_term(rng, 2), random_term(rng, 2));
        }
        match rng.gen_range(0..3) {
            0 => BoolExpr::and(vec![random_bool(rng, depth - 1), random_bool(rng, depth - 1)]),
            1 => BoolExpr::or(vec![random_bool(rng, depth - 1), random_bool(rng, depth - 1)]),
            _ => BoolExpr::not(random_bool(rng, depth - 1)),
        }
    }
}
