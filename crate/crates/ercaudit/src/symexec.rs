//! Symbolic execution of lowered functions and per-path rule decisions.
//!
//! Every lowered function is explored path by path: branches fork, throw
//! points (require/assert/revert, checked arithmetic, division) fork a
//! throwing path, and loops are unrolled up to a bound with the usual
//! unwinding assumption. Along each path the executor maintains a term
//! valuation for SSA symbols, a growing path condition, a write history per
//! storage field, and the boolean state variables (TH, EM, CA, BI, BD, BC)
//! plus instruction ordinals that ground rule constraints.

use crate::constraint::{BoolExpr, CExpr, CValue, StateVar, Tag, Term, TermOp, VarBase};
use crate::frontend::model::ContractModel;
use crate::frontend::ssa::{lower_function, FuncSsa, Inst, Operand, Rvalue, SymId, WriteKind};
use crate::report::{Verdict, ViolationReport};
use crate::rule_ir::{
    CmpOp, FieldRef, FormalRule, OpRef, RuleBody, RuleKind, SolType, TargetKind, Value,
};
use crate::smt::{check_sat, Backend, Model, SolverQuery, Status};
use crate::static_checks::{
    check_api_compliance, instruction_order, stmt_writes, FieldConstraint, OpKind, OpOrder,
    OpOrdinals, StaticFacts,
};
use crate::synth::{compose_violation, synth_triple, ConstraintTriple};
use primitive_types::U256;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

/// Mapping reads are resolved by case-splitting over the write history; more
/// writes than this to one field on one path gives up with `unknown`.
const MAX_WRITES_PER_FIELD: usize = 8;

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub loop_bound: usize,
    pub max_paths: usize,
    pub solver_timeout_ms: u64,
    pub backend: Backend,
    /// When set, every solver query is also written to this directory as an
    /// SMT-LIB2 script.
    pub dump_smt: Option<std::path::PathBuf>,
}

impl Default for ExecConfig {
    fn default() -> ExecConfig {
        ExecConfig {
            loop_bound: 2,
            max_paths: 4096,
            solver_timeout_ms: 5000,
            backend: Backend::default_builtin(),
            dump_smt: None,
        }
    }
}

fn decide(q: &SolverQuery, cfg: &ExecConfig) -> crate::smt::SolverVerdict {
    if let Some(dir) = &cfg.dump_smt {
        use std::sync::atomic::{AtomicU64, Ordering};
        static QUERY_SEQ: AtomicU64 = AtomicU64::new(0);
        let n = QUERY_SEQ.fetch_add(1, Ordering::Relaxed);
        let _ = std::fs::create_dir_all(dir);
        let _ = std::fs::write(
            dir.join(format!("query_{n:05}.smt2")),
            crate::smt::emit::emit_smtlib(q),
        );
    }
    check_sat(q, &cfg.backend)
}

// ---------------------------------------------------------------------------
// path state

#[derive(Clone, Default)]
struct FieldHistory {
    /// Distinct symbolic reads of the field's *initial* contents. Each entry
    /// maps its key tuple to the term all reads with those keys resolve to.
    base_slots: Vec<(Vec<Rc<Term>>, Rc<Term>)>,
    /// Chronological writes (keys, stored value).
    writes: Vec<(Vec<Rc<Term>>, Rc<Term>)>,
}

#[derive(Clone, Default)]
pub struct PathSummary {
    /// Terminal: `true` means the path ended in a throw.
    pub throw: bool,
    /// Conjunction of branch conditions plus the seeded initial constraints.
    pub pc: Vec<Rc<BoolExpr>>,
    pub em: BTreeSet<String>,
    pub ca: BTreeSet<String>,
    pub bi: BTreeSet<String>,
    pub bd: BTreeSet<String>,
    pub bc: BTreeSet<String>,
    pub ordinals: OpOrdinals,
    /// Set when the path hit a modeling limit; its verdicts become unknown.
    pub unknown: Option<String>,
    env: HashMap<SymId, Rc<Term>>,
    fields: HashMap<String, FieldHistory>,
    /// Entry-value term per declared parameter (`None` for array params).
    param_terms: Vec<Option<Rc<Term>>>,
    /// Latest argument values of each emitted event / performed call.
    action_args: HashMap<(String, usize), Rc<Term>>,
    /// Consistent element/length views of calldata array parameters.
    array_slots: HashMap<usize, Vec<(Rc<Term>, Rc<Term>)>>,
    array_lens: HashMap<usize, Rc<Term>>,
    next_ord: u64,
    opaque_n: u32,
}

fn keys_eq(a: &[Rc<Term>], b: &[Rc<Term>]) -> Rc<BoolExpr> {
    let parts = a
        .iter()
        .zip(b)
        .map(|(x, y)| BoolExpr::cmp(CmpOp::Eq, x.clone(), y.clone()))
        .collect();
    BoolExpr::and(parts)
}

impl PathSummary {
    fn eval(&self, op: Operand) -> Rc<Term> {
        match op {
            Operand::Sym(s) => self.env.get(&s).expect("SSA def before use").clone(),
            Operand::Const(c) => Term::constant(c),
            Operand::MsgSender => Term::sym("msg.sender"),
            Operand::MsgValue => Term::sym("msg.value"),
        }
    }

    /// Value of `field[keys]` before the function ran. Structurally equal key
    /// tuples share one slot; a fresh slot is chained through key-equality
    /// ITEs over the existing ones so aliasing keys stay consistent.
    fn read_first(&mut self, facts: &StaticFacts, field: &str, keys: &[Rc<Term>]) -> Rc<Term> {
        let hist = self.fields.entry(field.to_string()).or_default();
        for (k, v) in &hist.base_slots {
            if k.as_slice() == keys {
                return v.clone();
            }
        }
        let name = if keys.is_empty() {
            field.to_string()
        } else {
            format!("{field}@{}", hist.base_slots.len())
        };
        let mut val: Rc<Term> = Term::sym(&name);
        for (k, v) in &hist.base_slots {
            val = Term::ite(keys_eq(keys, k), v.clone(), val);
        }
        hist.base_slots.push((keys.to_vec(), val.clone()));
        let mut invariants = Vec::new();
        for c in &facts.field_constraints {
            let FieldConstraint::NonzeroKey { field: cf, key_index } = c;
            if cf == field && *key_index < keys.len() {
                // field never written under a zero key, so such reads give 0
                invariants.push(BoolExpr::or(vec![
                    BoolExpr::cmp(CmpOp::Ne, keys[*key_index].clone(), Term::zero()),
                    BoolExpr::cmp(CmpOp::Eq, val.clone(), Term::zero()),
                ]));
            }
        }
        self.pc.extend(invariants);
        val
    }

    /// Current value of `field[keys]`: the write history folded over the
    /// initial value, newest write outermost.
    fn read_last(&mut self, facts: &StaticFacts, field: &str, keys: &[Rc<Term>]) -> Rc<Term> {
        let mut val = self.read_first(facts, field, keys);
        let writes = self.fields.get(field).map(|h| h.writes.clone()).unwrap_or_default();
        for (k, v) in &writes {
            val = Term::ite(keys_eq(keys, k), v.clone(), val);
        }
        val
    }

    fn write_field(&mut self, field: &str, keys: Vec<Rc<Term>>, value: Rc<Term>) -> Result<(), String> {
        let hist = self.fields.entry(field.to_string()).or_default();
        if hist.writes.len() >= MAX_WRITES_PER_FIELD {
            return Err(format!(
                "more than {MAX_WRITES_PER_FIELD} writes to `{field}` on one path"
            ));
        }
        hist.writes.push((keys, value));
        Ok(())
    }

    fn array_len(&mut self, param: usize) -> Rc<Term> {
        self.array_lens
            .entry(param)
            .or_insert_with(|| Term::sym(&format!("para{param}.length")))
            .clone()
    }

    fn array_elem(&mut self, param: usize, index: Rc<Term>, elem_ty: Option<&SolType>) -> Rc<Term> {
        let slots = self.array_slots.entry(param).or_default();
        for (i, v) in slots.iter() {
            if *i == index {
                return v.clone();
            }
        }
        let fresh: Rc<Term> = Term::sym(&format!("para{param}[{}]", slots.len()));
        let mut val = fresh;
        for (i, v) in slots.iter() {
            val = Term::ite(
                BoolExpr::cmp(CmpOp::Eq, index.clone(), i.clone()),
                v.clone(),
                val,
            );
        }
        slots.push((index, val.clone()));
        if let Some(b) = elem_ty.and_then(|t| type_bound(t, &val)) {
            self.pc.push(b);
        }
        val
    }

    fn record_ordinal(&mut self, kind: OpKind, name: &str) {
        self.next_ord += 1;
        self.ordinals.insert((kind, name.to_string()), self.next_ord);
    }

    fn state_var(&self, var: &StateVar) -> bool {
        match var {
            StateVar::Th => self.throw,
            StateVar::Em(e) => self.em.contains(e),
            StateVar::Ca(c) => self.ca.contains(c),
            StateVar::Bi(f) => self.bi.contains(f),
            StateVar::Bd(f) => self.bd.contains(f),
            StateVar::Bc(f) => self.bc.contains(f),
        }
    }
}

/// Upper bound implied by the declared type, if the type does not cover the
/// full 256-bit word.
fn type_bound(ty: &SolType, t: &Rc<Term>) -> Option<Rc<BoolExpr>> {
    let max = match ty {
        SolType::Bool => U256::one(),
        SolType::Uint8 => U256::from(255u64),
        SolType::Bytes4 => U256::from(u32::MAX),
        SolType::Address => (U256::one() << 160) - 1,
        _ => return None,
    };
    Some(BoolExpr::cmp(CmpOp::Le, t.clone(), Term::constant(max)))
}

/// Boolean view of a word term; unwraps the `ite(c,1,0)` encoding produced
/// for comparison results so conditions stay structural.
fn truthy(t: &Rc<Term>) -> Rc<BoolExpr> {
    if let Term::Ite { cond, then, els } = &**t {
        if then.as_const() == Some(U256::one()) && els.as_const() == Some(U256::zero()) {
            return cond.clone();
        }
    }
    BoolExpr::cmp(CmpOp::Ne, t.clone(), Term::zero())
}

fn bool_term(c: Rc<BoolExpr>) -> Rc<Term> {
    Term::ite(c, Term::one(), Term::zero())
}

// ---------------------------------------------------------------------------
// exploration

struct Executor<'a> {
    ssa: &'a FuncSsa,
    facts: &'a StaticFacts,
    cfg: &'a ExecConfig,
    finished: Vec<PathSummary>,
    capped: Option<String>,
}

/// Enumerate all paths through the function. `Err` means the path-count cap
/// was exceeded and the whole function must be reported unknown.
pub fn explore_paths(
    ssa: &FuncSsa,
    facts: &StaticFacts,
    cfg: &ExecConfig,
) -> Result<Vec<PathSummary>, String> {
    let mut init = PathSummary::default();
    for (i, sym) in ssa.param_syms.iter().enumerate() {
        match sym {
            Some(sid) => {
                let t = Term::sym(ssa.sym_name(*sid));
                if let Some(b) = type_bound(&ssa.param_types[i], &t) {
                    init.pc.push(b);
                }
                init.env.insert(*sid, t.clone());
                init.param_terms.push(Some(t));
            }
            None => init.param_terms.push(None),
        }
    }
    let sender = Term::sym("msg.sender");
    init.pc.push(BoolExpr::cmp(CmpOp::Gt, sender.clone(), Term::zero()));
    if let Some(b) = type_bound(&SolType::Address, &sender) {
        init.pc.push(b);
    }
    for (f, v) in &facts.constant_fields {
        let t = init.read_first(facts, f, &[]);
        init.pc.push(BoolExpr::cmp(CmpOp::Eq, t, Term::constant(*v)));
    }

    let mut ex = Executor {
        ssa,
        facts,
        cfg,
        finished: Vec::new(),
        capped: None,
    };
    let survivors = ex.run_block(&ssa.body, vec![init]);
    if let Some(c) = ex.capped {
        return Err(c);
    }
    // falling off the end of the body is a normal return
    ex.finished.extend(survivors);
    Ok(ex.finished)
}

impl Executor<'_> {
    fn run_block(&mut self, insts: &[Inst], mut states: Vec<PathSummary>) -> Vec<PathSummary> {
        for inst in insts {
            if self.capped.is_some() {
                return Vec::new();
            }
            let mut next = Vec::new();
            for st in states {
                if st.unknown.is_some() {
                    self.finished.push(st);
                    continue;
                }
                self.step(inst, st, &mut next);
            }
            states = next;
            if self.finished.len() + states.len() > self.cfg.max_paths {
                self.capped = Some(format!(
                    "path count exceeded the cap of {}",
                    self.cfg.max_paths
                ));
                return Vec::new();
            }
        }
        states
    }

    /// Split off a throwing path under `cond`; returns the surviving state,
    /// or `None` when the throw is unconditional.
    fn fork_throw(&mut self, mut st: PathSummary, cond: Rc<BoolExpr>) -> Option<PathSummary> {
        match cond.as_lit() {
            Some(false) => Some(st),
            Some(true) => {
                st.throw = true;
                self.finished.push(st);
                None
            }
            None => {
                let mut thrown = st.clone();
                thrown.pc.push(cond.clone());
                thrown.throw = true;
                self.finished.push(thrown);
                st.pc.push(BoolExpr::not(cond));
                Some(st)
            }
        }
    }

    fn give_up(&mut self, mut st: PathSummary, why: String) {
        st.unknown = Some(why);
        self.finished.push(st);
    }

    fn step(&mut self, inst: &Inst, mut st: PathSummary, out: &mut Vec<PathSummary>) {
        match inst {
            Inst::Def { dst, rv } => {
                let (term, throw_cond) = match self.eval_rvalue(&mut st, rv) {
                    Ok(pair) => pair,
                    Err(why) => return self.give_up(st, why),
                };
                let mut st = st;
                if let Some(c) = throw_cond {
                    match self.fork_throw(st, c) {
                        Some(s) => st = s,
                        None => return,
                    }
                }
                st.env.insert(*dst, term);
                out.push(st);
            }
            Inst::FieldStore { field, keys, kind, value, checked } => {
                let keyt: Vec<Rc<Term>> = keys.iter().map(|k| st.eval(*k)).collect();
                let delta = st.eval(*value);
                let (newval, throw_cond, incr, decr) = match kind {
                    WriteKind::Set => (delta, None, true, true),
                    WriteKind::Increase => {
                        let old = st.read_last(self.facts, field, &keyt);
                        let new = Term::bin(TermOp::Add, old.clone(), delta);
                        let tc = checked
                            .then(|| BoolExpr::cmp(CmpOp::Lt, new.clone(), old));
                        (new, tc, true, false)
                    }
                    WriteKind::Decrease => {
                        let old = st.read_last(self.facts, field, &keyt);
                        let tc = checked
                            .then(|| BoolExpr::cmp(CmpOp::Lt, old.clone(), delta.clone()));
                        (Term::bin(TermOp::Sub, old, delta), tc, false, true)
                    }
                };
                let mut st = st;
                if let Some(c) = throw_cond {
                    match self.fork_throw(st, c) {
                        Some(s) => st = s,
                        None => return,
                    }
                }
                st.bc.insert(field.clone());
                if incr {
                    st.bi.insert(field.clone());
                }
                if decr {
                    st.bd.insert(field.clone());
                }
                st.record_ordinal(OpKind::Write, field);
                match st.write_field(field, keyt, newval) {
                    Ok(()) => out.push(st),
                    Err(why) => self.give_up(st, why),
                }
            }
            Inst::Require { cond } | Inst::Assert { cond } => {
                let c = truthy(&st.eval(*cond));
                if let Some(s) = self.fork_throw(st, BoolExpr::not(c)) {
                    out.push(s);
                }
            }
            Inst::Revert => {
                st.throw = true;
                self.finished.push(st);
            }
            Inst::Emit { event, args } => {
                for (i, a) in args.iter().enumerate() {
                    let t = st.eval(*a);
                    st.action_args.insert((event.clone(), i), t);
                }
                st.em.insert(event.clone());
                st.record_ordinal(OpKind::Emit, event);
                out.push(st);
            }
            Inst::Call { callee, args, external: _ } => {
                for (i, a) in args.iter().enumerate() {
                    let t = st.eval(*a);
                    st.action_args.insert((callee.clone(), i), t);
                }
                st.ca.insert(callee.clone());
                st.record_ordinal(OpKind::Call, callee);
                out.push(st);
            }
            Inst::Return { value: _ } => {
                self.finished.push(st);
            }
            Inst::If { cond, then, els, joins } => {
                let c = truthy(&st.eval(*cond));
                let run_branch =
                    |ex: &mut Self, st: PathSummary, taken_then: bool, out: &mut Vec<PathSummary>| {
                        let block = if taken_then { then } else { els };
                        for mut s in ex.run_block(block, vec![st]) {
                            for j in joins {
                                let v = s.eval(if taken_then { j.then_val } else { j.else_val });
                                s.env.insert(j.dst, v);
                            }
                            out.push(s);
                        }
                    };
                match c.as_lit() {
                    Some(true) => run_branch(self, st, true, out),
                    Some(false) => run_branch(self, st, false, out),
                    None => {
                        let mut st_then = st.clone();
                        st_then.pc.push(c.clone());
                        run_branch(self, st_then, true, out);
                        let mut st_else = st;
                        st_else.pc.push(BoolExpr::not(c));
                        run_branch(self, st_else, false, out);
                    }
                }
            }
            Inst::Loop { phis, header, cond, body } => {
                for phi in phis {
                    let v = st.eval(phi.init);
                    st.env.insert(phi.dst, v);
                }
                let mut states = vec![st];
                for iter in 0..=self.cfg.loop_bound {
                    let after_header = self.run_block(header, states);
                    let mut continuing = Vec::new();
                    for mut s in after_header {
                        let c = truthy(&s.eval(*cond));
                        match c.as_lit() {
                            // unwinding assumption: at the bound, paths that
                            // would iterate again are assumed infeasible
                            Some(true) => {
                                if iter < self.cfg.loop_bound {
                                    continuing.push(s);
                                }
                            }
                            Some(false) => out.push(s),
                            None => {
                                if iter < self.cfg.loop_bound {
                                    let mut cont = s.clone();
                                    cont.pc.push(c.clone());
                                    continuing.push(cont);
                                }
                                s.pc.push(BoolExpr::not(c));
                                out.push(s);
                            }
                        }
                    }
                    if continuing.is_empty() || self.capped.is_some() {
                        break;
                    }
                    let after_body = self.run_block(body, continuing);
                    states = after_body
                        .into_iter()
                        .map(|mut s| {
                            for phi in phis {
                                let v = s.eval(phi.next);
                                s.env.insert(phi.dst, v);
                            }
                            s
                        })
                        .collect();
                    if states.is_empty() {
                        break;
                    }
                }
            }
        }
    }

    /// Evaluate an rvalue to a term plus an optional throw condition
    /// (overflow guard or division by zero).
    fn eval_rvalue(
        &mut self,
        st: &mut PathSummary,
        rv: &Rvalue,
    ) -> Result<(Rc<Term>, Option<Rc<BoolExpr>>), String> {
        Ok(match rv {
            Rvalue::Copy(op) => (st.eval(*op), None),
            Rvalue::Bin { op, checked, lhs, rhs } => {
                let a = st.eval(*lhs);
                let b = st.eval(*rhs);
                let result = Term::bin(*op, a.clone(), b.clone());
                let guard = match op {
                    // division by zero throws regardless of checked blocks
                    TermOp::Div => Some(BoolExpr::cmp(CmpOp::Eq, b, Term::zero())),
                    _ if !checked => None,
                    TermOp::Add => Some(BoolExpr::cmp(CmpOp::Lt, result.clone(), a)),
                    TermOp::Sub => Some(BoolExpr::cmp(CmpOp::Lt, a, b)),
                    TermOp::Mul => Some(BoolExpr::and(vec![
                        BoolExpr::cmp(CmpOp::Ne, a.clone(), Term::zero()),
                        BoolExpr::cmp(
                            CmpOp::Ne,
                            Term::bin(TermOp::Div, result.clone(), a),
                            b,
                        ),
                    ])),
                };
                (result, guard.filter(|g| g.as_lit() != Some(false)))
            }
            Rvalue::Cmp { op, lhs, rhs } => {
                let c = BoolExpr::cmp(*op, st.eval(*lhs), st.eval(*rhs));
                (bool_term(c), None)
            }
            Rvalue::AndB(a, b) => {
                let c = BoolExpr::and(vec![truthy(&st.eval(*a)), truthy(&st.eval(*b))]);
                (bool_term(c), None)
            }
            Rvalue::OrB(a, b) => {
                let c = BoolExpr::or(vec![truthy(&st.eval(*a)), truthy(&st.eval(*b))]);
                (bool_term(c), None)
            }
            Rvalue::NotB(a) => {
                let c = BoolExpr::not(truthy(&st.eval(*a)));
                (bool_term(c), None)
            }
            Rvalue::FieldLoad { field, keys } => {
                let keyt: Vec<Rc<Term>> = keys.iter().map(|k| st.eval(*k)).collect();
                (st.read_last(self.facts, field, &keyt), None)
            }
            Rvalue::ArrayElem { param, index } => {
                let idx = st.eval(*index);
                let len = st.array_len(*param);
                let elem_ty = match &self.ssa.param_types[*param] {
                    SolType::Array(inner) => Some(&**inner),
                    _ => None,
                };
                let val = st.array_elem(*param, idx.clone(), elem_ty);
                // out-of-range access throws
                (val, Some(BoolExpr::cmp(CmpOp::Ge, idx, len)))
            }
            Rvalue::ArrayLen { param } => (st.array_len(*param), None),
            Rvalue::Opaque { tag } => {
                let t = Term::sym(&format!("{tag}#{}", st.opaque_n));
                st.opaque_n += 1;
                (t, None)
            }
        })
    }
}

// ---------------------------------------------------------------------------
// grounding rule constraints in a path's symbol space

fn resolve_fieldref(f: &FieldRef, facts: &StaticFacts) -> Result<String, String> {
    match f {
        FieldRef::Literal { name } => Ok(name.clone()),
        FieldRef::Anchor { function } => facts
            .anchor_bindings
            .get(function)
            .map(|(field, _)| field.clone())
            .ok_or_else(|| format!("anchor `{function}` unresolved")),
    }
}

fn opref_key(op: &OpRef, facts: &StaticFacts) -> Result<(OpKind, String), String> {
    match op {
        OpRef::FieldWrite { field, .. } => Ok((OpKind::Write, resolve_fieldref(field, facts)?)),
        OpRef::Call { function } => Ok((OpKind::Call, function.clone())),
        OpRef::Emit { event } => Ok((OpKind::Emit, event.clone())),
    }
}

fn ground_cvalue(
    path: &mut PathSummary,
    v: &CValue,
    facts: &StaticFacts,
) -> Result<Rc<Term>, String> {
    match v {
        CValue::Lit(u) => Ok(Term::constant(*u)),
        CValue::Var { base, tag } => match base {
            VarBase::Param(i) => path
                .param_terms
                .get(*i)
                .cloned()
                .flatten()
                .ok_or_else(|| format!("parameter {i} is absent or not a word value")),
            VarBase::MsgSender => Ok(Term::sym("msg.sender")),
            VarBase::MsgValue => Ok(Term::sym("msg.value")),
            VarBase::Field(f) => Ok(match tag {
                Tag::First => path.read_first(facts, f, &[]),
                Tag::Last => path.read_last(facts, f, &[]),
            }),
            VarBase::MapElem { field, keys } => {
                let keyt: Vec<Rc<Term>> = keys
                    .iter()
                    .map(|k| ground_cvalue(path, k, facts))
                    .collect::<Result<_, _>>()?;
                Ok(match tag {
                    Tag::First => path.read_first(facts, field, &keyt),
                    Tag::Last => path.read_last(facts, field, &keyt),
                })
            }
            VarBase::ActionPara { target, index } => Ok(path
                .action_args
                .get(&(target.clone(), *index))
                .cloned()
                // never emitted on this path: the value is unconstrained and
                // only reachable under a Φcheck that is false here anyway
                .unwrap_or_else(|| Term::sym(&format!("{target}.para{index}.unbound")))),
        },
    }
}

/// Substitute the path's concrete state-variable valuation and instruction
/// order, leaving a pure word-level formula.
pub fn ground_cexpr(
    path: &mut PathSummary,
    e: &CExpr,
    facts: &StaticFacts,
) -> Result<Rc<BoolExpr>, String> {
    match e {
        CExpr::True => Ok(BoolExpr::tru()),
        CExpr::False => Ok(BoolExpr::fals()),
        CExpr::And(a, b) => Ok(BoolExpr::and(vec![
            ground_cexpr(path, a, facts)?,
            ground_cexpr(path, b, facts)?,
        ])),
        CExpr::Or(a, b) => Ok(BoolExpr::or(vec![
            ground_cexpr(path, a, facts)?,
            ground_cexpr(path, b, facts)?,
        ])),
        CExpr::Not(a) => Ok(BoolExpr::not(ground_cexpr(path, a, facts)?)),
        CExpr::Cmp { op, lhs, rhs } => Ok(BoolExpr::cmp(
            *op,
            ground_cvalue(path, lhs, facts)?,
            ground_cvalue(path, rhs, facts)?,
        )),
        CExpr::State { var, expected } => Ok(if path.state_var(var) == *expected {
            BoolExpr::tru()
        } else {
            BoolExpr::fals()
        }),
        CExpr::OrderLt { a, b } => {
            let ka = opref_key(a, facts)?;
            let kb = opref_key(b, facts)?;
            match instruction_order(&path.ordinals, &ka, &kb) {
                OpOrder::Before => Ok(BoolExpr::tru()),
                OpOrder::After => Ok(BoolExpr::fals()),
                OpOrder::Absent => Err(format!(
                    "ordered instruction {}/{} absent on this path",
                    ka.1, kb.1
                )),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// verdicts

#[derive(Debug, Clone)]
pub struct PathDecision {
    pub verdict: Verdict,
    pub witness: Option<Model>,
    pub note: Option<String>,
}

impl PathDecision {
    fn clean() -> PathDecision {
        PathDecision { verdict: Verdict::Clean, witness: None, note: None }
    }
    fn unknown(note: impl Into<String>) -> PathDecision {
        PathDecision {
            verdict: Verdict::Unknown,
            witness: None,
            note: Some(note.into()),
        }
    }
}

fn is_no_throw_rule(rule: &FormalRule) -> bool {
    matches!(rule.body, RuleBody::Throw { expect_throw: false, .. })
}

/// Decide one rule on one finished path.
pub fn path_verdict(
    path: &PathSummary,
    rule: &FormalRule,
    triple: &ConstraintTriple,
    facts: &StaticFacts,
    cfg: &ExecConfig,
) -> PathDecision {
    if let Some(u) = &path.unknown {
        return PathDecision::unknown(u.clone());
    }
    // a reverted call discharges emit/call/assign/order obligations: they
    // bind successful executions only
    if path.throw && rule.kind != RuleKind::Throw {
        return PathDecision::clean();
    }
    let mut p = path.clone();
    let violation = compose_violation(rule.kind, triple);
    let gv = match ground_cexpr(&mut p, &violation, facts) {
        Ok(g) => g,
        Err(e) => return PathDecision::unknown(e),
    };
    if gv.as_lit() == Some(false) {
        return PathDecision::clean();
    }
    let mut asserts = p.pc.clone();
    asserts.push(gv);
    let v = decide(&SolverQuery::new(asserts, cfg.solver_timeout_ms), cfg);
    match v.status {
        Status::Unsat => PathDecision::clean(),
        Status::Unknown => PathDecision::unknown(v.diagnostic),
        Status::Sat => {
            if is_no_throw_rule(rule) {
                // the throw must be attributable to the rule's condition:
                // with Φif flipped off, this path's throw must be infeasible
                let gif = match ground_cexpr(&mut p, &triple.phi_if, facts) {
                    Ok(g) => g,
                    Err(e) => return PathDecision::unknown(e),
                };
                let th_part =
                    match ground_cexpr(&mut p, &CExpr::not(triple.phi_check.clone()), facts) {
                        Ok(g) => g,
                        Err(e) => return PathDecision::unknown(e),
                    };
                let mut a2 = p.pc.clone();
                a2.push(BoolExpr::not(gif));
                a2.push(th_part);
                let flip = decide(&SolverQuery::new(a2, cfg.solver_timeout_ms), cfg);
                match flip.status {
                    Status::Unsat => PathDecision {
                        verdict: Verdict::Violating,
                        witness: v.model,
                        note: None,
                    },
                    Status::Sat => PathDecision::clean(),
                    Status::Unknown => PathDecision::unknown(flip.diagnostic),
                }
            } else {
                PathDecision {
                    verdict: Verdict::Violating,
                    witness: v.model,
                    note: None,
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// function- and contract-level aggregation

fn witness_map(m: &Model) -> BTreeMap<String, String> {
    m.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn base_report(rule: &FormalRule, contract: &str, function: &str) -> ViolationReport {
    ViolationReport {
        rule_id: rule.id.clone(),
        source_text: rule.source_text.clone(),
        severity: rule.severity,
        contract: contract.to_string(),
        function: function.to_string(),
        verdict: Verdict::Unknown,
        line: None,
        witness: None,
        trace: vec![],
        note: None,
    }
}

/// Run every given rule against one entry function. Frontend failures and
/// exploration caps degrade to unknown verdicts rather than errors.
pub fn analyze_function(
    model: &ContractModel,
    fname: &str,
    rules: &[&FormalRule],
    facts: &StaticFacts,
    cfg: &ExecConfig,
) -> Vec<ViolationReport> {
    let line = model.function(fname).map(|f| f.span.line);
    let all_unknown = |note: String| -> Vec<ViolationReport> {
        rules
            .iter()
            .map(|r| {
                let mut rep = base_report(r, &model.name, fname);
                rep.line = line;
                rep.note = Some(note.clone());
                rep
            })
            .collect()
    };

    let ssa = match lower_function(model, fname) {
        Ok(s) => s,
        Err(e) => return all_unknown(format!("frontend: {e}")),
    };
    let paths = match explore_paths(&ssa, facts, cfg) {
        Ok(p) => p,
        Err(e) => return all_unknown(e),
    };

    rules
        .iter()
        .map(|rule| {
            let mut rep = base_report(rule, &model.name, fname);
            rep.line = line;
            let triple = match synth_triple(rule, facts) {
                Ok(t) => t,
                Err(e) => {
                    rep.note = Some(e.to_string());
                    return rep;
                }
            };
            let mut unknown_note: Option<String> = None;
            let mut any_unknown = false;
            for path in &paths {
                let d = path_verdict(path, rule, &triple, facts, cfg);
                match d.verdict {
                    Verdict::Violating => {
                        rep.verdict = Verdict::Violating;
                        rep.witness = d.witness.as_ref().map(witness_map);
                        return rep;
                    }
                    Verdict::Unknown => {
                        any_unknown = true;
                        if unknown_note.is_none() {
                            unknown_note = d.note;
                        }
                    }
                    Verdict::Clean => {}
                }
            }
            if any_unknown {
                rep.verdict = Verdict::Unknown;
                rep.note = unknown_note;
            } else {
                rep.verdict = Verdict::Clean;
            }
            rep
        })
        .collect()
}

/// Storage fields a rule talks about, used to scope contract-wide rules.
fn rule_fields(rule: &FormalRule, facts: &StaticFacts) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut add_field = |f: &FieldRef| {
        if let Ok(name) = resolve_fieldref(f, facts) {
            out.insert(name);
        }
    };
    fn walk_value(v: &Value, add: &mut dyn FnMut(&FieldRef)) {
        match v {
            Value::GetFieldValue { field, keys } => {
                add(field);
                for k in keys {
                    walk_value(k, add);
                }
            }
            _ => {}
        }
    }
    fn walk_bexp(b: &BExpAlias, add: &mut dyn FnMut(&FieldRef)) {
        use crate::rule_ir::BExp::*;
        match b {
            And(l, r) | Or(l, r) => {
                walk_bexp(l, add);
                walk_bexp(r, add);
            }
            Not(i) => walk_bexp(i, add),
            Cmp { lhs, rhs, .. } => {
                walk_value(lhs, add);
                walk_value(rhs, add);
            }
            CheckChange { field, .. } | CheckMint { field } | CheckBurn { field } => add(field),
            True => {}
        }
    }
    type BExpAlias = crate::rule_ir::BExp;
    let mut walk_op = |o: &OpRef| {
        if let OpRef::FieldWrite { field, .. } = o {
            add_field(field);
        }
    };
    match &rule.body {
        RuleBody::Throw { condition, .. } => walk_bexp(condition, &mut add_field),
        RuleBody::Call { condition, with, .. } | RuleBody::Emit { condition, with, .. } => {
            walk_bexp(condition, &mut add_field);
            if let Some(w) = with {
                walk_bexp(w, &mut add_field);
            }
        }
        RuleBody::Assign { value1, value2 } => {
            walk_value(value1, &mut add_field);
            walk_value(value2, &mut add_field);
        }
        RuleBody::Follow { op1, op2, order_op1, order_op2 } => {
            for o in [op1, op2, order_op1, order_op2] {
                walk_op(o);
            }
        }
        RuleBody::Decl { .. } => {}
    }
    out
}

/// Full contract audit: declaration rules go through the static API check,
/// everything else through symbolic execution. Contract-wide rules run on
/// every entry function that writes one of the rule's fields.
pub fn audit_contract(
    model: &ContractModel,
    rules: &[FormalRule],
    facts: &StaticFacts,
    cfg: &ExecConfig,
) -> Vec<ViolationReport> {
    let mut reports = check_api_compliance(model, rules);
    let mut by_fn: BTreeMap<String, Vec<&FormalRule>> = BTreeMap::new();
    for rule in rules {
        if matches!(rule.kind, RuleKind::ApiDecl | RuleKind::EventDecl) {
            continue;
        }
        match rule.target.kind {
            TargetKind::Function => {
                if model.function(&rule.target.name).is_some() {
                    by_fn.entry(rule.target.name.clone()).or_default().push(rule);
                } else {
                    let mut rep = base_report(rule, &model.name, &rule.target.name);
                    rep.note = Some("target function not found".into());
                    reports.push(rep);
                }
            }
            TargetKind::Contract => {
                let fields = rule_fields(rule, facts);
                for f in model.entry_functions() {
                    let writes = f.body.as_ref().is_some_and(|b| {
                        fields
                            .iter()
                            .any(|fl| b.stmts.iter().any(|s| stmt_writes(s, fl)))
                    });
                    if writes {
                        by_fn.entry(f.sig.name.clone()).or_default().push(rule);
                    }
                }
            }
            TargetKind::Event => {}
        }
    }
    for (fname, rs) in &by_fn {
        reports.extend(analyze_function(model, fname, rs, facts, cfg));
    }
    reports
}
