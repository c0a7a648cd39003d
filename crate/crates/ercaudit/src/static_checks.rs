//! Declaration-level checks and auxiliary facts feeding symbolic execution:
//! required-API matching, anchor-field resolution, constant-field detection,
//! and operation ordering on finished paths.

use crate::frontend::ast::{Block, Expr, FieldType, LValue, Stmt};
use crate::frontend::model::ContractModel;
use crate::report::{Verdict, ViolationReport};
use crate::rule_ir::{FormalRule, ParamDecl, RuleBody, Signature};
use primitive_types::U256;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct StaticFacts {
    /// Anchor function name -> (field, indices of the anchor parameters used
    /// as mapping keys, in key order).
    pub anchor_bindings: BTreeMap<String, (String, Vec<usize>)>,
    pub constant_fields: BTreeMap<String, U256>,
    pub field_constraints: Vec<FieldConstraint>,
}

/// An implementation-enforced predicate usable as a base constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldConstraint {
    /// Every write to `field` is guarded so the key at `key_index` is
    /// nonzero; stored elements with a zero key therefore keep their
    /// initial (zero) value.
    NonzeroKey { field: String, key_index: usize },
}

pub fn collect_facts(model: &ContractModel, rules: &[FormalRule]) -> StaticFacts {
    let mut facts = StaticFacts {
        constant_fields: detect_constant_fields(model),
        field_constraints: detect_field_constraints(model),
        ..StaticFacts::default()
    };
    // resolve every anchor any rule mentions
    let mut anchors: Vec<String> = Vec::new();
    for r in rules {
        collect_rule_anchors(r, &mut anchors);
    }
    anchors.sort();
    anchors.dedup();
    for a in anchors {
        if let Some(binding) = resolve_anchor_field(model, &a) {
            facts.anchor_bindings.insert(a, binding);
        }
    }
    facts
}

fn collect_rule_anchors(rule: &FormalRule, out: &mut Vec<String>) {
    use crate::rule_ir::{BExp, FieldRef, RuleBody, Value};
    fn from_field(f: &FieldRef, out: &mut Vec<String>) {
        if let FieldRef::Anchor { function } = f {
            out.push(function.clone());
        }
    }
    fn from_value(v: &Value, out: &mut Vec<String>) {
        if let Value::GetFieldValue { field, keys } = v {
            from_field(field, out);
            for k in keys {
                from_value(k, out);
            }
        }
    }
    fn from_bexp(b: &BExp, out: &mut Vec<String>) {
        match b {
            BExp::And(l, r) | BExp::Or(l, r) => {
                from_bexp(l, out);
                from_bexp(r, out);
            }
            BExp::Not(inner) => from_bexp(inner, out),
            BExp::Cmp { lhs, rhs, .. } => {
                from_value(lhs, out);
                from_value(rhs, out);
            }
            BExp::CheckChange { field, keys } => {
                from_field(field, out);
                for k in keys {
                    from_value(k, out);
                }
            }
            BExp::CheckMint { field } | BExp::CheckBurn { field } => from_field(field, out),
            BExp::True => {}
        }
    }
    fn from_op(o: &crate::rule_ir::OpRef, out: &mut Vec<String>) {
        if let crate::rule_ir::OpRef::FieldWrite { field, keys } = o {
            from_field(field, out);
            for k in keys {
                from_value(k, out);
            }
        }
    }
    match &rule.body {
        RuleBody::Throw { condition, .. } => from_bexp(condition, out),
        RuleBody::Call { condition, with, .. } | RuleBody::Emit { condition, with, .. } => {
            from_bexp(condition, out);
            if let Some(w) = with {
                from_bexp(w, out);
            }
        }
        RuleBody::Assign { value1, value2 } => {
            from_value(value1, out);
            from_value(value2, out);
        }
        RuleBody::Follow { op1, op2, .. } => {
            from_op(op1, out);
            from_op(op2, out);
        }
        RuleBody::Decl { .. } => {}
    }
}

// ---------------------------------------------------------------------------
// API compliance

pub fn check_api_compliance(model: &ContractModel, rules: &[FormalRule]) -> Vec<ViolationReport> {
    let mut reports = Vec::new();
    for rule in rules {
        let RuleBody::Decl { signature } = &rule.body else {
            continue;
        };
        let finding = if signature.is_event {
            match model.event(&signature.name) {
                None => Some("missing required event".to_string()),
                Some(found) => event_mismatch(signature, found),
            }
        } else {
            match model.function(&signature.name) {
                None => Some("missing required function".to_string()),
                Some(found) if !found.visibility.is_entry() => {
                    Some("required function is not externally callable".to_string())
                }
                Some(found) => function_mismatch(signature, &found.sig),
            }
        };
        if let Some(details) = finding {
            reports.push(ViolationReport {
                rule_id: rule.id.clone(),
                source_text: rule.source_text.clone(),
                severity: rule.severity,
                contract: model.name.clone(),
                function: String::new(),
                verdict: Verdict::Violating,
                line: None,
                witness: None,
                trace: vec![],
                note: Some(format!("{details}: {}", signature.pretty())),
            });
        }
    }
    reports
}

fn param_types(params: &[ParamDecl]) -> Vec<&crate::rule_ir::SolType> {
    params.iter().map(|p| &p.ty).collect()
}

fn function_mismatch(required: &Signature, found: &Signature) -> Option<String> {
    if param_types(&required.params) != param_types(&found.params) {
        return Some("parameter types differ".into());
    }
    if required.returns != found.returns {
        return Some("return types differ".into());
    }
    None
}

fn event_mismatch(required: &Signature, found: &Signature) -> Option<String> {
    if param_types(&required.params) != param_types(&found.params) {
        return Some("event parameter types differ".into());
    }
    let indexed = |s: &Signature| s.params.iter().map(|p| p.indexed).collect::<Vec<_>>();
    if indexed(required) != indexed(found) {
        return Some("event indexed flags differ".into());
    }
    None
}

// ---------------------------------------------------------------------------
// anchors

/// Resolve which contract field an ERC-mandated getter exposes. Only bodies
/// of the exact shape `return F;` or `return F[p_i]…[p_j];` (keys being
/// plain parameters) resolve; anything richer stays unresolved rather than
/// guessed.
pub fn resolve_anchor_field(model: &ContractModel, anchor: &str) -> Option<(String, Vec<usize>)> {
    let f = model.function(anchor)?;
    let body = f.body.as_ref()?;
    if !f.modifiers.is_empty() || body.stmts.len() != 1 {
        return None;
    }
    let Stmt::Return { value: Some(expr), .. } = &body.stmts[0] else {
        return None;
    };
    let param_index = |name: &str| {
        f.sig
            .params
            .iter()
            .position(|p| p.name.as_deref() == Some(name))
    };
    match expr {
        Expr::Name(field, _) => {
            let decl = model.field(field)?;
            if decl.ty.dimensionality() != 0 {
                return None;
            }
            Some((field.clone(), vec![]))
        }
        Expr::Index { name, keys, .. } => {
            let decl = model.field(name)?;
            if decl.ty.dimensionality() != keys.len() {
                return None;
            }
            let mut order = Vec::new();
            for k in keys {
                let Expr::Name(p, _) = k else { return None };
                order.push(param_index(p)?);
            }
            Some((name.clone(), order))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// constant fields

/// Fields whose value is a compile-time literal: `constant`/`immutable`
/// declarations and fields initialized at declaration and never written by
/// any function, constructor, or modifier body.
pub fn detect_constant_fields(model: &ContractModel) -> BTreeMap<String, U256> {
    let mut out = BTreeMap::new();
    for field in &model.fields {
        if !matches!(field.ty, FieldType::Elem(_)) {
            continue;
        }
        let Some(init) = &field.initializer else {
            continue;
        };
        let Some(value) = literal_value(init) else {
            continue;
        };
        let forced = field.constant || field.immutable;
        if forced || !field_written(model, &field.name) {
            out.insert(field.name.clone(), value);
        }
    }
    out
}

fn literal_value(e: &Expr) -> Option<U256> {
    match e {
        Expr::Num(n, _) => Some(*n),
        Expr::Bool(b, _) => Some(if *b { U256::one() } else { U256::zero() }),
        Expr::ZeroAddress(_) => Some(U256::zero()),
        Expr::MaxUint(_) => Some(U256::MAX),
        _ => None,
    }
}

fn field_written(model: &ContractModel, field: &str) -> bool {
    let in_block = |b: &Block| block_writes(b, field);
    model
        .functions
        .iter()
        .filter_map(|f| f.body.as_ref())
        .any(|b| in_block(b))
        || model.modifiers.iter().any(|m| in_block(&m.body))
}

pub(crate) fn block_writes(b: &Block, field: &str) -> bool {
    b.stmts.iter().any(|s| stmt_writes(s, field))
}

pub(crate) fn stmt_writes(s: &Stmt, field: &str) -> bool {
    match s {
        Stmt::Assign { lhs, .. } => match lhs {
            LValue::Name(n) => n == field,
            LValue::Index { name, .. } => name == field,
        },
        Stmt::If { then, els, .. } => {
            block_writes(then, field) || els.as_ref().is_some_and(|e| block_writes(e, field))
        }
        Stmt::While { body, .. } => block_writes(body, field),
        Stmt::For { init, post, body, .. } => {
            init.as_ref().is_some_and(|i| stmt_writes(i, field))
                || post.as_ref().is_some_and(|p| stmt_writes(p, field))
                || block_writes(body, field)
        }
        Stmt::Unchecked { body, .. } => block_writes(body, field),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// field constraints

/// Detect the nonzero-key pattern: within every function that writes mapping
/// `F` keyed by a parameter, a `require(key != 0)`-style guard precedes the
/// first write using that key. Conservative: any unguarded write drops the
/// constraint.
fn detect_field_constraints(model: &ContractModel) -> Vec<FieldConstraint> {
    let mapping_fields: Vec<(&str, usize)> = model
        .fields
        .iter()
        .filter_map(|f| match &f.ty {
            FieldType::Mapping { keys, .. } => Some((f.name.as_str(), keys.len())),
            FieldType::Elem(_) => None,
        })
        .collect();
    let mut out = Vec::new();
    for (field, dims) in mapping_fields {
        for key_index in 0..dims {
            let mut any_write = false;
            let mut all_guarded = true;
            for f in &model.functions {
                let Some(body) = &f.body else { continue };
                let mut guarded_names: Vec<String> = Vec::new();
                scan_writes(
                    &body.stmts,
                    field,
                    key_index,
                    &mut guarded_names,
                    &mut any_write,
                    &mut all_guarded,
                );
            }
            if any_write && all_guarded {
                out.push(FieldConstraint::NonzeroKey {
                    field: field.to_string(),
                    key_index,
                });
            }
        }
    }
    out
}

fn nonzero_guard_name(cond: &Expr) -> Option<String> {
    use crate::frontend::ast::BinOp;
    match cond {
        Expr::Bin { op: BinOp::Ne, lhs, rhs, .. } => match (&**lhs, &**rhs) {
            (Expr::Name(n, _), Expr::ZeroAddress(_) | Expr::Num(_, _))
                if literal_value(rhs).is_some_and(|v| v.is_zero()) =>
            {
                Some(n.clone())
            }
            (Expr::ZeroAddress(_) | Expr::Num(_, _), Expr::Name(n, _))
                if literal_value(lhs).is_some_and(|v| v.is_zero()) =>
            {
                Some(n.clone())
            }
            _ => None,
        },
        Expr::Bin { op: BinOp::Gt, lhs, rhs, .. } => match (&**lhs, &**rhs) {
            (Expr::Name(n, _), Expr::Num(v, _)) if v.is_zero() => Some(n.clone()),
            _ => None,
        },
        _ => None,
    }
}

fn scan_writes(
    stmts: &[Stmt],
    field: &str,
    key_index: usize,
    guarded: &mut Vec<String>,
    any_write: &mut bool,
    all_guarded: &mut bool,
) {
    for s in stmts {
        match s {
            Stmt::Require { cond, .. } => {
                if let Some(n) = nonzero_guard_name(cond) {
                    guarded.push(n);
                }
            }
            Stmt::Assign { lhs: LValue::Index { name, keys }, .. } if name == field => {
                *any_write = true;
                let ok = matches!(keys.get(key_index), Some(Expr::Name(n, _)) if guarded.contains(n));
                if !ok {
                    *all_guarded = false;
                }
            }
            Stmt::If { then, els, .. } => {
                // guards inside a branch do not dominate code after it;
                // track branch-local guards separately
                let mut t = guarded.clone();
                scan_writes(&then.stmts, field, key_index, &mut t, any_write, all_guarded);
                if let Some(e) = els {
                    let mut ee = guarded.clone();
                    scan_writes(&e.stmts, field, key_index, &mut ee, any_write, all_guarded);
                }
            }
            Stmt::While { body, .. } => {
                let mut inner = guarded.clone();
                scan_writes(&body.stmts, field, key_index, &mut inner, any_write, all_guarded);
            }
            Stmt::For { body, .. } => {
                let mut inner = guarded.clone();
                scan_writes(&body.stmts, field, key_index, &mut inner, any_write, all_guarded);
            }
            Stmt::Unchecked { body, .. } => {
                scan_writes(&body.stmts, field, key_index, guarded, any_write, all_guarded);
            }
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// operation ordering

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpKind {
    Write,
    Call,
    Emit,
}

/// Ordinal of the first execution of each operation on a path, keyed by
/// kind and target name.
pub type OpOrdinals = BTreeMap<(OpKind, String), u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpOrder {
    Before,
    After,
    Absent,
}

pub fn instruction_order(ords: &OpOrdinals, a: &(OpKind, String), b: &(OpKind, String)) -> OpOrder {
    match (ords.get(a), ords.get(b)) {
        (Some(x), Some(y)) if x < y => OpOrder::Before,
        (Some(_), Some(_)) => OpOrder::After,
        _ => OpOrder::Absent,
    }
}
