//! Lowering of formal rules into constraint triples (Φif, Φcheck, Φwith)
//! and their composition into violation / validation constraints.

use crate::constraint::{CExpr, CValue, StateVar, Tag, VarBase};
use crate::rule_ir::{BExp, FieldRef, FormalRule, OpRef, RuleBody, RuleKind, Value};
use crate::static_checks::StaticFacts;
use primitive_types::U256;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("anchor function `{0}` could not be resolved to a contract field")]
    UnresolvedAnchor(String),
    #[error("bad literal `{0}` in rule")]
    BadLiteral(String),
    #[error("declaration rules have no constraint form")]
    DeclRule,
}

#[derive(Debug, Clone)]
pub struct ConstraintTriple {
    pub phi_if: CExpr,
    pub phi_check: CExpr,
    pub phi_with: Option<CExpr>,
}

/// Lower a rule into its constraint triple.
///
/// Snapshot tagging: parameters, and mapping elements whose keys come from
/// parameters or the environment, are `first`; everything else is `last`.
/// Value-equality (`assign`) rules compare end-of-path values, so both sides
/// are forced to `last` there.
pub fn synth_triple(rule: &FormalRule, facts: &StaticFacts) -> Result<ConstraintTriple, SynthError> {
    match &rule.body {
        RuleBody::Throw { condition, expect_throw } => Ok(ConstraintTriple {
            phi_if: lower_bexp(condition, facts, None)?,
            phi_check: CExpr::State {
                var: StateVar::Th,
                expected: *expect_throw,
            },
            phi_with: None,
        }),
        RuleBody::Call { condition, callee, with } => Ok(ConstraintTriple {
            phi_if: lower_bexp(condition, facts, None)?,
            phi_check: CExpr::State {
                var: StateVar::Ca(callee.clone()),
                expected: true,
            },
            phi_with: with
                .as_ref()
                .map(|w| lower_bexp(w, facts, Some(Tag::Last)))
                .transpose()?,
        }),
        RuleBody::Emit { condition, event, with } => Ok(ConstraintTriple {
            phi_if: lower_bexp(condition, facts, None)?,
            phi_check: CExpr::State {
                var: StateVar::Em(event.clone()),
                expected: true,
            },
            phi_with: with
                .as_ref()
                .map(|w| lower_bexp(w, facts, Some(Tag::Last)))
                .transpose()?,
        }),
        RuleBody::Assign { value1, value2 } => Ok(ConstraintTriple {
            phi_if: CExpr::True,
            phi_check: CExpr::Cmp {
                op: crate::rule_ir::CmpOp::Eq,
                lhs: lower_value(value1, facts, Some(Tag::Last))?,
                rhs: lower_value(value2, facts, Some(Tag::Last))?,
            },
            phi_with: None,
        }),
        RuleBody::Follow { op1, op2, order_op1, order_op2 } => {
            let lt = |a: &OpRef, b: &OpRef| CExpr::OrderLt {
                a: a.clone(),
                b: b.clone(),
            };
            // the checked pair must execute in the same relative order as
            // the reference pair
            let same = CExpr::and(lt(op1, op2), lt(order_op1, order_op2));
            let flipped = CExpr::and(lt(op2, op1), lt(order_op2, order_op1));
            Ok(ConstraintTriple {
                phi_if: CExpr::True,
                phi_check: CExpr::or(same, flipped),
                phi_with: None,
            })
        }
        RuleBody::Decl { .. } => Err(SynthError::DeclRule),
    }
}

/// Table-4 composition of a triple into the rule's violation constraint.
pub fn compose_violation(kind: RuleKind, t: &ConstraintTriple) -> CExpr {
    match kind {
        RuleKind::Throw => CExpr::and(t.phi_if.clone(), CExpr::not(t.phi_check.clone())),
        RuleKind::Call | RuleKind::Emit => {
            let first = CExpr::and(t.phi_if.clone(), CExpr::not(t.phi_check.clone()));
            match &t.phi_with {
                // second disjunct is vacuous without a with-clause
                None => first,
                Some(w) => CExpr::or(
                    first,
                    CExpr::and(
                        CExpr::and(t.phi_if.clone(), t.phi_check.clone()),
                        CExpr::not(w.clone()),
                    ),
                ),
            }
        }
        RuleKind::Assign | RuleKind::Follow => CExpr::not(t.phi_check.clone()),
        RuleKind::ApiDecl | RuleKind::EventDecl => CExpr::False,
    }
}

/// Validation constraint ¬Φif ∧ ¬Φcheck; only no-throw rules carry one.
pub fn compose_validation(rule: &FormalRule, t: &ConstraintTriple) -> Option<CExpr> {
    match &rule.body {
        RuleBody::Throw { expect_throw: false, .. } => Some(CExpr::and(
            CExpr::not(t.phi_if.clone()),
            CExpr::not(t.phi_check.clone()),
        )),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// lowering helpers

fn lower_bexp(b: &BExp, facts: &StaticFacts, force: Option<Tag>) -> Result<CExpr, SynthError> {
    match b {
        BExp::True => Ok(CExpr::True),
        BExp::And(l, r) => Ok(CExpr::and(
            lower_bexp(l, facts, force)?,
            lower_bexp(r, facts, force)?,
        )),
        BExp::Or(l, r) => Ok(CExpr::or(
            lower_bexp(l, facts, force)?,
            lower_bexp(r, facts, force)?,
        )),
        BExp::Not(inner) => Ok(CExpr::not(lower_bexp(inner, facts, force)?)),
        BExp::Cmp { lhs, op, rhs } => Ok(CExpr::Cmp {
            op: *op,
            lhs: lower_value(lhs, facts, force)?,
            rhs: lower_value(rhs, facts, force)?,
        }),
        BExp::CheckChange { field, .. } => Ok(CExpr::State {
            var: StateVar::Bc(resolve_field(field, facts)?.0),
            expected: true,
        }),
        BExp::CheckMint { field } => {
            let name = resolve_field(field, facts)?.0;
            Ok(CExpr::and(
                CExpr::State { var: StateVar::Bi(name.clone()), expected: true },
                CExpr::State { var: StateVar::Bd(name), expected: false },
            ))
        }
        BExp::CheckBurn { field } => {
            let name = resolve_field(field, facts)?.0;
            Ok(CExpr::and(
                CExpr::State { var: StateVar::Bi(name.clone()), expected: false },
                CExpr::State { var: StateVar::Bd(name), expected: true },
            ))
        }
    }
}

fn lower_value(v: &Value, facts: &StaticFacts, force: Option<Tag>) -> Result<CValue, SynthError> {
    match v {
        Value::MsgSender => Ok(CValue::Var { base: VarBase::MsgSender, tag: Tag::First }),
        Value::MsgValue => Ok(CValue::Var { base: VarBase::MsgValue, tag: Tag::First }),
        Value::ZeroAddress => Ok(CValue::Lit(U256::zero())),
        Value::Const(s) => parse_literal(s).map(CValue::Lit),
        Value::Param(i) => Ok(CValue::Var {
            base: VarBase::Param(*i),
            tag: Tag::First,
        }),
        Value::GetFieldValue { field, keys } => {
            let (name, order) = resolve_field(field, facts)?;
            let lowered_keys: Vec<CValue> = if order.is_empty() || keys.is_empty() {
                keys.iter()
                    .map(|k| lower_value(k, facts, force))
                    .collect::<Result<_, _>>()?
            } else {
                // anchor key order maps rule-supplied keys (in anchor
                // parameter order) onto the field's own key positions
                order
                    .iter()
                    .map(|i| {
                        keys.get(*i)
                            .ok_or_else(|| SynthError::UnresolvedAnchor(field.describe()))
                            .and_then(|k| lower_value(k, facts, force))
                    })
                    .collect::<Result<_, _>>()?
            };
            let tag = force.unwrap_or_else(|| {
                if !lowered_keys.is_empty() && lowered_keys.iter().all(key_is_entry_value) {
                    Tag::First
                } else if lowered_keys.is_empty() {
                    Tag::Last
                } else {
                    Tag::Last
                }
            });
            let base = if lowered_keys.is_empty() {
                VarBase::Field(name)
            } else {
                VarBase::MapElem { field: name, keys: lowered_keys }
            };
            Ok(CValue::Var { base, tag })
        }
        Value::GetPara { target, index } => Ok(CValue::Var {
            base: VarBase::ActionPara {
                target: target.clone(),
                index: *index,
            },
            tag: Tag::Last,
        }),
    }
}

/// Keys derived from the call's inputs (parameters, environment, literals)
/// make a mapping element "reached through parameters", so its first value
/// is meaningful.
fn key_is_entry_value(k: &CValue) -> bool {
    match k {
        CValue::Lit(_) => true,
        CValue::Var { base, tag } => {
            matches!(
                base,
                VarBase::Param(_) | VarBase::MsgSender | VarBase::MsgValue
            ) && *tag == Tag::First
        }
    }
}

fn resolve_field(f: &FieldRef, facts: &StaticFacts) -> Result<(String, Vec<usize>), SynthError> {
    match f {
        FieldRef::Literal { name } => Ok((name.clone(), vec![])),
        FieldRef::Anchor { function } => facts
            .anchor_bindings
            .get(function)
            .cloned()
            .ok_or_else(|| SynthError::UnresolvedAnchor(function.clone())),
    }
}

fn parse_literal(s: &str) -> Result<U256, SynthError> {
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        U256::from_str_radix(hex, 16).ok()
    } else {
        U256::from_dec_str(s).ok()
    };
    parsed.ok_or_else(|| SynthError::BadLiteral(s.to_string()))
}

/// Housing check: every parameter reference in a synthesized expression must
/// carry the `first` tag.
pub fn check_housing(e: &CExpr) -> Result<(), String> {
    for (base, tag) in e.snapshot_vars() {
        if matches!(base, VarBase::Param(_)) && tag != Tag::First {
            return Err(format!("parameter {base:?} tagged last"));
        }
    }
    Ok(())
}
