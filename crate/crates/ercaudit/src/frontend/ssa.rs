//! Lowering of function bodies into a structured SSA-style instruction tree.
//!
//! Locals become single-assignment symbols; `if` statements carry explicit
//! joins and loops carry header phis. Storage is *not* SSA-renamed: field
//! reads and writes stay as explicit load/store instructions that the
//! symbolic executor resolves against a per-path store. Modifiers are
//! expanded around the body and internal calls are inlined (bounded depth,
//! no recursion), so one lowered function is self-contained.

use crate::constraint::TermOp;
use crate::frontend::ast::*;
use crate::frontend::model::ContractModel;
use crate::rule_ir::{CmpOp, SolType};
use primitive_types::U256;
use std::collections::{HashMap, HashSet};
use std::fmt;
use thiserror::Error;

pub const MAX_INLINE_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum SsaError {
    #[error("function `{0}` not found")]
    UnknownFunction(String),
    #[error("modifier `{0}` not found")]
    UnknownModifier(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("recursive call to `{0}`")]
    Recursion(String),
    #[error("inline depth limit exceeded calling `{0}`")]
    DepthLimit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Sym(SymId),
    Const(U256),
    MsgSender,
    MsgValue,
}

#[derive(Debug, Clone)]
pub enum Rvalue {
    Copy(Operand),
    Bin {
        op: TermOp,
        /// Overflow/underflow throws; cleared inside `unchecked` blocks.
        checked: bool,
        lhs: Operand,
        rhs: Operand,
    },
    Cmp {
        op: CmpOp,
        lhs: Operand,
        rhs: Operand,
    },
    AndB(Operand, Operand),
    OrB(Operand, Operand),
    NotB(Operand),
    FieldLoad {
        field: String,
        keys: Vec<Operand>,
    },
    /// Indexed read of a calldata array parameter.
    ArrayElem {
        param: usize,
        index: Operand,
    },
    ArrayLen {
        param: usize,
    },
    /// Fresh unconstrained value, e.g. the return of an external call.
    Opaque {
        tag: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteKind {
    Set,
    /// `F[k] += delta` (or the equivalent `F[k] = F[k] + delta`).
    Increase,
    Decrease,
}

#[derive(Debug, Clone)]
pub struct Join {
    pub dst: SymId,
    pub then_val: Operand,
    pub else_val: Operand,
}

#[derive(Debug, Clone)]
pub struct Phi {
    pub dst: SymId,
    pub init: Operand,
    /// Value flowing back over the loop edge, read at the end of the body.
    pub next: Operand,
}

#[derive(Debug, Clone)]
pub enum Inst {
    Def {
        dst: SymId,
        rv: Rvalue,
    },
    FieldStore {
        field: String,
        keys: Vec<Operand>,
        kind: WriteKind,
        /// Stored value for `Set`, the delta for `Increase`/`Decrease`.
        value: Operand,
        checked: bool,
    },
    Require {
        cond: Operand,
    },
    Assert {
        cond: Operand,
    },
    Revert,
    Emit {
        event: String,
        args: Vec<Operand>,
    },
    Call {
        callee: String,
        args: Vec<Operand>,
        external: bool,
    },
    Return {
        value: Option<Operand>,
    },
    If {
        cond: Operand,
        then: Vec<Inst>,
        els: Vec<Inst>,
        joins: Vec<Join>,
    },
    Loop {
        phis: Vec<Phi>,
        /// Re-evaluated before every iteration check; defines `cond`.
        header: Vec<Inst>,
        cond: Operand,
        body: Vec<Inst>,
    },
}

#[derive(Debug, Clone)]
pub struct FuncSsa {
    pub name: String,
    /// One entry per declared parameter; `None` for array parameters, which
    /// are accessed through `ArrayElem`/`ArrayLen` instead of a word symbol.
    pub param_syms: Vec<Option<SymId>>,
    pub param_types: Vec<SolType>,
    pub sym_names: Vec<String>,
    pub body: Vec<Inst>,
}

impl FuncSsa {
    pub fn sym_name(&self, s: SymId) -> &str {
        &self.sym_names[s.0 as usize]
    }
}

// ---------------------------------------------------------------------------
// lowering

#[derive(Clone, Default)]
struct Scope {
    /// Name -> current value, for locals and word parameters.
    vars: HashMap<String, Operand>,
    /// Name -> parameter index, for calldata array parameters.
    arrays: HashMap<String, usize>,
}

pub struct Lowering<'m> {
    model: &'m ContractModel,
    sym_names: Vec<String>,
    scope: Scope,
    out: Vec<Inst>,
    unchecked: bool,
    call_stack: Vec<String>,
    opaque_count: u32,
}

pub fn lower_function(model: &ContractModel, name: &str) -> Result<FuncSsa, SsaError> {
    let f = model
        .function(name)
        .ok_or_else(|| SsaError::UnknownFunction(name.to_string()))?;
    if let Some(why) = &f.unsupported {
        return Err(SsaError::Unsupported(why.clone()));
    }
    let Some(_) = &f.body else {
        return Err(SsaError::Unsupported(format!("function `{name}` has no body")));
    };
    let mut lw = Lowering {
        model,
        sym_names: Vec::new(),
        scope: Scope::default(),
        out: Vec::new(),
        unchecked: false,
        call_stack: vec![name.to_string()],
        opaque_count: 0,
    };
    let mut param_syms = Vec::new();
    let mut param_types = Vec::new();
    for (i, p) in f.sig.params.iter().enumerate() {
        param_types.push(p.ty.clone());
        if matches!(p.ty, SolType::Array(_) | SolType::Bytes) {
            if let Some(n) = &p.name {
                lw.scope.arrays.insert(n.clone(), i);
            }
            param_syms.push(None);
        } else {
            let s = lw.fresh(&format!("para{i}"));
            if let Some(n) = &p.name {
                lw.scope.vars.insert(n.clone(), Operand::Sym(s));
            }
            param_syms.push(Some(s));
        }
    }
    let body = expand_modifiers(model, f)?;
    lw.lower_block(&body)?;
    Ok(FuncSsa {
        name: name.to_string(),
        param_syms,
        param_types,
        sym_names: lw.sym_names,
        body: lw.out,
    })
}

impl<'m> Lowering<'m> {
    fn fresh(&mut self, hint: &str) -> SymId {
        let id = SymId(self.sym_names.len() as u32);
        self.sym_names.push(hint.to_string());
        id
    }

    fn def(&mut self, hint: &str, rv: Rvalue) -> Operand {
        let dst = self.fresh(&format!("v{}_{hint}", self.sym_names.len()));
        self.out.push(Inst::Def { dst, rv });
        Operand::Sym(dst)
    }

    fn lower_block(&mut self, b: &Block) -> Result<(), SsaError> {
        for s in &b.stmts {
            self.lower_stmt(s)?;
        }
        Ok(())
    }

    fn lower_stmt(&mut self, s: &Stmt) -> Result<(), SsaError> {
        match s {
            Stmt::VarDecl { name, init, .. } => {
                let op = match init {
                    Some(e) => self.eval(e)?,
                    None => Operand::Const(U256::zero()),
                };
                self.scope.vars.insert(name.clone(), op);
                Ok(())
            }
            Stmt::Assign { lhs, op, rhs, .. } => self.lower_assign(lhs, *op, rhs),
            Stmt::If { cond, then, els, .. } => self.lower_if(cond, then, els.as_ref()),
            Stmt::While { cond, body, .. } => self.lower_loop(Some(cond), None, body),
            Stmt::For {
                init,
                cond,
                post,
                body,
                ..
            } => {
                if let Some(i) = init {
                    self.lower_stmt(i)?;
                }
                self.lower_loop(cond.as_ref(), post.as_deref(), body)
            }
            Stmt::Require { cond, .. } => {
                let c = self.eval(cond)?;
                self.out.push(Inst::Require { cond: c });
                Ok(())
            }
            Stmt::Assert { cond, .. } => {
                let c = self.eval(cond)?;
                self.out.push(Inst::Assert { cond: c });
                Ok(())
            }
            Stmt::Revert { .. } => {
                self.out.push(Inst::Revert);
                Ok(())
            }
            Stmt::Emit { event, args, .. } => {
                let args = args.iter().map(|a| self.eval(a)).collect::<Result<_, _>>()?;
                self.out.push(Inst::Emit {
                    event: event.clone(),
                    args,
                });
                Ok(())
            }
            Stmt::Return { value, .. } => {
                if self.call_stack.len() > 1 {
                    // returns inside inlined callees are handled by the frame
                    // lowering; reaching one here means it was not in tail
                    // position
                    return Err(SsaError::Unsupported(
                        "early return inside inlined function".into(),
                    ));
                }
                let v = match value {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                self.out.push(Inst::Return { value: v });
                Ok(())
            }
            Stmt::ExprStmt { expr, .. } => {
                match expr {
                    Expr::Call { name, args, .. } => {
                        self.lower_internal_call(name, args)?;
                    }
                    Expr::ExtCall {
                        target,
                        function,
                        args,
                        ..
                    } => {
                        self.lower_ext_call(target, function, args)?;
                    }
                    other => {
                        self.eval(other)?;
                    }
                }
                Ok(())
            }
            Stmt::Unchecked { body, .. } => {
                let saved = self.unchecked;
                self.unchecked = true;
                let r = self.lower_block(body);
                self.unchecked = saved;
                r
            }
            Stmt::Placeholder { .. } => Err(SsaError::Unsupported(
                "`_;` outside a modifier body".into(),
            )),
        }
    }

    fn lower_assign(&mut self, lhs: &LValue, op: AssignOp, rhs: &Expr) -> Result<(), SsaError> {
        match lhs {
            LValue::Index { name, keys } => {
                let Some(field) = self.model.field(name) else {
                    return Err(SsaError::UnknownName(name.clone()));
                };
                let field = field.name.clone();
                let key_ops: Vec<Operand> =
                    keys.iter().map(|k| self.eval(k)).collect::<Result<_, _>>()?;
                let (kind, value_expr) = classify_store(op, rhs, |e| {
                    matches!(e, Expr::Index { name: n, keys: k, .. }
                        if n == name && exprs_eq(k, keys))
                });
                let value = self.eval(value_expr)?;
                self.out.push(Inst::FieldStore {
                    field,
                    keys: key_ops,
                    kind,
                    value,
                    checked: !self.unchecked,
                });
                Ok(())
            }
            LValue::Name(name) => {
                if self.scope.vars.contains_key(name) {
                    // local: fold compound ops into a checked def
                    let cur = self.scope.vars[name];
                    let new = match op {
                        AssignOp::Set => self.eval(rhs)?,
                        AssignOp::Add | AssignOp::Sub => {
                            let delta = self.eval(rhs)?;
                            let top = if op == AssignOp::Add { TermOp::Add } else { TermOp::Sub };
                            let checked = !self.unchecked;
                            self.def(
                                name,
                                Rvalue::Bin {
                                    op: top,
                                    checked,
                                    lhs: cur,
                                    rhs: delta,
                                },
                            )
                        }
                    };
                    self.scope.vars.insert(name.clone(), new);
                    Ok(())
                } else if let Some(f) = self.model.field(name) {
                    if f.ty.dimensionality() != 0 {
                        return Err(SsaError::Unsupported(format!(
                            "whole-mapping assignment to `{name}`"
                        )));
                    }
                    let fname = f.name.clone();
                    let (kind, value_expr) =
                        classify_store(op, rhs, |e| matches!(e, Expr::Name(n, _) if n == name));
                    let value = self.eval(value_expr)?;
                    self.out.push(Inst::FieldStore {
                        field: fname,
                        keys: vec![],
                        kind,
                        value,
                        checked: !self.unchecked,
                    });
                    Ok(())
                } else {
                    Err(SsaError::UnknownName(name.clone()))
                }
            }
        }
    }

    fn lower_if(&mut self, cond: &Expr, then: &Block, els: Option<&Block>) -> Result<(), SsaError> {
        let c = self.eval(cond)?;
        let pre = self.scope.clone();

        let saved_out = std::mem::take(&mut self.out);
        self.lower_block(then)?;
        let then_insts = std::mem::take(&mut self.out);
        let then_scope = std::mem::replace(&mut self.scope, pre.clone());

        if let Some(e) = els {
            self.lower_block(e)?;
        }
        let else_insts = std::mem::take(&mut self.out);
        let else_scope = std::mem::replace(&mut self.scope, pre.clone());
        self.out = saved_out;

        let mut joins = Vec::new();
        let mut names: Vec<&String> = pre.vars.keys().collect();
        names.sort();
        for name in names {
            let t = then_scope.vars[name];
            let e = else_scope.vars[name];
            if t == e {
                self.scope.vars.insert(name.clone(), t);
            } else {
                let dst = self.fresh(&format!("phi_{name}"));
                joins.push(Join {
                    dst,
                    then_val: t,
                    else_val: e,
                });
                self.scope.vars.insert(name.clone(), Operand::Sym(dst));
            }
        }
        self.out.push(Inst::If {
            cond: c,
            then: then_insts,
            els: else_insts,
            joins,
        });
        Ok(())
    }

    fn lower_loop(
        &mut self,
        cond: Option<&Expr>,
        post: Option<&Stmt>,
        body: &Block,
    ) -> Result<(), SsaError> {
        // names from the surrounding scope that the body (or post step)
        // reassigns need a header phi
        let mut assigned = HashSet::new();
        let mut declared = HashSet::new();
        collect_assigned(&body.stmts, &mut assigned, &mut declared);
        if let Some(p) = post {
            collect_assigned(std::slice::from_ref(p), &mut assigned, &mut declared);
        }
        let mut phi_names: Vec<String> = assigned
            .into_iter()
            .filter(|n| self.scope.vars.contains_key(n))
            .collect();
        phi_names.sort();

        let pre = self.scope.clone();
        let mut phis: Vec<(String, SymId, Operand)> = Vec::new();
        for name in &phi_names {
            let init = self.scope.vars[name];
            let dst = self.fresh(&format!("loop_{name}"));
            self.scope.vars.insert(name.clone(), Operand::Sym(dst));
            phis.push((name.clone(), dst, init));
        }

        let saved_out = std::mem::take(&mut self.out);
        let cond_op = match cond {
            Some(c) => self.eval(c)?,
            None => Operand::Const(U256::one()),
        };
        let header_insts = std::mem::take(&mut self.out);

        self.lower_block(body)?;
        if let Some(p) = post {
            self.lower_stmt(p)?;
        }
        let body_insts = std::mem::take(&mut self.out);
        let body_scope = std::mem::replace(&mut self.scope, pre);
        self.out = saved_out;

        let phis: Vec<Phi> = phis
            .iter()
            .map(|(name, dst, init)| Phi {
                dst: *dst,
                init: *init,
                next: body_scope.vars[name],
            })
            .collect();
        // after the loop the phi symbols hold the final values
        for (name, dst, _) in phis.iter().zip(&phi_names).map(|(p, n)| (n, p.dst, ())) {
            self.scope.vars.insert(name.clone(), Operand::Sym(dst));
        }
        self.out.push(Inst::Loop {
            phis,
            header: header_insts,
            cond: cond_op,
            body: body_insts,
        });
        Ok(())
    }

    fn lower_internal_call(
        &mut self,
        name: &str,
        args: &[Expr],
    ) -> Result<Option<Operand>, SsaError> {
        let callee = self
            .model
            .function(name)
            .ok_or_else(|| SsaError::UnknownFunction(name.to_string()))?;
        if let Some(why) = &callee.unsupported {
            return Err(SsaError::Unsupported(format!("call to `{name}`: {why}")));
        }
        let Some(_) = &callee.body else {
            return Err(SsaError::Unsupported(format!("call to bodiless `{name}`")));
        };
        if self.call_stack.iter().any(|c| c == name) {
            return Err(SsaError::Recursion(name.to_string()));
        }
        if self.call_stack.len() >= MAX_INLINE_DEPTH {
            return Err(SsaError::DepthLimit(name.to_string()));
        }
        let arg_ops: Vec<Operand> = args.iter().map(|a| self.eval(a)).collect::<Result<_, _>>()?;
        self.out.push(Inst::Call {
            callee: name.to_string(),
            args: arg_ops.clone(),
            external: false,
        });

        let saved_scope = std::mem::take(&mut self.scope);
        for (i, p) in callee.sig.params.iter().enumerate() {
            if matches!(p.ty, SolType::Array(_) | SolType::Bytes) {
                return Err(SsaError::Unsupported(format!(
                    "array argument to inlined call `{name}`"
                )));
            }
            if let Some(n) = &p.name {
                self.scope.vars.insert(n.clone(), arg_ops[i]);
            }
        }
        self.call_stack.push(name.to_string());
        let body = expand_modifiers(self.model, callee)?;
        let ret = self.lower_frame_block(&body);
        self.call_stack.pop();
        self.scope = saved_scope;
        ret
    }

    /// Lower an inlined callee body. A `return` is only supported in tail
    /// position; its value becomes the call's result.
    fn lower_frame_block(&mut self, b: &Block) -> Result<Option<Operand>, SsaError> {
        let n = b.stmts.len();
        for (i, s) in b.stmts.iter().enumerate() {
            if let Stmt::Return { value, .. } = s {
                if i + 1 != n {
                    return Err(SsaError::Unsupported(
                        "early return inside inlined function".into(),
                    ));
                }
                return match value {
                    Some(e) => Ok(Some(self.eval(e)?)),
                    None => Ok(None),
                };
            }
            self.lower_stmt(s)?;
        }
        Ok(None)
    }

    fn lower_ext_call(
        &mut self,
        target: &Expr,
        function: &str,
        args: &[Expr],
    ) -> Result<Operand, SsaError> {
        let mut arg_ops = vec![self.eval(target)?];
        for a in args {
            arg_ops.push(self.eval(a)?);
        }
        self.out.push(Inst::Call {
            callee: function.to_string(),
            args: arg_ops,
            external: true,
        });
        self.opaque_count += 1;
        let tag = format!("ext_{}_{}", function, self.opaque_count);
        Ok(self.def(&format!("ret_{function}"), Rvalue::Opaque { tag }))
    }

    fn eval(&mut self, e: &Expr) -> Result<Operand, SsaError> {
        match e {
            Expr::Num(n, _) => Ok(Operand::Const(*n)),
            Expr::Bool(b, _) => Ok(Operand::Const(if *b { U256::one() } else { U256::zero() })),
            Expr::MsgSender(_) => Ok(Operand::MsgSender),
            Expr::MsgValue(_) => Ok(Operand::MsgValue),
            Expr::ZeroAddress(_) => Ok(Operand::Const(U256::zero())),
            Expr::MaxUint(_) => Ok(Operand::Const(U256::MAX)),
            Expr::Name(name, _) => {
                if let Some(op) = self.scope.vars.get(name) {
                    return Ok(*op);
                }
                if let Some(f) = self.model.field(name) {
                    if f.ty.dimensionality() != 0 {
                        return Err(SsaError::Unsupported(format!(
                            "mapping `{name}` used without keys"
                        )));
                    }
                    let field = f.name.clone();
                    return Ok(self.def(name, Rvalue::FieldLoad { field, keys: vec![] }));
                }
                Err(SsaError::UnknownName(name.clone()))
            }
            Expr::Index { name, keys, .. } => {
                if let Some(&param) = self.scope.arrays.get(name) {
                    if keys.len() != 1 {
                        return Err(SsaError::Unsupported(format!(
                            "multi-dimensional index on array `{name}`"
                        )));
                    }
                    let index = self.eval(&keys[0])?;
                    return Ok(self.def(&format!("{name}_elem"), Rvalue::ArrayElem { param, index }));
                }
                let Some(f) = self.model.field(name) else {
                    return Err(SsaError::UnknownName(name.clone()));
                };
                if f.ty.dimensionality() != keys.len() {
                    return Err(SsaError::Unsupported(format!(
                        "`{name}` indexed with {} keys, declared with {}",
                        keys.len(),
                        f.ty.dimensionality()
                    )));
                }
                let field = f.name.clone();
                let key_ops: Vec<Operand> =
                    keys.iter().map(|k| self.eval(k)).collect::<Result<_, _>>()?;
                Ok(self.def(name, Rvalue::FieldLoad { field, keys: key_ops }))
            }
            Expr::Bin { op, lhs, rhs, .. } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                let rv = match op {
                    BinOp::Add => Rvalue::Bin { op: TermOp::Add, checked: !self.unchecked, lhs: l, rhs: r },
                    BinOp::Sub => Rvalue::Bin { op: TermOp::Sub, checked: !self.unchecked, lhs: l, rhs: r },
                    BinOp::Mul => Rvalue::Bin { op: TermOp::Mul, checked: !self.unchecked, lhs: l, rhs: r },
                    // division by zero throws regardless of `unchecked`
                    BinOp::Div => Rvalue::Bin { op: TermOp::Div, checked: true, lhs: l, rhs: r },
                    BinOp::Eq => Rvalue::Cmp { op: CmpOp::Eq, lhs: l, rhs: r },
                    BinOp::Ne => Rvalue::Cmp { op: CmpOp::Ne, lhs: l, rhs: r },
                    BinOp::Lt => Rvalue::Cmp { op: CmpOp::Lt, lhs: l, rhs: r },
                    BinOp::Le => Rvalue::Cmp { op: CmpOp::Le, lhs: l, rhs: r },
                    BinOp::Gt => Rvalue::Cmp { op: CmpOp::Gt, lhs: l, rhs: r },
                    BinOp::Ge => Rvalue::Cmp { op: CmpOp::Ge, lhs: l, rhs: r },
                    BinOp::And => Rvalue::AndB(l, r),
                    BinOp::Or => Rvalue::OrB(l, r),
                };
                Ok(self.def("t", rv))
            }
            Expr::Not(inner, _) => {
                let v = self.eval(inner)?;
                Ok(self.def("not", Rvalue::NotB(v)))
            }
            Expr::Call { name, args, .. } => match self.lower_internal_call(name, args)? {
                Some(v) => Ok(v),
                None => Err(SsaError::Unsupported(format!(
                    "call to `{name}` used as a value but it returns nothing"
                ))),
            },
            Expr::ExtCall {
                target,
                function,
                args,
                ..
            } => self.lower_ext_call(target, function, args),
            Expr::Length(inner, _) => match &**inner {
                Expr::Name(n, _) => {
                    let Some(&param) = self.scope.arrays.get(n) else {
                        return Err(SsaError::Unsupported(format!(
                            "`.length` on non-array `{n}`"
                        )));
                    };
                    Ok(self.def(&format!("{n}_len"), Rvalue::ArrayLen { param }))
                }
                _ => Err(SsaError::Unsupported("`.length` on a non-parameter".into())),
            },
        }
    }
}

/// Decide whether a store is a plain overwrite or a self-relative
/// increase/decrease, returning the value (or delta) expression.
fn classify_store<'a>(
    op: AssignOp,
    rhs: &'a Expr,
    is_self: impl Fn(&Expr) -> bool,
) -> (WriteKind, &'a Expr) {
    match op {
        AssignOp::Add => (WriteKind::Increase, rhs),
        AssignOp::Sub => (WriteKind::Decrease, rhs),
        AssignOp::Set => match rhs {
            Expr::Bin { op: BinOp::Add, lhs, rhs: delta, .. } if is_self(lhs) => {
                (WriteKind::Increase, delta)
            }
            Expr::Bin { op: BinOp::Sub, lhs, rhs: delta, .. } if is_self(lhs) => {
                (WriteKind::Decrease, delta)
            }
            _ => (WriteKind::Set, rhs),
        },
    }
}

/// Structural equality for the key expressions we compare when detecting
/// `F[k] = F[k] + e` patterns.
fn expr_eq(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Num(x, _), Expr::Num(y, _)) => x == y,
        (Expr::Bool(x, _), Expr::Bool(y, _)) => x == y,
        (Expr::Name(x, _), Expr::Name(y, _)) => x == y,
        (Expr::MsgSender(_), Expr::MsgSender(_)) => true,
        (Expr::MsgValue(_), Expr::MsgValue(_)) => true,
        (Expr::ZeroAddress(_), Expr::ZeroAddress(_)) => true,
        (Expr::MaxUint(_), Expr::MaxUint(_)) => true,
        (
            Expr::Index { name: n1, keys: k1, .. },
            Expr::Index { name: n2, keys: k2, .. },
        ) => n1 == n2 && exprs_eq(k1, k2),
        _ => false,
    }
}

fn exprs_eq(a: &[Expr], b: &[Expr]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| expr_eq(x, y))
}

fn collect_assigned(stmts: &[Stmt], assigned: &mut HashSet<String>, declared: &mut HashSet<String>) {
    for s in stmts {
        match s {
            Stmt::VarDecl { name, .. } => {
                declared.insert(name.clone());
            }
            Stmt::Assign { lhs: LValue::Name(n), .. } => {
                if !declared.contains(n) {
                    assigned.insert(n.clone());
                }
            }
            Stmt::Assign { .. } => {}
            Stmt::If { then, els, .. } => {
                collect_assigned(&then.stmts, assigned, declared);
                if let Some(e) = els {
                    collect_assigned(&e.stmts, assigned, declared);
                }
            }
            Stmt::While { body, .. } => collect_assigned(&body.stmts, assigned, declared),
            Stmt::For { init, post, body, .. } => {
                if let Some(i) = init {
                    collect_assigned(std::slice::from_ref(&**i), assigned, declared);
                }
                collect_assigned(&body.stmts, assigned, declared);
                if let Some(p) = post {
                    collect_assigned(std::slice::from_ref(&**p), assigned, declared);
                }
            }
            Stmt::Unchecked { body, .. } => collect_assigned(&body.stmts, assigned, declared),
            _ => {}
        }
    }
}

/// Expand a function's modifier list around its body: modifier parameters
/// become renamed local declarations and `_;` splices in the wrapped body.
fn expand_modifiers(model: &ContractModel, f: &FunctionAst) -> Result<Block, SsaError> {
    let mut body = f.body.clone().unwrap_or_default();
    for (idx, (mname, args)) in f.modifiers.iter().enumerate().rev() {
        let m = model
            .modifier(mname)
            .ok_or_else(|| SsaError::UnknownModifier(mname.clone()))?;
        if m.params.len() != args.len() {
            return Err(SsaError::Unsupported(format!(
                "modifier `{mname}` expects {} arguments, got {}",
                m.params.len(),
                args.len()
            )));
        }
        let mut rename = HashMap::new();
        let mut stmts = Vec::new();
        for (i, p) in m.params.iter().enumerate() {
            let Some(pname) = &p.name else {
                return Err(SsaError::Unsupported(format!(
                    "unnamed parameter on modifier `{mname}`"
                )));
            };
            let unique = format!("__mod{idx}_{pname}");
            rename.insert(pname.clone(), unique.clone());
            stmts.push(Stmt::VarDecl {
                ty: p.ty.clone(),
                name: unique,
                init: Some(args[i].clone()),
                span: m.span,
            });
        }
        let mut expanded = Vec::new();
        splice_modifier(&m.body.stmts, &rename, &body, &mut expanded);
        stmts.extend(expanded);
        body = Block { stmts };
    }
    Ok(body)
}

fn splice_modifier(stmts: &[Stmt], rename: &HashMap<String, String>, inner: &Block, out: &mut Vec<Stmt>) {
    for s in stmts {
        if let Stmt::Placeholder { .. } = s {
            out.extend(inner.stmts.iter().cloned());
        } else {
            out.push(rename_stmt(s, rename));
        }
    }
}

fn rename_stmt(s: &Stmt, map: &HashMap<String, String>) -> Stmt {
    let rb = |b: &Block| Block {
        stmts: b.stmts.iter().map(|s| rename_stmt(s, map)).collect(),
    };
    match s {
        Stmt::VarDecl { ty, name, init, span } => Stmt::VarDecl {
            ty: ty.clone(),
            name: name.clone(),
            init: init.as_ref().map(|e| rename_expr(e, map)),
            span: *span,
        },
        Stmt::Assign { lhs, op, rhs, span } => Stmt::Assign {
            lhs: match lhs {
                LValue::Name(n) => LValue::Name(map.get(n).cloned().unwrap_or_else(|| n.clone())),
                LValue::Index { name, keys } => LValue::Index {
                    name: name.clone(),
                    keys: keys.iter().map(|k| rename_expr(k, map)).collect(),
                },
            },
            op: *op,
            rhs: rename_expr(rhs, map),
            span: *span,
        },
        Stmt::If { cond, then, els, span } => Stmt::If {
            cond: rename_expr(cond, map),
            then: rb(then),
            els: els.as_ref().map(rb),
            span: *span,
        },
        Stmt::While { cond, body, span } => Stmt::While {
            cond: rename_expr(cond, map),
            body: rb(body),
            span: *span,
        },
        Stmt::For { init, cond, post, body, span } => Stmt::For {
            init: init.as_ref().map(|i| Box::new(rename_stmt(i, map))),
            cond: cond.as_ref().map(|c| rename_expr(c, map)),
            post: post.as_ref().map(|p| Box::new(rename_stmt(p, map))),
            body: rb(body),
            span: *span,
        },
        Stmt::Require { cond, msg, span } => Stmt::Require {
            cond: rename_expr(cond, map),
            msg: msg.clone(),
            span: *span,
        },
        Stmt::Assert { cond, span } => Stmt::Assert {
            cond: rename_expr(cond, map),
            span: *span,
        },
        Stmt::Revert { .. } | Stmt::Placeholder { .. } => s.clone(),
        Stmt::Emit { event, args, span } => Stmt::Emit {
            event: event.clone(),
            args: args.iter().map(|a| rename_expr(a, map)).collect(),
            span: *span,
        },
        Stmt::Return { value, span } => Stmt::Return {
            value: value.as_ref().map(|e| rename_expr(e, map)),
            span: *span,
        },
        Stmt::ExprStmt { expr, span } => Stmt::ExprStmt {
            expr: rename_expr(expr, map),
            span: *span,
        },
        Stmt::Unchecked { body, span } => Stmt::Unchecked {
            body: rb(body),
            span: *span,
        },
    }
}

fn rename_expr(e: &Expr, map: &HashMap<String, String>) -> Expr {
    match e {
        Expr::Name(n, span) => Expr::Name(map.get(n).cloned().unwrap_or_else(|| n.clone()), *span),
        Expr::Index { name, keys, span } => Expr::Index {
            name: name.clone(),
            keys: keys.iter().map(|k| rename_expr(k, map)).collect(),
            span: *span,
        },
        Expr::Bin { op, lhs, rhs, span } => Expr::Bin {
            op: *op,
            lhs: Box::new(rename_expr(lhs, map)),
            rhs: Box::new(rename_expr(rhs, map)),
            span: *span,
        },
        Expr::Not(inner, span) => Expr::Not(Box::new(rename_expr(inner, map)), *span),
        Expr::Call { name, args, span } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(|a| rename_expr(a, map)).collect(),
            span: *span,
        },
        Expr::ExtCall { target, function, args, span } => Expr::ExtCall {
            target: Box::new(rename_expr(target, map)),
            function: function.clone(),
            args: args.iter().map(|a| rename_expr(a, map)).collect(),
            span: *span,
        },
        Expr::Length(inner, span) => Expr::Length(Box::new(rename_expr(inner, map)), *span),
        _ => e.clone(),
    }
}

// ---------------------------------------------------------------------------
// static well-formedness check

/// Verify single assignment and def-before-use over the lowered tree. Loop
/// bodies may feed defs back through the phi `next` slot only.
pub fn check_ssa(f: &FuncSsa) -> Result<(), String> {
    let mut seen = HashSet::new();
    let mut defined: HashSet<SymId> = f.param_syms.iter().flatten().copied().collect();
    for s in &defined {
        if !seen.insert(*s) {
            return Err(format!("symbol {} defined twice", f.sym_name(*s)));
        }
    }
    check_insts(f, &f.body, &mut defined, &mut seen)?;
    Ok(())
}

fn check_op(f: &FuncSsa, op: &Operand, defined: &HashSet<SymId>) -> Result<(), String> {
    if let Operand::Sym(s) = op {
        if !defined.contains(s) {
            return Err(format!("use of {} before definition", f.sym_name(*s)));
        }
    }
    Ok(())
}

fn check_rvalue(f: &FuncSsa, rv: &Rvalue, defined: &HashSet<SymId>) -> Result<(), String> {
    match rv {
        Rvalue::Copy(a) | Rvalue::NotB(a) | Rvalue::ArrayElem { index: a, .. } => {
            check_op(f, a, defined)
        }
        Rvalue::Bin { lhs, rhs, .. }
        | Rvalue::Cmp { lhs, rhs, .. }
        | Rvalue::AndB(lhs, rhs)
        | Rvalue::OrB(lhs, rhs) => {
            check_op(f, lhs, defined)?;
            check_op(f, rhs, defined)
        }
        Rvalue::FieldLoad { keys, .. } => keys.iter().try_for_each(|k| check_op(f, k, defined)),
        Rvalue::ArrayLen { .. } | Rvalue::Opaque { .. } => Ok(()),
    }
}

fn define(f: &FuncSsa, dst: SymId, defined: &mut HashSet<SymId>, seen: &mut HashSet<SymId>) -> Result<(), String> {
    if !seen.insert(dst) {
        return Err(format!("symbol {} defined twice", f.sym_name(dst)));
    }
    defined.insert(dst);
    Ok(())
}

fn check_insts(
    f: &FuncSsa,
    insts: &[Inst],
    defined: &mut HashSet<SymId>,
    seen: &mut HashSet<SymId>,
) -> Result<(), String> {
    for inst in insts {
        match inst {
            Inst::Def { dst, rv } => {
                check_rvalue(f, rv, defined)?;
                define(f, *dst, defined, seen)?;
            }
            Inst::FieldStore { keys, value, .. } => {
                keys.iter().try_for_each(|k| check_op(f, k, defined))?;
                check_op(f, value, defined)?;
            }
            Inst::Require { cond } | Inst::Assert { cond } => check_op(f, cond, defined)?,
            Inst::Revert => {}
            Inst::Emit { args, .. } | Inst::Call { args, .. } => {
                args.iter().try_for_each(|a| check_op(f, a, defined))?;
            }
            Inst::Return { value } => {
                if let Some(v) = value {
                    check_op(f, v, defined)?;
                }
            }
            Inst::If { cond, then, els, joins } => {
                check_op(f, cond, defined)?;
                let mut then_defined = defined.clone();
                check_insts(f, then, &mut then_defined, seen)?;
                let mut else_defined = defined.clone();
                check_insts(f, els, &mut else_defined, seen)?;
                for j in joins {
                    check_op(f, &j.then_val, &then_defined)?;
                    check_op(f, &j.else_val, &else_defined)?;
                    define(f, j.dst, defined, seen)?;
                }
            }
            Inst::Loop { phis, header, cond, body } => {
                for p in phis {
                    check_op(f, &p.init, defined)?;
                    define(f, p.dst, defined, seen)?;
                }
                let mut inner = defined.clone();
                check_insts(f, header, &mut inner, seen)?;
                check_op(f, cond, &inner)?;
                check_insts(f, body, &mut inner, seen)?;
                for p in phis {
                    check_op(f, &p.next, &inner)?;
                }
                // header defs stay visible after the loop (final cond check)
                for inst in header {
                    if let Inst::Def { dst, .. } = inst {
                        defined.insert(*dst);
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rendering (for --dump-ssa)

impl fmt::Display for FuncSsa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "fn {}({})",
            self.name,
            self.param_syms
                .iter()
                .enumerate()
                .map(|(i, s)| match s {
                    Some(s) => self.sym_name(*s).to_string(),
                    None => format!("para{i}[]"),
                })
                .collect::<Vec<_>>()
                .join(", ")
        )?;
        fmt_insts(self, &self.body, 1, f)
    }
}

impl FuncSsa {
    fn op(&self, o: &Operand) -> String {
        match o {
            Operand::Sym(s) => self.sym_name(*s).to_string(),
            Operand::Const(c) => c.to_string(),
            Operand::MsgSender => "msg.sender".into(),
            Operand::MsgValue => "msg.value".into(),
        }
    }

    fn rv(&self, r: &Rvalue) -> String {
        match r {
            Rvalue::Copy(a) => self.op(a),
            Rvalue::Bin { op, checked, lhs, rhs } => {
                let sym = match op {
                    TermOp::Add => "+",
                    TermOp::Sub => "-",
                    TermOp::Mul => "*",
                    TermOp::Div => "/",
                };
                let suffix = if *checked { "" } else { " (wrapping)" };
                format!("{} {sym} {}{suffix}", self.op(lhs), self.op(rhs))
            }
            Rvalue::Cmp { op, lhs, rhs } => format!("{} {op} {}", self.op(lhs), self.op(rhs)),
            Rvalue::AndB(a, b) => format!("{} && {}", self.op(a), self.op(b)),
            Rvalue::OrB(a, b) => format!("{} || {}", self.op(a), self.op(b)),
            Rvalue::NotB(a) => format!("!{}", self.op(a)),
            Rvalue::FieldLoad { field, keys } => format!("{field}{}", self.keys(keys)),
            Rvalue::ArrayElem { param, index } => format!("para{param}[{}]", self.op(index)),
            Rvalue::ArrayLen { param } => format!("para{param}.length"),
            Rvalue::Opaque { tag } => format!("opaque({tag})"),
        }
    }

    fn keys(&self, keys: &[Operand]) -> String {
        keys.iter().map(|k| format!("[{}]", self.op(k))).collect()
    }
}

fn fmt_insts(fs: &FuncSsa, insts: &[Inst], depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let pad = "  ".repeat(depth);
    for inst in insts {
        match inst {
            Inst::Def { dst, rv } => writeln!(f, "{pad}{} = {}", fs.sym_name(*dst), fs.rv(rv))?,
            Inst::FieldStore { field, keys, kind, value, checked } => {
                let op = match kind {
                    WriteKind::Set => "=",
                    WriteKind::Increase => "+=",
                    WriteKind::Decrease => "-=",
                };
                let suffix = if *checked { "" } else { " (wrapping)" };
                writeln!(f, "{pad}{field}{} {op} {}{suffix}", fs.keys(keys), fs.op(value))?;
            }
            Inst::Require { cond } => writeln!(f, "{pad}require {}", fs.op(cond))?,
            Inst::Assert { cond } => writeln!(f, "{pad}assert {}", fs.op(cond))?,
            Inst::Revert => writeln!(f, "{pad}revert")?,
            Inst::Emit { event, args } => writeln!(
                f,
                "{pad}emit {event}({})",
                args.iter().map(|a| fs.op(a)).collect::<Vec<_>>().join(", ")
            )?,
            Inst::Call { callee, args, external } => writeln!(
                f,
                "{pad}{}call {callee}({})",
                if *external { "ext" } else { "" },
                args.iter().map(|a| fs.op(a)).collect::<Vec<_>>().join(", ")
            )?,
            Inst::Return { value } => match value {
                Some(v) => writeln!(f, "{pad}return {}", fs.op(v))?,
                None => writeln!(f, "{pad}return")?,
            },
            Inst::If { cond, then, els, joins } => {
                writeln!(f, "{pad}if {}", fs.op(cond))?;
                fmt_insts(fs, then, depth + 1, f)?;
                if !els.is_empty() {
                    writeln!(f, "{pad}else")?;
                    fmt_insts(fs, els, depth + 1, f)?;
                }
                for j in joins {
                    writeln!(
                        f,
                        "{pad}{} = phi({}, {})",
                        fs.sym_name(j.dst),
                        fs.op(&j.then_val),
                        fs.op(&j.else_val)
                    )?;
                }
            }
            Inst::Loop { phis, header, cond, body } => {
                for p in phis {
                    writeln!(
                        f,
                        "{pad}{} = loopphi(init {}, next {})",
                        fs.sym_name(p.dst),
                        fs.op(&p.init),
                        fs.op(&p.next)
                    )?;
                }
                writeln!(f, "{pad}loop")?;
                fmt_insts(fs, header, depth + 1, f)?;
                writeln!(f, "{pad}while {}", fs.op(cond))?;
                fmt_insts(fs, body, depth + 1, f)?;
            }
        }
    }
    Ok(())
}
