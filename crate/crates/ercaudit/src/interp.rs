//! Concrete interpreter over the parsed AST.
//!
//! This is a direct, dumb evaluator used as an independent oracle for the
//! symbolic executor: it walks the AST (not the lowered instruction form),
//! does its own modifier expansion and call handling, and shares no code
//! with the symbolic path engine beyond the parser.

use crate::frontend::ast::*;
use crate::frontend::model::ContractModel;
use crate::rule_ir::SolType;
use primitive_types::U256;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("function `{0}` not found")]
    UnknownFunction(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unsupported during interpretation: {0}")]
    Unsupported(String),
    #[error("step budget exhausted")]
    OutOfSteps,
    #[error("call depth exceeded")]
    CallDepth,
}

#[derive(Debug, Clone)]
pub enum ArgValue {
    Word(U256),
    Array(Vec<U256>),
}

#[derive(Debug, Clone)]
pub struct CallInput {
    pub args: Vec<ArgValue>,
    pub msg_sender: U256,
    pub msg_value: U256,
}

/// Flat storage: `(field, keys) -> word`, zero when absent.
pub type Store = HashMap<(String, Vec<U256>), U256>;

#[derive(Debug, Clone, Default)]
pub struct ExecState {
    pub store: Store,
    pub events: Vec<(String, Vec<U256>)>,
    pub calls: Vec<(String, Vec<U256>)>,
    pub ret: Option<U256>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Success(ExecState),
    Throw,
}

impl Outcome {
    pub fn is_throw(&self) -> bool {
        matches!(self, Outcome::Throw)
    }
}

enum Flow {
    Normal,
    Return(Option<U256>),
    Throw,
}

struct Interp<'m> {
    model: &'m ContractModel,
    state: ExecState,
    steps: u64,
    depth: usize,
    unchecked: bool,
    /// Values handed out for external calls, consumed in order; zero when
    /// exhausted.
    ext_returns: Vec<U256>,
    ext_cursor: usize,
    msg_sender: U256,
    msg_value: U256,
}

const STEP_BUDGET: u64 = 200_000;
const MAX_DEPTH: usize = 16;

struct Env {
    words: HashMap<String, U256>,
    arrays: HashMap<String, Vec<U256>>,
}

pub fn run_function(
    model: &ContractModel,
    fname: &str,
    input: &CallInput,
    store: &Store,
    ext_returns: Vec<U256>,
) -> Result<Outcome, InterpError> {
    let f = model
        .function(fname)
        .ok_or_else(|| InterpError::UnknownFunction(fname.to_string()))?;
    let mut it = Interp {
        model,
        state: ExecState {
            store: store.clone(),
            ..ExecState::default()
        },
        steps: 0,
        depth: 0,
        unchecked: false,
        ext_returns,
        ext_cursor: 0,
        msg_sender: input.msg_sender,
        msg_value: input.msg_value,
    };
    match it.call_function(f, &input.args)? {
        Flow::Throw => Ok(Outcome::Throw),
        Flow::Return(v) => {
            it.state.ret = v;
            Ok(Outcome::Success(it.state))
        }
        Flow::Normal => Ok(Outcome::Success(it.state)),
    }
}

impl<'m> Interp<'m> {
    fn tick(&mut self) -> Result<(), InterpError> {
        self.steps += 1;
        if self.steps > STEP_BUDGET {
            return Err(InterpError::OutOfSteps);
        }
        Ok(())
    }

    fn call_function(&mut self, f: &FunctionAst, args: &[ArgValue]) -> Result<Flow, InterpError> {
        if let Some(why) = &f.unsupported {
            return Err(InterpError::Unsupported(why.clone()));
        }
        let body = f
            .body
            .as_ref()
            .ok_or_else(|| InterpError::Unsupported(format!("`{}` has no body", f.sig.name)))?;
        if self.depth >= MAX_DEPTH {
            return Err(InterpError::CallDepth);
        }
        self.depth += 1;
        let mut env = Env {
            words: HashMap::new(),
            arrays: HashMap::new(),
        };
        for (i, p) in f.sig.params.iter().enumerate() {
            let Some(name) = &p.name else { continue };
            match (&p.ty, args.get(i)) {
                (SolType::Array(_) | SolType::Bytes, Some(ArgValue::Array(v))) => {
                    env.arrays.insert(name.clone(), v.clone());
                }
                (_, Some(ArgValue::Word(w))) => {
                    env.words.insert(name.clone(), *w);
                }
                _ => {
                    return Err(InterpError::Unsupported(format!(
                        "argument {i} of `{}` has the wrong shape",
                        f.sig.name
                    )))
                }
            }
        }
        // run modifiers as nested wrappers, innermost being the body itself
        let flow = self.run_wrapped(f, 0, body, &mut env)?;
        self.depth -= 1;
        Ok(flow)
    }

    fn run_wrapped(
        &mut self,
        f: &FunctionAst,
        idx: usize,
        body: &Block,
        outer_env: &mut Env,
    ) -> Result<Flow, InterpError> {
        if idx == f.modifiers.len() {
            return self.run_block(body, outer_env);
        }
        let (mname, margs) = &f.modifiers[idx];
        let m = self
            .model
            .modifier(mname)
            .ok_or_else(|| InterpError::UnknownName(mname.clone()))?
            .clone();
        let mut menv = Env {
            words: HashMap::new(),
            arrays: HashMap::new(),
        };
        for (p, a) in m.params.iter().zip(margs) {
            let v = match self.eval_flow(a, outer_env)? {
                Ok(v) => v,
                Err(_) => return Ok(Flow::Throw),
            };
            if let Some(n) = &p.name {
                menv.words.insert(n.clone(), v);
            }
        }
        self.run_modifier_block(&m.body, &mut menv, f, idx, outer_env)
    }

    fn run_modifier_block(
        &mut self,
        block: &Block,
        menv: &mut Env,
        f: &FunctionAst,
        idx: usize,
        outer_env: &mut Env,
    ) -> Result<Flow, InterpError> {
        for s in &block.stmts {
            if let Stmt::Placeholder { .. } = s {
                match self.run_wrapped(f, idx + 1, f.body.as_ref().unwrap(), outer_env)? {
                    Flow::Normal => continue,
                    other => return Ok(other),
                }
            }
            match self.run_stmt(s, menv)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn run_block(&mut self, b: &Block, env: &mut Env) -> Result<Flow, InterpError> {
        for s in &b.stmts {
            match self.run_stmt(s, env)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn run_stmt(&mut self, s: &Stmt, env: &mut Env) -> Result<Flow, InterpError> {
        self.tick()?;
        match s {
            Stmt::VarDecl { name, init, .. } => {
                let v = match init {
                    Some(e) => match self.eval_flow(e, env)? {
                        Ok(v) => v,
                        Err(f) => return Ok(f),
                    },
                    None => U256::zero(),
                };
                env.words.insert(name.clone(), v);
                Ok(Flow::Normal)
            }
            Stmt::Assign { lhs, op, rhs, .. } => {
                let rv = match self.eval_flow(rhs, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(f),
                };
                match lhs {
                    LValue::Name(name) => {
                        if env.words.contains_key(name) {
                            let cur = env.words[name];
                            match self.apply_assign(cur, *op, rv) {
                                Some(v) => {
                                    env.words.insert(name.clone(), v);
                                    Ok(Flow::Normal)
                                }
                                None => Ok(Flow::Throw),
                            }
                        } else if self.model.field(name).is_some() {
                            let key = (name.clone(), vec![]);
                            let cur = self.state.store.get(&key).copied().unwrap_or_default();
                            match self.apply_assign(cur, *op, rv) {
                                Some(v) => {
                                    self.state.store.insert(key, v);
                                    Ok(Flow::Normal)
                                }
                                None => Ok(Flow::Throw),
                            }
                        } else {
                            Err(InterpError::UnknownName(name.clone()))
                        }
                    }
                    LValue::Index { name, keys } => {
                        let mut kvals = Vec::new();
                        for k in keys {
                            match self.eval_flow(k, env)? {
                                Ok(v) => kvals.push(v),
                                Err(f) => return Ok(f),
                            }
                        }
                        if self.model.field(name).is_none() {
                            return Err(InterpError::UnknownName(name.clone()));
                        }
                        let key = (name.clone(), kvals);
                        let cur = self.state.store.get(&key).copied().unwrap_or_default();
                        match self.apply_assign(cur, *op, rv) {
                            Some(v) => {
                                self.state.store.insert(key, v);
                                Ok(Flow::Normal)
                            }
                            None => Ok(Flow::Throw),
                        }
                    }
                }
            }
            Stmt::If { cond, then, els, .. } => {
                let c = match self.eval_flow(cond, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(f),
                };
                if !c.is_zero() {
                    self.run_block(then, env)
                } else if let Some(e) = els {
                    self.run_block(e, env)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Stmt::While { cond, body, .. } => loop {
                self.tick()?;
                let c = match self.eval_flow(cond, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(f),
                };
                if c.is_zero() {
                    return Ok(Flow::Normal);
                }
                match self.run_block(body, env)? {
                    Flow::Normal => {}
                    other => return Ok(other),
                }
            },
            Stmt::For {
                init,
                cond,
                post,
                body,
                ..
            } => {
                if let Some(i) = init {
                    match self.run_stmt(i, env)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                }
                loop {
                    self.tick()?;
                    if let Some(c) = cond {
                        let v = match self.eval_flow(c, env)? {
                            Ok(v) => v,
                            Err(f) => return Ok(f),
                        };
                        if v.is_zero() {
                            return Ok(Flow::Normal);
                        }
                    }
                    match self.run_block(body, env)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                    if let Some(p) = post {
                        match self.run_stmt(p, env)? {
                            Flow::Normal => {}
                            other => return Ok(other),
                        }
                    }
                }
            }
            Stmt::Require { cond, .. } | Stmt::Assert { cond, .. } => {
                let c = match self.eval_flow(cond, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(f),
                };
                if c.is_zero() {
                    Ok(Flow::Throw)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Stmt::Revert { .. } => Ok(Flow::Throw),
            Stmt::Emit { event, args, .. } => {
                let mut vals = Vec::new();
                for a in args {
                    match self.eval_flow(a, env)? {
                        Ok(v) => vals.push(v),
                        Err(f) => return Ok(f),
                    }
                }
                self.state.events.push((event.clone(), vals));
                Ok(Flow::Normal)
            }
            Stmt::Return { value, .. } => {
                let v = match value {
                    Some(e) => match self.eval_flow(e, env)? {
                        Ok(v) => Some(v),
                        Err(f) => return Ok(f),
                    },
                    None => None,
                };
                Ok(Flow::Return(v))
            }
            Stmt::ExprStmt { expr, .. } => match self.eval_flow(expr, env)? {
                Ok(_) => Ok(Flow::Normal),
                Err(f) => Ok(f),
            },
            Stmt::Unchecked { body, .. } => {
                let saved = self.unchecked;
                self.unchecked = true;
                let r = self.run_block(body, env);
                self.unchecked = saved;
                r
            }
            Stmt::Placeholder { .. } => Err(InterpError::Unsupported(
                "`_;` outside a modifier".into(),
            )),
        }
    }

    fn apply_assign(&self, cur: U256, op: AssignOp, rhs: U256) -> Option<U256> {
        match op {
            AssignOp::Set => Some(rhs),
            AssignOp::Add => self.arith(BinOp::Add, cur, rhs),
            AssignOp::Sub => self.arith(BinOp::Sub, cur, rhs),
        }
    }

    /// Checked arithmetic; `None` means throw.
    fn arith(&self, op: BinOp, a: U256, b: U256) -> Option<U256> {
        match op {
            BinOp::Add => {
                let (v, over) = a.overflowing_add(b);
                if over && !self.unchecked {
                    None
                } else {
                    Some(v)
                }
            }
            BinOp::Sub => {
                let (v, over) = a.overflowing_sub(b);
                if over && !self.unchecked {
                    None
                } else {
                    Some(v)
                }
            }
            BinOp::Mul => {
                let (v, over) = a.overflowing_mul(b);
                if over && !self.unchecked {
                    None
                } else {
                    Some(v)
                }
            }
            BinOp::Div => {
                if b.is_zero() {
                    None
                } else {
                    Some(a / b)
                }
            }
            _ => unreachable!("arith called with non-arithmetic op"),
        }
    }

    /// Evaluate an expression; the inner `Err` carries a control-flow event
    /// (throw) raised during evaluation.
    fn eval_flow(&mut self, e: &Expr, env: &mut Env) -> Result<Result<U256, Flow>, InterpError> {
        self.tick()?;
        let bool_word = |b: bool| if b { U256::one() } else { U256::zero() };
        match e {
            Expr::Num(n, _) => Ok(Ok(*n)),
            Expr::Bool(b, _) => Ok(Ok(bool_word(*b))),
            Expr::MsgSender(_) => Ok(Ok(self.msg_sender)),
            Expr::MsgValue(_) => Ok(Ok(self.msg_value)),
            Expr::ZeroAddress(_) => Ok(Ok(U256::zero())),
            Expr::MaxUint(_) => Ok(Ok(U256::MAX)),
            Expr::Name(n, _) => {
                if let Some(v) = env.words.get(n) {
                    Ok(Ok(*v))
                } else if self.model.field(n).is_some() {
                    Ok(Ok(self
                        .state
                        .store
                        .get(&(n.clone(), vec![]))
                        .copied()
                        .unwrap_or_default()))
                } else {
                    Err(InterpError::UnknownName(n.clone()))
                }
            }
            Expr::Index { name, keys, .. } => {
                if let Some(arr) = env.arrays.get(name).cloned() {
                    let k = match self.eval_flow(&keys[0], env)? {
                        Ok(v) => v,
                        Err(f) => return Ok(Err(f)),
                    };
                    // out-of-range calldata access throws
                    return Ok(match usize::try_from(k) {
                        Ok(i) if i < arr.len() => Ok(arr[i]),
                        _ => Err(Flow::Throw),
                    });
                }
                if self.model.field(name).is_none() {
                    return Err(InterpError::UnknownName(name.clone()));
                }
                let mut kvals = Vec::new();
                for k in keys {
                    match self.eval_flow(k, env)? {
                        Ok(v) => kvals.push(v),
                        Err(f) => return Ok(Err(f)),
                    }
                }
                Ok(Ok(self
                    .state
                    .store
                    .get(&(name.clone(), kvals))
                    .copied()
                    .unwrap_or_default()))
            }
            Expr::Bin { op, lhs, rhs, .. } => {
                let a = match self.eval_flow(lhs, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(Err(f)),
                };
                let b = match self.eval_flow(rhs, env)? {
                    Ok(v) => v,
                    Err(f) => return Ok(Err(f)),
                };
                let v = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        match self.arith(*op, a, b) {
                            Some(v) => v,
                            None => return Ok(Err(Flow::Throw)),
                        }
                    }
                    BinOp::Eq => bool_word(a == b),
                    BinOp::Ne => bool_word(a != b),
                    BinOp::Lt => bool_word(a < b),
                    BinOp::Le => bool_word(a <= b),
                    BinOp::Gt => bool_word(a > b),
                    BinOp::Ge => bool_word(a >= b),
                    BinOp::And => bool_word(!a.is_zero() && !b.is_zero()),
                    BinOp::Or => bool_word(!a.is_zero() || !b.is_zero()),
                };
                Ok(Ok(v))
            }
            Expr::Not(inner, _) => match self.eval_flow(inner, env)? {
                Ok(v) => Ok(Ok(bool_word(v.is_zero()))),
                Err(f) => Ok(Err(f)),
            },
            Expr::Call { name, args, .. } => {
                let f = self
                    .model
                    .function(name)
                    .ok_or_else(|| InterpError::UnknownFunction(name.clone()))?
                    .clone();
                let mut avals = Vec::new();
                for a in args {
                    match self.eval_flow(a, env)? {
                        Ok(v) => avals.push(ArgValue::Word(v)),
                        Err(fl) => return Ok(Err(fl)),
                    }
                }
                self.state.calls.push((
                    name.clone(),
                    avals
                        .iter()
                        .map(|a| match a {
                            ArgValue::Word(w) => *w,
                            ArgValue::Array(_) => U256::zero(),
                        })
                        .collect(),
                ));
                match self.call_function(&f, &avals)? {
                    Flow::Throw => Ok(Err(Flow::Throw)),
                    Flow::Return(v) => Ok(Ok(v.unwrap_or_default())),
                    Flow::Normal => Ok(Ok(U256::zero())),
                }
            }
            Expr::ExtCall {
                target,
                function,
                args,
                ..
            } => {
                let mut vals = Vec::new();
                match self.eval_flow(target, env)? {
                    Ok(v) => vals.push(v),
                    Err(f) => return Ok(Err(f)),
                }
                for a in args {
                    match self.eval_flow(a, env)? {
                        Ok(v) => vals.push(v),
                        Err(f) => return Ok(Err(f)),
                    }
                }
                self.state.calls.push((function.clone(), vals));
                let v = self
                    .ext_returns
                    .get(self.ext_cursor)
                    .copied()
                    .unwrap_or_default();
                self.ext_cursor += 1;
                Ok(Ok(v))
            }
            Expr::Length(inner, _) => match &**inner {
                Expr::Name(n, _) => match env.arrays.get(n) {
                    Some(a) => Ok(Ok(U256::from(a.len()))),
                    None => Err(InterpError::Unsupported(format!("`.length` on `{n}`"))),
                },
                _ => Err(InterpError::Unsupported("`.length` target".into())),
            },
        }
    }
}
