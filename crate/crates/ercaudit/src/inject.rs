//! Fault injection: given a rule a contract complies with, delete the code
//! that ensures the compliance (a require guard, an emit, or a guarding
//! call), producing a test contract that should be flagged for exactly that
//! rule.

use crate::frontend::ast::{Block, ContractAst, Expr, FunctionAst, Stmt};
use crate::frontend::lexer::Span;
use crate::frontend::parser::parse_file;
use crate::rule_ir::{BExp, FieldRef, FormalRule, RuleBody, TargetKind, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("contract does not parse: {0}")]
    Parse(String),
    #[error("target function `{0}` not found")]
    TargetMissing(String),
    #[error("no guard statement for rule `{0}` is syntactically identifiable")]
    NoGuard(String),
}

/// Delete the statement guarding `rule` from `source`. When several
/// statements qualify, `seed` picks one, so a fixed seed gives a fixed
/// mutation.
pub fn inject(source: &str, rule: &FormalRule, seed: u64) -> Result<String, InjectError> {
    let contracts = parse_file(source).map_err(|e| InjectError::Parse(e.to_string()))?;
    let mut candidates: Vec<Span> = Vec::new();
    for c in &contracts {
        for f in targeted_functions(c, rule) {
            let Some(body) = &f.body else { continue };
            collect_candidates(body, rule, f, &mut candidates);
        }
    }
    if candidates.is_empty() {
        if matches!(rule.target.kind, TargetKind::Function)
            && !contracts
                .iter()
                .any(|c| c.functions.iter().any(|f| f.sig.name == rule.target.name))
        {
            return Err(InjectError::TargetMissing(rule.target.name.clone()));
        }
        return Err(InjectError::NoGuard(rule.id.clone()));
    }
    candidates.sort_by_key(|s| s.start);
    let span = candidates[(seed as usize) % candidates.len()];
    Ok(delete_span(source, span))
}

fn targeted_functions<'a>(c: &'a ContractAst, rule: &FormalRule) -> Vec<&'a FunctionAst> {
    match rule.target.kind {
        TargetKind::Function => c
            .functions
            .iter()
            .filter(|f| f.sig.name == rule.target.name)
            .collect(),
        // contract-wide and event rules: any entry function can carry the guard
        _ => c.functions.iter().collect(),
    }
}

fn collect_candidates(block: &Block, rule: &FormalRule, f: &FunctionAst, out: &mut Vec<Span>) {
    for s in &block.stmts {
        if is_guard_for(s, rule, f) {
            out.push(s.span());
        }
        match s {
            Stmt::If { then, els, .. } => {
                collect_candidates(then, rule, f, out);
                if let Some(e) = els {
                    collect_candidates(e, rule, f, out);
                }
            }
            Stmt::While { body, .. }
            | Stmt::For { body, .. }
            | Stmt::Unchecked { body, .. } => collect_candidates(body, rule, f, out),
            _ => {}
        }
    }
}

fn is_guard_for(s: &Stmt, rule: &FormalRule, f: &FunctionAst) -> bool {
    match &rule.body {
        RuleBody::Throw { condition, expect_throw: true } => match s {
            Stmt::Require { cond, .. } | Stmt::Assert { cond, .. } => {
                let wanted = rule_names(condition, f);
                wanted.is_empty() || wanted.iter().any(|n| expr_mentions(cond, n))
            }
            _ => false,
        },
        RuleBody::Emit { event, .. } => matches!(s, Stmt::Emit { event: e, .. } if e == event),
        RuleBody::Call { callee, .. } => stmt_calls(s, callee),
        // no-throw, assign, follow, and declaration compliance is not a
        // deletable statement
        _ => false,
    }
}

/// Parameter and field names the rule's condition talks about, used to pick
/// the matching require guard.
fn rule_names(b: &BExp, f: &FunctionAst) -> Vec<String> {
    let mut names = Vec::new();
    let mut values: Vec<&Value> = Vec::new();
    collect_values(b, &mut values);
    for v in values {
        match v {
            Value::Param(i) => {
                if let Some(p) = f.sig.params.get(*i) {
                    if let Some(n) = &p.name {
                        names.push(n.clone());
                    }
                }
            }
            Value::GetFieldValue { field: FieldRef::Literal { name }, .. } => {
                names.push(name.clone());
            }
            _ => {}
        }
    }
    names
}

fn collect_values<'a>(b: &'a BExp, out: &mut Vec<&'a Value>) {
    match b {
        BExp::True | BExp::CheckMint { .. } | BExp::CheckBurn { .. } => {}
        BExp::And(a, b) | BExp::Or(a, b) => {
            collect_values(a, out);
            collect_values(b, out);
        }
        BExp::Not(a) => collect_values(a, out),
        BExp::Cmp { lhs, rhs, .. } => {
            out.push(lhs);
            out.push(rhs);
        }
        BExp::CheckChange { keys, .. } => out.extend(keys.iter()),
    }
}

fn expr_mentions(e: &Expr, name: &str) -> bool {
    match e {
        Expr::Name(n, _) => n == name,
        Expr::Index { name: n, keys, .. } => {
            n == name || keys.iter().any(|k| expr_mentions(k, name))
        }
        Expr::Bin { lhs, rhs, .. } => expr_mentions(lhs, name) || expr_mentions(rhs, name),
        Expr::Not(inner, _) | Expr::Length(inner, _) => expr_mentions(inner, name),
        Expr::Call { name: n, args, .. } => {
            n == name || args.iter().any(|a| expr_mentions(a, name))
        }
        Expr::ExtCall { target, function, args, .. } => {
            function == name
                || expr_mentions(target, name)
                || args.iter().any(|a| expr_mentions(a, name))
        }
        _ => false,
    }
}

/// True when the statement performs (or requires the result of) a call to
/// `callee`, e.g. a receiver-hook check.
fn stmt_calls(s: &Stmt, callee: &str) -> bool {
    let in_expr = |e: &Expr| calls_in_expr(e, callee);
    match s {
        Stmt::ExprStmt { expr, .. } => in_expr(expr),
        Stmt::Require { cond, .. } | Stmt::Assert { cond, .. } => in_expr(cond),
        Stmt::VarDecl { init: Some(e), .. } => in_expr(e),
        Stmt::If { cond, .. } => in_expr(cond),
        _ => false,
    }
}

fn calls_in_expr(e: &Expr, callee: &str) -> bool {
    match e {
        Expr::Call { name, args, .. } => {
            name == callee || args.iter().any(|a| calls_in_expr(a, callee))
        }
        Expr::ExtCall { function, target, args, .. } => {
            function == callee
                || calls_in_expr(target, callee)
                || args.iter().any(|a| calls_in_expr(a, callee))
        }
        Expr::Bin { lhs, rhs, .. } => calls_in_expr(lhs, callee) || calls_in_expr(rhs, callee),
        Expr::Not(inner, _) | Expr::Length(inner, _) => calls_in_expr(inner, callee),
        Expr::Index { keys, .. } => keys.iter().any(|k| calls_in_expr(k, callee)),
        _ => false,
    }
}

/// Remove the span plus a trailing semicolon, widening to whole lines when
/// only whitespace would remain around the cut.
fn delete_span(source: &str, span: Span) -> String {
    let bytes = source.as_bytes();
    let mut end = span.end;
    while end < bytes.len() && (bytes[end] as char).is_whitespace() && bytes[end] != b'\n' {
        end += 1;
    }
    if end < bytes.len() && bytes[end] == b';' {
        end += 1;
    }
    let mut start = span.start;
    while start > 0 && (bytes[start - 1] == b' ' || bytes[start - 1] == b'\t') {
        start -= 1;
    }
    let line_start = start == 0 || bytes[start - 1] == b'\n';
    let mut rest = end;
    while rest < bytes.len() && (bytes[rest] == b' ' || bytes[rest] == b'\t') {
        rest += 1;
    }
    if line_start && rest < bytes.len() && bytes[rest] == b'\n' {
        end = rest + 1; // take the whole line including its newline
    } else if !line_start {
        start = span.start; // keep the indentation of surviving text
    }
    format!("{}{}", &source[..start], &source[end..])
}
