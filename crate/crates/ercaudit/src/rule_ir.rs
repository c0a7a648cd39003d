//! Rule intermediate representation.
//!
//! An ERC rule is stored as a [`FormalRule`]: a target function or event, a
//! rule kind, and a kind-specific body built from boolean expressions
//! ([`BExp`]) over rule-level values ([`Value`]). Rules round-trip through a
//! canonical JSON form (`rules.json`), which is the contract between the
//! extraction/translation stages and the checking stage.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Solidity elementary types accepted in rule signatures and the frontend.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SolType {
    Address,
    Bool,
    Uint256,
    Uint8,
    Bytes,
    Bytes4,
    String,
    Array(Box<SolType>),
}

impl SolType {
    pub fn parse(tok: &str) -> Option<SolType> {
        if let Some(inner) = tok.strip_suffix("[]") {
            return SolType::parse(inner).map(|t| SolType::Array(Box::new(t)));
        }
        match tok {
            "address" => Some(SolType::Address),
            "bool" => Some(SolType::Bool),
            "uint256" | "uint" => Some(SolType::Uint256),
            "uint8" => Some(SolType::Uint8),
            "bytes" => Some(SolType::Bytes),
            "bytes4" => Some(SolType::Bytes4),
            "string" => Some(SolType::String),
            _ => None,
        }
    }

    pub fn token(&self) -> String {
        match self {
            SolType::Address => "address".into(),
            SolType::Bool => "bool".into(),
            SolType::Uint256 => "uint256".into(),
            SolType::Uint8 => "uint8".into(),
            SolType::Bytes => "bytes".into(),
            SolType::Bytes4 => "bytes4".into(),
            SolType::String => "string".into(),
            SolType::Array(inner) => format!("{}[]", inner.token()),
        }
    }
}

impl fmt::Display for SolType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

impl Serialize for SolType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for SolType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tok = String::deserialize(d)?;
        SolType::parse(&tok).ok_or_else(|| serde::de::Error::custom(format!("unknown type token `{tok}`")))
    }
}

/// One parameter of a function or event signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDecl {
    #[serde(rename = "type")]
    pub ty: SolType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub indexed: bool,
}

/// A function or event signature. Events carry no return types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<ParamDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub returns: Vec<SolType>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_event: bool,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Render as a Solidity-style declaration line.
    pub fn pretty(&self) -> String {
        let kw = if self.is_event { "event" } else { "function" };
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| {
                let mut s = p.ty.token();
                if p.indexed {
                    s.push_str(" indexed");
                }
                if let Some(n) = &p.name {
                    s.push(' ');
                    s.push_str(n);
                }
                s
            })
            .collect();
        let mut out = format!("{} {}({})", kw, self.name, params.join(", "));
        if !self.returns.is_empty() {
            let rets: Vec<String> = self.returns.iter().map(|t| t.token()).collect();
            out.push_str(&format!(" returns ({})", rets.join(", ")));
        }
        out
    }
}

/// The function or event a rule governs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRef {
    pub kind: TargetKind,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Function,
    Event,
    Contract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Throw,
    Call,
    Emit,
    Assign,
    Follow,
    ApiDecl,
    EventDecl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    High,
    Medium,
    Low,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::High => write!(f, "high"),
            Severity::Medium => write!(f, "medium"),
            Severity::Low => write!(f, "low"),
        }
    }
}

/// Reference to a contract field, either by literal name or through the
/// anchor function that exposes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRef {
    Literal { name: String },
    Anchor { function: String },
}

impl FieldRef {
    pub fn describe(&self) -> String {
        match self {
            FieldRef::Literal { name } => name.clone(),
            FieldRef::Anchor { function } => format!("getFieldName({function})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        write!(f, "{s}")
    }
}

/// Rule-level value expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    MsgSender,
    MsgValue,
    ZeroAddress,
    /// Unsigned 256-bit integer or address literal, as a decimal or 0x-hex string.
    Const(String),
    /// 0-based position in the target signature.
    Param(usize),
    GetFieldValue {
        field: FieldRef,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        keys: Vec<Value>,
    },
    GetPara {
        target: String,
        index: usize,
    },
}

impl Value {
    pub fn describe(&self) -> String {
        match self {
            Value::MsgSender => "msg.sender".into(),
            Value::MsgValue => "msg.value".into(),
            Value::ZeroAddress => "address(0)".into(),
            Value::Const(c) => c.clone(),
            Value::Param(i) => format!("para{i}"),
            Value::GetFieldValue { field, keys } => {
                let keys: Vec<String> = keys.iter().map(|k| k.describe()).collect();
                if keys.is_empty() {
                    format!("getFieldValue({})", field.describe())
                } else {
                    format!("getFieldValue({}, {})", field.describe(), keys.join(", "))
                }
            }
            Value::GetPara { target, index } => format!("getPara({target}, {index})"),
        }
    }
}

/// Boolean expression over rule values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BExp {
    True,
    And(Box<BExp>, Box<BExp>),
    Or(Box<BExp>, Box<BExp>),
    Not(Box<BExp>),
    Cmp {
        lhs: Value,
        op: CmpOp,
        rhs: Value,
    },
    CheckChange {
        field: FieldRef,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        keys: Vec<Value>,
    },
    CheckMint {
        field: FieldRef,
    },
    CheckBurn {
        field: FieldRef,
    },
}

impl BExp {
    pub fn describe(&self) -> String {
        match self {
            BExp::True => "true".into(),
            BExp::And(a, b) => format!("({} and {})", a.describe(), b.describe()),
            BExp::Or(a, b) => format!("({} or {})", a.describe(), b.describe()),
            BExp::Not(a) => format!("(not {})", a.describe()),
            BExp::Cmp { lhs, op, rhs } => format!("({} {} {})", lhs.describe(), op, rhs.describe()),
            BExp::CheckChange { field, keys } => {
                let keys: Vec<String> = keys.iter().map(|k| k.describe()).collect();
                if keys.is_empty() {
                    format!("checkChange({})", field.describe())
                } else {
                    format!("checkChange({}, {})", field.describe(), keys.join(", "))
                }
            }
            BExp::CheckMint { field } => format!("checkMint({})", field.describe()),
            BExp::CheckBurn { field } => format!("checkBurn({})", field.describe()),
        }
    }
}

/// Locator for an executed operation, used by follow rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpRef {
    FieldWrite {
        field: FieldRef,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        keys: Vec<Value>,
    },
    Call {
        function: String,
    },
    Emit {
        event: String,
    },
}

impl OpRef {
    pub fn describe(&self) -> String {
        match self {
            OpRef::FieldWrite { field, keys } => {
                let keys: Vec<String> = keys.iter().map(|k| k.describe()).collect();
                format!("write({}{}{})", field.describe(), if keys.is_empty() { "" } else { ", " }, keys.join(", "))
            }
            OpRef::Call { function } => format!("call({function})"),
            OpRef::Emit { event } => format!("emit({event})"),
        }
    }
}

/// Kind-specific rule body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleBody {
    Throw {
        condition: BExp,
        expect_throw: bool,
    },
    Call {
        condition: BExp,
        callee: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        with: Option<BExp>,
    },
    Emit {
        condition: BExp,
        event: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        with: Option<BExp>,
    },
    Assign {
        value1: Value,
        value2: Value,
    },
    Follow {
        op1: OpRef,
        op2: OpRef,
        order_op1: OpRef,
        order_op2: OpRef,
    },
    Decl {
        signature: Signature,
    },
}

/// A fully formalized ERC rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalRule {
    pub id: String,
    pub erc: String,
    pub target: TargetRef,
    pub kind: RuleKind,
    pub severity: Severity,
    pub source_text: String,
    pub body: RuleBody,
}

impl FormalRule {
    /// Canonical one-line textual rendering used in reports.
    pub fn pretty(&self) -> String {
        match &self.body {
            RuleBody::Throw { condition, expect_throw } => format!(
                "if {} then checkThrow({}, {})",
                condition.describe(),
                self.target.name,
                expect_throw
            ),
            RuleBody::Call { condition, callee, with } => {
                let mut s = format!("if {} then checkCall({}, {})", condition.describe(), self.target.name, callee);
                if let Some(w) = with {
                    s.push_str(&format!(" with {}", w.describe()));
                }
                s
            }
            RuleBody::Emit { condition, event, with } => {
                let mut s = format!("if {} then checkEmit({}, {})", condition.describe(), self.target.name, event);
                if let Some(w) = with {
                    s.push_str(&format!(" with {}", w.describe()));
                }
                s
            }
            RuleBody::Assign { value1, value2 } => format!(
                "checkEndValue({}, {}, {})",
                self.target.name,
                value1.describe(),
                value2.describe()
            ),
            RuleBody::Follow { op1, op2, order_op1, order_op2 } => format!(
                "checkOrder({}, {}, getOrder({}, {}))",
                op1.describe(),
                op2.describe(),
                order_op1.describe(),
                order_op2.describe()
            ),
            RuleBody::Decl { signature } => format!("declare {}", signature.pretty()),
        }
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rule {index}: {message}")]
    Schema { index: usize, message: String },
}

/// A validation finding; diagnostics are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule_id: String,
    pub message: String,
}

fn is_solidity_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

fn const_literal_ok(s: &str) -> bool {
    if let Some(hex) = s.strip_prefix("0x") {
        !hex.is_empty() && hex.len() <= 64 && hex.chars().all(|c| c.is_ascii_hexdigit())
    } else {
        !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) && {
            // must fit in 256 bits
            primitive_types::U256::from_dec_str(s).is_ok()
        }
    }
}

fn check_value(v: &Value, index: usize) -> Result<(), RuleError> {
    let err = |message: String| RuleError::Schema { index, message };
    match v {
        Value::Const(c) if !const_literal_ok(c) => Err(err(format!("bad constant literal `{c}`"))),
        Value::GetFieldValue { field, keys } => {
            check_field_ref(field, index)?;
            keys.iter().try_for_each(|k| check_value(k, index))
        }
        Value::GetPara { target, .. } if !is_solidity_ident(target) => {
            Err(err(format!("getPara target `{target}` is not an identifier")))
        }
        _ => Ok(()),
    }
}

fn check_field_ref(f: &FieldRef, index: usize) -> Result<(), RuleError> {
    let name = match f {
        FieldRef::Literal { name } => name,
        FieldRef::Anchor { function } => function,
    };
    if is_solidity_ident(name) {
        Ok(())
    } else {
        Err(RuleError::Schema {
            index,
            message: format!("field reference `{name}` is not an identifier"),
        })
    }
}

fn check_bexp(b: &BExp, index: usize) -> Result<(), RuleError> {
    match b {
        BExp::True => Ok(()),
        BExp::And(a, b2) | BExp::Or(a, b2) => {
            check_bexp(a, index)?;
            check_bexp(b2, index)
        }
        BExp::Not(a) => check_bexp(a, index),
        BExp::Cmp { lhs, rhs, .. } => {
            check_value(lhs, index)?;
            check_value(rhs, index)
        }
        BExp::CheckChange { field, keys } => {
            check_field_ref(field, index)?;
            keys.iter().try_for_each(|k| check_value(k, index))
        }
        BExp::CheckMint { field } | BExp::CheckBurn { field } => check_field_ref(field, index),
    }
}

fn check_op_ref(op: &OpRef, index: usize) -> Result<(), RuleError> {
    match op {
        OpRef::FieldWrite { field, keys } => {
            check_field_ref(field, index)?;
            keys.iter().try_for_each(|k| check_value(k, index))
        }
        OpRef::Call { function } | OpRef::Emit { event: function } => {
            if is_solidity_ident(function) {
                Ok(())
            } else {
                Err(RuleError::Schema {
                    index,
                    message: format!("`{function}` is not an identifier"),
                })
            }
        }
    }
}

/// Check kind/body agreement and identifier well-formedness for one rule.
pub fn check_rule_shape(rule: &FormalRule, index: usize) -> Result<(), RuleError> {
    let err = |message: &str| RuleError::Schema {
        index,
        message: message.to_string(),
    };
    if !is_solidity_ident(&rule.target.name) {
        return Err(err(&format!("target `{}` is not an identifier", rule.target.name)));
    }
    match (&rule.kind, &rule.body) {
        (RuleKind::Throw, RuleBody::Throw { condition, .. }) => check_bexp(condition, index),
        (RuleKind::Call, RuleBody::Call { condition, callee, with }) => {
            if !is_solidity_ident(callee) {
                return Err(err(&format!("callee `{callee}` is not an identifier")));
            }
            check_bexp(condition, index)?;
            with.as_ref().map_or(Ok(()), |w| check_bexp(w, index))
        }
        (RuleKind::Emit, RuleBody::Emit { condition, event, with }) => {
            if !is_solidity_ident(event) {
                return Err(err(&format!("event `{event}` is not an identifier")));
            }
            check_bexp(condition, index)?;
            with.as_ref().map_or(Ok(()), |w| check_bexp(w, index))
        }
        (RuleKind::Assign, RuleBody::Assign { value1, value2 }) => {
            check_value(value1, index)?;
            check_value(value2, index)
        }
        (RuleKind::Follow, RuleBody::Follow { op1, op2, order_op1, order_op2 }) => {
            for op in [op1, op2, order_op1, order_op2] {
                check_op_ref(op, index)?;
            }
            Ok(())
        }
        (RuleKind::ApiDecl, RuleBody::Decl { signature }) => {
            if signature.is_event {
                return Err(err("api_decl body carries an event signature"));
            }
            Ok(())
        }
        (RuleKind::EventDecl, RuleBody::Decl { signature }) => {
            if !signature.is_event {
                return Err(err("event_decl body carries a function signature"));
            }
            if !signature.returns.is_empty() {
                return Err(err("event signature has return types"));
            }
            Ok(())
        }
        (kind, _) => Err(err(&format!("body does not match kind {kind:?}"))),
    }
}

/// Parse a `rules.json` document into validated rules, preserving order.
pub fn parse_rule_json(doc: &str) -> Result<Vec<FormalRule>, RuleError> {
    let rules: Vec<FormalRule> = serde_json::from_str(doc)?;
    for (index, rule) in rules.iter().enumerate() {
        check_rule_shape(rule, index)?;
    }
    Ok(rules)
}

/// Serialize rules to the canonical `rules.json` form (stable key order,
/// two-space indentation, trailing newline).
pub fn serialize_rule_json(rules: &[FormalRule]) -> String {
    let mut out = serde_json::to_string_pretty(rules).expect("rules serialize");
    out.push('\n');
    out
}

fn values_in_bexp<'a>(b: &'a BExp, out: &mut Vec<&'a Value>) {
    match b {
        BExp::True => {}
        BExp::And(a, b2) | BExp::Or(a, b2) => {
            values_in_bexp(a, out);
            values_in_bexp(b2, out);
        }
        BExp::Not(a) => values_in_bexp(a, out),
        BExp::Cmp { lhs, rhs, .. } => {
            out.push(lhs);
            out.push(rhs);
        }
        BExp::CheckChange { keys, .. } => out.extend(keys.iter()),
        BExp::CheckMint { .. } | BExp::CheckBurn { .. } => {}
    }
}

fn anchors_in_bexp<'a>(b: &'a BExp, out: &mut Vec<&'a str>) {
    fn from_value<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
        if let Value::GetFieldValue { field, keys } = v {
            if let FieldRef::Anchor { function } = field {
                out.push(function);
            }
            for k in keys {
                from_value(k, out);
            }
        }
    }
    let mut vals = Vec::new();
    values_in_bexp(b, &mut vals);
    for v in vals {
        from_value(v, out);
    }
    match b {
        BExp::And(a, b2) | BExp::Or(a, b2) => {
            anchors_in_bexp(a, out);
            anchors_in_bexp(b2, out);
        }
        BExp::Not(a) => anchors_in_bexp(a, out),
        BExp::CheckChange { field, .. } | BExp::CheckMint { field } | BExp::CheckBurn { field } => {
            if let FieldRef::Anchor { function } = field {
                out.push(function);
            }
        }
        _ => {}
    }
}

/// Validate one rule against the ERC's declared interface. Returns an empty
/// list iff every referenced function, event, and anchor exists with a
/// compatible arity.
pub fn validate_rule(rule: &FormalRule, erc_interface: &[Signature]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut push = |message: String| {
        diags.push(Diagnostic {
            rule_id: rule.id.clone(),
            message,
        })
    };
    let functions: BTreeSet<&str> = erc_interface
        .iter()
        .filter(|s| !s.is_event)
        .map(|s| s.name.as_str())
        .collect();
    let events: BTreeSet<&str> = erc_interface
        .iter()
        .filter(|s| s.is_event)
        .map(|s| s.name.as_str())
        .collect();
    let arity_of = |name: &str| -> Option<usize> {
        erc_interface.iter().find(|s| s.name == name).map(|s| s.arity())
    };

    match rule.target.kind {
        TargetKind::Function if !functions.contains(rule.target.name.as_str()) => {
            push(format!("unknown target function `{}`", rule.target.name));
        }
        TargetKind::Event if !events.contains(rule.target.name.as_str()) => {
            push(format!("unknown target event `{}`", rule.target.name));
        }
        _ => {}
    }

    // Collect every BExp and Value in the body, then check references.
    let mut bexps: Vec<&BExp> = Vec::new();
    let mut vals: Vec<&Value> = Vec::new();
    match &rule.body {
        RuleBody::Throw { condition, .. } => bexps.push(condition),
        RuleBody::Call { condition, callee, with } => {
            if !functions.contains(callee.as_str()) {
                push(format!("unknown callee `{callee}`"));
            }
            bexps.push(condition);
            if let Some(w) = with {
                bexps.push(w);
            }
        }
        RuleBody::Emit { condition, event, with } => {
            if !events.contains(event.as_str()) {
                push(format!("unknown event `{event}`"));
            }
            bexps.push(condition);
            if let Some(w) = with {
                bexps.push(w);
            }
        }
        RuleBody::Assign { value1, value2 } => {
            vals.push(value1);
            vals.push(value2);
        }
        RuleBody::Follow { op1, op2, order_op1, order_op2 } => {
            for op in [op1, op2, order_op1, order_op2] {
                match op {
                    OpRef::Call { function } if !functions.contains(function.as_str()) => {
                        push(format!("unknown callee `{function}`"));
                    }
                    OpRef::Emit { event } if !events.contains(event.as_str()) => {
                        push(format!("unknown event `{event}`"));
                    }
                    _ => {}
                }
            }
        }
        RuleBody::Decl { .. } => {}
    }

    let mut anchors: Vec<&str> = Vec::new();
    for b in &bexps {
        anchors_in_bexp(b, &mut anchors);
        values_in_bexp(b, &mut vals);
    }
    for v in &vals {
        collect_nested_values(v, &mut anchors);
    }
    for anchor in anchors {
        if !functions.contains(anchor) {
            diags.push(Diagnostic {
                rule_id: rule.id.clone(),
                message: format!("unknown anchor function `{anchor}`"),
            });
        }
    }

    let target_arity = arity_of(&rule.target.name);
    let mut stack: Vec<&Value> = vals;
    while let Some(v) = stack.pop() {
        match v {
            Value::Param(i) => {
                if let Some(a) = target_arity {
                    if *i >= a {
                        diags.push(Diagnostic {
                            rule_id: rule.id.clone(),
                            message: format!("parameter index {i} out of range for `{}` (arity {a})", rule.target.name),
                        });
                    }
                }
            }
            Value::GetPara { target, index } => {
                match arity_of(target) {
                    Some(a) if *index >= a => diags.push(Diagnostic {
                        rule_id: rule.id.clone(),
                        message: format!("getPara index {index} out of range for `{target}` (arity {a})"),
                    }),
                    None => diags.push(Diagnostic {
                        rule_id: rule.id.clone(),
                        message: format!("getPara references unknown `{target}`"),
                    }),
                    _ => {}
                }
            }
            Value::GetFieldValue { keys, .. } => stack.extend(keys.iter()),
            _ => {}
        }
    }

    diags
}

fn collect_nested_values<'a>(v: &'a Value, anchors: &mut Vec<&'a str>) {
    if let Value::GetFieldValue { field, keys } = v {
        if let FieldRef::Anchor { function } = field {
            anchors.push(function);
        }
        for k in keys {
            collect_nested_values(k, anchors);
        }
    }
}
