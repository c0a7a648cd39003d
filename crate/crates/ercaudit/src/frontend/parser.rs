//! Recursive-descent parser for the supported Solidity subset.

use crate::frontend::ast::*;
use crate::frontend::lexer::{lex, LexError, Span, Tok, Token};
use crate::rule_ir::{ParamDecl, Signature, SolType};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("parse error at {span}: {message}")]
    Syntax { span: Span, message: String },
    #[error("unsupported feature at {span}: {feature}")]
    Unsupported { span: Span, feature: String },
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "assembly",
    "try",
    "delegatecall",
    "selfdestruct",
    "struct",
    "enum",
    "library",
    "using",
];

impl Parser {
    pub fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if self.peek() == &tok {
            Ok(self.bump())
        } else {
            Err(ParseError::Syntax {
                span: self.span(),
                message: format!("expected `{tok}`, found `{}`", self.peek()),
            })
        }
    }

    fn eat_ident(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.span();
                self.bump();
                Ok((s, span))
            }
            other => Err(ParseError::Syntax {
                span: self.span(),
                message: format!("expected identifier, found `{other}`"),
            }),
        }
    }

    /// Skip a balanced `{ ... }` block, assuming the opening brace is next.
    fn skip_braced(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::LBrace)?;
        let mut depth = 1usize;
        loop {
            match self.peek() {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return Ok(());
                    }
                }
                Tok::Eof => {
                    return Err(ParseError::Syntax {
                        span: self.span(),
                        message: "unbalanced braces".into(),
                    })
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn skip_to_semi(&mut self) {
        while !matches!(self.peek(), Tok::Semi | Tok::Eof) {
            self.bump();
        }
        self.eat(&Tok::Semi);
    }

    // -- top level ----------------------------------------------------------

    pub fn parse_file(&mut self) -> Result<Vec<ContractAst>, ParseError> {
        let mut contracts = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "pragma" || kw == "import" => self.skip_to_semi(),
                Tok::Ident(kw) if kw == "interface" || kw == "abstract" => {
                    // interfaces are skipped wholesale; they only matter for types
                    // we do not model
                    while !matches!(self.peek(), Tok::LBrace | Tok::Eof) {
                        self.bump();
                    }
                    self.skip_braced()?;
                }
                Tok::Ident(kw) if kw == "contract" => contracts.push(self.parse_contract()?),
                _ => {
                    return Err(ParseError::Syntax {
                        span: self.span(),
                        message: format!("expected contract definition, found `{}`", self.peek()),
                    })
                }
            }
        }
        Ok(contracts)
    }

    fn parse_contract(&mut self) -> Result<ContractAst, ParseError> {
        let start = self.span();
        self.expect(Tok::Ident("contract".into()))?;
        let (name, _) = self.expect_ident()?;
        let mut parents = Vec::new();
        if self.eat_ident("is") {
            loop {
                let (p, _) = self.expect_ident()?;
                parents.push(p);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::LBrace)?;
        let mut contract = ContractAst {
            name,
            parents,
            fields: Vec::new(),
            events: Vec::new(),
            functions: Vec::new(),
            modifiers: Vec::new(),
            span: start,
        };
        while !self.eat(&Tok::RBrace) {
            match self.peek_ident() {
                Some("function") | Some("constructor") => {
                    let f = self.parse_function()?;
                    contract.functions.push(f);
                }
                Some("event") => {
                    let sig = self.parse_event_decl()?;
                    contract.events.push(sig);
                }
                Some("modifier") => {
                    let m = self.parse_modifier()?;
                    contract.modifiers.push(m);
                }
                Some(kw) if UNSUPPORTED_KEYWORDS.contains(&kw) => {
                    return Err(ParseError::Unsupported {
                        span: self.span(),
                        feature: kw.to_string(),
                    })
                }
                Some(_) => {
                    let f = self.parse_field()?;
                    contract.fields.push(f);
                }
                None => {
                    return Err(ParseError::Syntax {
                        span: self.span(),
                        message: format!("unexpected `{}` in contract body", self.peek()),
                    })
                }
            }
        }
        contract.span = start.join(self.prev_span());
        Ok(contract)
    }

    fn parse_type(&mut self) -> Result<SolType, ParseError> {
        let (name, span) = self.expect_ident()?;
        let mut ty = SolType::parse(&name).ok_or(ParseError::Unsupported {
            span,
            feature: format!("type `{name}`"),
        })?;
        while self.peek() == &Tok::LBracket && self.peek_at(1) == &Tok::RBracket {
            self.bump();
            self.bump();
            ty = SolType::Array(Box::new(ty));
        }
        Ok(ty)
    }

    fn parse_field(&mut self) -> Result<FieldAst, ParseError> {
        let start = self.span();
        let ty = if self.eat_ident("mapping") {
            self.parse_mapping_type()?
        } else {
            FieldType::Elem(self.parse_type()?)
        };
        let mut visibility = Visibility::Internal;
        let mut constant = false;
        let mut immutable = false;
        loop {
            match self.peek_ident() {
                Some("public") => {
                    visibility = Visibility::Public;
                    self.bump();
                }
                Some("internal") => {
                    visibility = Visibility::Internal;
                    self.bump();
                }
                Some("private") => {
                    visibility = Visibility::Private;
                    self.bump();
                }
                Some("constant") => {
                    constant = true;
                    self.bump();
                }
                Some("immutable") => {
                    immutable = true;
                    self.bump();
                }
                _ => break,
            }
        }
        let (name, _) = self.expect_ident()?;
        let initializer = if self.eat(&Tok::Assign) {
            Some(self.parse_expr()?)
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(FieldAst {
            name,
            ty,
            visibility,
            constant,
            immutable,
            initializer,
            span: start.join(self.prev_span()),
        })
    }

    fn parse_mapping_type(&mut self) -> Result<FieldType, ParseError> {
        // `mapping` already consumed
        self.expect(Tok::LParen)?;
        let key1 = self.parse_type()?;
        self.expect(Tok::Arrow)?;
        if self.eat_ident("mapping") {
            self.expect(Tok::LParen)?;
            let key2 = self.parse_type()?;
            self.expect(Tok::Arrow)?;
            let value = self.parse_type()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::RParen)?;
            Ok(FieldType::Mapping {
                keys: vec![key1, key2],
                value,
            })
        } else {
            let value = self.parse_type()?;
            self.expect(Tok::RParen)?;
            Ok(FieldType::Mapping {
                keys: vec![key1],
                value,
            })
        }
    }

    fn parse_param_list(&mut self, events: bool) -> Result<Vec<ParamDecl>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        loop {
            let ty = self.parse_type()?;
            let mut indexed = false;
            if events && self.eat_ident("indexed") {
                indexed = true;
            }
            // data location markers on reference types
            while matches!(self.peek_ident(), Some("calldata") | Some("memory") | Some("storage")) {
                self.bump();
            }
            let name = match self.peek() {
                Tok::Ident(s) if !["public", "external"].contains(&s.as_str()) => {
                    let n = s.clone();
                    self.bump();
                    Some(n)
                }
                _ => None,
            };
            params.push(ParamDecl { ty, name, indexed });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(params)
    }

    fn parse_event_decl(&mut self) -> Result<Signature, ParseError> {
        self.expect(Tok::Ident("event".into()))?;
        let (name, _) = self.expect_ident()?;
        let params = self.parse_param_list(true)?;
        // `anonymous` tolerated and ignored
        self.eat_ident("anonymous");
        self.expect(Tok::Semi)?;
        Ok(Signature {
            name,
            params,
            returns: vec![],
            is_event: true,
        })
    }

    fn parse_modifier(&mut self) -> Result<ModifierAst, ParseError> {
        let start = self.span();
        self.expect(Tok::Ident("modifier".into()))?;
        let (name, _) = self.expect_ident()?;
        let params = if self.peek() == &Tok::LParen {
            self.parse_param_list(false)?
        } else {
            Vec::new()
        };
        let body = self.parse_block()?;
        Ok(ModifierAst {
            name,
            params,
            body,
            span: start.join(self.prev_span()),
        })
    }

    fn parse_function(&mut self) -> Result<FunctionAst, ParseError> {
        let start = self.span();
        let name = if self.eat_ident("constructor") {
            "__constructor".to_string()
        } else {
            self.expect(Tok::Ident("function".into()))?;
            self.expect_ident()?.0
        };
        let params = self.parse_param_list(false)?;
        let mut visibility = if name == "__constructor" {
            Visibility::Internal
        } else {
            Visibility::Public
        };
        let mut is_view = false;
        let mut is_pure = false;
        let mut modifiers = Vec::new();
        let mut returns = Vec::new();
        loop {
            match self.peek_ident() {
                Some("public") => {
                    visibility = Visibility::Public;
                    self.bump();
                }
                Some("external") => {
                    visibility = Visibility::External;
                    self.bump();
                }
                Some("internal") => {
                    visibility = Visibility::Internal;
                    self.bump();
                }
                Some("private") => {
                    visibility = Visibility::Private;
                    self.bump();
                }
                Some("view") => {
                    is_view = true;
                    self.bump();
                }
                Some("pure") => {
                    is_pure = true;
                    self.bump();
                }
                Some("payable") | Some("virtual") | Some("override") => {
                    self.bump();
                }
                Some("returns") => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    loop {
                        let ty = self.parse_type()?;
                        while matches!(self.peek_ident(), Some("calldata") | Some("memory")) {
                            self.bump();
                        }
                        // named return values are not modeled; tolerate the name
                        if let Tok::Ident(_) = self.peek() {
                            self.bump();
                        }
                        returns.push(ty);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                Some(m)
                    if !UNSUPPORTED_KEYWORDS.contains(&m) && self.peek_at(0) != &Tok::LBrace =>
                {
                    // modifier invocation, optionally with args
                    let (mname, _) = self.expect_ident()?;
                    let args = if self.peek() == &Tok::LParen {
                        self.parse_call_args()?
                    } else {
                        Vec::new()
                    };
                    modifiers.push((mname, args));
                }
                _ => break,
            }
        }
        let sig = Signature {
            name,
            params,
            returns,
            is_event: false,
        };
        let mut unsupported = None;
        let body = if self.eat(&Tok::Semi) {
            None
        } else {
            let body_start = self.pos;
            match self.parse_block() {
                Ok(b) => Some(b),
                Err(ParseError::Unsupported { span, feature }) => {
                    // rewind and skip the whole body; the function stays in the
                    // model but is marked unsupported
                    self.pos = body_start;
                    self.skip_braced()?;
                    unsupported = Some(format!("{feature} at {span}"));
                    None
                }
                Err(e) => return Err(e),
            }
        };
        Ok(FunctionAst {
            sig,
            visibility,
            modifiers,
            is_view,
            is_pure,
            body,
            unsupported,
            span: start.join(self.prev_span()),
        })
    }

    fn parse_block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            stmts.push(self.parse_stmt()?);
        }
        Ok(Block { stmts })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        match self.peek_ident() {
            Some(kw) if UNSUPPORTED_KEYWORDS.contains(&kw) => Err(ParseError::Unsupported {
                span,
                feature: kw.to_string(),
            }),
            Some("if") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                let then = self.parse_stmt_or_block()?;
                let els = if self.eat_ident("else") {
                    Some(self.parse_stmt_or_block()?)
                } else {
                    None
                };
                Ok(Stmt::If {
                    cond,
                    then,
                    els,
                    span: span.join(self.prev_span()),
                })
            }
            Some("while") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                let body = self.parse_stmt_or_block()?;
                Ok(Stmt::While {
                    cond,
                    body,
                    span: span.join(self.prev_span()),
                })
            }
            Some("for") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let init = if self.eat(&Tok::Semi) {
                    None
                } else {
                    Some(Box::new(self.parse_simple_stmt()?))
                };
                let cond = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(Tok::Semi)?;
                let post = if self.peek() == &Tok::RParen {
                    None
                } else {
                    Some(Box::new(self.parse_simple_stmt_no_semi()?))
                };
                self.expect(Tok::RParen)?;
                let body = self.parse_stmt_or_block()?;
                Ok(Stmt::For {
                    init,
                    cond,
                    post,
                    body,
                    span: span.join(self.prev_span()),
                })
            }
            Some("require") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                let msg = if self.eat(&Tok::Comma) {
                    match self.bump().tok {
                        Tok::Str(s) => Some(s),
                        other => {
                            return Err(ParseError::Syntax {
                                span: self.prev_span(),
                                message: format!("expected string message, found `{other}`"),
                            })
                        }
                    }
                } else {
                    None
                };
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Require {
                    cond,
                    msg,
                    span: span.join(self.prev_span()),
                })
            }
            Some("assert") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Assert {
                    cond,
                    span: span.join(self.prev_span()),
                })
            }
            Some("revert") => {
                self.bump();
                let msg = if self.eat(&Tok::LParen) {
                    let m = match self.peek().clone() {
                        Tok::Str(s) => {
                            self.bump();
                            Some(s)
                        }
                        _ => None,
                    };
                    self.expect(Tok::RParen)?;
                    m
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Revert {
                    msg,
                    span: span.join(self.prev_span()),
                })
            }
            Some("emit") => {
                self.bump();
                let (event, _) = self.expect_ident()?;
                let args = self.parse_call_args()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Emit {
                    event,
                    args,
                    span: span.join(self.prev_span()),
                })
            }
            Some("return") => {
                self.bump();
                let value = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return {
                    value,
                    span: span.join(self.prev_span()),
                })
            }
            Some("unchecked") => {
                self.bump();
                let body = self.parse_block()?;
                Ok(Stmt::Unchecked {
                    body,
                    span: span.join(self.prev_span()),
                })
            }
            Some("_") if self.peek_at(1) == &Tok::Semi => {
                self.bump();
                self.bump();
                Ok(Stmt::Placeholder { span })
            }
            _ => {
                let stmt = self.parse_simple_stmt()?;
                Ok(stmt)
            }
        }
    }

    fn parse_stmt_or_block(&mut self) -> Result<Block, ParseError> {
        if self.peek() == &Tok::LBrace {
            self.parse_block()
        } else {
            Ok(Block {
                stmts: vec![self.parse_stmt()?],
            })
        }
    }

    /// Declaration, assignment, or expression statement, consuming the `;`.
    fn parse_simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        let stmt = self.parse_simple_stmt_no_semi()?;
        self.expect(Tok::Semi)?;
        Ok(stmt)
    }

    fn parse_simple_stmt_no_semi(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        // variable declaration: `<type> name [= expr]`
        if let Some(tok) = self.peek_ident() {
            if SolType::parse(tok).is_some() && matches!(self.peek_at(1), Tok::Ident(_)) {
                let ty = self.parse_type()?;
                while matches!(self.peek_ident(), Some("calldata") | Some("memory")) {
                    self.bump();
                }
                let (name, _) = self.expect_ident()?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.parse_expr()?)
                } else {
                    None
                };
                return Ok(Stmt::VarDecl {
                    ty,
                    name,
                    init,
                    span: span.join(self.prev_span()),
                });
            }
        }
        let expr = self.parse_expr()?;
        // assignment?
        let op = match self.peek() {
            Tok::Assign => Some(AssignOp::Set),
            Tok::PlusAssign => Some(AssignOp::Add),
            Tok::MinusAssign => Some(AssignOp::Sub),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let lhs = match expr {
                Expr::Name(name, _) => LValue::Name(name),
                Expr::Index { name, keys, .. } => LValue::Index { name, keys },
                other => {
                    return Err(ParseError::Syntax {
                        span: other.span(),
                        message: "invalid assignment target".into(),
                    })
                }
            };
            let rhs = self.parse_expr()?;
            return Ok(Stmt::Assign {
                lhs,
                op,
                rhs,
                span: span.join(self.prev_span()),
            });
        }
        // `i++` / `i--` sugar
        if let Expr::Name(name, _) = &expr {
            if self.peek() == &Tok::Plus && self.peek_at(1) == &Tok::Plus {
                self.bump();
                self.bump();
                return Ok(Stmt::Assign {
                    lhs: LValue::Name(name.clone()),
                    op: AssignOp::Add,
                    rhs: Expr::Num(primitive_types::U256::one(), span),
                    span: span.join(self.prev_span()),
                });
            }
            if self.peek() == &Tok::Minus && self.peek_at(1) == &Tok::Minus {
                self.bump();
                self.bump();
                return Ok(Stmt::Assign {
                    lhs: LValue::Name(name.clone()),
                    op: AssignOp::Sub,
                    rhs: Expr::Num(primitive_types::U256::one(), span),
                    span: span.join(self.prev_span()),
                });
            }
        }
        Ok(Stmt::ExprStmt {
            expr,
            span: span.join(self.prev_span()),
        })
    }

    fn parse_call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    // -- expressions --------------------------------------------------------

    pub fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.parse_and()?;
            let span = lhs.span().join(rhs.span());
            lhs = Expr::Bin {
                op: BinOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_cmp()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.parse_cmp()?;
            let span = lhs.span().join(rhs.span());
            lhs = Expr::Bin {
                op: BinOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_add()?;
        let op = match self.peek() {
            Tok::EqEq => Some(BinOp::Eq),
            Tok::NotEq => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_add()?;
            let span = lhs.span().join(rhs.span());
            Ok(Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            })
        } else {
            Ok(lhs)
        }
    }

    fn parse_add(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                // leave `++`/`--` for the statement-level increment sugar
                Tok::Plus if self.peek_at(1) != &Tok::Plus => BinOp::Add,
                Tok::Minus if self.peek_at(1) != &Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_mul()?;
            let span = lhs.span().join(rhs.span());
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            let span = lhs.span().join(rhs.span());
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        if self.eat(&Tok::Bang) {
            let inner = self.parse_unary()?;
            let s = span.join(inner.span());
            return Ok(Expr::Not(Box::new(inner), s));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.parse_primary()?;
        loop {
            match self.peek() {
                Tok::LBracket => {
                    let name = match &expr {
                        Expr::Name(n, _) => n.clone(),
                        Expr::Index { .. } => {
                            // extend an existing index chain below
                            String::new()
                        }
                        other => {
                            return Err(ParseError::Syntax {
                                span: other.span(),
                                message: "only named fields can be indexed".into(),
                            })
                        }
                    };
                    self.bump();
                    let key = self.parse_expr()?;
                    let end = self.expect(Tok::RBracket)?.span;
                    expr = match expr {
                        Expr::Index {
                            name,
                            mut keys,
                            span,
                        } => {
                            keys.push(key);
                            Expr::Index {
                                name,
                                keys,
                                span: span.join(end),
                            }
                        }
                        e => Expr::Index {
                            name,
                            keys: vec![key],
                            span: e.span().join(end),
                        },
                    };
                }
                Tok::Dot => {
                    self.bump();
                    let (member, mspan) = self.expect_ident()?;
                    if member == "length" {
                        let s = expr.span().join(mspan);
                        expr = Expr::Length(Box::new(expr), s);
                    } else if self.peek() == &Tok::LParen {
                        let args = self.parse_call_args()?;
                        let s = expr.span().join(self.prev_span());
                        expr = Expr::ExtCall {
                            target: Box::new(expr),
                            function: member,
                            args,
                            span: s,
                        };
                    } else {
                        return Err(ParseError::Unsupported {
                            span: mspan,
                            feature: format!("member access `.{member}`"),
                        });
                    }
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Num(n, span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(id) => match id.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::Bool(true, span))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::Bool(false, span))
                }
                "msg" => {
                    self.bump();
                    self.expect(Tok::Dot)?;
                    let (member, mspan) = self.expect_ident()?;
                    match member.as_str() {
                        "sender" => Ok(Expr::MsgSender(span.join(mspan))),
                        "value" => Ok(Expr::MsgValue(span.join(mspan))),
                        other => Err(ParseError::Unsupported {
                            span: mspan,
                            feature: format!("msg.{other}"),
                        }),
                    }
                }
                "type" => {
                    // only `type(uint256).max`
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let ty = self.parse_type()?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::Dot)?;
                    let (member, mspan) = self.expect_ident()?;
                    if ty == SolType::Uint256 && member == "max" {
                        Ok(Expr::MaxUint(span.join(mspan)))
                    } else {
                        Err(ParseError::Unsupported {
                            span: mspan,
                            feature: format!("type({}).{member}", ty.token()),
                        })
                    }
                }
                "address" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let inner = self.parse_expr()?;
                    let end = self.expect(Tok::RParen)?.span;
                    match inner {
                        Expr::Num(n, _) if n.is_zero() => Ok(Expr::ZeroAddress(span.join(end))),
                        // `address(x)` is an identity cast in our model
                        other => Ok(other),
                    }
                }
                kw if UNSUPPORTED_KEYWORDS.contains(&kw) => Err(ParseError::Unsupported {
                    span,
                    feature: kw.to_string(),
                }),
                _ => {
                    self.bump();
                    if self.peek() == &Tok::LParen {
                        let args = self.parse_call_args()?;
                        Ok(Expr::Call {
                            name: id,
                            args,
                            span: span.join(self.prev_span()),
                        })
                    } else {
                        Ok(Expr::Name(id, span))
                    }
                }
            },
            other => Err(ParseError::Syntax {
                span,
                message: format!("unexpected `{other}` in expression"),
            }),
        }
    }
}

/// Parse one function or event declaration line (as found in ERC documents).
pub fn parse_signature(decl: &str) -> Result<Signature, ParseError> {
    let cleaned = decl.trim().trim_end_matches(';');
    let mut p = Parser::new(cleaned)?;
    if p.eat_ident("event") {
        let (name, _) = p.expect_ident()?;
        let params = p.parse_param_list(true)?;
        return Ok(Signature {
            name,
            params,
            returns: vec![],
            is_event: true,
        });
    }
    p.expect(Tok::Ident("function".into()))
        .map_err(|_| ParseError::Syntax {
            span: Span {
                start: 0,
                end: 0,
                line: 1,
                col: 1,
            },
            message: "expected `function` or `event`".into(),
        })?;
    let (name, _) = p.expect_ident()?;
    let params = p.parse_param_list(false)?;
    let mut returns = Vec::new();
    loop {
        match p.peek_ident() {
            Some("public") | Some("external") | Some("view") | Some("pure") | Some("constant") | Some("payable") => {
                p.bump();
            }
            Some("returns") => {
                p.bump();
                p.expect(Tok::LParen)?;
                loop {
                    let ty = p.parse_type()?;
                    if let Tok::Ident(_) = p.peek() {
                        p.bump();
                    }
                    returns.push(ty);
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
                p.expect(Tok::RParen)?;
            }
            _ => break,
        }
    }
    Ok(Signature {
        name,
        params,
        returns,
        is_event: false,
    })
}

/// Parse a source file into its contracts.
pub fn parse_file(src: &str) -> Result<Vec<ContractAst>, ParseError> {
    Parser::new(src)?.parse_file()
}
