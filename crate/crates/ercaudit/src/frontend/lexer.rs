//! Hand-rolled lexer for the supported Solidity subset.

use primitive_types::U256;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: self.line.min(other.line),
            col: if other.line < self.line { other.col } else { self.col },
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(U256),
    Str(String),
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Arrow, // =>
    Assign,
    PlusAssign,
    MinusAssign,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Question,
    Colon,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Number(n) => write!(f, "{n}"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Semi => ";",
                    Tok::Comma => ",",
                    Tok::Dot => ".",
                    Tok::Arrow => "=>",
                    Tok::Assign => "=",
                    Tok::PlusAssign => "+=",
                    Tok::MinusAssign => "-=",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::EqEq => "==",
                    Tok::NotEq => "!=",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Gt => ">",
                    Tok::Ge => ">=",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    Tok::Bang => "!",
                    Tok::Question => "?",
                    Tok::Colon => ":",
                    Tok::Eof => "<eof>",
                    _ => unreachable!(),
                };
                write!(f, "{s}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, thiserror::Error)]
#[error("lex error at {span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! span1 {
        ($start:expr, $len:expr, $line:expr, $col:expr) => {
            Span {
                start: $start,
                end: $start + $len,
                line: $line,
                col: $col,
            }
        };
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        let (start, sline, scol) = (i, line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_ascii_whitespace() => {
                i += 1;
                col += 1;
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == b'*' => {
                i += 2;
                col += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(LexError {
                            span: span1!(start, 2, sline, scol),
                            message: "unterminated block comment".into(),
                        });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        col += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }
            '"' | '\'' => {
                let quote = bytes[i];
                i += 1;
                col += 1;
                let text_start = i;
                while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                    i += 1;
                    col += 1;
                }
                if i >= bytes.len() || bytes[i] != quote {
                    return Err(LexError {
                        span: span1!(start, i - start, sline, scol),
                        message: "unterminated string literal".into(),
                    });
                }
                let text = src[text_start..i].to_string();
                i += 1;
                col += 1;
                toks.push(Token {
                    tok: Tok::Str(text),
                    span: span1!(start, i - start, sline, scol),
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                while i < bytes.len() {
                    let b = bytes[i] as char;
                    if b.is_ascii_alphanumeric() || b == '_' || b == '$' {
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    span: span1!(start, i - start, sline, scol),
                });
            }
            c if c.is_ascii_digit() => {
                let radix16 = c == '0' && i + 1 < bytes.len() && (bytes[i + 1] == b'x' || bytes[i + 1] == b'X');
                if radix16 {
                    i += 2;
                    col += 2;
                }
                let digits_start = i;
                while i < bytes.len() {
                    let b = bytes[i] as char;
                    let ok = if radix16 { b.is_ascii_hexdigit() } else { b.is_ascii_digit() };
                    if ok || b == '_' {
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                let digits: String = src[if radix16 { digits_start } else { start }..i]
                    .chars()
                    .filter(|c| *c != '_')
                    .collect();
                let value = if radix16 {
                    U256::from_str_radix(&digits, 16).ok()
                } else {
                    U256::from_dec_str(&digits).ok()
                };
                // scientific notation like 1e18
                let value = match value {
                    Some(v)
                        if !radix16
                            && i < bytes.len()
                            && bytes[i] == b'e'
                            && i + 1 < bytes.len()
                            && bytes[i + 1].is_ascii_digit() =>
                    {
                        i += 1;
                        col += 1;
                        let e_start = i;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                            col += 1;
                        }
                        let exp: u32 = src[e_start..i].parse().map_err(|_| LexError {
                            span: span1!(start, i - start, sline, scol),
                            message: "bad exponent".into(),
                        })?;
                        let mut acc = v;
                        for _ in 0..exp {
                            acc = acc.overflowing_mul(U256::from(10)).0;
                        }
                        Some(acc)
                    }
                    other => other,
                };
                let value = value.ok_or_else(|| LexError {
                    span: span1!(start, i - start, sline, scol),
                    message: "integer literal out of range".into(),
                })?;
                toks.push(Token {
                    tok: Tok::Number(value),
                    span: span1!(start, i - start, sline, scol),
                });
            }
            _ => {
                let two = if i + 1 < bytes.len() { &src[i..i + 2] } else { "" };
                let (tok, len) = match two {
                    "=>" => (Tok::Arrow, 2),
                    "==" => (Tok::EqEq, 2),
                    "!=" => (Tok::NotEq, 2),
                    "<=" => (Tok::Le, 2),
                    ">=" => (Tok::Ge, 2),
                    "&&" => (Tok::AndAnd, 2),
                    "||" => (Tok::OrOr, 2),
                    "+=" => (Tok::PlusAssign, 2),
                    "-=" => (Tok::MinusAssign, 2),
                    _ => {
                        let t = match c {
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            '{' => Tok::LBrace,
                            '}' => Tok::RBrace,
                            '[' => Tok::LBracket,
                            ']' => Tok::RBracket,
                            ';' => Tok::Semi,
                            ',' => Tok::Comma,
                            '.' => Tok::Dot,
                            '=' => Tok::Assign,
                            '+' => Tok::Plus,
                            '-' => Tok::Minus,
                            '*' => Tok::Star,
                            '/' => Tok::Slash,
                            '<' => Tok::Lt,
                            '>' => Tok::Gt,
                            '!' => Tok::Bang,
                            '?' => Tok::Question,
                            ':' => Tok::Colon,
                            other => {
                                return Err(LexError {
                                    span: span1!(start, 1, sline, scol),
                                    message: format!("unexpected character `{other}`"),
                                })
                            }
                        };
                        (t, 1)
                    }
                };
                i += len;
                col += len as u32;
                toks.push(Token {
                    tok,
                    span: span1!(start, len, sline, scol),
                });
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: Span {
            start: src.len(),
            end: src.len(),
            line,
            col,
        },
    });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_declaration() {
        let toks = lex("function transferFrom(address _from, address _to, uint256 _value) public returns (bool);").unwrap();
        assert!(matches!(&toks[0].tok, Tok::Ident(s) if s == "function"));
        assert_eq!(toks.last().unwrap().tok, Tok::Eof);
    }

    #[test]
    fn tracks_lines() {
        let toks = lex("a\nb\n  c").unwrap();
        assert_eq!(toks[2].span.line, 3);
        assert_eq!(toks[2].span.col, 3);
    }

    #[test]
    fn hex_and_exponent_literals() {
        let toks = lex("0xff 2e3").unwrap();
        assert_eq!(toks[0].tok, Tok::Number(U256::from(255)));
        assert_eq!(toks[1].tok, Tok::Number(U256::from(2000)));
    }
}
