//! Declarative validity predicates over knob values.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! rule   := sum cmp sum
//! cmp    := "<=" | "<" | "==" | ">=" | ">"
//! sum    := term ("+" term)*
//! term   := factor ("*" factor)*
//! factor := identifier | integer
//! ```
//!
//! Identifiers must name knobs of the space the rule is attached to.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn apply(self, lhs: i128, rhs: i128) -> bool {
        match self {
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Knob(usize),
    Int(i64),
}

/// Sum of products.
#[derive(Debug, Clone, PartialEq)]
struct Expr {
    terms: Vec<Vec<Factor>>,
}

impl Expr {
    fn eval(&self, values: &[i64]) -> i128 {
        self.terms
            .iter()
            .map(|term| {
                term.iter().fold(1i128, |acc, f| {
                    let v = match *f {
                        Factor::Knob(i) => values[i] as i128,
                        Factor::Int(c) => c as i128,
                    };
                    acc.saturating_mul(v)
                })
            })
            .fold(0i128, |acc, t| acc.saturating_add(t))
    }

    fn knobs(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().flatten().filter_map(|f| match f {
            Factor::Knob(i) => Some(*i),
            Factor::Int(_) => None,
        })
    }
}

/// A parsed comparison such as `tile_y * tile_x <= 64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityRule {
    source: String,
    lhs: Expr,
    op: CmpOp,
    rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(i64),
    Star,
    Plus,
    Cmp(CmpOp),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '<' | '>' | '=' => {
                let next_eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, next_eq) {
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('>', true) => CmpOp::Ge,
                    ('>', false) => CmpOp::Gt,
                    ('=', true) => CmpOp::Eq,
                    _ => return Err(rule_err(src, i, "expected `==`")),
                };
                out.push(Token::Cmp(op));
                i += if next_eq { 2 } else { 1 };
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v = src[start..i]
                    .parse::<i64>()
                    .map_err(|_| rule_err(src, start, "integer literal overflows 64 bits"))?;
                out.push(Token::Int(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token::Ident(src[start..i].to_string()));
            }
            _ => return Err(rule_err(src, i, &format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

fn rule_err(src: &str, col: usize, msg: &str) -> Error {
    Error::Space(format!("validity_rule `{src}` at column {}: {msg}", col + 1))
}

impl ValidityRule {
    /// Parses `source`, resolving identifiers against `knob_names`.
    pub fn parse(source: &str, knob_names: &[&str]) -> Result<Self> {
        let tokens = tokenize(source)?;
        let cmp_pos: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, Token::Cmp(_)))
            .map(|(i, _)| i)
            .collect();
        let err = |msg: &str| Error::Space(format!("validity_rule `{source}`: {msg}"));
        if cmp_pos.len() != 1 {
            return Err(err("expected exactly one comparison operator"));
        }
        let split = cmp_pos[0];
        let op = match tokens[split] {
            Token::Cmp(op) => op,
            _ => unreachable!(),
        };
        let parse_side = |toks: &[Token]| -> Result<Expr> {
            if toks.is_empty() {
                return Err(err("empty side of comparison"));
            }
            let mut terms = vec![Vec::new()];
            let mut expect_operand = true;
            for t in toks {
                match (t, expect_operand) {
                    (Token::Ident(name), true) => {
                        let idx = knob_names
                            .iter()
                            .position(|n| n == name)
                            .ok_or_else(|| err(&format!("unknown knob `{name}`")))?;
                        terms.last_mut().unwrap().push(Factor::Knob(idx));
                        expect_operand = false;
                    }
                    (Token::Int(v), true) => {
                        terms.last_mut().unwrap().push(Factor::Int(*v));
                        expect_operand = false;
                    }
                    (Token::Star, false) => expect_operand = true,
                    (Token::Plus, false) => {
                        terms.push(Vec::new());
                        expect_operand = true;
                    }
                    _ => return Err(err("malformed expression")),
                }
            }
            if expect_operand {
                return Err(err("expression ends with an operator"));
            }
            Ok(Expr { terms })
        };
        Ok(Self {
            source: source.trim().to_string(),
            lhs: parse_side(&tokens[..split])?,
            op,
            rhs: parse_side(&tokens[split + 1..])?,
        })
    }

    /// Evaluates the rule on knob values (not indices), one per knob.
    pub fn holds(&self, values: &[i64]) -> bool {
        self.op.apply(self.lhs.eval(values), self.rhs.eval(values))
    }

    /// Indices of the knobs the rule mentions, sorted and deduplicated.
    pub fn referenced_knobs(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.lhs.knobs().chain(self.rhs.knobs()).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for ValidityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
