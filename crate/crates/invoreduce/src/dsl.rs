//! Surface syntax for operators with involutions.
//!
//! ```text
//! program := decl (";" decl)*
//! decl    := "conductor" INT
//!          | "dim" INT
//!          | "involution" ID "=" matrix "order" INT
//!          | "param" ID "=" expr
//!          | ID "=" expr
//! expr    := ["-"] term (("+"|"-") term)*
//! term    := factor ("*" factor)*
//! factor  := INT ["/" INT] | "z" | ID ["^" INT] | "I"
//!          | "D" "[" INT ("," INT)* "]" | "(" expr ")"
//! matrix  := "[" row ("," row)* "]"
//! row     := "[" expr ("," expr)* "]"
//! ```
//!
//! An involution identifier in an expression denotes the pullback (`A` in
//! source is the operator `A*`); `A^k` reduces the exponent mod the order.
//! `I` is the identity operator, `D[a1,...,an]` the derivative with
//! multi-index `(a1..an)`, and `z` the root of unity of the declared
//! conductor (default 1). `#` starts a line comment. Every identifier must
//! be declared before use; `param` names bind scalars.

use crate::involution::{validate_involution, InvolutionMatrix};
use crate::linalg::Matrix;
use crate::opalgebra::{op_compose, InvOperator, OperatorError};
use crate::scalars::{CycScalar, Rational};
use crate::symtensor::Poly;
use num::BigInt;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("syntax error at {span}: {msg}")]
    Syntax { span: Span, msg: String },
    #[error("undefined identifier `{name}` at {span}")]
    Undefined { span: Span, name: String },
    #[error("dimension mismatch at {span}: {msg}")]
    DimensionMismatch { span: Span, msg: String },
    #[error("exponent out of range at {span}")]
    ExponentOutOfRange { span: Span },
    #[error("duplicate declaration of `{name}` at {span}")]
    Duplicate { span: Span, name: String },
    #[error("error at {span}: {msg}")]
    Semantic { span: Span, msg: String },
}

fn semantic(span: Span, msg: impl Into<String>) -> DslError {
    DslError::Semantic {
        span,
        msg: msg.into(),
    }
}

// --- tokens ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(source: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    tok: Tok::Int(digits),
                    span,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    tok: Tok::Ident(name),
                    span,
                });
            }
            _ => {
                let tok = match c {
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '=' => Tok::Eq,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    '/' => Tok::Slash,
                    other => {
                        return Err(DslError::Syntax {
                            span,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                };
                chars.next();
                col += 1;
                tokens.push(Token { tok, span });
            }
        }
    }
    tokens.push(Token {
        tok: Tok::End,
        span: Span { line, col },
    });
    Ok(tokens)
}

// --- AST ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Signed terms; the bool is true for subtracted terms (including a
    /// leading unary minus).
    Sum(Vec<(bool, Expr)>),
    Product(Vec<Expr>),
    Int(String, Span),
    Rational(String, String, Span),
    Zeta(Span),
    Ident {
        name: String,
        exponent: Option<u32>,
        span: Span,
    },
    IdentityOp(Span),
    Deriv(Vec<u32>, Span),
}

impl Expr {
    fn span(&self) -> Span {
        match self {
            Expr::Sum(terms) => terms
                .first()
                .map(|(_, e)| e.span())
                .unwrap_or(Span { line: 0, col: 0 }),
            Expr::Product(fs) => fs
                .first()
                .map(|e| e.span())
                .unwrap_or(Span { line: 0, col: 0 }),
            Expr::Int(_, s)
            | Expr::Rational(_, _, s)
            | Expr::Zeta(s)
            | Expr::Ident { span: s, .. }
            | Expr::IdentityOp(s)
            | Expr::Deriv(_, s) => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Conductor(u32, Span),
    Dim(usize, Span),
    Involution {
        name: String,
        rows: Vec<Vec<Expr>>,
        order: u32,
        span: Span,
    },
    Param {
        name: String,
        value: Expr,
        span: Span,
    },
    Operator {
        name: String,
        expr: Expr,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramAst {
    pub decls: Vec<Decl>,
}

// --- parser ------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, DslError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(DslError::Syntax {
                span: t.span,
                msg: format!("expected {what}"),
            })
        }
    }

    fn expect_uint(&mut self, what: &str) -> Result<(u128, Span), DslError> {
        let t = self.next();
        if let Tok::Int(digits) = &t.tok {
            let value = digits
                .parse::<u128>()
                .map_err(|_| DslError::ExponentOutOfRange { span: t.span })?;
            Ok((value, t.span))
        } else {
            Err(DslError::Syntax {
                span: t.span,
                msg: format!("expected {what}"),
            })
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), DslError> {
        let t = self.next();
        if let Tok::Ident(name) = &t.tok {
            Ok((name.clone(), t.span))
        } else {
            Err(DslError::Syntax {
                span: t.span,
                msg: format!("expected {what}"),
            })
        }
    }

    fn parse_program(&mut self) -> Result<ProgramAst, DslError> {
        let mut decls = Vec::new();
        loop {
            if self.peek().tok == Tok::End {
                break;
            }
            decls.push(self.parse_decl()?);
            match self.peek().tok {
                Tok::Semi => {
                    self.next();
                }
                Tok::End => break,
                _ => {
                    let t = self.peek();
                    return Err(DslError::Syntax {
                        span: t.span,
                        msg: "expected `;` between declarations".into(),
                    });
                }
            }
        }
        Ok(ProgramAst { decls })
    }

    fn parse_decl(&mut self) -> Result<Decl, DslError> {
        let (name, span) = self.expect_ident("a declaration")?;
        match name.as_str() {
            "conductor" => {
                let (v, vspan) = self.expect_uint("conductor value")?;
                if v == 0 || v > u32::MAX as u128 {
                    return Err(semantic(vspan, "conductor must be a positive integer"));
                }
                Ok(Decl::Conductor(v as u32, span))
            }
            "dim" => {
                let (v, vspan) = self.expect_uint("dimension value")?;
                if v == 0 || v > 64 {
                    return Err(semantic(vspan, "dimension must be between 1 and 64"));
                }
                Ok(Decl::Dim(v as usize, span))
            }
            "involution" => {
                let (inv_name, _) = self.expect_ident("involution name")?;
                self.expect(Tok::Eq, "`=`")?;
                let rows = self.parse_matrix()?;
                let (kw, kwspan) = self.expect_ident("`order`")?;
                if kw != "order" {
                    return Err(DslError::Syntax {
                        span: kwspan,
                        msg: "expected `order`".into(),
                    });
                }
                let (order, ospan) = self.expect_uint("involution order")?;
                if order < 2 || order > 64 {
                    return Err(semantic(ospan, "order must be between 2 and 64"));
                }
                Ok(Decl::Involution {
                    name: inv_name,
                    rows,
                    order: order as u32,
                    span,
                })
            }
            "param" => {
                let (param_name, _) = self.expect_ident("parameter name")?;
                self.expect(Tok::Eq, "`=`")?;
                let value = self.parse_expr()?;
                Ok(Decl::Param {
                    name: param_name,
                    value,
                    span,
                })
            }
            _ => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(DslError::Syntax {
                        span,
                        msg: format!("`{name}` is reserved"),
                    });
                }
                self.expect(Tok::Eq, "`=`")?;
                let expr = self.parse_expr()?;
                Ok(Decl::Operator { name, expr, span })
            }
        }
    }

    fn parse_matrix(&mut self) -> Result<Vec<Vec<Expr>>, DslError> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut rows = Vec::new();
        loop {
            rows.push(self.parse_row()?);
            match self.next() {
                Token { tok: Tok::Comma, .. } => continue,
                Token {
                    tok: Tok::RBracket, ..
                } => break,
                Token { span, .. } => {
                    return Err(DslError::Syntax {
                        span,
                        msg: "expected `,` or `]` in matrix".into(),
                    })
                }
            }
        }
        Ok(rows)
    }

    fn parse_row(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut entries = Vec::new();
        loop {
            entries.push(self.parse_expr()?);
            match self.next() {
                Token { tok: Tok::Comma, .. } => continue,
                Token {
                    tok: Tok::RBracket, ..
                } => break,
                Token { span, .. } => {
                    return Err(DslError::Syntax {
                        span,
                        msg: "expected `,` or `]` in matrix row".into(),
                    })
                }
            }
        }
        Ok(entries)
    }

    fn parse_expr(&mut self) -> Result<Expr, DslError> {
        let mut terms = Vec::new();
        let negate_first = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        terms.push((negate_first, self.parse_term()?));
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    terms.push((false, self.parse_term()?));
                }
                Tok::Minus => {
                    self.next();
                    terms.push((true, self.parse_term()?));
                }
                _ => break,
            }
        }
        if terms.len() == 1 && !terms[0].0 {
            Ok(terms.pop().unwrap().1)
        } else {
            Ok(Expr::Sum(terms))
        }
    }

    fn parse_term(&mut self) -> Result<Expr, DslError> {
        let mut factors = vec![self.parse_factor()?];
        while self.peek().tok == Tok::Star {
            self.next();
            factors.push(self.parse_factor()?);
        }
        if factors.len() == 1 {
            Ok(factors.pop().unwrap())
        } else {
            Ok(Expr::Product(factors))
        }
    }

    fn parse_factor(&mut self) -> Result<Expr, DslError> {
        let t = self.next();
        match t.tok {
            Tok::Int(digits) => {
                if self.peek().tok == Tok::Slash {
                    self.next();
                    let d = self.next();
                    if let Tok::Int(denom) = d.tok {
                        if denom.chars().all(|c| c == '0') {
                            return Err(semantic(d.span, "zero denominator"));
                        }
                        Ok(Expr::Rational(digits, denom, t.span))
                    } else {
                        Err(DslError::Syntax {
                            span: d.span,
                            msg: "expected denominator".into(),
                        })
                    }
                } else {
                    Ok(Expr::Int(digits, t.span))
                }
            }
            Tok::Ident(name) => match name.as_str() {
                "z" => Ok(Expr::Zeta(t.span)),
                "I" => Ok(Expr::IdentityOp(t.span)),
                "D" => {
                    self.expect(Tok::LBracket, "`[` after D")?;
                    let mut exps = Vec::new();
                    loop {
                        let (v, vspan) = self.expect_uint("multi-index entry")?;
                        if v > u32::MAX as u128 {
                            return Err(DslError::ExponentOutOfRange { span: vspan });
                        }
                        exps.push(v as u32);
                        match self.next() {
                            Token { tok: Tok::Comma, .. } => continue,
                            Token {
                                tok: Tok::RBracket, ..
                            } => break,
                            Token { span, .. } => {
                                return Err(DslError::Syntax {
                                    span,
                                    msg: "expected `,` or `]` in multi-index".into(),
                                })
                            }
                        }
                    }
                    Ok(Expr::Deriv(exps, t.span))
                }
                _ => {
                    if RESERVED.contains(&name.as_str()) {
                        return Err(DslError::Syntax {
                            span: t.span,
                            msg: format!("`{name}` is reserved"),
                        });
                    }
                    let exponent = if self.peek().tok == Tok::Caret {
                        self.next();
                        let (v, vspan) = self.expect_uint("exponent")?;
                        if v > u32::MAX as u128 {
                            return Err(DslError::ExponentOutOfRange { span: vspan });
                        }
                        Some(v as u32)
                    } else {
                        None
                    };
                    Ok(Expr::Ident {
                        name,
                        exponent,
                        span: t.span,
                    })
                }
            },
            Tok::LParen => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(DslError::Syntax {
                span: t.span,
                msg: "expected a factor".into(),
            }),
        }
    }
}

const RESERVED: &[&str] = &["conductor", "dim", "involution", "order", "param", "z", "I", "D"];

/// Parses a program source into its syntax tree; errors carry positions.
pub fn parse(source: &str) -> Result<ProgramAst, DslError> {
    let tokens = lex(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.parse_program()
}

// --- printer -----------------------------------------------------------------

/// Canonical source form; parsing the output lowers to identical operators.
pub fn print_program(ast: &ProgramAst) -> String {
    let mut out = String::new();
    for (i, decl) in ast.decls.iter().enumerate() {
        if i > 0 {
            out.push_str(";\n");
        }
        match decl {
            Decl::Conductor(v, _) => {
                let _ = write!(out, "conductor {v}");
            }
            Decl::Dim(v, _) => {
                let _ = write!(out, "dim {v}");
            }
            Decl::Involution {
                name, rows, order, ..
            } => {
                let body = rows
                    .iter()
                    .map(|row| {
                        let cells: Vec<String> = row.iter().map(print_expr).collect();
                        format!("[{}]", cells.join(", "))
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                let _ = write!(out, "involution {name} = [{body}] order {order}");
            }
            Decl::Param { name, value, .. } => {
                let _ = write!(out, "param {name} = {}", print_expr(value));
            }
            Decl::Operator { name, expr, .. } => {
                let _ = write!(out, "{name} = {}", print_expr(expr));
            }
        }
    }
    out.push('\n');
    out
}

fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Sum(terms) => {
            let mut s = String::new();
            for (i, (neg, term)) in terms.iter().enumerate() {
                let body = print_term_level(term);
                if i == 0 {
                    if *neg {
                        s.push('-');
                    }
                    s.push_str(&body);
                } else {
                    s.push_str(if *neg { " - " } else { " + " });
                    s.push_str(&body);
                }
            }
            s
        }
        other => print_term_level(other),
    }
}

fn print_term_level(expr: &Expr) -> String {
    match expr {
        Expr::Product(factors) => factors
            .iter()
            .map(print_factor_level)
            .collect::<Vec<_>>()
            .join("*"),
        other => print_factor_level(other),
    }
}

fn print_factor_level(expr: &Expr) -> String {
    match expr {
        Expr::Sum(_) | Expr::Product(_) => format!("({})", print_expr(expr)),
        Expr::Int(digits, _) => digits.clone(),
        Expr::Rational(n, d, _) => format!("{n}/{d}"),
        Expr::Zeta(_) => "z".into(),
        Expr::Ident { name, exponent, .. } => match exponent {
            Some(e) => format!("{name}^{e}"),
            None => name.clone(),
        },
        Expr::IdentityOp(_) => "I".into(),
        Expr::Deriv(exps, _) => {
            let inner: Vec<String> = exps.iter().map(|e| e.to_string()).collect();
            format!("D[{}]", inner.join(","))
        }
    }
}

// --- lowering ------------------------------------------------------------------

/// Fully elaborated program: named involutions, scalar parameters, and
/// operators in declaration order.
#[derive(Debug, Clone)]
pub struct Program {
    pub conductor: u32,
    pub dim: usize,
    pub involutions: BTreeMap<String, InvolutionMatrix>,
    pub params: BTreeMap<String, CycScalar>,
    pub operators: Vec<(String, InvOperator)>,
}

impl Program {
    pub fn operator(&self, name: &str) -> Option<&InvOperator> {
        self.operators
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, op)| op)
    }
}

enum Value {
    Scalar(CycScalar),
    Operator(InvOperator),
}

struct Lowering {
    conductor: u32,
    dim: Option<usize>,
    involutions: BTreeMap<String, InvolutionMatrix>,
    params: BTreeMap<String, CycScalar>,
    operators: Vec<(String, InvOperator)>,
}

impl Lowering {
    fn require_dim(&self, span: Span) -> Result<usize, DslError> {
        self.dim
            .ok_or_else(|| semantic(span, "`dim` must be declared first"))
    }

    fn wrap_op_err(span: Span, e: OperatorError) -> DslError {
        match e {
            OperatorError::InvolutionMismatch => semantic(
                span,
                "mixed involutions within one operator expression",
            ),
            other => semantic(span, other.to_string()),
        }
    }

    /// The single involution an operator expression may refer to: the one it
    /// names, or the unique declared one when it names none.
    fn resolve_involution(&self, expr: &Expr, span: Span) -> Result<InvolutionMatrix, DslError> {
        let mut named: Vec<String> = Vec::new();
        collect_involution_names(expr, &self.involutions, &mut named);
        named.dedup();
        match named.len() {
            0 => {
                if self.involutions.len() == 1 {
                    Ok(self.involutions.values().next().unwrap().clone())
                } else if self.involutions.is_empty() {
                    Err(semantic(
                        span,
                        "operator expressions need an involution in scope",
                    ))
                } else {
                    Err(semantic(
                        span,
                        "ambiguous involution: several are declared and none is named",
                    ))
                }
            }
            1 => Ok(self.involutions[&named[0]].clone()),
            _ => Err(semantic(
                span,
                "mixed involutions within one operator expression",
            )),
        }
    }

    fn eval_scalar(&self, expr: &Expr) -> Result<CycScalar, DslError> {
        match self.eval(expr, None)? {
            Value::Scalar(s) => Ok(s),
            Value::Operator(_) => Err(semantic(
                expr.span(),
                "expected a scalar expression",
            )),
        }
    }

    fn eval(&self, expr: &Expr, inv: Option<&InvolutionMatrix>) -> Result<Value, DslError> {
        match expr {
            Expr::Int(digits, span) => {
                let n: BigInt = digits
                    .parse()
                    .map_err(|_| semantic(*span, "invalid integer"))?;
                Ok(Value::Scalar(CycScalar::from_rational(
                    self.conductor,
                    Rational::from_integer(n),
                )))
            }
            Expr::Rational(numer, denom, span) => {
                let n: BigInt = numer
                    .parse()
                    .map_err(|_| semantic(*span, "invalid integer"))?;
                let d: BigInt = denom
                    .parse()
                    .map_err(|_| semantic(*span, "invalid integer"))?;
                Ok(Value::Scalar(CycScalar::from_rational(
                    self.conductor,
                    Rational::new(n, d),
                )))
            }
            Expr::Zeta(_) => Ok(Value::Scalar(CycScalar::zeta(self.conductor))),
            Expr::IdentityOp(span) => {
                let inv = inv.ok_or_else(|| {
                    semantic(*span, "identity operator needs an involution in scope")
                })?;
                Ok(Value::Operator(InvOperator::identity(inv.clone())))
            }
            Expr::Deriv(exps, span) => {
                let dim = self.require_dim(*span)?;
                if exps.len() != dim {
                    return Err(DslError::DimensionMismatch {
                        span: *span,
                        msg: format!("multi-index has {} entries, dim is {dim}", exps.len()),
                    });
                }
                let inv = inv.ok_or_else(|| {
                    semantic(*span, "derivative operator needs an involution in scope")
                })?;
                let poly = Poly::monomial(dim, exps, CycScalar::one(self.conductor))
                    .map_err(|e| semantic(*span, e.to_string()))?;
                let op = InvOperator::pullback_term(inv.clone(), 0, poly)
                    .map_err(|e| Self::wrap_op_err(*span, e))?;
                Ok(Value::Operator(op))
            }
            Expr::Ident {
                name,
                exponent,
                span,
            } => {
                if let Some(s) = self.params.get(name) {
                    let v = match exponent {
                        Some(e) => s.pow(*e),
                        None => s.clone(),
                    };
                    return Ok(Value::Scalar(v));
                }
                if let Some(declared) = self.involutions.get(name) {
                    let p = declared.order();
                    let e = exponent.unwrap_or(1) % p;
                    let one = Poly::one(declared.dim(), self.conductor);
                    let op = InvOperator::pullback_term(declared.clone(), e, one)
                        .map_err(|err| Self::wrap_op_err(*span, err))?;
                    return Ok(Value::Operator(op));
                }
                if let Some(op) = self.operators.iter().find(|(n, _)| n == name) {
                    if exponent.is_some() {
                        return Err(semantic(
                            *span,
                            "exponents only apply to involutions and parameters",
                        ));
                    }
                    return Ok(Value::Operator(op.1.clone()));
                }
                Err(DslError::Undefined {
                    span: *span,
                    name: name.clone(),
                })
            }
            Expr::Sum(terms) => {
                let mut acc: Option<Value> = None;
                for (neg, term) in terms {
                    let mut v = self.eval(term, inv)?;
                    if *neg {
                        v = neg_value(v);
                    }
                    acc = Some(match acc {
                        None => v,
                        Some(prev) => add_values(prev, v, term.span(), inv)?,
                    });
                }
                Ok(acc.expect("sum has at least one term"))
            }
            Expr::Product(factors) => {
                let mut acc: Option<Value> = None;
                for factor in factors {
                    let v = self.eval(factor, inv)?;
                    acc = Some(match acc {
                        None => v,
                        Some(prev) => mul_values(prev, v, factor.span())?,
                    });
                }
                Ok(acc.expect("product has at least one factor"))
            }
        }
    }
}

fn collect_involution_names(
    expr: &Expr,
    involutions: &BTreeMap<String, InvolutionMatrix>,
    out: &mut Vec<String>,
) {
    match expr {
        Expr::Ident { name, .. } => {
            if involutions.contains_key(name) && !out.contains(name) {
                out.push(name.clone());
            }
        }
        Expr::Sum(terms) => {
            for (_, t) in terms {
                collect_involution_names(t, involutions, out);
            }
        }
        Expr::Product(fs) => {
            for f in fs {
                collect_involution_names(f, involutions, out);
            }
        }
        _ => {}
    }
}

fn neg_value(v: Value) -> Value {
    match v {
        Value::Scalar(s) => Value::Scalar(s.neg()),
        Value::Operator(op) => Value::Operator(op.neg()),
    }
}

fn lift_scalar(s: CycScalar, inv: Option<&InvolutionMatrix>, span: Span) -> Result<InvOperator, DslError> {
    let inv = inv.ok_or_else(|| semantic(span, "operator context lost"))?;
    InvOperator::identity(inv.clone())
        .scale(&s)
        .map_err(|e| Lowering::wrap_op_err(span, e))
}

fn add_values(
    a: Value,
    b: Value,
    span: Span,
    inv: Option<&InvolutionMatrix>,
) -> Result<Value, DslError> {
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => x
            .checked_add(&y)
            .map(Value::Scalar)
            .map_err(|e| semantic(span, e.to_string())),
        (Value::Operator(x), Value::Operator(y)) => x
            .checked_add(&y)
            .map(Value::Operator)
            .map_err(|e| Lowering::wrap_op_err(span, e)),
        (Value::Scalar(x), Value::Operator(y)) => {
            let lifted = lift_scalar(x, Some(y.involution()).or(inv), span)?;
            lifted
                .checked_add(&y)
                .map(Value::Operator)
                .map_err(|e| Lowering::wrap_op_err(span, e))
        }
        (Value::Operator(x), Value::Scalar(y)) => {
            let lifted = lift_scalar(y, Some(x.involution()).or(inv), span)?;
            x.checked_add(&lifted)
                .map(Value::Operator)
                .map_err(|e| Lowering::wrap_op_err(span, e))
        }
    }
}

fn mul_values(a: Value, b: Value, span: Span) -> Result<Value, DslError> {
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => x
            .checked_mul(&y)
            .map(Value::Scalar)
            .map_err(|e| semantic(span, e.to_string())),
        (Value::Scalar(x), Value::Operator(y)) => y
            .scale(&x)
            .map(Value::Operator)
            .map_err(|e| Lowering::wrap_op_err(span, e)),
        (Value::Operator(x), Value::Scalar(y)) => x
            .scale(&y)
            .map(Value::Operator)
            .map_err(|e| Lowering::wrap_op_err(span, e)),
        (Value::Operator(x), Value::Operator(y)) => op_compose(&x, &y)
            .map(Value::Operator)
            .map_err(|e| Lowering::wrap_op_err(span, e)),
    }
}

/// Elaborates declarations in order; every name must be defined before use.
pub fn lower(ast: &ProgramAst) -> Result<Program, DslError> {
    let mut state = Lowering {
        conductor: 1,
        dim: None,
        involutions: BTreeMap::new(),
        params: BTreeMap::new(),
        operators: Vec::new(),
    };
    let mut conductor_set = false;
    let mut dim_set = false;
    for decl in &ast.decls {
        match decl {
            Decl::Conductor(v, span) => {
                if conductor_set {
                    return Err(DslError::Duplicate {
                        span: *span,
                        name: "conductor".into(),
                    });
                }
                if !state.involutions.is_empty() || !state.params.is_empty() {
                    return Err(semantic(*span, "conductor must precede other declarations"));
                }
                state.conductor = *v;
                conductor_set = true;
            }
            Decl::Dim(v, span) => {
                if dim_set {
                    return Err(DslError::Duplicate {
                        span: *span,
                        name: "dim".into(),
                    });
                }
                state.dim = Some(*v);
                dim_set = true;
            }
            Decl::Involution {
                name,
                rows,
                order,
                span,
            } => {
                if state.involutions.contains_key(name) {
                    return Err(DslError::Duplicate {
                        span: *span,
                        name: name.clone(),
                    });
                }
                let dim = state.require_dim(*span)?;
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(DslError::DimensionMismatch {
                        span: *span,
                        msg: format!("involution matrix must be {dim}x{dim}"),
                    });
                }
                let mut entries = Vec::with_capacity(dim);
                for row in rows {
                    let mut cells = Vec::with_capacity(dim);
                    for cell in row {
                        cells.push(state.eval_scalar(cell)?);
                    }
                    entries.push(cells);
                }
                let matrix = Matrix::from_rows(entries, state.conductor)
                    .map_err(|e| semantic(*span, e.to_string()))?;
                let inv = validate_involution(matrix, *order)
                    .map_err(|e| semantic(*span, e.to_string()))?;
                state.involutions.insert(name.clone(), inv);
            }
            Decl::Param { name, value, span } => {
                if state.params.contains_key(name) {
                    return Err(DslError::Duplicate {
                        span: *span,
                        name: name.clone(),
                    });
                }
                let v = state.eval_scalar(value)?;
                state.params.insert(name.clone(), v);
            }
            Decl::Operator { name, expr, span } => {
                if state.operators.iter().any(|(n, _)| n == name) {
                    return Err(DslError::Duplicate {
                        span: *span,
                        name: name.clone(),
                    });
                }
                state.require_dim(*span)?;
                let inv = state.resolve_involution(expr, *span)?;
                let value = state.eval(expr, Some(&inv))?;
                let op = match value {
                    Value::Operator(op) => op,
                    Value::Scalar(s) => lift_scalar(s, Some(&inv), *span)?,
                };
                state.operators.push((name.clone(), op));
            }
        }
    }
    Ok(Program {
        conductor: state.conductor,
        dim: state.dim.unwrap_or(0),
        involutions: state.involutions,
        params: state.params,
        operators: state.operators,
    })
}
