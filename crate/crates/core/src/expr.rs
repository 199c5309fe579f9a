//! Field expression language: parser, printer, dimension inference and jet evaluation.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := unary (("*"|"/") unary)*
//! unary  := "-" unary | factor
//! factor := base ("^" ["-"] int_literal)?
//! base   := real | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers are `x0..x3`, constant names, or one of `sqrt exp log sin cos`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;

use crate::error::{CqmError, Result};
use crate::jet::{EvalPoint, Jet};
use crate::units::{Dim, ScaledReal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(String),
    Var(u8),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
}

const FUNCTIONS: [(&str, UnaryOp); 5] = [("sqrt", UnaryOp::Sqrt), ("exp", UnaryOp::Exp), ("log", UnaryOp::Log), ("sin", UnaryOp::Sin), ("cos", UnaryOp::Cos)];

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: u8) -> Expr {
        Expr::Var(i)
    }

    pub fn constant(name: &str) -> Expr {
        Expr::Const(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn powi(a: Expr, n: i32) -> Expr {
        Expr::PowInt(Box::new(a), n)
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Whether chart variable `x^i` occurs.
    pub fn uses_var(&self, i: u8) -> bool {
        match self {
            Expr::Var(j) => *j == i,
            Expr::Unary(_, a) | Expr::PowInt(a, _) => a.uses_var(i),
            Expr::Binary(_, a, b) => a.uses_var(i) || b.uses_var(i),
            Expr::Num(_) | Expr::Const(_) => false,
        }
    }

    /// Names of all constants referenced.
    pub fn constants(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_constants(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_constants(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(n) => out.push(n.clone()),
            Expr::Unary(_, a) | Expr::PowInt(a, _) => a.collect_constants(out),
            Expr::Binary(_, a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            Expr::Num(_) | Expr::Var(_) => {}
        }
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start_col = col;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_int = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                is_int = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_int = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let err = || CqmError::Syntax { line, col: start_col, msg: format!("bad number '{text}'") };
            let tok = if is_int {
                match text.parse::<i64>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => Tok::Num(text.parse::<f64>().map_err(|_| err())?),
                }
            } else {
                let v = text.parse::<f64>().map_err(|_| err())?;
                if !v.is_finite() {
                    return Err(err());
                }
                Tok::Num(v)
            };
            col += i - start;
            out.push(Token { tok, line, col: start_col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(text), line, col: start_col });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, col });
            i += 1;
            col += 1;
            continue;
        }
        return Err(CqmError::Syntax { line, col, msg: format!("unexpected character '{c}'") });
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T> {
        Err(CqmError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym('+') {
                BinOp::Add
            } else if self.is_sym('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_sym('*') {
                BinOp::Mul
            } else if self.is_sym('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.is_sym('-') {
            self.next();
            return Ok(Expr::un(UnaryOp::Neg, self.unary()?));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if !self.is_sym('^') {
            return Ok(base);
        }
        self.next();
        let neg = if self.is_sym('-') {
            self.next();
            true
        } else {
            false
        };
        let t = self.next();
        match t.tok {
            Tok::Int(n) if n <= i32::MAX as i64 => Ok(Expr::powi(base, if neg { -(n as i32) } else { n as i32 })),
            _ => self.err(&t, "exponent must be an integer literal"),
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::Int(n) => Ok(Expr::Num(*n as f64)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                let close = self.next();
                if close.tok != Tok::Sym(')') {
                    return self.err(&close, "expected ')'");
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.is_sym('(') {
                    let op = FUNCTIONS.iter().find(|(f, _)| f == name).map(|(_, op)| *op);
                    let Some(op) = op else {
                        return Err(CqmError::UnknownIdentifier(name.clone()));
                    };
                    self.next();
                    let arg = self.expr()?;
                    let close = self.next();
                    if close.tok != Tok::Sym(')') {
                        return self.err(&close, "expected ')'");
                    }
                    return Ok(Expr::un(op, arg));
                }
                if let Some(d) = name.strip_prefix('x') {
                    if let Ok(i) = d.parse::<u8>() {
                        if i < 4 && d.len() == 1 {
                            return Ok(Expr::Var(i));
                        }
                    }
                }
                if FUNCTIONS.iter().any(|(f, _)| f == name) {
                    return self.err(&t, format!("function '{name}' needs an argument"));
                }
                Ok(Expr::Const(name.clone()))
            }
            Tok::End => self.err(&t, "unexpected end of input"),
            other => self.err(&t, format!("unexpected token {}", tok_text(other))),
        }
    }
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Num(v) => v.to_string(),
        Tok::Int(n) => n.to_string(),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::End => "end of input".into(),
    }
}

/// Parses an expression. Constant names are not resolved here; see [`parse_checked`].
pub fn parse(src: &str) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.err(&t, format!("unexpected token {}", tok_text(&t.tok)));
    }
    Ok(e)
}

/// Parses and checks that every constant is in `constants`.
pub fn parse_checked(src: &str, constants: &Constants) -> Result<Expr> {
    let e = parse(src)?;
    for c in e.constants() {
        if !constants.contains(&c) {
            return Err(CqmError::UnknownIdentifier(c));
        }
    }
    Ok(e)
}

// ---------------------------------------------------------------- printer

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, _, _) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, _, _) => 2,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        Expr::PowInt(_, _) => 4,
        Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_expr(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = prec(e) < min;
    if paren {
        write!(f, "(")?;
    }
    match e {
        Expr::Num(v) => {
            if v.is_sign_negative() {
                write!(f, "-{:?}", -v)?;
            } else {
                write!(f, "{v:?}")?;
            }
        }
        Expr::Const(n) => write!(f, "{n}")?,
        Expr::Var(i) => write!(f, "x{i}")?,
        Expr::Unary(UnaryOp::Neg, a) => {
            write!(f, "-")?;
            write_expr(a, 3, f)?;
        }
        Expr::Unary(op, a) => {
            let name = FUNCTIONS.iter().find(|(_, o)| o == op).unwrap().0;
            write!(f, "{name}(")?;
            write_expr(a, 0, f)?;
            write!(f, ")")?;
        }
        Expr::Binary(op, a, b) => {
            let (p, s) = match op {
                BinOp::Add => (1, " + "),
                BinOp::Sub => (1, " - "),
                BinOp::Mul => (2, "*"),
                BinOp::Div => (2, "/"),
            };
            write_expr(a, p, f)?;
            write!(f, "{s}")?;
            write_expr(b, p + 1, f)?;
        }
        Expr::PowInt(a, n) => {
            write_expr(a, 5, f)?;
            write!(f, "^{n}")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, 0, f)
    }
}

// ---------------------------------------------------------------- constants

/// Named constants with dimensions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constants {
    map: BTreeMap<String, ScaledReal>,
}

impl Constants {
    pub fn new() -> Constants {
        Constants::default()
    }

    pub fn insert(&mut self, name: &str, v: ScaledReal) {
        self.map.insert(name.to_string(), v);
    }

    pub fn with(mut self, name: &str, value: f64, dim: Dim) -> Result<Constants> {
        self.insert(name, ScaledReal::new(value, dim)?);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<ScaledReal> {
        self.map.get(name).copied()
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|s| s.value())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ScaledReal)> {
        self.map.iter()
    }
}

// ---------------------------------------------------------------- evaluation

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    PowInt(Box<Node>, i32),
}

fn compile(e: &Expr, c: &Constants) -> Result<Node> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Const(n) => Node::Num(c.value(n).ok_or_else(|| CqmError::UnknownIdentifier(n.clone()))?),
        Expr::Var(i) => Node::Var(*i as usize),
        Expr::Unary(op, a) => Node::Unary(*op, Box::new(compile(a, c)?)),
        Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(compile(a, c)?), Box::new(compile(b, c)?)),
        Expr::PowInt(a, n) => Node::PowInt(Box::new(compile(a, c)?), *n),
    })
}

fn eval_node(n: &Node, p: &EvalPoint, order: usize) -> Result<Jet> {
    Ok(match n {
        Node::Num(v) => Jet::constant(*v, order),
        Node::Var(i) => Jet::seed(p, *i, order)?,
        Node::Unary(op, a) => {
            let a = eval_node(a, p, order)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sqrt => a.sqrt()?,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => a.ln()?,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
            }
        }
        Node::Binary(op, a, b) => {
            let a = eval_node(a, p, order)?;
            let b = eval_node(b, p, order)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a.try_div(&b)?,
            }
        }
        Node::PowInt(a, k) => eval_node(a, p, order)?.powi(*k)?,
    })
}

fn is_const_node(n: &Node) -> bool {
    match n {
        Node::Num(_) => true,
        Node::Var(_) => false,
        Node::Unary(_, a) | Node::PowInt(a, _) => is_const_node(a),
        Node::Binary(_, a, b) => is_const_node(a) && is_const_node(b),
    }
}

/// Inferred dimension; `None` marks a bare numeric literal that adopts any dimension.
pub fn infer_dim(e: &Expr, c: &Constants) -> Result<Option<Dim>> {
    let mismatch = |ctx: &str, l: Dim, r: Dim| CqmError::DimensionMismatch { context: ctx.into(), left: l, right: r };
    Ok(match e {
        Expr::Num(_) => None,
        Expr::Var(_) => Some(Dim::NONE),
        Expr::Const(n) => Some(c.get(n).ok_or_else(|| CqmError::UnknownIdentifier(n.clone()))?.dim()),
        Expr::Unary(UnaryOp::Neg, a) => infer_dim(a, c)?,
        Expr::Unary(UnaryOp::Sqrt, a) => infer_dim(a, c)?.map(|d| d.pow(Rational64::new(1, 2))),
        Expr::Unary(op, a) => {
            if let Some(d) = infer_dim(a, c)? {
                if !d.is_dimensionless() {
                    return Err(mismatch(&format!("{op:?} argument"), d, Dim::NONE));
                }
            }
            Some(Dim::NONE)
        }
        Expr::Binary(op, a, b) => {
            let (da, db) = (infer_dim(a, c)?, infer_dim(b, c)?);
            match op {
                BinOp::Add | BinOp::Sub => match (da, db) {
                    (Some(x), Some(y)) if x != y => return Err(mismatch(&format!("{op:?}"), x, y)),
                    (Some(x), _) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                },
                BinOp::Mul => match (da, db) {
                    (Some(x), Some(y)) => Some(x * y),
                    (x, None) => x,
                    (None, y) => y,
                },
                BinOp::Div => match (da, db) {
                    (Some(x), Some(y)) => Some(x / y),
                    (x, None) => x,
                    (None, Some(y)) => Some(Dim::NONE / y),
                },
            }
        }
        Expr::PowInt(a, n) => infer_dim(a, c)?.map(|d| d.pow(Rational64::from_integer(*n as i64))),
    })
}

/// A named scalar field with a declared dimension, compiled against a constant table.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDef {
    pub name: String,
    pub dim: Dim,
    pub expr: Expr,
    node: Node,
    constant: bool,
}

impl FieldDef {
    /// Checks the dimension once and resolves constants.
    pub fn new(name: &str, dim: Dim, expr: Expr, c: &Constants) -> Result<FieldDef> {
        let node = compile(&expr, c)?;
        if let Some(d) = infer_dim(&expr, c)? {
            if !d.is_dimensionless() && d != dim {
                return Err(CqmError::DimensionMismatch { context: format!("field '{name}'"), left: d, right: dim });
            }
        }
        let constant = is_const_node(&node);
        Ok(FieldDef { name: name.to_string(), dim, expr, node, constant })
    }

    pub fn parse(name: &str, dim: Dim, src: &str, c: &Constants) -> Result<FieldDef> {
        FieldDef::new(name, dim, parse_checked(src, c)?, c)
    }

    pub fn literal(name: &str, v: f64) -> FieldDef {
        let node = Node::Num(v);
        FieldDef { name: name.to_string(), dim: Dim::NONE, expr: Expr::Num(v), node, constant: true }
    }

    /// True when the field does not depend on the chart variables.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node, Node::Num(v) if v == 0.0)
    }

    pub fn eval(&self, p: &EvalPoint, order: usize) -> Result<Jet> {
        if order > crate::jet::MAX_ORDER {
            return Err(CqmError::OrderOutOfRange(order));
        }
        if let Node::Num(v) = self.node {
            return Ok(Jet::constant(v, order));
        }
        eval_node(&self.node, p, order)
    }

    pub fn value(&self, p: &EvalPoint) -> Result<f64> {
        Ok(self.eval(p, 0)?.value())
    }
}

/// Evaluates a field at a point to the given jet order.
pub fn eval_field(def: &FieldDef, point: &EvalPoint, order: usize) -> Result<Jet> {
    def.eval(point, order)
}
