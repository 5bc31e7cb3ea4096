//! Text front end for constraints.
//!
//! ```text
//! constraint := expr ("<=" | "==") expr
//! expr       := term (("+" | "-") term)*
//! term       := unary (("*" | "/") unary)*
//! unary      := "-" unary | power
//! power      := atom ("^" unary)?            (right associative)
//! atom       := number | "x" digits | "pi" | func "(" expr ("," expr)* ")" | "(" expr ")"
//! func       := sqrt | abs | sin | cos | exp | log | min | max
//! number     := digits ("." digits)? (("e" | "E") ("+" | "-")? digits)?
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. Variables are
//! 1-based (`x1 .. xD`). The right-hand side is folded into the left, so the
//! deviation is `lhs - rhs` for `<=` and `|lhs - rhs|` for `==`.

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    VariableOutOfRange { index: usize, dim: usize },
}

/// Parse failure with the 1-based character column where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {}", describe(.kind))]
pub struct ParseError {
    pub column: usize,
    pub kind: ParseErrorKind,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(msg) => msg.clone(),
        ParseErrorKind::UnknownIdentifier(name) => format!("unknown identifier `{name}`"),
        ParseErrorKind::VariableOutOfRange { index, dim } => {
            format!("variable x{index} out of range for dimension {dim}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// 0-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl fmt::Display for Expr {
    /// Fully parenthesised; reparsing yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn domain(expr: &Expr, message: &str) -> Error {
    Error::Domain {
        expr: expr.to_string(),
        message: message.to_string(),
    }
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain(self, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = pow(a, b);
                        if v.is_nan() {
                            return Err(domain(self, "negative base with non-integer exponent"));
                        }
                        v
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(x)?;
                match func {
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(self, "square root of a negative number"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain(self, "logarithm of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Min => a.min(args[1].eval(x)?),
                    Func::Max => a.max(args[1].eval(x)?),
                }
            }
        })
    }

    /// Largest 0-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_var(),
            Expr::Binary(_, l, r) => l.max_var().max(r.max_var()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }
}

/// Integer exponents go through `powi`, so `x^2` equals `x*x` exactly.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `lhs <= rhs`, deviation `lhs - rhs`.
    LessEq,
    /// `lhs == rhs`, deviation `|lhs - rhs|`.
    Equal,
}

/// A parsed constraint; `expr` already has the right-hand side folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintExpr {
    pub expr: Expr,
    pub relation: Relation,
    pub dim: usize,
}

impl ConstraintExpr {
    /// Signed residual `lhs - rhs`, before the equality absolute value.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let v = self.expr.eval(x)?;
        if !v.is_finite() {
            return Err(domain(&self.expr, "non-finite value"));
        }
        Ok(v)
    }

    /// Deviation: `<= 0` feasible for inequalities, `|·|` for equalities.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(match self.relation {
            Relation::LessEq => r,
            Relation::Equal => r.abs(),
        })
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::LessEq => "<=",
            Relation::Equal => "==",
        };
        write!(f, "{} {rel} 0", self.expr)
    }
}

pub fn parse_constraint(text: &str, dim: usize) -> std::result::Result<ConstraintExpr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        dim,
        end_column: text.chars().count() + 1,
    };
    let lhs = p.expr(0)?;
    let relation = match p.next() {
        Some((Tok::Le, _)) => Relation::LessEq,
        Some((Tok::EqEq, _)) => Relation::Equal,
        Some((t, c)) => {
            return Err(p.syntax(c, format!("expected `<=` or `==`, found {}", t.describe())));
        }
        None => {
            return Err(p.syntax(
                p.end_column,
                "expected `<=` or `==` after expression".into(),
            ));
        }
    };
    let rhs = p.expr(0)?;
    if let Some((t, c)) = p.next() {
        return Err(p.syntax(c, format!("unexpected {} after constraint", t.describe())));
    }
    let expr = if rhs == Expr::Num(0.0) {
        lhs
    } else {
        Expr::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs))
    };
    Ok(ConstraintExpr {
        expr,
        relation,
        dim,
    })
}

/// Parses a bare expression (no relation).
pub fn parse_expr(text: &str, dim: usize) -> std::result::Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        dim,
        end_column: text.chars().count() + 1,
    };
    let e = p.expr(0)?;
    if let Some((t, c)) = p.next() {
        return Err(p.syntax(c, format!("unexpected {}", t.describe())));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Le,
    EqEq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Le => "`<=`".into(),
            Tok::EqEq => "`==`".into(),
        }
    }
}

fn lex(text: &str) -> std::result::Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, msg: String| ParseError {
        column: col,
        kind: ParseErrorKind::Syntax(msg),
    };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, col));
            i += 1;
            continue;
        }
        if c == '<' || c == '=' {
            if chars.get(i + 1) == Some(&'=') {
                out.push((if c == '<' { Tok::Le } else { Tok::EqEq }, col));
                i += 2;
                continue;
            }
            return Err(err(col, format!("expected `{c}=`")));
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| err(col, format!("malformed number `{s}`")))?;
            out.push((Tok::Num(v), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        return Err(err(col, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.end_column, |(_, c)| *c)
    }

    fn syntax(&self, column: usize, msg: String) -> ParseError {
        ParseError {
            column,
            kind: ParseErrorKind::Syntax(msg),
        }
    }

    fn expect(&mut self, want: Tok) -> std::result::Result<(), ParseError> {
        match self.next() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, c)) => Err(self.syntax(
                c,
                format!("expected {}, found {}", want.describe(), t.describe()),
            )),
            None => Err(self.syntax(
                self.end_column,
                format!("expected {}, found end of input", want.describe()),
            )),
        }
    }

    fn expr(&mut self, min_bp: u8) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, bp, right_bp) = match self.peek() {
                Some(Tok::Plus) => (BinOp::Add, BP_ADD, BP_ADD + 1),
                Some(Tok::Minus) => (BinOp::Sub, BP_ADD, BP_ADD + 1),
                Some(Tok::Star) => (BinOp::Mul, BP_MUL, BP_MUL + 1),
                Some(Tok::Slash) => (BinOp::Div, BP_MUL, BP_MUL + 1),
                Some(Tok::Caret) => (BinOp::Pow, BP_POW, BP_POW),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(right_bp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> std::result::Result<Expr, ParseError> {
        let col = self.column();
        match self.next() {
            Some((Tok::Minus, _)) => Ok(Expr::Neg(Box::new(self.expr(BP_NEG)?))),
            Some((Tok::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Tok::LParen, _)) => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some((Tok::Ident(name), _)) => self.identifier(name, col),
            Some((t, c)) => {
                Err(self.syntax(c, format!("expected an operand, found {}", t.describe())))
            }
            None => Err(self.syntax(col, "unexpected end of input".into())),
        }
    }

    fn identifier(&mut self, name: String, col: usize) -> std::result::Result<Expr, ParseError> {
        if let Some(func) = Func::lookup(&name) {
            self.expect(Tok::LParen)?;
            let mut args = vec![self.expr(0)?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                args.push(self.expr(0)?);
            }
            self.expect(Tok::RParen)?;
            if args.len() != func.arity() {
                return Err(self.syntax(
                    col,
                    format!(
                        "`{}` takes {} argument(s), got {}",
                        func.name(),
                        func.arity(),
                        args.len()
                    ),
                ));
            }
            return Ok(Expr::Call(func, args));
        }
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(ParseError {
                        column: col,
                        kind: ParseErrorKind::VariableOutOfRange {
                            index,
                            dim: self.dim,
                        },
                    });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        Err(ParseError {
            column: col,
            kind: ParseErrorKind::UnknownIdentifier(name),
        })
    }
}
