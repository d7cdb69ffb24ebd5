//! Expression language for Lagrangians, metric entries and diffeomorphisms.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?          exponent := '-' exponent | power
//! atom    := number | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and its exponent must fold to a constant.
//! Variables are `x_i`, `y1_i`, `y2_i` with 1-based `i`; curve expressions
//! additionally accept `t`. Functions: `exp`, `log` (alias `ln`), `sin`,
//! `cos`, `sqrt`.

use std::fmt;

use crate::bundle::{Block, Coord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Constant exponent of a power node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowExp {
    Int(i32),
    Real(f64),
}

impl PowExp {
    fn from_value(v: f64) -> Self {
        if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 {
            PowExp::Int(v as i32)
        } else {
            PowExp::Real(v)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            PowExp::Int(k) => k as f64,
            PowExp::Real(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Coord),
    /// Curve parameter, only in curve mode.
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, PowExp),
    Call(Func, Box<Expr>),
}

/// Which free symbols the parser accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `x_i`, `y1_i`, `y2_i`.
    Bundle,
    /// `x_i` only (base-manifold functions such as metric entries).
    Base,
    /// `t` only.
    Curve,
}

pub fn parse_expression(src: &str, n: usize) -> Result<Expr> {
    Parser::new(src, n, Mode::Bundle).parse()
}

pub fn parse_base_expression(src: &str, n: usize) -> Result<Expr> {
    Parser::new(src, n, Mode::Base).parse()
}

pub fn parse_curve_expression(src: &str) -> Result<Expr> {
    Parser::new(src, 0, Mode::Curve).parse()
}

impl Expr {
    pub fn var(c: Coord) -> Expr {
        Expr::Var(c)
    }

    /// Evaluate with `z` the flat `[x, y1, y2]` coordinates.
    pub fn eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        self.eval_with(z, None)
    }

    /// Evaluate a curve expression at parameter `t`.
    pub fn eval_curve<S: Scalar>(&self, t: &S) -> Result<S> {
        self.eval_with(&[], Some(t))
    }

    fn eval_with<S: Scalar>(&self, z: &[S], t: Option<&S>) -> Result<S> {
        use num_traits::{Float, Zero};
        let v = match self {
            Expr::Const(c) => S::lit(*c),
            Expr::Var(c) => {
                let n = z.len() / 3;
                let idx = c.block.offset(n) + c.index;
                if c.index >= n || idx >= z.len() {
                    return Err(Error::Index { index: c.index + 1, dimension: n });
                }
                z[idx].clone()
            }
            Expr::Time => match t {
                Some(t) => t.clone(),
                None => return Err(Error::Invalid("`t` used outside a curve expression".into())),
            },
            Expr::Neg(a) => -a.eval_with(z, t)?,
            Expr::Add(a, b) => a.eval_with(z, t)? + b.eval_with(z, t)?,
            Expr::Sub(a, b) => a.eval_with(z, t)? - b.eval_with(z, t)?,
            Expr::Mul(a, b) => a.eval_with(z, t)? * b.eval_with(z, t)?,
            Expr::Div(a, b) => {
                let num = a.eval_with(z, t)?;
                let den = b.eval_with(z, t)?;
                let tiny = Float::sqrt(<S::Real as Float>::min_positive_value());
                if Float::abs(den.real()) < tiny {
                    return Err(Error::Domain(format!("division by ~0 in `{self}`")));
                }
                num / den
            }
            Expr::Pow(a, e) => {
                let base = a.eval_with(z, t)?;
                let b = base.real();
                match *e {
                    PowExp::Int(k) => {
                        if k < 0 && b.is_zero() {
                            return Err(Error::Domain(format!("negative power of 0 in `{self}`")));
                        }
                        base.powi(k)
                    }
                    PowExp::Real(r) => {
                        if b < S::Real::zero() || (b.is_zero() && !base.is_constant()) {
                            return Err(Error::Domain(format!("real power of a non-positive base in `{self}`")));
                        }
                        base.powf(<S::Real as Scalar>::lit(r))
                    }
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval_with(z, t)?;
                let r = x.real();
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if r <= S::Real::zero() {
                            return Err(Error::Domain(format!("log of non-positive value in `{self}`")));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => {
                        if r < S::Real::zero() || (r.is_zero() && !x.is_constant()) {
                            return Err(Error::Domain(format!("sqrt outside its domain in `{self}`")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !v.real().is_finite() {
            return Err(Error::Domain(format!("non-finite value in `{self}`")));
        }
        Ok(v)
    }

    /// Symbolic partial derivative with respect to a coordinate.
    pub fn diff(&self, c: Coord) -> Expr {
        self.diff_by(&|e| matches!(e, Expr::Var(v) if *v == c))
    }

    /// Symbolic derivative with respect to the curve parameter.
    pub fn diff_t(&self) -> Expr {
        self.diff_by(&|e| matches!(e, Expr::Time))
    }

    fn diff_by(&self, is_var: &dyn Fn(&Expr) -> bool) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var(_) | Time => Const(if is_var(self) { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff_by(is_var)),
            Add(a, b) => add(a.diff_by(is_var), b.diff_by(is_var)),
            Sub(a, b) => sub(a.diff_by(is_var), b.diff_by(is_var)),
            Mul(a, b) => add(mul(a.diff_by(is_var), (**b).clone()), mul((**a).clone(), b.diff_by(is_var))),
            Div(a, b) => {
                let num = sub(mul(a.diff_by(is_var), (**b).clone()), mul((**a).clone(), b.diff_by(is_var)));
                div(num, pow((**b).clone(), PowExp::Int(2)))
            }
            Pow(a, e) => {
                let da = a.diff_by(is_var);
                let lower = match *e {
                    PowExp::Int(k) => PowExp::Int(k - 1),
                    PowExp::Real(r) => PowExp::Real(r - 1.0),
                };
                mul(mul(Const(e.value()), pow((**a).clone(), lower)), da)
            }
            Call(f, a) => {
                let da = a.diff_by(is_var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => Call(Func::Exp, Box::new(inner)),
                    Func::Log => div(Const(1.0), inner),
                    Func::Sin => Call(Func::Cos, Box::new(inner)),
                    Func::Cos => neg(Call(Func::Sin, Box::new(inner))),
                    Func::Sqrt => div(Const(0.5), Call(Func::Sqrt, Box::new(inner))),
                };
                mul(outer, da)
            }
        }
    }

    /// Replace every base coordinate `xⁱ` by `x[i]`.
    pub fn substitute(&self, x: &[Expr]) -> Expr {
        match self {
            Expr::Var(c) if c.block == Block::X => x[c.index].clone(),
            Expr::Var(_) | Expr::Const(_) | Expr::Time => self.clone(),
            Expr::Neg(a) => neg(a.substitute(x)),
            Expr::Add(a, b) => add(a.substitute(x), b.substitute(x)),
            Expr::Sub(a, b) => sub(a.substitute(x), b.substitute(x)),
            Expr::Mul(a, b) => mul(a.substitute(x), b.substitute(x)),
            Expr::Div(a, b) => div(a.substitute(x), b.substitute(x)),
            Expr::Pow(a, e) => pow(a.substitute(x), *e),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(x))),
        }
    }

    /// True if the expression mentions a coordinate of `block`.
    pub fn uses_block(&self, block: Block) -> bool {
        match self {
            Expr::Var(c) => c.block == block,
            Expr::Const(_) | Expr::Time => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.uses_block(block),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_block(block) || b.uses_block(block)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => b,
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), _) if *x == 0.0 => neg(b),
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) | (_, Expr::Const(x)) if *x == 0.0 => Expr::Const(0.0),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(y)) if *y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, e: PowExp) -> Expr {
    match e {
        PowExp::Int(0) => Expr::Const(1.0),
        PowExp::Int(1) => a,
        _ => Expr::Pow(Box::new(a), e),
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let a = c.abs();
    let body = if a != 0.0 && !(1e-4..1e15).contains(&a) { format!("{a:e}") } else { format!("{a}") };
    if c.is_sign_negative() {
        write!(f, "(-{body})")
    } else {
        write!(f, "{body}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Operands binding looser than required get parentheses; right
        // operands of left-associative operators also get them at equal
        // precedence, so printing then parsing reproduces the tree.
        let wrap = |e: &Expr, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(c) => write!(f, "{}_{}", c.block.prefix(), c.index + 1),
            Expr::Time => write!(f, "t"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(a, 3, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                wrap(a, 1, f)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                wrap(b, 2, f)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                wrap(a, 2, f)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                wrap(b, 4, f)
            }
            Expr::Pow(a, e) => {
                wrap(a, 5, f)?;
                write!(f, "^")?;
                match *e {
                    PowExp::Int(k) if k < 0 => write!(f, "(-{})", -(k as i64)),
                    PowExp::Int(k) => write!(f, "{k}"),
                    PowExp::Real(r) => fmt_const(r, f),
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
    mode: Mode,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize, mode: Mode) -> Self {
        Parser { src: src.as_bytes(), pos: 0, n, mode }
    }

    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: at, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if self.peek().is_none() {
            return self.err(0, "empty expression");
        }
        let e = self.expr()?;
        if let Some(c) = self.peek() {
            return self.err(self.pos, format!("unexpected `{}`", c as char));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let e = self.exponent()?;
        match fold_const(&e) {
            Some(v) if v.is_finite() => Ok(Expr::Pow(Box::new(base), PowExp::from_value(v))),
            _ => self.err(at, "exponent must be a constant"),
        }
    }

    fn exponent(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.exponent()?)))
        } else {
            self.power()
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return self.err(self.pos, "unexpected end of input"),
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return self.err(self.pos, "expected `)`");
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..end]).expect("ascii");
            self.pos = end;
            if let Some(func) = Func::from_name(ident) {
                if !self.eat(b'(') {
                    return self.err(self.pos, format!("expected `(` after `{ident}`"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return self.err(self.pos, "expected `)`");
                }
                return Ok(Expr::Call(func, Box::new(arg)));
            }
            if ident == "t" {
                if self.mode != Mode::Curve {
                    return self.err(start, "`t` is only allowed in curve expressions");
                }
                return Ok(Expr::Time);
            }
            let block = match ident {
                "x" => Block::X,
                "y1" => Block::Y1,
                "y2" => Block::Y2,
                _ => return self.err(start, format!("unknown identifier `{ident}`")),
            };
            if self.mode == Mode::Curve || (self.mode == Mode::Base && block != Block::X) {
                return self.err(start, format!("variable `{ident}` not allowed here"));
            }
            if self.src.get(self.pos) != Some(&b'_') {
                return self.err(self.pos, format!("expected `_<index>` after `{ident}`"));
            }
            self.pos += 1;
            let digits_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits_start == self.pos {
                return self.err(self.pos, "expected variable index");
            }
            let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii");
            let index: usize = match text.parse() {
                Ok(i) => i,
                Err(_) => return self.err(digits_start, "variable index too large"),
            };
            if index == 0 {
                return self.err(digits_start, "variable indices start at 1");
            }
            if index > self.n {
                return Err(Error::Index { index, dimension: self.n });
            }
            return Ok(Expr::Var(Coord { block, index: index - 1 }));
        }
        self.err(start, format!("unexpected `{}`", c as char))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut end = start;
        while end < s.len() && (s[end].is_ascii_digit() || s[end] == b'.') {
            end += 1;
        }
        if end < s.len() && (s[end] == b'e' || s[end] == b'E') {
            let mut k = end + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if k < s.len() && s[k].is_ascii_digit() {
                while k < s.len() && s[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = std::str::from_utf8(&s[start..end]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(Expr::Const(v))
            }
            _ => self.err(start, format!("malformed number `{text}`")),
        }
    }
}

fn fold_const(e: &Expr) -> Option<f64> {
    Some(match e {
        Expr::Const(c) => *c,
        Expr::Neg(a) => -fold_const(a)?,
        Expr::Add(a, b) => fold_const(a)? + fold_const(b)?,
        Expr::Sub(a, b) => fold_const(a)? - fold_const(b)?,
        Expr::Mul(a, b) => fold_const(a)? * fold_const(b)?,
        Expr::Div(a, b) => fold_const(a)? / fold_const(b)?,
        Expr::Pow(a, p) => fold_const(a)?.powf(p.value()),
        Expr::Call(f, a) => {
            let x = fold_const(a)?;
            match f {
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sqrt => x.sqrt(),
            }
        }
        Expr::Var(_) | Expr::Time => return None,
    })
}
