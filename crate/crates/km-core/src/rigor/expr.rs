//! Expression trees over exact rationals with integer powers and square roots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Num(Rational),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sqrt(Box<Expr>),
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(Integer),
    Dec(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            d if d.is_ascii_digit() || d == '.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part = &src[start..i];
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let frac = &src[fs..i];
                    if int_part.is_empty() && frac.is_empty() {
                        return Err(ParseError { pos: start, msg: "lone '.'".into() });
                    }
                    let digits = format!("{int_part}{frac}");
                    let num: Integer = digits.parse().map_err(|_| ParseError {
                        pos: start,
                        msg: "bad decimal".into(),
                    })?;
                    let den = Integer::from(10).pow(frac.len() as u32);
                    out.push((Tok::Dec(Rational::from((num, den))), start));
                } else {
                    let n: Integer = int_part.parse().map_err(|_| ParseError {
                        pos: start,
                        msg: "bad integer".into(),
                    })?;
                    out.push((Tok::Int(n), start));
                }
                continue;
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            other => {
                return Err(ParseError { pos: start, msg: format!("unexpected character '{other}'") })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

// --------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let (mut lhs, mut literal) = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?.0));
                    literal = false;
                }
                Tok::Slash => {
                    self.bump();
                    // `p/q` written with bare literals is one rational constant.
                    if literal && *self.peek2() != Tok::Caret {
                        if let (Tok::Int(q), Expr::Num(p)) = (self.peek().clone(), &lhs) {
                            if q > 0 {
                                self.bump();
                                lhs = Expr::Num(p.clone() / Rational::from(q));
                                literal = false;
                                continue;
                            }
                        }
                    }
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?.0));
                    literal = false;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<(Expr, bool), ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let (inner, literal) = self.factor()?;
            return Ok(match inner {
                Expr::Num(q) if literal => (Expr::Num(-q), true),
                other => (Expr::Neg(Box::new(other)), false),
            });
        }
        let (base, literal) = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let neg = if *self.peek() == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let n = match self.bump() {
                Tok::Int(n) => n,
                _ => return self.err("expected integer exponent"),
            };
            let n = n.to_i32().ok_or(ParseError { pos: self.pos(), msg: "exponent too large".into() })?;
            return Ok((Expr::Pow(Box::new(base), if neg { -n } else { n }), false));
        }
        Ok((base, literal))
    }

    fn atom(&mut self) -> Result<(Expr, bool), ParseError> {
        match self.bump() {
            Tok::Int(n) => Ok((Expr::Num(Rational::from(n)), true)),
            Tok::Dec(q) => Ok((Expr::Num(q), true)),
            Tok::Ident(name) if name == "sqrt" => {
                if self.bump() != Tok::LParen {
                    return self.err("expected '(' after sqrt");
                }
                let inner = self.expr()?;
                if self.bump() != Tok::RParen {
                    return self.err("expected ')'");
                }
                Ok((Expr::Sqrt(Box::new(inner)), false))
            }
            Tok::Ident(name) => Ok((Expr::Var(name), false)),
            Tok::LParen => {
                let inner = self.expr()?;
                if self.bump() != Tok::RParen {
                    return self.err("expected ')'");
                }
                Ok((inner, false))
            }
            Tok::End => self.err("unexpected end of input"),
            t => {
                self.at -= 1;
                self.err(format!("unexpected token {t:?}"))
            }
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_expr(s)
    }
}

// -------------------------------------------------------------- printer

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Var(_) | Expr::Sqrt(_) => 5,
        Expr::Num(q) => match (*q.denom() == 1, *q < 0) {
            (true, false) => 5,
            (true, true) => 3,
            (false, _) => 2,
        },
    }
}

fn write_at(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(e) < min {
        write!(f, "(")?;
        write_bare(e, f)?;
        write!(f, ")")
    } else {
        write_bare(e, f)
    }
}

fn write_bare(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Num(q) => write!(f, "{q}"),
        Expr::Var(v) => write!(f, "{v}"),
        Expr::Neg(a) => {
            write!(f, "-")?;
            if matches!(**a, Expr::Num(_)) {
                write!(f, "(")?;
                write_bare(a, f)?;
                write!(f, ")")
            } else {
                write_at(a, 3, f)
            }
        }
        Expr::Add(a, b) => {
            write_at(a, 1, f)?;
            write!(f, "+")?;
            write_at(b, 2, f)
        }
        Expr::Sub(a, b) => {
            write_at(a, 1, f)?;
            write!(f, "-")?;
            write_at(b, 2, f)
        }
        Expr::Mul(a, b) => {
            write_at(a, 2, f)?;
            write!(f, "*")?;
            write_at(b, 3, f)
        }
        Expr::Div(a, b) => {
            // keep `n/m` from re-reading as one rational literal
            let fold_risk = matches!(&**a, Expr::Num(q) if *q.denom() == 1)
                && matches!(&**b, Expr::Num(q) if *q.denom() == 1 && *q >= 0);
            if fold_risk {
                write!(f, "(")?;
                write_bare(a, f)?;
                write!(f, ")")?;
            } else {
                write_at(a, 2, f)?;
            }
            write!(f, "/")?;
            write_at(b, 3, f)
        }
        Expr::Pow(a, n) => {
            write_at(a, 5, f)?;
            write!(f, "^{n}")
        }
        Expr::Sqrt(a) => {
            write!(f, "sqrt(")?;
            write_bare(a, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bare(self, f)
    }
}

// ------------------------------------------------- smart constructors

fn is_num(e: &Expr, v: i32) -> bool {
    matches!(e, Expr::Num(q) if *q == v)
}

impl Expr {
    pub fn num(q: impl Into<Rational>) -> Expr {
        Expr::Num(q.into())
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn is_zero(&self) -> bool {
        is_num(self, 0)
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(q) => Expr::Num(-q),
            Expr::Neg(x) => *x,
            x => Expr::Neg(Box::new(x)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p + q),
            (a, Expr::Neg(b)) => Expr::sub(a, *b),
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if a == b {
            return Expr::num(0);
        }
        match (a, b) {
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Expr::neg(b),
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p - q),
            // (c + X) - d  →  (c - d) + X
            (Expr::Add(c, x), Expr::Num(d)) if matches!(*c, Expr::Num(_)) => {
                let Expr::Num(c) = *c else { unreachable!() };
                Expr::add(Expr::Num(c - d), *x)
            }
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, _) if a.is_zero() => Expr::num(0),
            (_, b) if b.is_zero() => Expr::num(0),
            (a, b) if is_num(&a, 1) => b,
            (a, b) if is_num(&b, 1) => a,
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p * q),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (a, b) if a.is_zero() && !b.is_zero() => Expr::num(0),
            (a, b) if is_num(&b, 1) => a,
            (Expr::Num(p), Expr::Num(q)) if q != 0 => Expr::Num(p / q),
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (a, n) {
            (_, 0) => Expr::num(1),
            (a, 1) => a,
            (Expr::Num(q), n) if n > 0 || q != 0 => {
                let p = q.clone().pow(n.unsigned_abs());
                Expr::Num(if n > 0 { p } else { p.recip() })
            }
            (a, n) => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn sqrt(a: Expr) -> Expr {
        if let Expr::Num(q) = &a {
            if let Some(r) = rational_sqrt(q) {
                return Expr::Num(r);
            }
        }
        Expr::Sqrt(Box::new(a))
    }

    /// Bottom-up rebuild through the simplifying constructors.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.simplify()),
            Expr::Add(a, b) => Expr::add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => Expr::sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => Expr::mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => Expr::div(a.simplify(), b.simplify()),
            Expr::Pow(a, n) => Expr::pow(a.simplify(), *n),
            Expr::Sqrt(a) => Expr::sqrt(a.simplify()),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Structural substitution; no simplification.
    pub fn substitute(&self, var: &str, by: &Expr) -> Expr {
        self.map_vars(&|v| (v == var).then(|| by.clone()))
    }

    pub fn substitute_all(&self, table: &BTreeMap<String, Expr>) -> Expr {
        self.map_vars(&|v| table.get(v).cloned())
    }

    fn map_vars(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        let bx = |e: &Expr| Box::new(e.map_vars(f));
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Div(a, b) => Expr::Div(bx(a), bx(b)),
            Expr::Pow(a, n) => Expr::Pow(bx(a), *n),
            Expr::Sqrt(a) => Expr::Sqrt(bx(a)),
        }
    }

    /// Symbolic partial derivative, lightly simplified.
    pub fn derivative(&self, var: &str) -> Expr {
        match self {
            Expr::Num(_) => Expr::num(0),
            Expr::Var(v) => Expr::num(i32::from(v == var)),
            Expr::Neg(a) => Expr::neg(a.derivative(var)),
            Expr::Add(a, b) => Expr::add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(var), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => {
                let (da, db) = (a.derivative(var), b.derivative(var));
                if db.is_zero() {
                    return Expr::div(da, (**b).clone());
                }
                Expr::div(
                    Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                    Expr::pow((**b).clone(), 2),
                )
            }
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::num(*n), Expr::pow((**a).clone(), n - 1)),
                a.derivative(var),
            ),
            Expr::Sqrt(a) => {
                let da = a.derivative(var);
                if da.is_zero() {
                    return Expr::num(0);
                }
                Expr::div(da, Expr::mul(Expr::num(2), self.clone()))
            }
        }
    }

    /// Plain double evaluation; NaN on domain errors.
    pub fn eval_f64(&self, env: &BTreeMap<String, f64>) -> f64 {
        match self {
            Expr::Num(q) => q.to_f64(),
            Expr::Var(v) => env.get(v).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval_f64(env),
            Expr::Add(a, b) => a.eval_f64(env) + b.eval_f64(env),
            Expr::Sub(a, b) => a.eval_f64(env) - b.eval_f64(env),
            Expr::Mul(a, b) => a.eval_f64(env) * b.eval_f64(env),
            Expr::Div(a, b) => a.eval_f64(env) / b.eval_f64(env),
            Expr::Pow(a, n) => a.eval_f64(env).powi(*n),
            Expr::Sqrt(a) => a.eval_f64(env).sqrt(),
        }
    }

    /// Exact value in Q(√2) when every radical resolves there.
    pub fn eval_exact(&self, env: &BTreeMap<String, QSqrt2>) -> Option<QSqrt2> {
        Some(match self {
            Expr::Num(q) => QSqrt2::rational(q.clone()),
            Expr::Var(v) => env.get(v)?.clone(),
            Expr::Neg(a) => a.eval_exact(env)?.neg(),
            Expr::Add(a, b) => a.eval_exact(env)?.add(&b.eval_exact(env)?),
            Expr::Sub(a, b) => a.eval_exact(env)?.sub(&b.eval_exact(env)?),
            Expr::Mul(a, b) => a.eval_exact(env)?.mul(&b.eval_exact(env)?),
            Expr::Div(a, b) => a.eval_exact(env)?.div(&b.eval_exact(env)?)?,
            Expr::Pow(a, n) => a.eval_exact(env)?.powi(*n)?,
            Expr::Sqrt(a) => a.eval_exact(env)?.sqrt()?,
        })
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if *q < 0 || !q.numer().is_perfect_square() || !q.denom().is_perfect_square() {
        return None;
    }
    Some(Rational::from((q.numer().clone().sqrt(), q.denom().clone().sqrt())))
}

/// a + b·√2 with rational a, b.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSqrt2 {
    pub a: Rational,
    pub b: Rational,
}

impl QSqrt2 {
    pub fn rational(a: Rational) -> Self {
        QSqrt2 { a, b: Rational::new() }
    }

    pub fn neg(self) -> Self {
        QSqrt2 { a: -self.a, b: -self.b }
    }

    pub fn add(&self, o: &Self) -> Self {
        QSqrt2 { a: Rational::from(&self.a + &o.a), b: Rational::from(&self.b + &o.b) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        QSqrt2 { a: Rational::from(&self.a - &o.a), b: Rational::from(&self.b - &o.b) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let a = Rational::from(&self.a * &o.a) + Rational::from(&self.b * &o.b) * 2u32;
        let b = Rational::from(&self.a * &o.b) + Rational::from(&self.b * &o.a);
        QSqrt2 { a, b }
    }

    fn norm(&self) -> Rational {
        Rational::from(&self.a * &self.a) - Rational::from(&self.b * &self.b) * 2u32
    }

    pub fn recip(&self) -> Option<Self> {
        let n = self.norm();
        if n == 0 {
            return None;
        }
        Some(QSqrt2 { a: Rational::from(&self.a / &n), b: -Rational::from(&self.b / &n) })
    }

    pub fn div(&self, o: &Self) -> Option<Self> {
        Some(self.mul(&o.recip()?))
    }

    pub fn powi(&self, n: i32) -> Option<Self> {
        let mut acc = QSqrt2::rational(Rational::from(1));
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(self);
        }
        if n < 0 {
            acc.recip()
        } else {
            Some(acc)
        }
    }

    pub fn signum(&self) -> i32 {
        let (sa, sb) = (self.a.cmp0() as i32, self.b.cmp0() as i32);
        if sb == 0 || sa == sb {
            return if sa != 0 { sa } else { sb };
        }
        if sa == 0 {
            return sb;
        }
        // opposite signs: compare a² with 2b²
        sa * (self.norm().cmp0() as i32)
    }

    pub fn sqrt(&self) -> Option<Self> {
        if self.signum() < 0 {
            return None;
        }
        if self.b == 0 {
            if let Some(r) = rational_sqrt(&self.a) {
                return Some(QSqrt2::rational(r));
            }
            let half = Rational::from(&self.a / 2u32);
            return rational_sqrt(&half).map(|r| QSqrt2 { a: Rational::new(), b: r });
        }
        // (c + d√2)² = a + b√2  ⇔  c² + 2d² = a, 2cd = b
        let r = rational_sqrt(&self.norm())?;
        for c2 in [Rational::from(&self.a + &r) / 2u32, Rational::from(&self.a - &r) / 2u32] {
            if let Some(c) = rational_sqrt(&c2) {
                if c == 0 {
                    continue;
                }
                let d = Rational::from(&self.b / &c) / 2u32;
                let cand = QSqrt2 { a: c, b: d };
                if cand.mul(&cand) == *self {
                    return Some(if cand.signum() < 0 { cand.neg() } else { cand });
                }
            }
        }
        None
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + self.b.to_f64() * std::f64::consts::SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn quotient_tree() {
        let e = p("1/(c - s*cos)");
        assert!(matches!(e, Expr::Div(..)));
        assert_eq!(e.free_vars().len(), 3);
    }

    #[test]
    fn rational_literal_folds() {
        assert_eq!(p("107/18"), Expr::num(Rational::from((107, 18))));
        assert_eq!(p("-1/2"), Expr::num(Rational::from((-1, 2))));
        assert!(matches!(p("1/2^2"), Expr::Div(..)));
        assert_eq!(p("0.125"), Expr::num(Rational::from((1, 8))));
        assert_eq!(p("6/4"), Expr::num(Rational::from((3, 2))));
    }

    #[test]
    fn lemma43_discriminant_parses() {
        let e = p("sqrt((1-a)^2*(1-x)^2 + 4*(1-a)*x)");
        assert!(matches!(e, Expr::Sqrt(_)));
        let env = BTreeMap::from([("a".to_string(), 0.5), ("x".to_string(), 0.5)]);
        let want = (0.25f64 * 0.25 + 4.0 * 0.5 * 0.5).sqrt();
        assert!((e.eval_f64(&env) - want).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_expr("1 + * 2").unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(parse_expr("sqrt 2").is_err());
        assert!(parse_expr("(1+2").is_err());
        assert!(parse_expr("x^y").is_err());
    }

    #[test]
    fn printer_round_trips() {
        for s in [
            "(107/18) + (11/3)*sqrt(2)",
            "-x^2 - -3 + 1/2*x",
            "x/(1/2) - (2)/3 + (-1/2)^3",
            "-(-3)*y^-2",
            "--3",
            "a - (b - c) / (d * e)",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
    }

    #[test]
    fn exact_field() {
        let two = QSqrt2::rational(Rational::from(2));
        let r2 = two.sqrt().unwrap();
        assert_eq!(r2, QSqrt2 { a: Rational::new(), b: Rational::from(1) });
        // 3 + 2√2 = (1 + √2)²
        let x = QSqrt2 { a: Rational::from(3), b: Rational::from(2) };
        assert_eq!(x.sqrt().unwrap(), QSqrt2 { a: Rational::from(1), b: Rational::from(1) });
        let y = QSqrt2 { a: Rational::from(1), b: Rational::from(-1) };
        assert_eq!(y.signum(), -1);
        assert!(QSqrt2 { a: Rational::from(5), b: Rational::from(3) }.sqrt().is_none());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let e = p("sqrt((1-a)^2*x^2 + a)/(x+1) - x^3");
        let d = e.derivative("x");
        let at = |x: f64| {
            let env = BTreeMap::from([("a".to_string(), 9.0), ("x".to_string(), x)]);
            (e.eval_f64(&env), d.eval_f64(&env))
        };
        let h = 1e-6;
        let fd = (at(0.1 + h).0 - at(0.1 - h).0) / (2.0 * h);
        assert!((fd - at(0.1).1).abs() < 1e-7);
    }

    #[test]
    fn anchored_difference_cancels() {
        let e = p("sqrt(a) + x");
        let anchor = e.substitute("x", &Expr::num(0)).substitute("a", &p("5+3*sqrt(2)"));
        let diff = Expr::Sub(Box::new(e.clone()), Box::new(anchor));
        let at_corner = diff.substitute("x", &Expr::num(0)).substitute("a", &p("5+3*sqrt(2)"));
        assert!(at_corner.simplify().is_zero());
    }
}
