//! Closed intervals of MPFR floats with outward rounding.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rug::float::Round;
use rug::ops::Pow;
use rug::{Float, Rational};
use thiserror::Error;

use super::expr::Expr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("square root of an interval reaching below zero")]
    NegativeRadicand,
    #[error("division by an interval containing zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Float,
    pub hi: Float,
}

/// Variable name → enclosing interval.
pub type IBox = BTreeMap<String, Interval>;

fn rd<T>(prec: u32, v: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Down).0
}

fn ru<T>(prec: u32, v: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Up).0
}

fn fmin(a: Float, b: Float) -> Float {
    if b < a {
        b
    } else {
        a
    }
}

fn fmax(a: Float, b: Float) -> Float {
    if b > a {
        b
    } else {
        a
    }
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec()
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        Interval { lo: rd(prec, q), hi: ru(prec, q) }
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        Interval { lo: rd(prec, x), hi: ru(prec, x) }
    }

    /// Hull of two exact rationals.
    pub fn span(a: &Rational, b: &Rational, prec: u32) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Interval { lo: rd(prec, lo), hi: ru(prec, hi) }
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval { lo: fmin(self.lo.clone(), o.lo.clone()), hi: fmax(self.hi.clone(), o.hi.clone()) }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo <= x && self.hi >= x
    }

    pub fn contains_rational(&self, q: &Rational) -> bool {
        self.lo <= *q && self.hi >= *q
    }

    pub fn contains(&self, o: &Interval) -> bool {
        self.lo <= o.lo && self.hi >= o.hi
    }

    pub fn width(&self) -> Float {
        ru(self.prec(), &self.hi - &self.lo)
    }

    pub fn mid_f64(&self) -> f64 {
        (self.lo.to_f64() + self.hi.to_f64()) / 2.0
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: rd(p, &self.lo + &o.lo), hi: ru(p, &self.hi + &o.hi) }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: rd(p, &self.lo - &o.hi), hi: ru(p, &self.hi - &o.lo) }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo = rd(p, pairs[0].0 * pairs[0].1);
        let mut hi = ru(p, pairs[0].0 * pairs[0].1);
        for (a, b) in &pairs[1..] {
            lo = fmin(lo, rd(p, *a * *b));
            hi = fmax(hi, ru(p, *a * *b));
        }
        Interval { lo, hi }
    }

    pub fn div(&self, o: &Interval) -> Result<Interval, EvalError> {
        if o.contains_zero() {
            return Err(EvalError::DivisionByZero);
        }
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo = rd(p, pairs[0].0 / pairs[0].1);
        let mut hi = ru(p, pairs[0].0 / pairs[0].1);
        for (a, b) in &pairs[1..] {
            lo = fmin(lo, rd(p, *a / *b));
            hi = fmax(hi, ru(p, *a / *b));
        }
        Ok(Interval { lo, hi })
    }

    pub fn sqrt(&self) -> Result<Interval, EvalError> {
        if self.lo < 0 {
            return Err(EvalError::NegativeRadicand);
        }
        let p = self.prec();
        Ok(Interval { lo: rd(p, self.lo.sqrt_ref()), hi: ru(p, self.hi.sqrt_ref()) })
    }

    pub fn powi(&self, n: i32) -> Result<Interval, EvalError> {
        let p = self.prec();
        if n == 0 {
            return Ok(Interval::from_rational(&Rational::from(1), p));
        }
        let m = n.unsigned_abs();
        let pos = if m % 2 == 1 || self.lo >= 0 {
            Interval { lo: rd(p, (&self.lo).pow(m)), hi: ru(p, (&self.hi).pow(m)) }
        } else if self.hi <= 0 {
            Interval { lo: rd(p, (&self.hi).pow(m)), hi: ru(p, (&self.lo).pow(m)) }
        } else {
            let big = fmax(self.lo.clone().abs(), self.hi.clone());
            Interval { lo: Float::with_val(p, 0), hi: ru(p, (&big).pow(m)) }
        };
        if n > 0 {
            Ok(pos)
        } else {
            Interval::from_rational(&Rational::from(1), p).div(&pos)
        }
    }

    /// Endpoints printed with `digits` significant digits, rounded outward.
    pub fn to_strings(&self, digits: usize) -> (String, String) {
        (
            self.lo.to_string_radix_round(10, Some(digits), Round::Down),
            self.hi.to_string_radix_round(10, Some(digits), Round::Up),
        )
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.to_strings(20);
        write!(f, "[{a}, {b}]")
    }
}

/// Rigorous enclosure of `e` over the box.
pub fn iv_eval(e: &Expr, b: &IBox, prec: u32) -> Result<Interval, EvalError> {
    Ok(match e {
        Expr::Num(q) => Interval::from_rational(q, prec),
        Expr::Var(v) => b.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?,
        Expr::Neg(a) => iv_eval(a, b, prec)?.neg(),
        Expr::Add(x, y) => iv_eval(x, b, prec)?.add(&iv_eval(y, b, prec)?),
        Expr::Sub(x, y) => iv_eval(x, b, prec)?.sub(&iv_eval(y, b, prec)?),
        Expr::Mul(x, y) => {
            // x·x is a square
            if x == y {
                return iv_eval(x, b, prec)?.powi(2);
            }
            iv_eval(x, b, prec)?.mul(&iv_eval(y, b, prec)?)
        }
        Expr::Div(x, y) => iv_eval(x, b, prec)?.div(&iv_eval(y, b, prec)?)?,
        Expr::Pow(a, n) => iv_eval(a, b, prec)?.powi(*n)?,
        Expr::Sqrt(a) => iv_eval(a, b, prec)?.sqrt()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigor::expr::parse_expr;

    fn bx(pairs: &[(&str, f64, f64)], prec: u32) -> IBox {
        pairs
            .iter()
            .map(|(n, a, b)| (n.to_string(), Interval::new(Float::with_val(prec, *a), Float::with_val(prec, *b))))
            .collect()
    }

    #[test]
    fn shift_on_unit_range() {
        let e = parse_expr("x+1").unwrap();
        let iv = iv_eval(&e, &bx(&[("x", 1.0, 2.0)], 64), 64).unwrap();
        assert_eq!(iv.lo, 2);
        assert_eq!(iv.hi, 3);
    }

    #[test]
    fn sqrt2_is_tight() {
        let iv = iv_eval(&parse_expr("sqrt(2)").unwrap(), &IBox::new(), 256).unwrap();
        let bound = Float::with_val(256, Float::i_exp(1, -250));
        assert!(iv.width() < bound);
        assert!((iv.mid_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn radicand_and_zero_division_are_errors() {
        let b = bx(&[("x", -1.0, 1.0)], 64);
        assert_eq!(iv_eval(&parse_expr("sqrt(x)").unwrap(), &b, 64), Err(EvalError::NegativeRadicand));
        assert_eq!(iv_eval(&parse_expr("1/x").unwrap(), &b, 64), Err(EvalError::DivisionByZero));
        assert_eq!(
            iv_eval(&parse_expr("y").unwrap(), &b, 64),
            Err(EvalError::Unbound("y".into()))
        );
    }

    #[test]
    fn even_power_through_zero() {
        let b = bx(&[("x", -2.0, 1.0)], 64);
        let iv = iv_eval(&parse_expr("x^2").unwrap(), &b, 64).unwrap();
        assert_eq!(iv.lo, 0);
        assert_eq!(iv.hi, 4);
        let iv = iv_eval(&parse_expr("x^3").unwrap(), &b, 64).unwrap();
        assert_eq!(iv.lo, -8);
        assert_eq!(iv.hi, 1);
    }

    #[test]
    fn one_third_is_bracketed() {
        let iv = Interval::from_rational(&Rational::from((1, 3)), 53);
        assert!(iv.lo < iv.hi);
        assert!(iv.contains_rational(&Rational::from((1, 3))));
    }
}
