//! Adaptive bisection certificates for strict bounds and value exclusion.
//!
//! A claim `f > 0` on a box is settled by, in order: the interval
//! enclosure; a sign calculus on the tree (used when the enclosure hits a
//! pole or a negative radicand); a monotone face rule at domain faces
//! (f ≥ 0 on the face and ∂f of the right sign inside); bisection.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::Expr;
use super::interval::{iv_eval, EvalError, IBox, Interval};

pub const DEFAULT_PRECISION: u32 = 256;
pub const DEFAULT_MAX_DEPTH: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("endpoint of `{0}` is not a constant expression")]
    NonConstantEndpoint(String),
    #[error("empty range for `{0}`")]
    EmptyRange(String),
    #[error("variable `{0}` is not bound by the domain")]
    Unbound(String),
    #[error("endpoint of `{var}` cannot be evaluated: {err}")]
    Endpoint { var: String, err: EvalError },
    #[error("precision must be between 32 and 65536 bits, got {0}")]
    Precision(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Proven,
    Undecided,
    Refuted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub statement_id: String,
    pub status: Status,
    pub boxes_examined: u64,
    pub max_depth_reached: usize,
    pub precision_bits: u32,
    /// Tightest undecided box, or the box on which the claim fails.
    pub witness: Option<BTreeMap<String, [String; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Lt,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRange {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl VarRange {
    pub fn new(name: &str, lo: Expr, hi: Expr, lo_open: bool, hi_open: bool) -> Self {
        VarRange { name: name.to_string(), lo, hi, lo_open, hi_open }
    }

    pub fn closed(name: &str, lo: Expr, hi: Expr) -> Self {
        Self::new(name, lo, hi, false, false)
    }

    pub fn open(name: &str, lo: Expr, hi: Expr) -> Self {
        Self::new(name, lo, hi, true, true)
    }
}

pub type Domain = Vec<VarRange>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Settings {
    pub precision: u32,
    pub max_depth: usize,
    /// How many derivative levels the face rule may stack.
    pub face_depth: u8,
    /// Bisection levels that fork onto the rayon pool.
    pub parallel_depth: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { precision: DEFAULT_PRECISION, max_depth: DEFAULT_MAX_DEPTH, face_depth: 2, parallel_depth: 8 }
    }
}

impl Settings {
    pub fn with_precision(precision: u32) -> Self {
        Settings { precision, ..Settings::default() }
    }

    fn check(&self) -> Result<(), CertifyError> {
        if (32..=65536).contains(&self.precision) {
            Ok(())
        } else {
            Err(CertifyError::Precision(self.precision))
        }
    }
}

// ------------------------------------------------------------- cells

#[derive(Debug, Clone)]
struct Side {
    name: String,
    lo: Expr,
    hi: Expr,
    lo_iv: Interval,
    hi_iv: Interval,
    lo_open: bool,
    hi_open: bool,
    lo_edge: bool,
    hi_edge: bool,
}

impl Side {
    fn range(&self) -> Interval {
        Interval { lo: self.lo_iv.lo.clone(), hi: self.hi_iv.hi.clone() }
    }

    fn width(&self) -> f64 {
        self.hi_iv.hi.to_f64() - self.lo_iv.lo.to_f64()
    }
}

fn ibox(cell: &[Side]) -> IBox {
    cell.iter().map(|s| (s.name.clone(), s.range())).collect()
}

fn describe(b: &IBox) -> BTreeMap<String, [String; 2]> {
    b.iter()
        .map(|(k, v)| {
            let (a, c) = v.to_strings(17);
            (k.clone(), [a, c])
        })
        .collect()
}

/// Builds the starting cell; degenerate ranges are substituted into `f`.
fn build(f: &Expr, domain: &Domain, prec: u32) -> Result<(Expr, Vec<Side>), CertifyError> {
    let mut f = f.clone();
    let mut cell = Vec::new();
    for r in domain {
        for end in [&r.lo, &r.hi] {
            if !end.is_constant() {
                return Err(CertifyError::NonConstantEndpoint(r.name.clone()));
            }
        }
        if r.lo == r.hi {
            f = f.substitute(&r.name, &r.lo);
            continue;
        }
        let ev = |e: &Expr| {
            iv_eval(e, &IBox::new(), prec).map_err(|err| CertifyError::Endpoint { var: r.name.clone(), err })
        };
        let (lo_iv, hi_iv) = (ev(&r.lo)?, ev(&r.hi)?);
        if lo_iv.lo >= hi_iv.hi {
            return Err(CertifyError::EmptyRange(r.name.clone()));
        }
        cell.push(Side {
            name: r.name.clone(),
            lo: r.lo.clone(),
            hi: r.hi.clone(),
            lo_iv,
            hi_iv,
            lo_open: r.lo_open,
            hi_open: r.hi_open,
            lo_edge: true,
            hi_edge: true,
        });
    }
    if let Some(v) = f.free_vars().into_iter().find(|v| !cell.iter().any(|s| &s.name == v)) {
        return Err(CertifyError::Unbound(v));
    }
    Ok((f, cell))
}

fn split(cell: &[Side], prec: u32) -> (Vec<Side>, Vec<Side>) {
    let (k, _) = cell
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bw), (i, s)| if s.width() > bw { (i, s.width()) } else { (bk, bw) });
    let s = &cell[k];
    let mid = Float::with_val(prec, &s.lo_iv.lo + &s.hi_iv.hi) / 2u32;
    let m: Rational = mid.to_rational().expect("finite midpoint");
    let m_iv = Interval::from_rational(&m, prec);
    let (mut left, mut right) = (cell.to_vec(), cell.to_vec());
    left[k].hi = Expr::Num(m.clone());
    left[k].hi_iv = m_iv.clone();
    left[k].hi_open = false;
    left[k].hi_edge = false;
    right[k].lo = Expr::Num(m);
    right[k].lo_iv = m_iv;
    right[k].lo_open = false;
    right[k].lo_edge = false;
    (left, right)
}

// ------------------------------------------------------------ engine

#[derive(Debug, Default)]
struct Tally {
    ok: bool,
    refuted: bool,
    witness: Option<(usize, IBox)>,
}

impl Tally {
    fn proven() -> Self {
        Tally { ok: true, ..Tally::default() }
    }

    fn join(a: Tally, b: Tally) -> Tally {
        let witness = match (a.witness, b.witness) {
            (Some(x), Some(y)) => Some(if y.0 > x.0 { y } else { x }),
            (x, y) => x.or(y),
        };
        Tally { ok: a.ok && b.ok, refuted: a.refuted || b.refuted, witness }
    }
}

struct Engine {
    s: Settings,
    boxes: AtomicU64,
    depth: AtomicUsize,
}

impl Engine {
    fn new(s: Settings) -> Self {
        Engine { s, boxes: AtomicU64::new(0), depth: AtomicUsize::new(0) }
    }

    fn visit(&self, depth: usize) {
        self.boxes.fetch_add(1, Ordering::Relaxed);
        self.depth.fetch_max(depth, Ordering::Relaxed);
    }

    fn certificate(&self, id: &str, t: Tally) -> Certificate {
        let status = if t.ok {
            Status::Proven
        } else if t.refuted {
            Status::Refuted
        } else {
            Status::Undecided
        };
        Certificate {
            statement_id: id.to_string(),
            status,
            boxes_examined: self.boxes.load(Ordering::Relaxed),
            max_depth_reached: self.depth.load(Ordering::Relaxed),
            precision_bits: self.s.precision,
            witness: if t.ok { None } else { t.witness.map(|(_, b)| describe(&b)) },
        }
    }

    fn point_sign(&self, f: &Expr, strict: bool) -> bool {
        let g = f.simplify();
        if let Some(v) = g.eval_exact(&BTreeMap::new()) {
            let s = v.signum();
            return s > 0 || (!strict && s == 0);
        }
        match iv_eval(&g, &IBox::new(), self.s.precision) {
            Ok(iv) => iv.lo > 0 || (!strict && iv.lo >= 0),
            Err(_) => false,
        }
    }

    /// Proves `f > 0` (`strict`) or `f ≥ 0` on the cell.
    fn prove(&self, f: &Expr, cell: &[Side], strict: bool, depth: usize, limit: usize, faces: u8) -> Tally {
        self.visit(depth);
        if cell.is_empty() {
            return if self.point_sign(f, strict) { Tally::proven() } else { Tally::default() };
        }
        let b = ibox(cell);
        let singular = match iv_eval(f, &b, self.s.precision) {
            Ok(iv) => {
                if iv.lo > 0 || (!strict && iv.lo >= 0) {
                    return Tally::proven();
                }
                if iv.hi < 0 || (strict && iv.hi <= 0) {
                    return Tally { ok: false, refuted: true, witness: Some((depth, b)) };
                }
                false
            }
            Err(_) => true,
        };
        if singular && self.positive_node(f, cell, depth, limit, faces) {
            return Tally::proven();
        }
        if faces > 0 && self.face_rule(f, cell, &b, strict, depth, limit, faces) {
            return Tally::proven();
        }
        if depth >= limit {
            return Tally { ok: false, refuted: false, witness: Some((depth, b)) };
        }
        let (l, r) = split(cell, self.s.precision);
        let go = |c: &[Side]| self.prove(f, c, strict, depth + 1, limit, faces);
        let (tl, tr) = if depth < self.s.parallel_depth {
            rayon::join(|| go(&l), || go(&r))
        } else {
            let tl = go(&l);
            // a refuted half settles the claim
            if tl.refuted {
                return tl;
            }
            (tl, go(&r))
        };
        Tally::join(tl, tr)
    }

    #[allow(clippy::too_many_arguments)]
    fn face_rule(&self, f: &Expr, cell: &[Side], b: &IBox, strict: bool, depth: usize, limit: usize, faces: u8) -> bool {
        for (i, side) in cell.iter().enumerate() {
            for upper in [false, true] {
                let (edge, open, end) = if upper {
                    (side.hi_edge, side.hi_open, &side.hi)
                } else {
                    (side.lo_edge, side.lo_open, &side.lo)
                };
                if !edge {
                    continue;
                }
                let d = f.derivative(&side.name);
                let Ok(div) = iv_eval(&d, b, self.s.precision) else { continue };
                if (!upper && div.lo < 0) || (upper && div.hi > 0) {
                    continue;
                }
                let rest: Vec<Side> = cell.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect();
                let face = f.substitute(&side.name, end);
                if !self.prove(&face, &rest, strict && !open, depth, limit, faces).ok {
                    continue;
                }
                let d = if upper { Expr::neg(d) } else { d };
                if self.prove(&d, cell, strict && open, depth, limit, faces - 1).ok {
                    return true;
                }
            }
        }
        false
    }

    /// Sign calculus: positivity from the tree shape; children fall back to
    /// a shallow sub-proof.
    fn positive_node(&self, e: &Expr, cell: &[Side], depth: usize, limit: usize, faces: u8) -> bool {
        let pos = |c: &Expr| self.positive(c, cell, depth, limit, faces);
        match e {
            Expr::Num(q) => *q > 0,
            Expr::Var(v) => cell
                .iter()
                .find(|s| &s.name == v)
                .is_some_and(|s| s.lo_iv.lo > 0 || (s.lo_iv.lo >= 0 && s.lo_open)),
            Expr::Add(a, c) | Expr::Mul(a, c) | Expr::Div(a, c) => pos(a) && pos(c),
            Expr::Pow(a, _) | Expr::Sqrt(a) => pos(a),
            _ => false,
        }
    }

    fn positive(&self, e: &Expr, cell: &[Side], depth: usize, limit: usize, faces: u8) -> bool {
        if self.positive_node(e, cell, depth, limit, faces) {
            return true;
        }
        if e.is_constant() {
            return self.point_sign(e, true);
        }
        let sub_limit = limit.min(depth + 12);
        self.prove(e, cell, true, depth, sub_limit, faces).ok
    }

    fn excludes(&self, e: &Expr, v: &Interval, cell: &[Side], depth: usize) -> Tally {
        self.visit(depth);
        let b = ibox(cell);
        if let Ok(iv) = iv_eval(e, &b, self.s.precision) {
            if iv.lo > v.hi || iv.hi < v.lo {
                return Tally::proven();
            }
        }
        if depth >= self.s.max_depth {
            return Tally { ok: false, refuted: false, witness: Some((depth, b)) };
        }
        let (l, r) = split(cell, self.s.precision);
        let (tl, tr) = if depth < self.s.parallel_depth {
            rayon::join(|| self.excludes(e, v, &l, depth + 1), || self.excludes(e, v, &r, depth + 1))
        } else {
            (self.excludes(e, v, &l, depth + 1), self.excludes(e, v, &r, depth + 1))
        };
        Tally::join(tl, tr)
    }
}

// --------------------------------------------------------------- api

/// Certifies `f > 0` on the domain.
pub fn certify_positive(id: &str, f: &Expr, domain: &Domain, s: Settings) -> Result<Certificate, CertifyError> {
    s.check()?;
    let (f, cell) = build(f, domain, s.precision)?;
    let eng = Engine::new(s);
    let t = eng.prove(&f, &cell, true, 0, s.max_depth, s.face_depth);
    Ok(eng.certificate(id, t))
}

/// Certifies `e < bound` or `e > bound` on the domain.
pub fn certify_bound(
    id: &str,
    e: &Expr,
    domain: &Domain,
    rel: Relation,
    bound: &Expr,
    s: Settings,
) -> Result<Certificate, CertifyError> {
    let f = match rel {
        Relation::Gt => Expr::sub(e.clone(), bound.clone()),
        Relation::Lt => Expr::sub(bound.clone(), e.clone()),
    };
    certify_positive(id, &f, domain, s)
}

/// Certifies that the univariate `e` never equals `value` on [lo, hi].
pub fn certify_excludes(
    id: &str,
    e: &Expr,
    var: &str,
    lo: &Expr,
    hi: &Expr,
    value: &Expr,
    s: Settings,
) -> Result<Certificate, CertifyError> {
    s.check()?;
    let domain = vec![VarRange::closed(var, lo.clone(), hi.clone())];
    let (e, cell) = build(e, &domain, s.precision)?;
    if !value.is_constant() {
        return Err(CertifyError::NonConstantEndpoint("value".into()));
    }
    let v = iv_eval(value, &IBox::new(), s.precision)
        .map_err(|err| CertifyError::Endpoint { var: "value".into(), err })?;
    let eng = Engine::new(s);
    let t = eng.excludes(&e, &v, &cell, 0);
    Ok(eng.certificate(id, t))
}

/// Checks `f > 0` at one exact point. `Refuted` when the enclosure is ≤ 0.
pub fn check_point(id: &str, f: &Expr, point: &BTreeMap<String, Expr>, s: Settings) -> Result<Certificate, CertifyError> {
    s.check()?;
    let g = f.substitute_all(point);
    if let Some(v) = g.free_vars().into_iter().next() {
        return Err(CertifyError::Unbound(v));
    }
    let eng = Engine::new(s);
    eng.visit(0);
    let witness: BTreeMap<String, [String; 2]> = point
        .iter()
        .filter_map(|(k, e)| iv_eval(e, &IBox::new(), s.precision).ok().map(|iv| (k.clone(), iv)))
        .map(|(k, iv)| {
            let (a, b) = iv.to_strings(17);
            (k, [a, b])
        })
        .collect();
    let status = match iv_eval(&g, &IBox::new(), s.precision) {
        Ok(iv) if iv.lo > 0 => Status::Proven,
        Ok(iv) if iv.hi <= 0 => Status::Refuted,
        _ => Status::Undecided,
    };
    let mut c = eng.certificate(id, Tally::default());
    c.status = status;
    c.witness = Some(witness);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigor::expr::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn alpha_range() -> VarRange {
        VarRange::closed("a", p("9"), p("5+3*sqrt(2)"))
    }

    #[test]
    fn identity_excluding_interior_value_is_undecided() {
        let c = certify_excludes("ctl", &p("x"), "x", &p("0"), &p("2"), &p("1"), Settings::default()).unwrap();
        assert_eq!(c.status, Status::Undecided);
        assert!(c.witness.is_some());
        assert_eq!(c.max_depth_reached, DEFAULT_MAX_DEPTH);
    }

    #[test]
    fn g_above_nine_needs_the_open_face() {
        let dom = vec![VarRange::new("x", p("0"), p("1/6"), true, true), alpha_range()];
        let g = p("(1-a)^2*x^2 + a");
        let c = certify_bound("g>9", &g, &dom, Relation::Gt, &p("9"), Settings::default()).unwrap();
        assert_eq!(c.status, Status::Proven, "{c:?}");
        // the closed box touches g = 9
        let closed = vec![VarRange::closed("x", p("0"), p("1/6")), alpha_range()];
        let c = certify_bound("g>9 closed", &g, &closed, Relation::Gt, &p("9"), Settings::default()).unwrap();
        assert_ne!(c.status, Status::Proven);
    }

    #[test]
    fn zero_dimensional_claim() {
        let c = certify_bound(
            "pt",
            &p("sqrt(107/18 + 11/3*sqrt(2))"),
            &vec![],
            Relation::Lt,
            &p("907/231"),
            Settings::default(),
        )
        .unwrap();
        assert_eq!(c.status, Status::Proven);
        assert_eq!(c.boxes_examined, 1);
    }

    #[test]
    fn false_claim_is_refuted() {
        let dom = vec![VarRange::closed("x", p("0"), p("1"))];
        let c = certify_bound("x<1/2", &p("x"), &dom, Relation::Lt, &p("1/2"), Settings::default()).unwrap();
        assert_eq!(c.status, Status::Refuted);
    }

    #[test]
    fn pole_handled_by_sign_calculus() {
        let dom = vec![VarRange::new("y", p("0"), p("1/4"), true, true)];
        let c = certify_positive("1/y^2", &p("1/y^2*(1-y)"), &dom, Settings::default()).unwrap();
        assert_eq!(c.status, Status::Proven);
    }

    #[test]
    fn domain_errors() {
        let dom = vec![VarRange::closed("x", p("1"), p("0"))];
        assert!(matches!(
            certify_positive("e", &p("x"), &dom, Settings::default()),
            Err(CertifyError::EmptyRange(_))
        ));
        let dom = vec![VarRange::closed("x", p("0"), p("1"))];
        assert!(matches!(certify_positive("e", &p("x+y"), &dom, Settings::default()), Err(CertifyError::Unbound(_))));
        assert!(matches!(
            certify_positive("e", &p("x"), &dom, Settings::with_precision(8)),
            Err(CertifyError::Precision(8))
        ));
    }

    #[test]
    fn point_check_reports_both_ways() {
        let pt = BTreeMap::from([("x".to_string(), p("1/3"))]);
        let c = check_point("x-1/4", &p("x-1/4"), &pt, Settings::default()).unwrap();
        assert_eq!(c.status, Status::Proven);
        let c = check_point("1/4-x", &p("1/4-x"), &pt, Settings::default()).unwrap();
        assert_eq!(c.status, Status::Refuted);
    }
}
