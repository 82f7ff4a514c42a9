//! Interval obligations behind the appendix lemmas, and the bound chain on
//! the two alpha subintervals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::certify::{
    certify_bound, certify_excludes, certify_positive, check_point, Certificate, CertifyError, Relation, Settings,
    Status, VarRange,
};
use super::expr::{parse_expr, Expr};
use super::interval::{iv_eval, EvalError, IBox, Interval};
use super::library::{Formulas, LibraryError};

/// Largest precision the chain escalates to.
pub const MAX_CHAIN_PRECISION: u32 = 2048;
/// Tolerance for comparing recomputed constants with the printed decimals.
pub const PRINT_TOLERANCE: f64 = 2e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RigorError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("chain precision must be at least 128 bits, got {0}")]
    Precision(u32),
    #[error("unknown lemma `{0}`")]
    UnknownLemma(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lemma {
    #[serde(rename = "4.6")]
    L4_6,
    #[serde(rename = "4.7")]
    L4_7,
    #[serde(rename = "4.8")]
    L4_8,
    #[serde(rename = "4.10")]
    L4_10,
    #[serde(rename = "4.11")]
    L4_11,
    #[serde(rename = "4.19U")]
    L4_19U,
    #[serde(rename = "4.19V")]
    L4_19V,
}

impl Lemma {
    pub const ALL: [Lemma; 7] =
        [Lemma::L4_6, Lemma::L4_7, Lemma::L4_8, Lemma::L4_10, Lemma::L4_11, Lemma::L4_19U, Lemma::L4_19V];

    pub fn label(self) -> &'static str {
        match self {
            Lemma::L4_6 => "4.6",
            Lemma::L4_7 => "4.7",
            Lemma::L4_8 => "4.8",
            Lemma::L4_10 => "4.10",
            Lemma::L4_11 => "4.11",
            Lemma::L4_19U => "4.19U",
            Lemma::L4_19V => "4.19V",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Lemma {
    type Err = RigorError;
    fn from_str(s: &str) -> Result<Self, RigorError> {
        Lemma::ALL.into_iter().find(|l| l.label() == s).ok_or_else(|| RigorError::UnknownLemma(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Must be proven for the lemma to pass.
    Obligation,
    /// Reported discrepancy or side check; never fails a run.
    Finding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub role: Role,
    pub status: Status,
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SuiteEntry {
    fn from_cert(role: Role, c: Certificate, detail: Option<String>) -> Self {
        SuiteEntry {
            name: c.statement_id.clone(),
            role,
            status: c.status,
            certificate: Some(c),
            value: None,
            interval: None,
            detail,
        }
    }
}

/// Proven iff every obligation is proven; refuted if any obligation is.
pub fn overall(entries: &[SuiteEntry]) -> Status {
    let obl = entries.iter().filter(|e| e.role == Role::Obligation);
    if obl.clone().any(|e| e.status == Status::Refuted) {
        Status::Refuted
    } else if obl.clone().all(|e| e.status == Status::Proven) {
        Status::Proven
    } else {
        Status::Undecided
    }
}

fn num(s: &str) -> Expr {
    parse_expr(s).expect("literal expression")
}

fn alpha_range(c: &Formulas) -> Result<VarRange, RigorError> {
    Ok(VarRange::closed("a", num("9"), c.get("alpha1")?.clone()))
}

fn point(pairs: &[(&str, Expr)]) -> BTreeMap<String, Expr> {
    pairs.iter().map(|(k, e)| (k.to_string(), e.clone())).collect()
}

fn enclose(e: &Expr, prec: u32) -> Result<Interval, RigorError> {
    Ok(iv_eval(e, &IBox::new(), prec)?)
}

pub fn appendix_suite(lemma: Lemma, s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    match lemma {
        Lemma::L4_6 => suite_46(s),
        Lemma::L4_7 => suite_47(s),
        Lemma::L4_8 => suite_48(s),
        Lemma::L4_10 => suite_410(s),
        Lemma::L4_11 => suite_411(s),
        Lemma::L4_19U => suite_419(Case419::U, s),
        Lemma::L4_19V => suite_419(Case419::V, s),
    }
}

fn suite_46(s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    use Relation::{Gt, Lt};
    let f = Formulas::load("lemma46")?;
    let dom = vec![VarRange::open("x", num("0"), num("1/6")), alpha_range(&f)?];
    let alpha1 = f.get("alpha1")?.clone();
    let (g, q, h2x) = (f.get("g_alpha")?, f.get("Q")?, f.get("h_plus_2x")?);
    let mut out = Vec::new();
    let mut push = |c: Certificate, role: Role, detail: Option<String>| out.push(SuiteEntry::from_cert(role, c, detail));

    push(certify_bound("4.6 g_alpha > 9", g, &dom, Gt, &num("9"), s)?, Role::Obligation, None);
    push(
        certify_bound("4.6 g_alpha < 107/18 + (11/3)*sqrt(2)", g, &dom, Lt, f.get("g_upper")?, s)?,
        Role::Obligation,
        None,
    );
    push(
        certify_bound(
            "4.6 sqrt(107/18 + (11/3)*sqrt(2)) < 907/231",
            &Expr::sqrt(f.get("g_upper")?.clone()),
            &vec![],
            Lt,
            f.get("Q_lower")?,
            s,
        )?,
        Role::Obligation,
        None,
    );
    push(certify_bound("4.6 Q > 907/231", q, &dom, Gt, f.get("Q_lower")?, s)?, Role::Obligation, None);
    push(certify_bound("4.6 Q < (6+3*sqrt(2))/2", q, &dom, Lt, f.get("Q_upper")?, s)?, Role::Obligation, None);

    // Tight bracket for h+2x, anchored at the corners where it is approached.
    let inf_anchor = h2x.substitute("x", &num("0")).substitute("a", &alpha1);
    let sup_anchor = h2x.substitute("x", &num("1/6")).substitute("a", &num("9"));
    let agree = |anchor: &Expr, closed: &Expr| -> Result<String, RigorError> {
        let (p, q) = (enclose(anchor, s.precision)?, enclose(closed, s.precision)?);
        let same = p.hull(&q).width() <= p.width() + q.width();
        Ok(format!("corner value {} (closed form {closed} {})", p.to_strings(16).0, if same { "agrees" } else { "DISAGREES" }))
    };
    let d_inf = agree(&inf_anchor, f.get("inf_h_plus_2x")?)?;
    let d_sup = agree(&sup_anchor, f.get("sup_h_plus_2x")?)?;
    push(
        certify_bound("4.6 h_alpha+2x > 1/(sqrt(alpha1)+1)", h2x, &dom, Gt, &inf_anchor, s)?,
        Role::Obligation,
        Some(d_inf),
    );
    push(certify_bound("4.6 h_alpha+2x < (1+sqrt(97))/24", h2x, &dom, Lt, &sup_anchor, s)?, Role::Obligation, Some(d_sup));
    push(certify_bound("4.6 h_alpha+2x > 0", h2x, &dom, Gt, &num("0"), s)?, Role::Obligation, None);
    push(certify_bound("4.6 h_alpha+2x < 1", h2x, &dom, Lt, &num("1"), s)?, Role::Obligation, None);

    // The printed bracket (1/4, ...) fails at both ends.
    let lo_claim = Expr::sub(h2x.clone(), f.get("bracket_lower")?.clone());
    push(
        check_point("4.6 printed bracket: h_alpha+2x > 1/4", &lo_claim, &point(&[("x", num("1/1000")), ("a", alpha1.clone())]), s)?,
        Role::Finding,
        Some("fails near x = 0, a = alpha1 where h_alpha+2x tends to 1/(sqrt(alpha1)+1) ~ 0.2475".into()),
    );
    let hi_claim = Expr::sub(f.get("bracket_upper")?.clone(), h2x.clone());
    push(
        check_point(
            "4.6 printed bracket: h_alpha+2x < (-2+3*sqrt(2)+sqrt(214+132*sqrt(2)))/(6*(4+3*sqrt(2)))",
            &hi_claim,
            &point(&[("x", num("1/6 - 1/1000")), ("a", num("9"))]),
            s,
        )?,
        Role::Finding,
        Some("fails near x = 1/6, a = 9 where h_alpha+2x tends to (1+sqrt(97))/24 ~ 0.4520".into()),
    );
    Ok(out)
}

fn suite_47(s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    let f = Formulas::load("lemma47")?;
    let hi = f.get("alpha1")?.clone();
    let one = num("1");
    let mut out = Vec::new();
    for (name, role, detail) in [
        ("G_plus", Role::Obligation, None),
        ("G_minus", Role::Obligation, None),
        ("G_plus_printed", Role::Finding, Some("numerator read as a^3 + a, as printed in the statement")),
        ("G_minus_printed", Role::Finding, Some("numerator read as a^3 + a, as printed in the statement")),
    ] {
        let id = format!("4.7 {name} != 1 on [9, alpha1]");
        let c = certify_excludes(&id, f.get(name)?, "a", &num("9"), &hi, &one, s)?;
        out.push(SuiteEntry::from_cert(role, c, detail.map(String::from)));
    }
    Ok(out)
}

fn suite_48(s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    let f = Formulas::load("lemma48")?;
    let hi = f.get("alpha1")?.clone();
    let half = num("1/2");
    ["H_plus", "H_minus"]
        .into_iter()
        .map(|name| {
            let id = format!("4.8 {name} != 1/2 on [9, alpha1]");
            let c = certify_excludes(&id, f.get(name)?, "a", &num("9"), &hi, &half, s)?;
            Ok(SuiteEntry::from_cert(Role::Obligation, c, None))
        })
        .collect()
}

fn suite_410(s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    let f = Formulas::load("lemma410")?;
    let a = alpha_range(&f)?;
    let dom = vec![VarRange::open("s", num("0"), num("1/3")), a.clone()];
    Ok(vec![
        SuiteEntry::from_cert(
            Role::Obligation,
            certify_positive("4.10 (a-1)^2*(4/9) - (a-1)*(4/3) > 0", f.get("corner")?, &vec![a], s)?,
            None,
        ),
        SuiteEntry::from_cert(Role::Obligation, certify_positive("4.10 D(s) > 0", f.get("D")?, &dom, s)?, None),
        SuiteEntry::from_cert(
            Role::Obligation,
            certify_positive("4.10 1 + h_alpha' > 0", f.get("one_plus_h_prime")?, &dom, s)?,
            None,
        ),
    ])
}

fn suite_411(s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    let f = Formulas::load("lemma411")?;
    let a = alpha_range(&f)?;
    let rect = vec![VarRange::open("x", num("0"), num("1/2")), VarRange::open("y", num("0"), num("1/4"))];
    let f2_y = f.get("F2")?.derivative("s");
    let mut out = vec![
        SuiteEntry::from_cert(
            Role::Obligation,
            certify_positive("4.11 U_y > 0 on R", f.get("U_y")?, &rect, s)?,
            Some("certified on 0<x<1/2, 0<y<1/4, which contains R".into()),
        ),
        SuiteEntry::from_cert(
            Role::Obligation,
            certify_bound(
                "4.11 (F2)_y > -1/2",
                &f2_y,
                &vec![VarRange::open("s", num("0"), num("1/3")), a.clone()],
                Relation::Gt,
                &num("-1/2"),
                s,
            )?,
            Some("derivative taken symbolically from F2; certified for 0 < x+y < 1/3, where D1 > 0".into()),
        ),
        SuiteEntry::from_cert(
            Role::Obligation,
            certify_positive(
                "4.11 (a-1)(1-x-y)+2 > 0 on R",
                f.get("numer")?,
                &vec![VarRange::open("s", num("0"), num("3/4")), a.clone()],
                s,
            )?,
            None,
        ),
    ];
    out.push(SuiteEntry::from_cert(
        Role::Finding,
        check_point("4.11 D1 >= 0 on R", f.get("D1")?, &point(&[("s", num("13/20")), ("a", num("9"))]), s)?,
        Some("D1 is negative at x = 9/20, y = 1/5, a point of R; F2 is only real where x+y is small".into()),
    ));
    let gap = Expr::sub(f.get("F2_y_printed")?.clone(), f2_y);
    out.push(SuiteEntry::from_cert(
        Role::Finding,
        check_point(
            "4.11 printed (F2)_y differs from d/dy F2",
            &gap,
            &point(&[("s", num("1/10")), ("a", num("9"))]),
            s,
        )?,
        Some("the printed form lacks a factor 1/2 on the radical term; the sign conclusion is unaffected".into()),
    ));
    Ok(out)
}

// ----------------------------------------------------------- chain

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case419 {
    U,
    V,
}

/// Which endpoint feeds a1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reading {
    /// alphahat in both cases; reproduces the printed tables.
    Table,
    /// alpha1 in case V, as the case-V text defines a1.
    Text,
}

/// Printed ten-digit decimals, a1..a12.
pub const PRINTED_U: [&str; 12] = [
    "0.2197341744",
    "0.25",
    "0.2829230040",
    "0.2475452871",
    "0.03482053272",
    "0.04199779316",
    "0.1510393664",
    "0.2160224693",
    "0.3844382075",
    "0.2846805352",
    "0.06488962356",
    "0.04181758681",
];

pub const PRINTED_V: [&str; 12] = [
    "0.2197341744",
    "0.25",
    "0.2802658255",
    "0.2450451726",
    "0.03392651705",
    "0.04095347309",
    "0.1491203770",
    "0.2137627221",
    "0.3817066009",
    "0.2846654650",
    "0.06257148633",
    "0.04127832503",
];

pub const PRINTED_GAP_U: (&str, &str) = ("3.771441275", "3.771440985");
pub const PRINTED_GAP_V: (&str, &str) = ("3.907942936", "3.613150070");

#[derive(Debug, Clone, PartialEq)]
pub struct Chain419 {
    pub case: Case419,
    pub reading: Reading,
    pub precision_bits: u32,
    pub table: Vec<(String, Interval)>,
    pub lhs: Interval,
    pub rhs: Interval,
    pub gap: Certificate,
}

impl Chain419 {
    pub fn printed(&self) -> [&'static str; 12] {
        match self.case {
            Case419::U => PRINTED_U,
            Case419::V => PRINTED_V,
        }
    }

    /// (name, printed, deviation) for rows off by more than the tolerance.
    pub fn mismatches(&self) -> Vec<(String, &'static str, f64)> {
        self.table
            .iter()
            .zip(self.printed())
            .filter_map(|((name, iv), p)| {
                let dev = deviation(iv, p);
                (dev > PRINT_TOLERANCE).then(|| (name.clone(), p, dev))
            })
            .collect()
    }
}

/// Distance from a printed decimal to an interval (0 if inside).
pub fn deviation(iv: &Interval, printed: &str) -> f64 {
    let p = Float::with_val(iv.prec(), Float::parse(printed).expect("decimal literal"));
    if p < iv.lo {
        Float::with_val(64, &iv.lo - &p).to_f64()
    } else if p > iv.hi {
        Float::with_val(64, &p - &iv.hi).to_f64()
    } else {
        0.0
    }
}

fn chain_defs(case: Case419, reading: Reading) -> Result<Formulas, RigorError> {
    let c = Formulas::constants();
    let (alpha1, alphahat) = (c.get("alpha1")?.clone(), c.get("alphahat")?.clone());
    let (lo, hi) = match case {
        Case419::U => (num("9"), alphahat.clone()),
        Case419::V => (alphahat.clone(), alpha1.clone()),
    };
    let k = match (case, reading) {
        (Case419::V, Reading::Text) => alpha1,
        _ => alphahat,
    };
    let base = Formulas::load("lemma419")?;
    let mut out = Formulas::default();
    let table: BTreeMap<String, Expr> = [("lo", lo), ("hi", hi), ("k", k)].into_iter().map(|(n, e)| (n.into(), e)).collect();
    let mut text = String::new();
    for n in ["a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9", "a10", "a11", "a12", "lhs", "rhs"] {
        text.push_str(&format!("{n} = {}\n", base.get(n)?.substitute_all(&table)));
    }
    out.extend("lemma419", &text)?;
    Ok(out)
}

/// Recomputes a1..a12 and certifies lhs > rhs, doubling the precision up to
/// [`MAX_CHAIN_PRECISION`] while undecided.
pub fn lemma419_chain(case: Case419, reading: Reading, precision: u32) -> Result<Chain419, RigorError> {
    if precision < 128 {
        return Err(RigorError::Precision(precision));
    }
    let defs = chain_defs(case, reading)?;
    let id = match (case, reading) {
        (Case419::U, _) => "4.19U gap lhs > rhs".to_string(),
        (Case419::V, Reading::Table) => "4.19V gap lhs > rhs".to_string(),
        (Case419::V, Reading::Text) => "4.19V gap lhs > rhs (a1 from alpha1)".to_string(),
    };
    let mut prec = precision;
    loop {
        let table = (1..=12)
            .map(|i| {
                let n = format!("a{i}");
                let iv = enclose(defs.get(&n)?, prec)?;
                Ok((n, iv))
            })
            .collect::<Result<Vec<_>, RigorError>>()?;
        let lhs = enclose(defs.get("lhs")?, prec)?;
        let rhs = enclose(defs.get("rhs")?, prec)?;
        let status = if lhs.lo > rhs.hi {
            Status::Proven
        } else if lhs.hi < rhs.lo {
            Status::Refuted
        } else {
            Status::Undecided
        };
        if status != Status::Undecided || prec >= MAX_CHAIN_PRECISION {
            let witness = (status != Status::Proven).then(|| {
                BTreeMap::from([
                    ("lhs".to_string(), { let (a, b) = lhs.to_strings(17); [a, b] }),
                    ("rhs".to_string(), { let (a, b) = rhs.to_strings(17); [a, b] }),
                ])
            });
            let gap = Certificate {
                statement_id: id,
                status,
                boxes_examined: 1,
                max_depth_reached: 0,
                precision_bits: prec,
                witness,
            };
            return Ok(Chain419 { case, reading, precision_bits: prec, table, lhs, rhs, gap });
        }
        prec = (prec * 2).min(MAX_CHAIN_PRECISION);
    }
}

fn suite_419(case: Case419, s: Settings) -> Result<Vec<SuiteEntry>, RigorError> {
    let prec = s.precision.max(128);
    let main = lemma419_chain(case, Reading::Table, prec)?;
    let tag = match case {
        Case419::U => "4.19U",
        Case419::V => "4.19V",
    };
    let (p_lhs, p_rhs) = match case {
        Case419::U => PRINTED_GAP_U,
        Case419::V => PRINTED_GAP_V,
    };
    let mut out = Vec::new();
    let row_role = match case {
        Case419::U => Role::Obligation,
        Case419::V => Role::Finding,
    };
    for ((name, iv), printed) in main.table.iter().zip(main.printed()) {
        let dev = deviation(iv, printed);
        let ok = dev <= PRINT_TOLERANCE;
        out.push(SuiteEntry {
            name: format!("{tag} {name} matches printed {printed}"),
            role: row_role,
            status: if ok { Status::Proven } else { Status::Refuted },
            certificate: None,
            value: Some(iv.mid_f64()),
            interval: Some(iv_strings(iv)),
            detail: Some(format!("distance to printed value {dev:.3e}")),
        });
    }
    let detail = format!(
        "lhs {} rhs {} (printed {p_lhs} and {p_rhs}) at {} bits",
        fmt15(&main.lhs),
        fmt15(&main.rhs),
        main.precision_bits
    );
    out.push(SuiteEntry {
        value: Some(main.lhs.mid_f64() - main.rhs.mid_f64()),
        interval: Some(iv_strings(&main.lhs.sub(&main.rhs))),
        ..SuiteEntry::from_cert(Role::Obligation, main.gap.clone(), Some(detail))
    });
    if case == Case419::V {
        let alt = lemma419_chain(case, Reading::Text, prec)?;
        let a1 = &alt.table[0].1;
        out.push(SuiteEntry {
            name: "4.19V a1 from alpha1 matches printed 0.2197341744".into(),
            role: Role::Finding,
            status: if deviation(a1, PRINTED_V[0]) <= PRINT_TOLERANCE { Status::Proven } else { Status::Refuted },
            certificate: None,
            value: Some(a1.mid_f64()),
            interval: Some(iv_strings(a1)),
            detail: Some(
                "the case-V text defines a1 with alpha1; the printed value is the alphahat one".into(),
            ),
        });
        let detail = format!("lhs {} rhs {}: the text reading gives no gap", fmt15(&alt.lhs), fmt15(&alt.rhs));
        out.push(SuiteEntry {
            value: Some(alt.lhs.mid_f64() - alt.rhs.mid_f64()),
            interval: Some(iv_strings(&alt.lhs.sub(&alt.rhs))),
            ..SuiteEntry::from_cert(Role::Finding, alt.gap.clone(), Some(detail))
        });
    }
    Ok(out)
}

fn iv_strings(iv: &Interval) -> [String; 2] {
    let (a, b) = iv.to_strings(17);
    [a, b]
}

fn fmt15(iv: &Interval) -> String {
    format!("{:.15}", iv.mid_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Settings {
        Settings::default()
    }

    #[test]
    fn lemma_labels_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(l.label().parse::<Lemma>().unwrap(), l);
        }
        assert!("4.9".parse::<Lemma>().is_err());
    }

    #[test]
    fn case_u_a3_is_tight_and_near_printed() {
        let ch = lemma419_chain(Case419::U, Reading::Table, 256).unwrap();
        let a3 = &ch.table[2].1;
        assert!(a3.width() < 1e-12);
        assert!(deviation(a3, "0.2829230040") < PRINT_TOLERANCE);
    }

    #[test]
    fn chain_rejects_low_precision() {
        assert_eq!(lemma419_chain(Case419::U, Reading::Table, 64), Err(RigorError::Precision(64)));
    }

    #[test]
    fn exclusion_suites_have_two_obligations() {
        let e = appendix_suite(Lemma::L4_7, quick()).unwrap();
        assert_eq!(e.iter().filter(|x| x.role == Role::Obligation && x.status == Status::Proven).count(), 2);
        let e = appendix_suite(Lemma::L4_8, quick()).unwrap();
        assert_eq!(overall(&e), Status::Proven);
    }
}
