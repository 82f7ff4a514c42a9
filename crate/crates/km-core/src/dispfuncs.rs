//! Displacement functions: products of two cone factors σ(t) = (1−t)/t on an
//! open simplex, stored structurally so they can be compared exactly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::words::{w, Decomposition, RelationIdentity, Word};

/// Tolerance on Σ x_i = 1.
pub const SUM_TOL: f64 = 1e-12;
/// Coordinates or factor arguments closer than this to 0 or 1 are degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid bijection: {0}")]
    BadSigma(String),
    #[error("relation excludes no prefix")]
    EmptyExcluded,
    #[error("not a simplex point: {0}")]
    NotSimplex(String),
}

pub fn sigma(t: f64) -> f64 {
    (1.0 - t) / t
}

/// A point of the open simplex Δⁿ (n+1 coordinates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, DispError> {
        if coords.len() < 2 {
            return Err(DispError::NotSimplex("need at least two coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(DispError::NotSimplex(format!("coordinate {c} outside (0,1)")));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(DispError::NotSimplex(format!("coordinates sum to {s}")));
        }
        Ok(SimplexPoint { coords })
    }

    /// Projects arbitrary positive weights onto the simplex.
    pub fn normalized(raw: &[f64]) -> Result<Self, DispError> {
        let s: f64 = raw.iter().sum();
        Self::new(raw.iter().map(|v| v / s).collect())
    }

    pub fn uniform(dim: usize) -> Self {
        SimplexPoint {
            coords: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Sigma,
    Inv,
}

/// σ(t)^{±1} where t = offset + Σ wᵢ x_i. Simplex presets use unit weights
/// and zero offset; the reduced planar functions need the general form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConeFactor {
    /// Sorted, 0-based coordinate indices.
    pub indices: Vec<usize>,
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<i64>>,
    /// Constant term as (numerator, denominator).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<(i64, i64)>,
}

impl ConeFactor {
    pub fn sum(indices: &[usize], orientation: Orientation) -> Self {
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        indices.dedup();
        ConeFactor {
            indices,
            orientation,
            weights: None,
            offset: None,
        }
    }

    /// Factor from 1-based coordinate labels, as they appear in formulas.
    pub fn of(labels: &[usize], orientation: Orientation) -> Self {
        let idx: Vec<usize> = labels.iter().map(|l| l - 1).collect();
        Self::sum(&idx, orientation)
    }

    /// Weighted affine argument t = p/q + Σ wᵢ x_{iᵢ}.
    pub fn affine(terms: &[(usize, i64)], offset: (i64, i64), orientation: Orientation) -> Self {
        let mut terms = terms.to_vec();
        terms.sort_unstable();
        ConeFactor {
            indices: terms.iter().map(|t| t.0).collect(),
            orientation,
            weights: Some(terms.iter().map(|t| t.1).collect()),
            offset: (offset.0 != 0).then_some(offset),
        }
    }

    pub fn weight(&self, k: usize) -> i64 {
        self.weights.as_ref().map_or(1, |ws| ws[k])
    }

    /// Coefficient of coordinate `i` in the argument.
    pub fn coeff(&self, i: usize) -> f64 {
        self.indices
            .iter()
            .position(|&j| j == i)
            .map_or(0.0, |k| self.weight(k) as f64)
    }

    pub fn argument(&self, x: &[f64]) -> f64 {
        let c = self.offset.map_or(0.0, |(p, q)| p as f64 / q as f64);
        self.indices
            .iter()
            .enumerate()
            .fold(c, |acc, (k, &i)| acc + self.weight(k) as f64 * x[i])
    }

    fn value_at(&self, t: f64) -> f64 {
        match self.orientation {
            Orientation::Sigma => sigma(t),
            Orientation::Inv => t / (1.0 - t),
        }
    }

    /// d/dt of the factor value.
    fn slope_at(&self, t: f64) -> f64 {
        match self.orientation {
            Orientation::Sigma => -1.0 / (t * t),
            Orientation::Inv => 1.0 / ((1.0 - t) * (1.0 - t)),
        }
    }
}

impl fmt::Display for ConeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some((p, q)) = self.offset {
            parts.push(if q == 1 { format!("{p}") } else { format!("{p}/{q}") });
        }
        for (k, &i) in self.indices.iter().enumerate() {
            let wgt = self.weight(k);
            parts.push(match wgt {
                1 => format!("x{}", i + 1),
                -1 => format!("-x{}", i + 1),
                _ => format!("{wgt}*x{}", i + 1),
            });
        }
        let arg = parts.join("+").replace("+-", "-");
        match self.orientation {
            Orientation::Sigma => write!(f, "sigma({arg})"),
            Orientation::Inv => write!(f, "1/sigma({arg})"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisplacementFunction {
    pub label: String,
    pub factors: [ConeFactor; 2],
    /// Number of coordinates of the domain.
    #[serde(default, skip_serializing)]
    pub dim: usize,
}

impl PartialEq for DisplacementFunction {
    /// Symbolic equality: same dimension and same unordered pair of factors.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.factor_key() == other.factor_key()
    }
}

impl DisplacementFunction {
    pub fn new(label: &str, dim: usize, a: ConeFactor, b: ConeFactor) -> Self {
        DisplacementFunction {
            label: label.to_string(),
            factors: [a, b],
            dim,
        }
    }

    /// Factors in canonical order, for set-of-factor comparison.
    pub fn factor_key(&self) -> [ConeFactor; 2] {
        let mut k = self.factors.clone();
        k.sort();
        k
    }

    fn check(&self, x: &[f64]) -> Result<[f64; 2], DispError> {
        if x.len() != self.dim {
            return Err(DispError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(c) = x.iter().find(|c| **c <= DEGENERATE_EPS) {
            return Err(DispError::Degenerate(format!("coordinate {c} is not positive")));
        }
        let t0 = self.factors[0].argument(x);
        let t1 = self.factors[1].argument(x);
        for t in [t0, t1] {
            if t <= DEGENERATE_EPS || t >= 1.0 - DEGENERATE_EPS {
                return Err(DispError::Degenerate(format!("factor argument {t} outside (0,1)")));
            }
        }
        Ok([t0, t1])
    }

    /// Evaluation on raw coordinates (simplex presets or the planar domain).
    pub fn eval_coords(&self, x: &[f64]) -> Result<f64, DispError> {
        let [t0, t1] = self.check(x)?;
        Ok(self.factors[0].value_at(t0) * self.factors[1].value_at(t1))
    }

    pub fn eval(&self, x: &SimplexPoint) -> Result<f64, DispError> {
        self.eval_coords(x.coords())
    }

    /// Gradient in raw coordinates (no chart).
    pub fn grad_coords(&self, x: &[f64]) -> Result<Vec<f64>, DispError> {
        let [t0, t1] = self.check(x)?;
        let (f0, f1) = (&self.factors[0], &self.factors[1]);
        let (v0, v1) = (f0.value_at(t0), f1.value_at(t1));
        let (d0, d1) = (f0.slope_at(t0) * v1, f1.slope_at(t1) * v0);
        Ok((0..self.dim)
            .map(|i| d0 * f0.coeff(i) + d1 * f1.coeff(i))
            .collect())
    }

    /// Gradient of f∘𝔭_drop where 𝔭_drop eliminates x_drop = 1 − Σ_{i≠drop} x_i.
    /// The result has one entry per coordinate; the `drop` entry is 0.
    pub fn grad(&self, x: &SimplexPoint, drop: usize) -> Result<Vec<f64>, DispError> {
        if drop >= self.dim {
            return Err(DispError::Dimension {
                expected: self.dim,
                got: drop + 1,
            });
        }
        let g = self.grad_coords(x.coords())?;
        Ok((0..self.dim)
            .map(|i| if i == drop { 0.0 } else { g[i] - g[drop] })
            .collect())
    }

    /// Derivative along `u` (a tangent direction when Σ u = 0).
    pub fn directional(&self, x: &[f64], u: &[f64]) -> Result<f64, DispError> {
        let g = self.grad_coords(x)?;
        Ok(g.iter().zip(u).map(|(a, b)| a * b).sum())
    }

    /// Expression over `x1..xn` in the rigor grammar.
    pub fn to_expr_string(&self) -> String {
        let arg = |c: &ConeFactor| {
            let mut s = String::new();
            if let Some((p, q)) = c.offset {
                s.push_str(&format!("{p}/{q}"));
            }
            for (k, &i) in c.indices.iter().enumerate() {
                let wgt = c.weight(k);
                if !s.is_empty() || wgt < 0 {
                    s.push_str(if wgt < 0 { "-" } else { "+" });
                }
                if wgt.abs() != 1 {
                    s.push_str(&format!("{}*", wgt.abs()));
                }
                s.push_str(&format!("x{}", i + 1));
            }
            s
        };
        let one = |c: &ConeFactor| {
            let t = arg(c);
            match c.orientation {
                Orientation::Sigma => format!("(1-({t}))/({t})"),
                Orientation::Inv => format!("({t})/(1-({t}))"),
            }
        };
        format!("{}*{}", one(&self.factors[0]), one(&self.factors[1]))
    }
}

impl fmt::Display for DisplacementFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}*{}", self.label, self.factors[0], self.factors[1])
    }
}

/// Coordinate permutation: (T x)_i = x_{perm[i]}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryMap {
    pub name: String,
    pub perm: Vec<usize>,
}

impl SymmetryMap {
    pub fn new(name: &str, perm: Vec<usize>) -> Self {
        SymmetryMap {
            name: name.to_string(),
            perm,
        }
    }

    /// Built from 1-based transpositions on `dim` coordinates.
    pub fn swaps(name: &str, dim: usize, pairs: &[(usize, usize)]) -> Self {
        let mut perm: Vec<usize> = (0..dim).collect();
        for &(a, b) in pairs {
            perm.swap(a - 1, b - 1);
        }
        Self::new(name, perm)
    }

    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint, DispError> {
        Ok(SimplexPoint {
            coords: self.apply_coords(x.coords())?,
        })
    }

    pub fn apply_coords(&self, x: &[f64]) -> Result<Vec<f64>, DispError> {
        if x.len() != self.perm.len() {
            return Err(DispError::Dimension {
                expected: self.perm.len(),
                got: x.len(),
            });
        }
        Ok(self.perm.iter().map(|&j| x[j]).collect())
    }

    pub fn is_involution(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &j)| self.perm[j] == i)
    }

    pub fn log3_t1() -> Self {
        Self::swaps("T1", 4, &[(1, 4), (2, 3)])
    }

    pub fn log3_t2() -> Self {
        Self::swaps("T2", 4, &[(1, 2), (3, 4)])
    }

    pub fn dagger_t1() -> Self {
        Self::swaps("T1", 8, &[(1, 4), (2, 5), (3, 6), (7, 8)])
    }

    pub fn dagger_t2() -> Self {
        Self::swaps("T2", 8, &[(2, 3)])
    }
}

/// Pairs (i, j), 1-based, with f†ᵢ∘T₁ = f†ⱼ.
pub const DAGGER_T1_PAIRS: [(usize, usize); 8] =
    [(1, 4), (4, 1), (2, 5), (5, 2), (3, 6), (6, 3), (7, 8), (8, 7)];

/// Index groups of the dagger presets, 1-based.
pub const I1: [usize; 3] = [1, 2, 3];
pub const I2: [usize; 3] = [4, 5, 6];
pub const I3: [usize; 2] = [7, 8];

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v = [a, b].concat();
    v.sort_unstable();
    v
}

fn all_but(dim: usize, k: usize) -> Vec<usize> {
    (1..=dim).filter(|&i| i != k).collect()
}

use Orientation::{Inv, Sigma};

pub fn log3_functions() -> Vec<DisplacementFunction> {
    let f = |label: &str, a: usize, b: usize| {
        DisplacementFunction::new(label, 4, ConeFactor::of(&[a], Sigma), ConeFactor::of(&[b], Sigma))
    };
    vec![f("f1", 4, 1), f("f2", 3, 2), f("f3", 2, 3), f("f4", 1, 4)]
}

pub fn dagger_f_functions() -> Vec<DisplacementFunction> {
    let f = |label: &str, s: Vec<usize>, i: usize| {
        DisplacementFunction::new(label, 8, ConeFactor::of(&s, Sigma), ConeFactor::of(&[i], Sigma))
    };
    vec![
        f("f1", I2.to_vec(), 1),
        f("f2", union(&I2, &I3), 2),
        f("f3", union(&I1, &I3), 3),
        f("f4", I1.to_vec(), 4),
        f("f5", union(&I1, &I3), 5),
        f("f6", union(&I2, &I3), 6),
        f("f7", I2.to_vec(), 7),
        f("f8", I1.to_vec(), 8),
    ]
}

/// gᵢ = ρ^k σᵢ with ρ^k = σ(1 − x_k) kept in complement-sum form.
pub fn dagger_g_functions() -> Vec<DisplacementFunction> {
    [(1, 7), (2, 6), (3, 5), (4, 8), (5, 3), (6, 2)]
        .iter()
        .map(|&(i, k)| {
            DisplacementFunction::new(
                &format!("g{i}"),
                8,
                ConeFactor::of(&all_but(8, k), Sigma),
                ConeFactor::of(&[i], Sigma),
            )
        })
        .collect()
}

/// The three functions of (x₁, x₂) on the reduced planar domain.
pub fn reduced2d_functions() -> Vec<DisplacementFunction> {
    let line = |o| ConeFactor::affine(&[(0, 1), (1, 2)], (0, 1), o);
    vec![
        DisplacementFunction::new("f1", 2, line(Sigma), ConeFactor::sum(&[0], Sigma)),
        DisplacementFunction::new("f2", 2, ConeFactor::sum(&[1], Sigma), line(Inv)),
        DisplacementFunction::new(
            "f7",
            2,
            line(Sigma),
            ConeFactor::affine(&[(0, -1), (1, -2)], (1, 2), Sigma),
        ),
    ]
}

pub fn preset_functions(name: &str) -> Result<Vec<DisplacementFunction>, DispError> {
    match name {
        "log3" => Ok(log3_functions()),
        "dagger-f" => Ok(dagger_f_functions()),
        "dagger-g" => Ok(dagger_g_functions()),
        "reduced2d" => Ok(reduced2d_functions()),
        other => Err(DispError::UnknownPreset(other.to_string())),
    }
}

/// Prefix → 1-based coordinate label.
pub type Bijection = BTreeMap<Word, usize>;

/// Frozen σ for the four one-letter cones.
pub fn log3_sigma() -> Bijection {
    [("A", 1), ("b", 2), ("B", 3), ("a", 4)]
        .into_iter()
        .map(|(s, i)| (w(s), i))
        .collect()
}

/// Frozen σ† for the dagger decomposition, reconstructed by matching the
/// printed f† and g† formulas. I1 = {ab, aa, aB}, I2 = {BA, BB, Ba}, I3 = {b, A}.
pub fn dagger_sigma() -> Bijection {
    [("ab", 1), ("aa", 2), ("aB", 3), ("BA", 4), ("BB", 5), ("Ba", 6), ("b", 7), ("A", 8)]
        .into_iter()
        .map(|(s, i)| (w(s), i))
        .collect()
}

/// Builds σ(Σ_{σ(S∩P)} x)·σ(x_{σ(s)}); residues in S are dropped.
pub fn from_relation(
    dec: &Decomposition,
    rel: &RelationIdentity,
    sig: &Bijection,
) -> Result<DisplacementFunction, DispError> {
    let dim = dec.prefixes.len();
    let mut seen = vec![false; dim + 1];
    for p in &dec.prefixes {
        let i = *sig
            .get(p)
            .ok_or_else(|| DispError::BadSigma(format!("prefix {p} unmapped")))?;
        if i == 0 || i > dim || std::mem::replace(&mut seen[i], true) {
            return Err(DispError::BadSigma(format!("label {i} invalid or repeated")));
        }
    }
    let labels: Vec<usize> = rel.excluded_prefixes(dec).map(|p| sig[p]).collect();
    if labels.is_empty() {
        return Err(DispError::EmptyExcluded);
    }
    let s = *sig
        .get(&rel.source)
        .ok_or_else(|| DispError::BadSigma(format!("source {} unmapped", rel.source)))?;
    Ok(DisplacementFunction::new(
        &format!("rel({},{})", rel.gamma, rel.source),
        dim,
        ConeFactor::of(&labels, Sigma),
        ConeFactor::of(&[s], Sigma),
    ))
}

/// Functions derived from relations, deduplicated symbolically, in order.
pub fn derive_all(
    dec: &Decomposition,
    rels: &[RelationIdentity],
    sig: &Bijection,
) -> Result<Vec<DisplacementFunction>, DispError> {
    let mut out: Vec<DisplacementFunction> = Vec::new();
    for r in rels {
        let f = from_relation(dec, r, sig)?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

pub fn max_value(fs: &[DisplacementFunction], x: &[f64]) -> Result<f64, DispError> {
    fs.iter()
        .map(|f| f.eval_coords(x))
        .try_fold(f64::NEG_INFINITY, |m, v| v.map(|v| m.max(v)))
}

/// Unit perturbation with −1 at `i` and +1 at `j` (1-based).
pub fn perturbation(dim: usize, i: usize, j: usize) -> Vec<f64> {
    let mut u = vec![0.0; dim];
    u[i - 1] = -1.0;
    u[j - 1] = 1.0;
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xbar() -> SimplexPoint {
        let a = (2f64.sqrt() - 1.0) / 2.0;
        let b = (3.0 - 2.0 * 2f64.sqrt()) / 4.0;
        SimplexPoint::new(vec![a, b, b, a, b, b, a, a]).unwrap()
    }

    #[test]
    fn preset_counts() {
        assert_eq!(preset_functions("log3").unwrap().len(), 4);
        assert_eq!(preset_functions("dagger-f").unwrap().len(), 8);
        assert_eq!(preset_functions("dagger-g").unwrap().len(), 6);
        assert_eq!(preset_functions("reduced2d").unwrap().len(), 3);
        assert!(preset_functions("nope").is_err());
    }

    #[test]
    fn log3_values() {
        let fs = log3_functions();
        let q = SimplexPoint::uniform(4);
        assert!((fs[0].eval(&q).unwrap() - 9.0).abs() < 1e-12);
        let x = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((fs[0].eval(&x).unwrap() - 13.5).abs() < 1e-12);
        assert!((fs[1].eval(&x).unwrap() - 28.0 / 3.0).abs() < 1e-12);
        assert!((max_value(&fs, x.coords()).unwrap() - 13.5).abs() < 1e-12);
    }

    #[test]
    fn dagger_values_at_xbar() {
        let x = xbar();
        let target = 5.0 + 3.0 * 2f64.sqrt();
        for f in dagger_f_functions() {
            assert!((f.eval(&x).unwrap() - target).abs() < 1e-12, "{f}");
        }
        for g in dagger_g_functions() {
            assert!((g.eval(&x).unwrap() - 1.0).abs() < 1e-12, "{g}");
        }
    }

    #[test]
    fn reduced_matches_embedding() {
        let (x1, x2) = (0.13, 0.05);
        let x7 = 0.5 - x1 - 2.0 * x2;
        let full = [x1, x2, x2, x1, x2, x2, x7, x7];
        let fs = dagger_f_functions();
        let rs = reduced2d_functions();
        for (r, i) in rs.iter().zip([0, 1, 6]) {
            let a = r.eval_coords(&[x1, x2]).unwrap();
            let b = fs[i].eval_coords(&full).unwrap();
            assert!((a - b).abs() < 1e-12 * b, "{r}");
        }
    }

    #[test]
    fn degenerate_rejected() {
        let f = &log3_functions()[0];
        assert!(matches!(
            f.eval_coords(&[0.0, 0.5, 0.25, 0.25]),
            Err(DispError::Degenerate(_))
        ));
        assert!(matches!(f.eval_coords(&[0.5, 0.5]), Err(DispError::Dimension { .. })));
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn symmetry_maps() {
        let x = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(SymmetryMap::log3_t1().apply(&x).unwrap().coords(), &[0.4, 0.3, 0.2, 0.1]);
        for t in [
            SymmetryMap::log3_t1(),
            SymmetryMap::log3_t2(),
            SymmetryMap::dagger_t1(),
            SymmetryMap::dagger_t2(),
        ] {
            assert!(t.is_involution());
        }
        assert_eq!(SymmetryMap::dagger_t2().perm, vec![0, 2, 1, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn json_shape() {
        let f = &log3_functions()[0];
        let v = serde_json::to_value(f).unwrap();
        assert_eq!(v["label"], "f1");
        assert_eq!(v["factors"][0]["indices"], serde_json::json!([3]));
        assert_eq!(v["factors"][0]["orientation"], "sigma");
        assert!(v["factors"][0].get("weights").is_none());
    }

    #[test]
    fn grad_chart_example() {
        // f¹₁ under 𝔭₄ increases in x₂.
        let f = &log3_functions()[0];
        let x = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = f.grad(&x, 3).unwrap();
        assert!(g[1] > 0.0);
        assert_eq!(g[3], 0.0);
        // f†₈ under 𝔭₇ decreases in x₈.
        let g = dagger_f_functions()[7].grad(&xbar(), 6).unwrap();
        assert!(g[7] < 0.0);
    }

    #[test]
    fn expr_string_evaluates() {
        let f = &reduced2d_functions()[2];
        assert_eq!(f.to_expr_string(), "(1-(x1+2*x2))/(x1+2*x2)*(1-(1/2-x1-2*x2))/(1/2-x1-2*x2)");
    }
}
