//! Reduced words in the free group on two generators ξ, η, prefix-cone
//! decompositions of the group, and bounded discovery of translation
//! identities γ·J_s = Γ − J_S.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on enumeration radius.
pub const DEFAULT_BALL_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("invalid letter {0:?} (expected one of a, A, b, B or the identity 1)")]
    BadLetter(char),
    #[error("ball radius {radius} exceeds cap {cap}")]
    CapExceeded { radius: usize, cap: usize },
    #[error("word {0} is not covered by the decomposition")]
    Unclassifiable(Word),
    #[error("invalid decomposition: {0}")]
    BadDecomposition(String),
    #[error("depth {depth} too small for gamma length {gamma_len} (need at least {need})")]
    DepthTooSmall {
        depth: usize,
        gamma_len: usize,
        need: usize,
    },
}

/// A generator or inverse generator. The declaration order is the canonical
/// enumeration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    X,
    Xinv,
    Y,
    Yinv,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::X, Letter::Xinv, Letter::Y, Letter::Yinv];

    pub fn inv(self) -> Letter {
        match self {
            Letter::X => Letter::Xinv,
            Letter::Xinv => Letter::X,
            Letter::Y => Letter::Yinv,
            Letter::Yinv => Letter::Y,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Letter::X => 'a',
            Letter::Xinv => 'A',
            Letter::Y => 'b',
            Letter::Yinv => 'B',
        }
    }

    pub fn from_char(c: char) -> Result<Letter, WordError> {
        match c {
            'a' => Ok(Letter::X),
            'A' => Ok(Letter::Xinv),
            'b' => Ok(Letter::Y),
            'B' => Ok(Letter::Yinv),
            other => Err(WordError::BadLetter(other)),
        }
    }
}

/// A freely reduced word. The empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(letters: &[Letter]) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for &l in letters {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    pub fn multiply(&self, other: &Word) -> Word {
        let a = &self.0;
        let b = &other.0;
        let mut k = 0;
        while k < a.len() && k < b.len() && a[a.len() - 1 - k] == b[k].inv() {
            k += 1;
        }
        let mut out = Vec::with_capacity(a.len() + b.len() - 2 * k);
        out.extend_from_slice(&a[..a.len() - k]);
        out.extend_from_slice(&b[k..]);
        Word(out)
    }

    pub fn starts_with(&self, prefix: &Word) -> bool {
        self.0.starts_with(&prefix.0)
    }

    fn push(&self, l: Letter) -> Word {
        let mut v = self.0.clone();
        v.push(l);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = WordError;

    /// Parses `a`, `A`, `b`, `B` strings; `1` or the empty string is the
    /// identity. The input is freely reduced.
    fn from_str(s: &str) -> Result<Word, WordError> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(Word::identity());
        }
        let letters = s
            .chars()
            .map(Letter::from_char)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Word::reduce(&letters))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand used heavily in tests: panics on bad input.
pub fn w(s: &str) -> Word {
    s.parse().expect("valid word literal")
}

/// All reduced words of length at most `radius`, in length-lex order.
pub fn enumerate_ball(radius: usize) -> Result<Vec<Word>, WordError> {
    enumerate_ball_capped(radius, DEFAULT_BALL_CAP)
}

pub fn enumerate_ball_capped(radius: usize, cap: usize) -> Result<Vec<Word>, WordError> {
    if radius > cap {
        return Err(WordError::CapExceeded { radius, cap });
    }
    let mut all = vec![Word::identity()];
    let mut shell = vec![Word::identity()];
    for _ in 0..radius {
        let mut next = Vec::with_capacity(shell.len() * 3 + 1);
        for word in &shell {
            for l in Letter::ALL {
                if word.0.last() == Some(&l.inv()) {
                    continue;
                }
                next.push(word.push(l));
            }
        }
        all.extend(next.iter().cloned());
        shell = next;
    }
    Ok(all)
}

/// Number of reduced words of length at most `radius`.
pub fn ball_count(radius: usize) -> usize {
    1 + 2 * (3usize.pow(radius as u32) - 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Identity,
    Residue(Word),
    Cone(Word),
}

/// A prefix set Ψ* and residue set Ψ*_r.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub name: String,
    pub prefixes: Vec<Word>,
    pub residues: Vec<Word>,
}

impl Decomposition {
    pub fn new(name: &str, prefixes: Vec<Word>, residues: Vec<Word>) -> Result<Self, WordError> {
        let mut prefixes = prefixes;
        let mut residues = residues;
        prefixes.sort();
        prefixes.dedup();
        residues.sort();
        residues.dedup();
        if prefixes.iter().chain(&residues).any(Word::is_identity) {
            return Err(WordError::BadDecomposition(
                "identity may not be a prefix or residue".into(),
            ));
        }
        if let Some(r) = residues.iter().find(|r| prefixes.contains(r)) {
            return Err(WordError::BadDecomposition(format!(
                "{r} is both a prefix and a residue"
            )));
        }
        Ok(Decomposition {
            name: name.to_string(),
            prefixes,
            residues,
        })
    }

    /// The four one-letter cones.
    pub fn log3() -> Self {
        Self::new("log3", ["a", "A", "b", "B"].map(w).to_vec(), vec![]).unwrap()
    }

    /// Eight prefixes ξη, ξ², ξη⁻¹, η, ξ⁻¹, η⁻¹ξ⁻¹, η⁻², η⁻¹ξ with residues ξ, η⁻¹.
    pub fn dagger() -> Self {
        Self::new(
            "dagger",
            ["ab", "aa", "aB", "b", "A", "BA", "BB", "Ba"].map(w).to_vec(),
            vec![w("a"), w("B")],
        )
        .unwrap()
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "log3" => Some(Self::log3()),
            "dagger" => Some(Self::dagger()),
            _ => None,
        }
    }

    /// Every classification that applies to `word`. A valid decomposition
    /// yields exactly one.
    pub fn matches(&self, word: &Word) -> Vec<Classification> {
        if word.is_identity() {
            return vec![Classification::Identity];
        }
        let mut out: Vec<Classification> = self
            .prefixes
            .iter()
            .filter(|p| word.starts_with(p))
            .map(|p| Classification::Cone(p.clone()))
            .collect();
        if self.residues.contains(word) {
            out.push(Classification::Residue(word.clone()));
        }
        out
    }

    pub fn classify(&self, word: &Word) -> Result<Classification, WordError> {
        self.matches(word)
            .into_iter()
            .next()
            .ok_or_else(|| WordError::Unclassifiable(word.clone()))
    }

    fn in_cone_or_residue(&self, psi: &Word, word: &Word) -> bool {
        if self.residues.contains(psi) {
            word == psi
        } else {
            !word.is_identity() && word.starts_with(psi)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionViolation {
    pub word: Word,
    pub matches: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub depth: usize,
    pub words_checked: usize,
    pub valid: bool,
    pub violations: Vec<PartitionViolation>,
}

/// Checks that every word of length at most `depth` has exactly one
/// classification.
pub fn verify_partition(dec: &Decomposition, depth: usize) -> Result<PartitionReport, WordError> {
    let ball = enumerate_ball(depth)?;
    let violations: Vec<PartitionViolation> = ball
        .iter()
        .filter_map(|word| {
            let n = dec.matches(word).len();
            (n != 1).then(|| PartitionViolation {
                word: word.clone(),
                matches: n,
            })
        })
        .collect();
    Ok(PartitionReport {
        depth,
        words_checked: ball.len(),
        valid: violations.is_empty(),
        violations,
    })
}

/// (γ·J_ψ) ∩ B_L, computed from the cone truncated at radius L + |γ|.
pub fn translate_cone(
    dec: &Decomposition,
    gamma: &Word,
    psi: &Word,
    radius: usize,
) -> Result<BTreeSet<Word>, WordError> {
    let source = enumerate_ball(radius + gamma.len())?;
    Ok(translate_from(dec, &source, gamma, psi, radius))
}

fn translate_from(
    dec: &Decomposition,
    source: &[Word],
    gamma: &Word,
    psi: &Word,
    radius: usize,
) -> BTreeSet<Word> {
    source
        .iter()
        .filter(|u| dec.in_cone_or_residue(psi, u))
        .map(|u| gamma.multiply(u))
        .filter(|v| v.len() <= radius)
        .collect()
}

/// A verified identity γ·J_source = Γ − J_excluded, compared away from the
/// identity element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationIdentity {
    pub gamma: Word,
    pub source: Word,
    pub excluded: Vec<Word>,
    pub verified_depth: usize,
}

impl RelationIdentity {
    /// Members of `excluded` that are prefixes (residues dropped).
    pub fn excluded_prefixes<'a>(&'a self, dec: &'a Decomposition) -> impl Iterator<Item = &'a Word> {
        self.excluded.iter().filter(|p| dec.prefixes.contains(p))
    }

    /// True when γ does not cancel against the source, so γ·J_source is just
    /// the cone J_{γ·source}.
    pub fn is_plain_translate(&self) -> bool {
        self.gamma.multiply(&self.source).len() == self.gamma.len() + self.source.len()
    }
}

/// Bounded search for translation identities over all nonidentity γ with
/// |γ| ≤ `max_gamma_len` and all prefixes ψ.
///
/// The image and complement are compared on B_L − {1}: the identity sits in
/// γ·J_ψ exactly when γ⁻¹ ∈ J_ψ, and a single point of the orbit carries no
/// measure, so it is not allowed to decide whether a relation exists.
pub fn discover_relations(
    dec: &Decomposition,
    max_gamma_len: usize,
    radius: usize,
) -> Result<Vec<RelationIdentity>, WordError> {
    let need = max_gamma_len + 4;
    if max_gamma_len == 0 || radius < need {
        return Err(WordError::DepthTooSmall {
            depth: radius,
            gamma_len: max_gamma_len,
            need,
        });
    }
    let ball = enumerate_ball(radius)?;
    let source = enumerate_ball(radius + max_gamma_len)?;
    let gammas: Vec<Word> = enumerate_ball(max_gamma_len)?
        .into_iter()
        .filter(|g| !g.is_identity())
        .collect();
    let cone_sizes: Vec<(Word, usize)> = dec
        .prefixes
        .iter()
        .map(|p| (p.clone(), ball.iter().filter(|v| v.starts_with(p)).count()))
        .collect();

    let pairs: Vec<(Word, Word)> = gammas
        .iter()
        .flat_map(|g| dec.prefixes.iter().map(move |p| (g.clone(), p.clone())))
        .collect();

    let found: Vec<Option<RelationIdentity>> = pairs
        .par_iter()
        .map(|(gamma, psi)| {
            let image: HashSet<Word> = translate_from(dec, &source, gamma, psi, radius)
                .into_iter()
                .collect();
            let complement: Vec<&Word> = ball
                .iter()
                .filter(|v| !v.is_identity() && !image.contains(*v))
                .collect();
            if complement.is_empty() {
                return None;
            }
            let comp: HashSet<&Word> = complement.iter().copied().collect();
            let mut excluded = Vec::new();
            let mut covered = 0usize;
            for (p, size) in &cone_sizes {
                let full = ball
                    .iter()
                    .filter(|v| v.starts_with(p))
                    .all(|v| comp.contains(v));
                if full {
                    excluded.push(p.clone());
                    covered += size;
                }
            }
            for r in &dec.residues {
                if comp.contains(r) {
                    excluded.push(r.clone());
                    covered += 1;
                }
            }
            (covered == complement.len() && !excluded.is_empty()).then(|| {
                excluded.sort();
                RelationIdentity {
                    gamma: gamma.clone(),
                    source: psi.clone(),
                    excluded,
                    verified_depth: radius,
                }
            })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Independent re-check of a relation on B_depth using classify-based
/// membership: w ∈ γ·J_s iff γ⁻¹w ∈ J_s, and w ∈ Γ − J_S iff w is not in
/// any excluded cone or residue.
pub fn reverify_relation(dec: &Decomposition, rel: &RelationIdentity, depth: usize) -> Result<bool, WordError> {
    let ginv = rel.gamma.inverse();
    for word in enumerate_ball(depth)? {
        if word.is_identity() {
            continue;
        }
        let pre = ginv.multiply(&word);
        let in_image = match dec.classify(&pre) {
            Ok(Classification::Cone(p)) => p == rel.source,
            Ok(Classification::Residue(r)) => r == rel.source,
            Ok(Classification::Identity) => false,
            Err(e) => return Err(e),
        };
        let in_rhs = match dec.classify(&word)? {
            Classification::Cone(p) => !rel.excluded.contains(&p),
            Classification::Residue(r) => !rel.excluded.contains(&r),
            Classification::Identity => true,
        };
        if in_image != in_rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        use Letter::*;
        assert_eq!(Word::reduce(&[X, Xinv, Y]), w("b"));
        assert_eq!(Word::reduce(&[]), Word::identity());
        assert_eq!(Word::reduce(&[X, Y, Yinv, Xinv]), Word::identity());
    }

    #[test]
    fn multiply_examples() {
        assert!(w("aB").multiply(&w("bA")).is_identity());
        assert_eq!(w("ab").multiply(&w("b")), w("abb"));
        assert_eq!(w("A").multiply(&w("abab")), w("bab"));
    }

    #[test]
    fn ball_counts() {
        assert_eq!(enumerate_ball(0).unwrap(), vec![Word::identity()]);
        assert_eq!(enumerate_ball(1).unwrap().len(), 5);
        assert_eq!(enumerate_ball(3).unwrap().len(), 53);
        for l in 0..8 {
            assert_eq!(enumerate_ball(l).unwrap().len(), ball_count(l));
        }
        assert!(matches!(
            enumerate_ball(15),
            Err(WordError::CapExceeded { radius: 15, cap: 14 })
        ));
    }

    #[test]
    fn ball_is_sorted() {
        let ball = enumerate_ball(4).unwrap();
        assert!(ball.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(ball[1..5], ["a", "A", "b", "B"].map(w));
    }

    #[test]
    fn display_round_trip() {
        for s in ["1", "a", "aBAb", "BBa"] {
            assert_eq!(w(s).to_string(), s);
        }
        assert!("ax".parse::<Word>().is_err());
    }

    #[test]
    fn classify_examples() {
        let d = Decomposition::dagger();
        assert_eq!(d.classify(&w("a")).unwrap(), Classification::Residue(w("a")));
        assert_eq!(d.classify(&w("aab")).unwrap(), Classification::Cone(w("aa")));
        let l = Decomposition::log3();
        assert_eq!(l.classify(&w("Ba")).unwrap(), Classification::Cone(w("B")));
        assert_eq!(l.classify(&Word::identity()).unwrap(), Classification::Identity);
        let partial = Decomposition::new("p", vec![w("ab")], vec![]).unwrap();
        assert!(matches!(partial.classify(&w("b")), Err(WordError::Unclassifiable(_))));
    }

    #[test]
    fn partitions() {
        assert!(verify_partition(&Decomposition::dagger(), 8).unwrap().valid);
        assert!(verify_partition(&Decomposition::log3(), 8).unwrap().valid);
        let partial = Decomposition::new("p", vec![w("ab")], vec![]).unwrap();
        let rep = verify_partition(&partial, 2).unwrap();
        assert!(!rep.valid);
        assert!(rep.violations.iter().any(|v| v.word == w("b") && v.matches == 0));
    }

    #[test]
    fn bad_decompositions() {
        assert!(Decomposition::new("x", vec![w("a")], vec![w("a")]).is_err());
        assert!(Decomposition::new("x", vec![Word::identity()], vec![]).is_err());
    }

    #[test]
    fn translate_examples() {
        let d = Decomposition::dagger();
        let img = translate_cone(&d, &w("aB"), &w("b"), 2).unwrap();
        let expect: BTreeSet<Word> = enumerate_ball(2)
            .unwrap()
            .into_iter()
            .filter(|v| *v != w("aB"))
            .collect();
        assert_eq!(img, expect);

        let l = Decomposition::log3();
        let img = translate_cone(&l, &w("a"), &w("A"), 1).unwrap();
        let expect: BTreeSet<Word> = ["1", "A", "b", "B"].map(w).into_iter().collect();
        assert_eq!(img, expect);

        let img = translate_cone(&d, &Word::identity(), &w("b"), 3).unwrap();
        let cone: BTreeSet<Word> = enumerate_ball(3)
            .unwrap()
            .into_iter()
            .filter(|v| v.starts_with(&w("b")))
            .collect();
        assert_eq!(img, cone);
    }

    #[test]
    fn log3_relations() {
        let rels = discover_relations(&Decomposition::log3(), 1, 8).unwrap();
        assert_eq!(rels.len(), 4);
        for r in &rels {
            assert_eq!(r.source, r.gamma.inverse());
            assert_eq!(r.excluded, vec![r.gamma.clone()]);
            assert!(!r.is_plain_translate());
        }
    }

    #[test]
    fn plain_translate() {
        let r = RelationIdentity { gamma: w("a"), source: w("b"), excluded: vec![], verified_depth: 0 };
        assert!(r.is_plain_translate());
        let r = RelationIdentity { gamma: w("ab"), source: w("Ba"), excluded: vec![], verified_depth: 0 };
        assert!(!r.is_plain_translate());
    }

    #[test]
    fn depth_guard() {
        let err = discover_relations(&Decomposition::dagger(), 2, 3).unwrap_err();
        assert!(matches!(err, WordError::DepthTooSmall { need: 6, .. }));
    }
}
