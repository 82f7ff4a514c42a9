//! Shipped formula files. Each line is `name = expr`; later definitions may
//! use earlier names and the shared constants.

use std::collections::BTreeMap;

use thiserror::Error;

use super::expr::{parse_expr, Expr, ParseError};

const CONSTANTS: &str = include_str!("../../formulas/constants.expr");

pub const FILES: [(&str, &str); 6] = [
    ("lemma46", include_str!("../../formulas/lemma46.expr")),
    ("lemma47", include_str!("../../formulas/lemma47.expr")),
    ("lemma48", include_str!("../../formulas/lemma48.expr")),
    ("lemma410", include_str!("../../formulas/lemma410.expr")),
    ("lemma411", include_str!("../../formulas/lemma411.expr")),
    ("lemma419", include_str!("../../formulas/lemma419.expr")),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LibraryError {
    #[error("{file}:{line}: {err}")]
    Parse { file: String, line: usize, err: ParseError },
    #[error("{file}:{line}: expected `name = expr`")]
    Shape { file: String, line: usize },
    #[error("{file}:{line}: `{name}` defined twice")]
    Duplicate { file: String, line: usize, name: String },
    #[error("unknown formula file `{0}`")]
    UnknownFile(String),
    #[error("`{0}` is not defined")]
    Undefined(String),
}

#[derive(Debug, Clone, Default)]
pub struct Formulas {
    defs: BTreeMap<String, Expr>,
}

impl Formulas {
    /// Parses definitions, inlining names defined earlier in `self`.
    pub fn extend(&mut self, file: &str, text: &str) -> Result<(), LibraryError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = i + 1;
            let (name, rhs) = line.split_once('=').ok_or(LibraryError::Shape { file: file.into(), line: at })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(LibraryError::Shape { file: file.into(), line: at });
            }
            if self.defs.contains_key(name) {
                return Err(LibraryError::Duplicate { file: file.into(), line: at, name: name.into() });
            }
            let e = parse_expr(rhs).map_err(|err| LibraryError::Parse { file: file.into(), line: at, err })?;
            let e = e.substitute_all(&self.defs);
            self.defs.insert(name.to_string(), e);
        }
        Ok(())
    }

    pub fn constants() -> Self {
        let mut f = Formulas::default();
        f.extend("constants", CONSTANTS).expect("shipped constants parse");
        f
    }

    /// The constants plus one shipped file.
    pub fn load(file: &str) -> Result<Self, LibraryError> {
        let (_, text) = FILES.iter().find(|(n, _)| *n == file).ok_or_else(|| LibraryError::UnknownFile(file.into()))?;
        let mut f = Formulas::constants();
        f.extend(file, text)?;
        Ok(f)
    }

    pub fn get(&self, name: &str) -> Result<&Expr, LibraryError> {
        self.defs.get(name).ok_or_else(|| LibraryError::Undefined(name.into()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }
}
