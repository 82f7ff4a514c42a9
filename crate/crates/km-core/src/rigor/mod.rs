//! Exact expressions, outward-rounded MPFR intervals and bisection certificates.

pub mod appendix;
pub mod certify;
pub mod expr;
pub mod interval;
pub mod library;

pub use appendix::{
    appendix_suite, lemma419_chain, overall, Case419, Chain419, Lemma, Reading, RigorError, Role, SuiteEntry,
};
pub use certify::{
    certify_bound, certify_excludes, certify_positive, check_point, Certificate, CertifyError, Domain, Relation,
    Settings, Status, VarRange,
};
pub use expr::{parse_expr, Expr, ParseError, QSqrt2};
pub use interval::{iv_eval, EvalError, IBox, Interval};
pub use library::{Formulas, LibraryError};
