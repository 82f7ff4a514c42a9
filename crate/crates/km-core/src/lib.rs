//! Computational core for the displacement bound of two-generator free
//! Kleinian groups.
//!
//! * [`words`]: reduced words, prefix-cone decompositions, relation discovery.
//! * [`dispfuncs`]: displacement functions on open simplices.
//! * [`minimax`]: inf-of-max solvers and certificates.
//! * [`rigor`]: expression language, MPFR intervals and bisection certificates.
//! * [`h3`]: upper half-space geometry and probes.

pub mod dispfuncs;
pub mod h3;
pub mod minimax;
pub mod rigor;
pub mod words;

/// 5 + 3√2, the value of the dagger minimax problem.
pub fn alpha1() -> f64 {
    5.0 + 3.0 * std::f64::consts::SQRT_2
}
