//! inf-of-max problems over open simplices: a multistart simplex-reflection
//! search with a KKT Newton polish, closed-form equalization for the presets,
//! and the reduced planar problem.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispfuncs::{
    dagger_f_functions, log3_functions, reduced2d_functions, DisplacementFunction, SimplexPoint,
};

pub const CLAMP: f64 = 1e-12;
pub const DEFAULT_RESTARTS: usize = 64;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Coordinates below this mark a boundary-escaping run.
pub const BOUNDARY_FLAG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimaxError {
    #[error("empty function family")]
    Empty,
    #[error("function {label} has dimension {got}, expected {expected}")]
    Dimension {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Clone, Debug)]
pub struct MinimaxProblem {
    pub functions: Vec<DisplacementFunction>,
    pub dimension: usize,
}

impl MinimaxProblem {
    pub fn new(functions: Vec<DisplacementFunction>) -> Result<Self, MinimaxError> {
        let dimension = functions.first().ok_or(MinimaxError::Empty)?.dim;
        if let Some(f) = functions.iter().find(|f| f.dim != dimension) {
            return Err(MinimaxError::Dimension {
                label: f.label.clone(),
                expected: dimension,
                got: f.dim,
            });
        }
        Ok(MinimaxProblem {
            functions,
            dimension,
        })
    }

    pub fn preset(name: &str) -> Result<Self, MinimaxError> {
        match name {
            "log3" => Self::new(log3_functions()),
            "dagger" | "dagger-f" => Self::new(dagger_f_functions()),
            other => Err(MinimaxError::UnknownPreset(other.to_string())),
        }
    }

    /// max fᵢ(x), or +∞ on degenerate input.
    pub fn max_at(&self, x: &[f64]) -> f64 {
        self.functions
            .iter()
            .map(|f| f.eval_coords(x).unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Symbolically distinct functions.
    fn distinct(&self) -> Vec<&DisplacementFunction> {
        let mut out: Vec<&DisplacementFunction> = Vec::new();
        for f in &self.functions {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxCertificate {
    pub value: f64,
    pub point: Vec<f64>,
    pub equalization_residual: f64,
    pub probe_margin: f64,
    pub method: String,
    pub iterations: usize,
    pub boundary_escape: bool,
    /// Closed forms of value and coordinates, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactForm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactForm {
    pub value: String,
    pub point: Vec<String>,
}

/// Maps n free coordinates to a point of Δⁿ (last coordinate dropped), with
/// clamping and renormalization.
fn chart(y: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = y.to_vec();
    x.push(1.0 - y.iter().sum::<f64>());
    for v in x.iter_mut() {
        *v = v.clamp(CLAMP, 1.0 - CLAMP);
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    x
}

fn dirichlet(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

struct NmResult {
    y: Vec<f64>,
    value: f64,
    iterations: usize,
}

/// Adaptive-parameter Nelder–Mead.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, tol: f64, max_iter: usize) -> NmResult {
    let n = start.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += if v[i] + step < 1.0 { step } else { -step };
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= tol * vals[0].abs().max(1.0) * 1e-3 && size < 1e-13 {
            break;
        }
        if size < 1e-15 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(alpha * gamma);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + delta * (v - b))
                .collect();
            vals[i] = f(&simplex[i]);
        }
    }
    let k = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    NmResult {
        y: simplex[k].clone(),
        value: vals[k],
        iterations: it,
    }
}

/// Newton on the KKT system of min t s.t. fᵢ ≤ t over the active set,
/// in the chart dropping the last coordinate. Returns the polished point.
fn kkt_polish(p: &MinimaxProblem, x0: &[f64]) -> Option<Vec<f64>> {
    [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
        .iter()
        .filter_map(|&band| kkt_newton(p, x0, band))
        .min_by(|a, b| p.max_at(a).total_cmp(&p.max_at(b)))
}

fn kkt_newton(p: &MinimaxProblem, x0: &[f64], band: f64) -> Option<Vec<f64>> {
    let fs = p.distinct();
    let n = p.dimension - 1;
    let top = p.max_at(x0);
    let active: Vec<&DisplacementFunction> = fs
        .iter()
        .copied()
        .filter(|f| f.eval_coords(x0).is_ok_and(|v| v >= top - band * top))
        .collect();
    let m = active.len();
    if m == 0 || m > n + 1 {
        return None;
    }
    let chart_grad = |f: &DisplacementFunction, y: &[f64]| -> Option<Vec<f64>> {
        let mut x = y.to_vec();
        x.push(1.0 - y.iter().sum::<f64>());
        let g = f.grad_coords(&x).ok()?;
        Some((0..n).map(|i| g[i] - g[n]).collect())
    };
    let value = |f: &DisplacementFunction, y: &[f64]| -> Option<f64> {
        let mut x = y.to_vec();
        x.push(1.0 - y.iter().sum::<f64>());
        f.eval_coords(&x).ok()
    };

    let mut y: Vec<f64> = x0[..n].to_vec();
    let mut lam = vec![1.0 / m as f64; m];
    let mut t = top;
    let size = n + m + 1;
    let mut converged = false;
    for _ in 0..60 {
        let grads: Vec<Vec<f64>> = active.iter().map(|f| chart_grad(f, &y)).collect::<Option<_>>()?;
        let vals: Vec<f64> = active.iter().map(|f| value(f, &y)).collect::<Option<_>>()?;
        let mut r = DVector::zeros(size);
        for i in 0..n {
            r[i] = (0..m).map(|k| lam[k] * grads[k][i]).sum();
        }
        for k in 0..m {
            r[n + k] = vals[k] - t;
        }
        r[n + m] = lam.iter().sum::<f64>() - 1.0;
        if r.amax() < 1e-13 * t.max(1.0) {
            converged = true;
            break;
        }
        let mut jac = DMatrix::zeros(size, size);
        let h = 1e-7;
        for j in 0..n {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            for k in 0..m {
                let gp = chart_grad(active[k], &yp)?;
                let gm = chart_grad(active[k], &ym)?;
                for i in 0..n {
                    jac[(i, j)] += lam[k] * (gp[i] - gm[i]) / (2.0 * h);
                }
            }
        }
        for k in 0..m {
            for i in 0..n {
                jac[(i, n + k)] = grads[k][i];
                jac[(n + k, i)] = grads[k][i];
            }
            jac[(n + k, n + m)] = -1.0;
            jac[(n + m, n + k)] = 1.0;
        }
        let d = jac.lu().solve(&(-r))?;
        for i in 0..n {
            y[i] += d[i];
        }
        for k in 0..m {
            lam[k] += d[n + k];
        }
        t += d[n + m];
        if y.iter().any(|v| *v <= 0.0) || y.iter().sum::<f64>() >= 1.0 {
            return None;
        }
    }
    if !converged || lam.iter().any(|l| *l < -1e-9) {
        return None;
    }
    let mut x = y;
    x.push(1.0 - x.iter().sum::<f64>());
    // Inactive functions must stay below the common value.
    (p.max_at(&x) <= t + 1e-12 * t).then_some(x)
}

/// max over pairs |fᵢ − fⱼ| on a family of 1-based indices.
pub fn equalization_residual(fs: &[DisplacementFunction], x: &[f64], family: &[usize]) -> f64 {
    let vals: Vec<f64> = family
        .iter()
        .filter_map(|&i| fs.get(i - 1).and_then(|f| f.eval_coords(x).ok()))
        .collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if vals.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Smallest change of the max along random tangent directions. Steps are
/// shortened so the probe stays inside the open simplex.
pub fn probe_margin(p: &MinimaxProblem, x: &[f64], directions: usize, step: f64, seed: u64) -> f64 {
    let base = p.max_at(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = x.len();
    let mut margin = f64::INFINITY;
    for _ in 0..directions {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let mean = u.iter().sum::<f64>() / dim as f64;
        u.iter_mut().for_each(|v| *v -= mean);
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        let room = x
            .iter()
            .zip(&u)
            .filter(|(_, d)| **d < 0.0)
            .map(|(c, d)| 0.5 * c / -d)
            .fold(f64::INFINITY, f64::min);
        let h = step.min(room);
        let xp: Vec<f64> = x.iter().zip(&u).map(|(c, d)| c + h * d).collect();
        let v = p.max_at(&xp);
        if v.is_finite() {
            margin = margin.min(v - base);
        }
    }
    margin
}

fn certificate(p: &MinimaxProblem, x: Vec<f64>, method: &str, iterations: usize, seed: u64) -> MinimaxCertificate {
    let value = p.max_at(&x);
    let all: Vec<usize> = (1..=p.functions.len()).collect();
    let active: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| {
            p.functions[i - 1]
                .eval_coords(&x)
                .is_ok_and(|v| v >= value - 1e-6 * value)
        })
        .collect();
    let boundary_escape = x.iter().any(|c| *c < BOUNDARY_FLAG);
    let mut margin = probe_margin(p, &x, 1000, 1e-4, seed);
    if boundary_escape {
        // Steps toward the face are degenerate, so compare with a point
        // pulled inward instead.
        let inner: Vec<f64> = x.iter().map(|c| (c + 1e-6) / (1.0 + 1e-6 * x.len() as f64)).collect();
        margin = margin.min(value - p.max_at(&inner));
    }
    MinimaxCertificate {
        value,
        equalization_residual: equalization_residual(&p.functions, &x, &active),
        probe_margin: margin,
        method: method.to_string(),
        iterations,
        boundary_escape,
        point: x,
        exact: None,
    }
}

/// Multistart Nelder–Mead in the chart, each run polished by KKT Newton.
/// Deterministic for a fixed seed; ties go to the lower restart index.
pub fn solve_direct(p: &MinimaxProblem, restarts: usize, seed: u64, tol: f64) -> MinimaxCertificate {
    let restarts = restarts.max(1);
    let n = p.dimension - 1;
    let obj = |y: &[f64]| p.max_at(&chart(y));
    let runs: Vec<(usize, f64, Vec<f64>, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64));
            let start = dirichlet(&mut rng, p.dimension);
            let mut y: Vec<f64> = start[..n].to_vec();
            let mut iters = 0;
            let mut step = 0.05;
            let mut best = f64::INFINITY;
            for _ in 0..8 {
                let res = nelder_mead(&obj, &y, step, tol, 4000 * n.max(1));
                iters += res.iterations;
                let improved = res.value < best - tol * 1e-3;
                y = res.y;
                best = best.min(res.value);
                step *= 0.1;
                if !improved && step < 1e-6 {
                    break;
                }
            }
            let mut x = chart(&y);
            if let Some(px) = kkt_polish(p, &x) {
                if p.max_at(&px) <= p.max_at(&x) + tol {
                    x = px;
                }
            }
            (r, p.max_at(&x), x, iters)
        })
        .collect();
    let (_, _, x, iters) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    certificate(p, x, "nelder-mead+kkt", iters, seed)
}

fn sqrt2() -> f64 {
    std::f64::consts::SQRT_2
}

/// Closed-form minimizer via the symmetric reduction.
pub fn solve_equalize(preset: &str) -> Result<MinimaxCertificate, MinimaxError> {
    let p = MinimaxProblem::preset(preset)?;
    let (x, exact) = match preset {
        "log3" => (
            vec![0.25; 4],
            ExactForm {
                value: "9".into(),
                point: vec!["1/4".into(); 4],
            },
        ),
        _ => {
            // x₁ + x₂ = 1/4 and 1 − 4x₁ − 4x₁² = 0.
            let x1 = (-4.0 + (16.0f64 + 16.0).sqrt()) / 8.0;
            let x2 = 0.25 - x1;
            let (a, b) = ("(sqrt(2)-1)/2".to_string(), "(3-2*sqrt(2))/4".to_string());
            (
                vec![x1, x2, x2, x1, x2, x2, x1, x1],
                ExactForm {
                    value: "5+3*sqrt(2)".into(),
                    point: vec![a.clone(), b.clone(), b.clone(), a.clone(), b.clone(), b, a.clone(), a],
                },
            )
        }
    };
    let mut c = certificate(&p, x, "equalize", 0, DEFAULT_SEED);
    c.exact = Some(exact);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduced2d {
    pub t_star: f64,
    pub t_star_exact: String,
    pub line_value: f64,
    pub line_value_exact: String,
    pub full_min_point: [f64; 2],
    pub full_min_value: f64,
    pub full_min_exact: String,
}

/// The planar problem max(f₁, f₂, f₇): the optimum on the critical line
/// and the full optimum.
pub fn reduced2d_solve() -> Reduced2d {
    // g₁ = g₂ on the line gives 64t² + 36t − 1 = 0.
    let t = (-36.0 + (36.0f64 * 36.0 + 4.0 * 64.0).sqrt()) / 128.0;
    let line_value = 3.0 * (3.0 + 8.0 * t) / (1.0 - 8.0 * t);
    // x₁ + x₂ = 1/4 and x₂²/4 − 3x₂/8 + 1/64 = 0, smaller root.
    let (a, b, c): (f64, f64, f64) = (0.25, -0.375, 1.0 / 64.0);
    let x2 = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    let x1 = 0.25 - x2;
    let fs = reduced2d_functions();
    let full_min_value = fs
        .iter()
        .map(|f| f.eval_coords(&[x1, x2]).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    Reduced2d {
        t_star: t,
        t_star_exact: "(-9+sqrt(97))/32".into(),
        line_value,
        line_value_exact: "(17+2*sqrt(97))/3".into(),
        full_min_point: [x1, x2],
        full_min_value,
        full_min_exact: "5+3*sqrt(2)".into(),
    }
}

/// True iff the pairwise spread over `family` (1-based) is ≤ tol·max.
pub fn verify_equal_locus(p: &MinimaxProblem, x: &[f64], family: &[usize], tol: f64) -> (bool, f64) {
    let r = equalization_residual(&p.functions, x, family);
    let top = family
        .iter()
        .filter_map(|&i| p.functions.get(i - 1).and_then(|f| f.eval_coords(x).ok()))
        .fold(0.0, f64::max);
    (r <= tol * top, r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantReport {
    pub d1_log3: f64,
    pub d2_log3: f64,
    pub d_p2_dagger: f64,
    pub d_p3_dagger: f64,
    pub d_p_dagger_exact: String,
}

/// D(x) = (1−α)²(1−x)² + 4(1−α)x.
pub fn case_discriminant(alpha: f64, x: f64) -> f64 {
    (1.0 - alpha).powi(2) * (1.0 - x).powi(2) + 4.0 * (1.0 - alpha) * x
}

/// D¹₁ as a function of (x₂, x₃); D¹₂ is the same form in (x₁, x₄).
pub fn log3_discriminant(u: f64, v: f64) -> f64 {
    let s = u + v;
    (1.0 - s).powi(4) - 4.0 * u * v * s * (1.0 - s)
}

pub fn discriminant_report() -> DiscriminantReport {
    let q = [0.25; 4];
    let x = solve_equalize("dagger").expect("preset").point;
    let alpha = 5.0 + 3.0 * sqrt2();
    DiscriminantReport {
        d1_log3: log3_discriminant(q[1], q[2]),
        d2_log3: log3_discriminant(q[0], q[3]),
        d_p2_dagger: case_discriminant(alpha, x[3] + x[4] + x[5] + x[6]),
        d_p3_dagger: case_discriminant(alpha, x[0] + x[1] + x[2] + x[7]),
        d_p_dagger_exact: "1/2".into(),
    }
}

/// Convenience wrapper used by the CLI and tests.
pub fn point(x: &[f64]) -> Option<SimplexPoint> {
    SimplexPoint::new(x.to_vec()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equalize_values() {
        let c = solve_equalize("log3").unwrap();
        assert_eq!(c.value, 9.0);
        let d = solve_equalize("dagger").unwrap();
        assert!((d.value - (5.0 + 3.0 * sqrt2())).abs() < 1e-12);
        assert!((d.point[1] - 0.0428932188).abs() < 1e-9);
        assert!(d.equalization_residual < 1e-12);
    }

    #[test]
    fn reduced_values() {
        let r = reduced2d_solve();
        assert!((r.t_star - (-9.0 + 97f64.sqrt()) / 32.0).abs() < 1e-15);
        assert!((r.t_star - 0.0265268).abs() < 1e-7);
        assert!((r.line_value - (17.0 + 2.0 * 97f64.sqrt()) / 3.0).abs() < 1e-12);
        assert!((r.full_min_value - (5.0 + 3.0 * sqrt2())).abs() < 1e-12);
    }

    #[test]
    fn discriminants() {
        let d = discriminant_report();
        assert!(d.d1_log3.abs() < 1e-14 && d.d2_log3.abs() < 1e-14);
        assert!((d.d_p2_dagger - 0.5).abs() < 1e-12);
        assert!((d.d_p3_dagger - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_locus() {
        let p = MinimaxProblem::preset("log3").unwrap();
        let (ok, r) = verify_equal_locus(&p, &[0.1, 0.2, 0.3, 0.4], &[1, 2], 1e-9);
        assert!(!ok);
        assert!((r - (13.5 - 28.0 / 3.0)).abs() < 1e-12);
        assert!(verify_equal_locus(&p, &[0.25; 4], &[1, 2], 1e-12).0);
    }

    #[test]
    fn direct_log3() {
        let p = MinimaxProblem::preset("log3").unwrap();
        let c = solve_direct(&p, 8, 42, 1e-10);
        assert!((c.value - 9.0).abs() < 1e-9, "{}", c.value);
        assert!(c.point.iter().all(|v| (v - 0.25).abs() < 1e-6));
        assert!(c.probe_margin >= 0.0);
    }

    #[test]
    fn single_function_escapes() {
        let p = MinimaxProblem::new(vec![log3_functions()[0].clone()]).unwrap();
        let c = solve_direct(&p, 4, 42, 1e-10);
        assert!(c.value < 1.0 + 1e-6, "{} {:?}", c.value, c.point);
        assert!(c.boundary_escape);
        assert!(c.probe_margin < 0.0, "{}", c.probe_margin);
    }
}

#[cfg(test)]
mod dagger_tests {
    use super::*;

    #[test]
    fn direct_dagger_matches_closed_form() {
        let p = MinimaxProblem::preset("dagger").unwrap();
        let c = solve_direct(&p, DEFAULT_RESTARTS, DEFAULT_SEED, DEFAULT_TOL);
        let e = solve_equalize("dagger").unwrap();
        assert!((c.value - e.value).abs() < 1e-7, "{} vs {}", c.value, e.value);
        for (a, b) in c.point.iter().zip(&e.point) {
            assert!((a - b).abs() < 1e-5, "{:?}", c.point);
        }
        assert!(c.probe_margin > -1e-8);
    }
}
