//! Upper half-space geometry: Möbius isometries, distance, the Poisson kernel,
//! cap integrals, the hyperbolic law of cosines and a Schottky probe.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum H3Error {
    #[error("point height must be positive, got {0}")]
    BadHeight(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameters outside the ping-pong range: {0}")]
    NotSchottky(String),
}

/// ½·ln(5 + 3√2).
pub fn displacement_floor() -> f64 {
    0.5 * (5.0 + 3.0 * std::f64::consts::SQRT_2).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, t: f64) -> Result<Self, H3Error> {
        if t > 0.0 && t.is_finite() {
            Ok(Point3 { x, y, t })
        } else {
            Err(H3Error::BadHeight(t))
        }
    }

    fn w(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// arccosh(1 + u), accurate for small u.
fn acosh1p(u: f64) -> f64 {
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

pub fn dist(z: &Point3, w: &Point3) -> f64 {
    let h = (z.x - w.x).powi(2) + (z.y - w.y).powi(2) + (z.t - w.t).powi(2);
    acosh1p(h / (2.0 * z.t * w.t))
}

/// An element of PSL(2,ℂ), normalized to determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoebiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Serialize for MoebiusMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.a, self.b, self.c, self.d]
            .map(|z| [z.re, z.im])
            .serialize(s)
    }
}

impl MoebiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, H3Error> {
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return Err(H3Error::Singular);
        }
        let r = det.sqrt();
        Ok(MoebiusMap {
            a: a / r,
            b: b / r,
            c: c / r,
            d: d / r,
        })
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        MoebiusMap { a: o, b: z, c: z, d: o }
    }

    /// Loxodromic map w ↦ k·w with |k| = e^ℓ, axis over 0 and ∞.
    pub fn axis_translation(length: f64, twist: f64) -> Self {
        let h = Complex64::new(length / 2.0, twist / 2.0).exp();
        let z = Complex64::new(0.0, 0.0);
        MoebiusMap { a: h, b: z, c: z, d: h.inv() }
    }

    /// Translation by `delta` along the geodesic with endpoints ±1.
    pub fn cross_translation(delta: f64) -> Self {
        let (ch, sh) = ((delta / 2.0).cosh(), (delta / 2.0).sinh());
        let (c, s) = (Complex64::new(ch, 0.0), Complex64::new(sh, 0.0));
        MoebiusMap { a: c, b: s, c: s, d: c }
    }

    pub fn inverse(&self) -> Self {
        MoebiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn compose(&self, o: &MoebiusMap) -> Self {
        MoebiusMap {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Poincaré extension to the upper half-space.
    pub fn apply(&self, z: &Point3) -> Point3 {
        let w = z.w();
        let num = self.a * w + self.b;
        let den = self.c * w + self.d;
        let t2 = z.t * z.t;
        let q = den.norm_sqr() + self.c.norm_sqr() * t2;
        let nw = (num * den.conj() + self.a * self.c.conj() * t2) / q;
        Point3 {
            x: nw.re,
            y: nw.im,
            t: z.t / q,
        }
    }

    /// Action on the boundary plane; `None` stands for ∞.
    pub fn apply_boundary(&self, w: Option<Complex64>) -> Option<Complex64> {
        match w {
            None => (self.c.norm() > 0.0).then(|| self.a / self.c),
            Some(w) => {
                let den = self.c * w + self.d;
                (den.norm() > 0.0).then(|| (self.a * w + self.b) / den)
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    /// Translation length, from the trace.
    pub fn translation_length(&self) -> f64 {
        let half = self.trace() / 2.0;
        let l = (half + (half * half - 1.0).sqrt()).ln();
        2.0 * l.re.abs()
    }
}

/// A unit tangent direction at a base point, in the Euclidean frame of the
/// half-space model: φ from the upward vertical, θ from the +x axis. Since the
/// model is conformal this also names a point at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDir {
    pub phi: f64,
    pub theta: f64,
}

impl BoundaryDir {
    pub fn new(phi: f64, theta: f64) -> Result<Self, H3Error> {
        if !(0.0..=PI).contains(&phi) || !(0.0..2.0 * PI).contains(&theta) {
            return Err(H3Error::Domain(format!("direction ({phi}, {theta}) out of range")));
        }
        Ok(BoundaryDir { phi, theta })
    }

    pub fn vector(&self) -> [f64; 3] {
        let s = self.phi.sin();
        [s * self.theta.cos(), s * self.theta.sin(), self.phi.cos()]
    }

    pub fn from_vector(v: [f64; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let phi = (v[2] / n).clamp(-1.0, 1.0).acos();
        let theta = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        BoundaryDir { phi, theta }
    }
}

/// Unit tangent at z of the geodesic toward w.
pub fn geodesic_tangent(z: &Point3, w: &Point3) -> [f64; 3] {
    let (dx, dy) = (w.x - z.x, w.y - z.y);
    let r = (dx * dx + dy * dy).sqrt();
    if r < 1e-300 {
        return [0.0, 0.0, if w.t >= z.t { 1.0 } else { -1.0 }];
    }
    // Circle through both points, centred on the boundary at distance c along e.
    let c = (r * r + w.t * w.t - z.t * z.t) / (2.0 * r);
    let n = (z.t * z.t + c * c).sqrt();
    let (ex, ey) = (dx / r, dy / r);
    [z.t * ex / n, z.t * ey / n, c / n]
}

fn angle(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    dot.clamp(-1.0, 1.0).acos()
}

/// 1/(cosh d − sinh d·cos φ), where φ is the angle at z between the ray to
/// zp and `dir`.
pub fn poisson(z: &Point3, zp: &Point3, dir: &BoundaryDir) -> f64 {
    let d = dist(z, zp);
    if d == 0.0 {
        return 1.0;
    }
    let phi = angle(geodesic_tangent(z, zp), dir.vector());
    poisson_at(d, phi)
}

pub fn poisson_at(d: f64, phi: f64) -> f64 {
    1.0 / (d.cosh() - d.sinh() * phi.cos())
}

/// λ_{g,z₀}(ζ) = P(z₀, g⁻¹z₀, ζ).
pub fn expansion_factor(g: &MoebiusMap, z0: &Point3, dir: &BoundaryDir) -> f64 {
    poisson(z0, &g.inverse().apply(z0), dir)
}

/// Round-measure average of λ² over all directions at z₀.
pub fn sphere_average_lambda_sq(g: &MoebiusMap, z0: &Point3, n: usize) -> f64 {
    let n = n.max(2) & !1;
    let m = 2 * n;
    let h = PI / n as f64;
    let zp = g.inverse().apply(z0);
    let d = dist(z0, &zp);
    let axis = geodesic_tangent(z0, &zp);
    let mut total = 0.0;
    for j in 0..m {
        let theta = 2.0 * PI * j as f64 / m as f64;
        let mut inner = 0.0;
        for i in 0..=n {
            let phi = i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let dir = BoundaryDir { phi, theta };
            let lam = poisson_at(d, angle(axis, dir.vector()));
            inner += w * lam * lam * phi.sin();
        }
        total += inner * h / 3.0;
    }
    total * (2.0 * PI / m as f64) / (4.0 * PI)
}

/// ½·ln(b(1−a)/(a(1−b))).
pub fn lemma11_bound(a: f64, b: f64) -> Result<f64, H3Error> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(H3Error::Domain(format!("a={a}, b={b} outside [0,1]")));
    }
    if a == 0.0 || b == 1.0 {
        return Err(H3Error::Domain("requires a > 0 and b < 1".into()));
    }
    if a == 1.0 || b == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(0.5 * ((b * (1.0 - a)) / (a * (1.0 - b))).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapIntegral {
    pub numeric: f64,
    pub closed_form: f64,
}

/// (1/4π)∬ (c − s cos φ)⁻² sin φ dφ dθ over the cap 0 ≤ φ ≤ arccos(1−2a),
/// which has normalized area a. Trapezoid in θ, Simpson with `n` panels in φ.
pub fn cap_integral(d: f64, a: f64, n: usize) -> Result<CapIntegral, H3Error> {
    if !(d > 0.0) || !(a > 0.0 && a <= 1.0) {
        return Err(H3Error::Domain(format!("d={d}, a={a}")));
    }
    let (c, s) = (d.cosh(), d.sinh());
    let phi0 = (1.0 - 2.0 * a).clamp(-1.0, 1.0).acos();
    let n = (n.max(2) + 1) & !1;
    let h = phi0 / n as f64;
    let g = |phi: f64| phi.sin() / (c - s * phi.cos()).powi(2);
    let simpson: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * g(i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    // The integrand does not depend on θ, so the trapezoid sum is exact.
    let m = 16;
    let theta_sum: f64 = (0..m).map(|_| simpson).sum::<f64>() * (2.0 * PI / m as f64);
    Ok(CapIntegral {
        numeric: theta_sum / (4.0 * PI),
        closed_form: a / ((c - s) * (c - s + 2.0 * a * s)),
    })
}

/// Opposite side of a hyperbolic triangle with sides d1, d2 meeting at θ.
pub fn locos_side(d1: f64, d2: f64, theta: f64) -> f64 {
    // cosh d1 cosh d2 − sinh d1 sinh d2 cos θ, rewritten to keep small sides accurate.
    let u = ((d1 - d2).cosh() - 1.0) + d1.sinh() * d2.sinh() * (1.0 - theta.cos());
    acosh1p(u.max(0.0))
}

/// Partials of cosh(side) in d1 and d2.
pub fn locos_cosh_partials(d1: f64, d2: f64, theta: f64) -> (f64, f64) {
    let ct = theta.cos();
    (
        d1.sinh() * d2.cosh() - d1.cosh() * d2.sinh() * ct,
        d1.cosh() * d2.sinh() - d1.sinh() * d2.cosh() * ct,
    )
}

/// A boundary disk; `outside` marks the complement of a round disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// Image of the circle |w| = ρ under g, as the bounded disk it bounds.
/// Centre (b·d̄ − a·c̄·ρ²)/D and radius ρ/|D| with D = |d|² − |c|²ρ².
fn image_circle(g: &MoebiusMap, rho: f64) -> Option<Disk> {
    let den = g.d.norm_sqr() - g.c.norm_sqr() * rho * rho;
    if den.abs() < 1e-300 {
        return None;
    }
    let c = (g.b * g.d.conj() - g.a * g.c.conj() * rho * rho) / den;
    Some(Disk {
        cx: c.re,
        cy: c.im,
        r: rho / den.abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchottkyPair {
    pub xi: MoebiusMap,
    pub eta: MoebiusMap,
    pub translation_length: f64,
    pub axis_separation: f64,
    /// Ping-pong disks of η (images of ξ's disks), inside ξ's annulus.
    pub eta_disks: [Disk; 2],
    pub annulus: (f64, f64),
}

/// ξ(w) = e^ℓ·w and η = R ξ R⁻¹ with R the translation by δ along the common
/// perpendicular, so the axes are exactly δ apart.
///
/// Ping-pong criterion: ξ carries {|w| ≥ e^{−ℓ/2}} onto {|w| ≥ e^{ℓ/2}}, so its
/// disks are {|w| < e^{−ℓ/2}} and {|w| > e^{ℓ/2}}. The pair is accepted when
/// both η disks R(·) of these lie in the open annulus e^{−ℓ/2} < |w| < e^{ℓ/2}
/// with a relative gap of 1e−9 and are disjoint from each other. The four
/// disks are then pairwise disjoint and ⟨ξ, η⟩ is a free Schottky group.
pub fn schottky_pair(translation_length: f64, axis_separation: f64) -> Result<SchottkyPair, H3Error> {
    let (l, delta) = (translation_length, axis_separation);
    if !(0.05..=30.0).contains(&l) || !(0.05..=25.0).contains(&delta) {
        return Err(H3Error::NotSchottky(format!(
            "need 0.05 ≤ ℓ ≤ 30 and 0.05 ≤ δ ≤ 25, got ℓ={l}, δ={delta}"
        )));
    }
    let xi = MoebiusMap::axis_translation(l, 0.0);
    let r = MoebiusMap::cross_translation(delta);
    let eta = r.compose(&xi).compose(&r.inverse());
    let (inner, outer) = ((-l / 2.0).exp(), (l / 2.0).exp());
    // R sends −d/c = −coth(δ/2) to ∞; it must lie between the two circles so
    // that both η regions are bounded disks.
    let pole = 1.0 / (delta / 2.0).tanh();
    if pole >= outer {
        return Err(H3Error::NotSchottky(format!(
            "coth(δ/2) = {pole:.6} is not inside the annulus ({inner:.6}, {outer:.6})"
        )));
    }
    let d1 = image_circle(&r, inner).ok_or_else(|| H3Error::NotSchottky("degenerate disk".into()))?;
    let d2 = image_circle(&r, outer).ok_or_else(|| H3Error::NotSchottky("degenerate disk".into()))?;
    let gap = 1e-9;
    for d in [d1, d2] {
        let c = d.cx.hypot(d.cy);
        if c - d.r <= inner * (1.0 + gap) || c + d.r >= outer * (1.0 - gap) {
            return Err(H3Error::NotSchottky(format!(
                "η disk centre {c:.6} radius {:.6} leaves the annulus ({inner:.6}, {outer:.6})",
                d.r
            )));
        }
    }
    if (d1.cx - d2.cx).hypot(d1.cy - d2.cy) <= (d1.r + d2.r) * (1.0 + gap) {
        return Err(H3Error::NotSchottky("η disks overlap".into()));
    }
    Ok(SchottkyPair {
        xi,
        eta,
        translation_length: l,
        axis_separation: delta,
        eta_disks: [d1, d2],
        annulus: (inner, outer),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub translation_length: f64,
    pub axis_separation: f64,
    pub samples: usize,
    pub seed: u64,
    pub min_max_displacement: f64,
    pub argmin: Point3,
    pub floor: f64,
    pub margin: f64,
    pub violations: usize,
}

/// Samples base points and records min over z of max over {ξ, η, ξη} of
/// dist(z, γz). Half the samples are spread over the region near both axes,
/// the other half are jittered around the common perpendicular.
pub fn schottky_probe(
    translation_length: f64,
    axis_separation: f64,
    samples: usize,
    seed: u64,
) -> Result<ProbeReport, H3Error> {
    if samples == 0 {
        return Err(H3Error::Domain("samples must be positive".into()));
    }
    let pair = schottky_pair(translation_length, axis_separation)?;
    let words = [pair.xi, pair.eta, pair.xi.compose(&pair.eta)];
    let floor = displacement_floor();
    let (_, outer) = pair.annulus;
    let span = outer.ln() + 2.0;
    let foot = MoebiusMap::cross_translation(axis_separation / 2.0).apply(&Point3 { x: 0.0, y: 0.0, t: 1.0 });

    let results: Vec<(f64, Point3)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let z = if i % 2 == 0 {
                let t = (rng.gen_range(-span..span)).exp();
                let rad = outer * rng.gen::<f64>();
                let ang = rng.gen_range(0.0..2.0 * PI);
                Point3 { x: rad * ang.cos(), y: rad * ang.sin(), t }
            } else {
                let s: f64 = rng.gen_range(-1.0..1.0);
                let q = Point3 {
                    x: foot.x + 0.5 * s * foot.t,
                    y: foot.t * rng.gen_range(-0.5..0.5),
                    t: foot.t * (rng.gen_range(-1.0..1.0f64)).exp(),
                };
                let u = rng.gen_range(-1.0..1.0) * axis_separation;
                MoebiusMap::cross_translation(u).apply(&q)
            };
            let m = words
                .iter()
                .map(|g| dist(&z, &g.apply(&z)))
                .fold(f64::NEG_INFINITY, f64::max);
            (m, z)
        })
        .collect();
    let violations = results.iter().filter(|(m, _)| *m < floor).count();
    let (min, argmin) = results
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("samples > 0");
    Ok(ProbeReport {
        translation_length,
        axis_separation,
        samples,
        seed,
        min_max_displacement: min,
        argmin,
        floor,
        margin: min - floor,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, t: f64) -> Point3 {
        Point3::new(x, y, t).unwrap()
    }

    #[test]
    fn vertical_distance() {
        assert!((dist(&p(0.0, 0.0, 1.0), &p(0.0, 0.0, std::f64::consts::E)) - 1.0).abs() < 1e-15);
        assert_eq!(dist(&p(1.0, 2.0, 3.0), &p(1.0, 2.0, 3.0)), 0.0);
        assert!(Point3::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn axis_translation_moves_by_length() {
        let g = MoebiusMap::axis_translation(1.7, 0.0);
        let z = p(0.0, 0.0, 1.0);
        let gz = g.apply(&z);
        assert!((gz.t - 1.7f64.exp()).abs() < 1e-12);
        assert!((dist(&z, &gz) - 1.7).abs() < 1e-12);
        assert!((g.translation_length() - 1.7).abs() < 1e-12);
        assert_eq!(MoebiusMap::identity().apply(&z), z);
    }

    #[test]
    fn poisson_endpoints() {
        let d: f64 = 0.8;
        assert!((poisson_at(d, 0.0) - d.exp()).abs() < 1e-14);
        assert!((poisson_at(d, PI) - (-d).exp()).abs() < 1e-14);
        let z = p(0.0, 0.0, 1.0);
        let up = BoundaryDir::new(0.0, 0.0).unwrap();
        assert!((poisson(&z, &p(0.0, 0.0, d.exp()), &up) - d.exp()).abs() < 1e-12);
        assert_eq!(poisson(&z, &z, &up), 1.0);
    }

    #[test]
    fn expansion_endpoints() {
        let g = MoebiusMap::axis_translation(0.9, 0.0);
        let z = p(0.0, 0.0, 1.0);
        let up = BoundaryDir::new(0.0, 0.0).unwrap();
        let down = BoundaryDir::new(PI, 0.0).unwrap();
        let vals = [expansion_factor(&g, &z, &up), expansion_factor(&g, &z, &down)];
        assert!(vals.iter().any(|v| (v - 0.9f64.exp()).abs() < 1e-12));
        assert!(vals.iter().any(|v| (v - (-0.9f64).exp()).abs() < 1e-12));
        assert_eq!(expansion_factor(&MoebiusMap::identity(), &z, &up), 1.0);
    }

    #[test]
    fn tangent_is_unit_and_points_forward() {
        let z = p(0.3, -0.2, 0.7);
        let w = p(1.1, 0.4, 0.2);
        let v = geodesic_tangent(&z, &w);
        let n = v.iter().map(|c| c * c).sum::<f64>();
        assert!((n - 1.0).abs() < 1e-14);
        let eps = 1e-6;
        let step = p(z.x + eps * v[0], z.y + eps * v[1], z.t + eps * v[2]);
        assert!(dist(&step, &w) < dist(&z, &w));
    }

    #[test]
    fn lemma11_examples() {
        assert!((lemma11_bound(0.25, 0.75).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(lemma11_bound(0.5, 0.5).unwrap(), 0.0);
        assert!(lemma11_bound(0.0, 0.5).is_err());
        assert!(lemma11_bound(0.5, 1.0).is_err());
    }

    #[test]
    fn cap_examples() {
        let r = cap_integral(3f64.ln(), 0.25, 2048).unwrap();
        assert!((r.closed_form - 0.75).abs() < 1e-14);
        assert!((r.numeric - 0.75).abs() < 1e-8);
        let full = cap_integral(1.3, 1.0, 2048).unwrap();
        assert!((full.closed_form - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locos_examples() {
        assert!((locos_side(0.7, 1.2, PI) - 1.9).abs() < 1e-12);
        assert!(locos_side(0.9, 0.9, 0.0).abs() < 1e-12);
        let (a, b) = locos_cosh_partials(1.0, 1.0, PI / 2.0);
        assert!((a + b - 2f64.sinh()).abs() < 1e-12);
    }

    #[test]
    fn floor_constant() {
        assert!((displacement_floor() - 1.111913816736535).abs() < 1e-15);
    }

    #[test]
    fn schottky_guard() {
        assert!(schottky_pair(2.0, 0.1).is_err());
        assert!(schottky_probe(3.0, 4.0, 0, 1).is_err());
    }
}
