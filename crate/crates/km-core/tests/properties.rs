use std::collections::BTreeMap;

use km_core::dispfuncs::{
    dagger_f_functions, dagger_g_functions, log3_functions, perturbation, SimplexPoint, SymmetryMap,
    DAGGER_T1_PAIRS, I1, I2, I3,
};
use km_core::h3::{dist, lemma11_bound, MoebiusMap, Point3};
use km_core::minimax::{solve_direct, MinimaxProblem};
use km_core::rigor::{certify_positive, iv_eval, parse_expr, Domain, Expr, IBox, Interval, Settings, Status, VarRange};
use km_core::words::{Classification, Decomposition, Letter, Word};
use num_complex::Complex64;
use proptest::prelude::*;
use rug::{Float, Rational};

fn letter() -> impl Strategy<Value = Letter> {
    prop::sample::select(Letter::ALL.to_vec())
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(letter(), 0..=max).prop_map(|v| Word::reduce(&v))
}

fn raw_letters(max: usize) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(letter(), 0..=max)
}

proptest! {
    #[test]
    fn reduce_is_idempotent(v in raw_letters(20)) {
        let w = Word::reduce(&v);
        prop_assert_eq!(Word::reduce(w.letters()), w.clone());
        prop_assert!(w.len() <= v.len());
    }

    #[test]
    fn group_laws(u in word(10), v in word(10), x in word(10)) {
        prop_assert!(u.multiply(&u.inverse()).is_identity());
        prop_assert!(u.multiply(&v).len() <= u.len() + v.len());
        prop_assert_eq!(u.multiply(&v).multiply(&x), u.multiply(&v.multiply(&x)));
        prop_assert_eq!(u.multiply(&v).inverse(), v.inverse().multiply(&u.inverse()));
        prop_assert_eq!(u.multiply(&Word::identity()), u.clone());
    }

    #[test]
    fn text_round_trip(u in word(12)) {
        let s = u.to_string();
        let back: Word = s.parse().unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn every_word_has_one_class(u in word(12)) {
        for dec in [Decomposition::log3(), Decomposition::dagger()] {
            prop_assert_eq!(dec.matches(&u).len(), 1);
            let c = dec.classify(&u).unwrap();
            prop_assert_eq!(u.is_identity(), c == Classification::Identity);
        }
    }
}

// ------------------------------------------------------------ expressions

fn small_rational() -> impl Strategy<Value = Rational> {
    (-20i32..=20, 1i32..=7).prop_map(|(p, q)| Rational::from((p, q)))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        small_rational().prop_map(Expr::Num),
        Just(Expr::Var("x".into())),
        Just(Expr::Var("y".into())),
    ]
}

/// Raw trees, built without the simplifying constructors.
fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), 0i32..=4).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
            inner.prop_map(|a| Expr::Sqrt(Box::new(a))),
        ]
    })
}

fn point_box(x: f64, y: f64, prec: u32) -> IBox {
    let pt = |v: f64| Interval::new(Float::with_val(prec, v), Float::with_val(prec, v));
    [("x".to_string(), pt(x)), ("y".to_string(), pt(y))].into()
}

fn wide_box(x: f64, y: f64, r: f64) -> IBox {
    let iv = |v: f64| Interval::new(Float::with_val(64, v - r), Float::with_val(64, v + r));
    [("x".to_string(), iv(x)), ("y".to_string(), iv(y))].into()
}

proptest! {
    #[test]
    fn printer_round_trips(e in tree()) {
        let s = e.to_string();
        let back = parse_expr(&s).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", s);
    }

    #[test]
    fn derivative_matches_finite_difference(e in tree(), x in 0.2f64..2.0, y in 0.2f64..2.0) {
        let d = e.derivative("x");
        let f = |t: f64| e.eval_f64(&BTreeMap::from([("x".to_string(), t), ("y".to_string(), y)]));
        let h = 1e-5;
        let (a, b, c) = (f(x - h), f(x + h), d.eval_f64(&BTreeMap::from([("x".to_string(), x), ("y".to_string(), y)])));
        prop_assume!(a.is_finite() && b.is_finite() && c.is_finite() && c.abs() < 1e6);
        let fd = (b - a) / (2.0 * h);
        prop_assert!((fd - c).abs() <= 1e-4 * (1.0 + c.abs()), "{} vs {} for {}", fd, c, e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// Outward rounding: a 512-bit enclosure of the point value lies inside
    /// the 64-bit enclosures of the point and of a box around it.
    #[test]
    fn interval_containment(e in tree(), x in -2.0f64..2.0, y in -2.0f64..2.0, r in 0.0f64..0.5) {
        let Ok(fine) = iv_eval(&e, &point_box(x, y, 512), 512) else { return Ok(()); };
        if let Ok(tight) = iv_eval(&e, &point_box(x, y, 64), 64) {
            prop_assert!(tight.contains(&fine), "{} at ({}, {})", e, x, y);
        }
        if let Ok(loose) = iv_eval(&e, &wide_box(x, y, r), 64) {
            prop_assert!(loose.contains(&fine), "{} on box r={}", e, r);
        }
    }
}

proptest! {
    #[test]
    fn splitting_never_widens(e in tree(), x in -2.0f64..2.0, y in -2.0f64..2.0, r in 0.01f64..0.5) {
        let parent = wide_box(x, y, r);
        let Ok(whole) = iv_eval(&e, &parent, 64) else { return Ok(()); };
        let mid = Float::with_val(64, x);
        let mut left = parent.clone();
        let mut right = parent.clone();
        left.get_mut("x").unwrap().hi = mid.clone();
        right.get_mut("x").unwrap().lo = mid;
        if let (Ok(a), Ok(b)) = (iv_eval(&e, &left, 64), iv_eval(&e, &right, 64)) {
            prop_assert!(whole.contains(&a.hull(&b)));
        }
    }

    #[test]
    fn more_precision_keeps_proofs(c in 1i32..40, lo in -3i32..0, width in 1i32..4) {
        // x² − x + c/40 is positive on every range once c/40 > 1/4.
        let e = parse_expr(&format!("x^2 - x + {c}/40")).unwrap();
        let dom: Domain = vec![VarRange::closed("x", Expr::num(lo), Expr::num(lo + width))];
        let s = Settings { max_depth: 12, ..Settings::with_precision(64) };
        let a = certify_positive("p", &e, &dom, s).unwrap();
        let b = certify_positive("p", &e, &dom, Settings { precision: 128, ..s }).unwrap();
        if a.status == Status::Proven {
            prop_assert_eq!(b.status, Status::Proven);
        }
    }
}

#[test]
fn certificates_do_not_depend_on_worker_count() {
    let e = parse_expr("(x - 1/3)^2 + (y - 1/5)^2 + 1/1000 - x*y/100").unwrap();
    let dom: Domain = vec![
        VarRange::closed("x", Expr::num(0), Expr::num(1)),
        VarRange::closed("y", Expr::num(0), Expr::num(1)),
    ];
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| certify_positive("det", &e, &dom, Settings::default()).unwrap())
    };
    let one = run(1);
    assert_eq!(one.status, Status::Proven);
    for n in [2, 4, 8] {
        assert_eq!(run(n), one);
    }
}

// ------------------------------------------------------- displacement functions

fn interior(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, dim).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn max_never_drops_below_the_optimum(x4 in interior(4), x8 in interior(8)) {
        for f in log3_functions().iter().chain(dagger_f_functions().iter()) {
            let p = if f.dim == 4 { &x4 } else { &x8 };
            prop_assert!(f.eval_coords(p).unwrap() > 0.0);
        }
        let log3 = MinimaxProblem::preset("log3").unwrap();
        let dagger = MinimaxProblem::preset("dagger").unwrap();
        prop_assert!(log3.max_at(&x4) >= 9.0 - 1e-9);
        prop_assert!(dagger.max_at(&x8) >= km_core::alpha1() - 1e-9);
    }

    #[test]
    fn log3_symmetries(x in interior(4)) {
        let fs = log3_functions();
        let t1 = SymmetryMap::log3_t1().apply_coords(&x).unwrap();
        let t2 = SymmetryMap::log3_t2().apply_coords(&x).unwrap();
        let v = |i: usize, p: &[f64]| fs[i].eval_coords(p).unwrap();
        for i in 0..2 {
            prop_assert!((v(i, &t1) - v(i, &x)).abs() <= 1e-12 * v(i, &x));
        }
        prop_assert!((v(0, &t2) - v(1, &x)).abs() <= 1e-12 * v(1, &x));
        prop_assert!((v(1, &t2) - v(0, &x)).abs() <= 1e-12 * v(0, &x));
    }

    #[test]
    fn dagger_t1_intertwines(x in interior(8)) {
        let fs = dagger_f_functions();
        let tx = SymmetryMap::dagger_t1().apply_coords(&x).unwrap();
        for (i, j) in DAGGER_T1_PAIRS {
            let a = fs[i - 1].eval_coords(&tx).unwrap();
            let b = fs[j - 1].eval_coords(&x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b, "f{}(T1 x) = {} but f{}(x) = {}", i, a, j, b);
        }
    }

    #[test]
    fn mass_transfer_signs(x in interior(8)) {
        let fs = dagger_f_functions();
        for group in [&I1[..], &I2[..], &I3[..]] {
            for &i in group {
                for &j in group.iter().filter(|&&j| j != i) {
                    let u = perturbation(8, i, j);
                    for l in 1..=8 {
                        let d = fs[l - 1].directional(&x, &u).unwrap();
                        let scale = fs[l - 1].eval_coords(&x).unwrap();
                        if l == i {
                            prop_assert!(d > 0.0);
                        } else if l == j {
                            prop_assert!(d < 0.0);
                        } else {
                            prop_assert!(d.abs() <= 1e-12 * scale, "D f{} = {} along {}->{}", l, d, i, j);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_differences(x in interior(8)) {
        for f in dagger_f_functions().iter().chain(dagger_g_functions().iter()) {
            let g = f.grad_coords(&x).unwrap();
            for k in 0..8 {
                let h = 1e-6;
                let (mut p, mut m) = (x.clone(), x.clone());
                p[k] += h;
                m[k] -= h;
                let fd = (f.eval_coords(&p).unwrap() - f.eval_coords(&m).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "{} d{}: {} vs {}", f, k + 1, fd, g[k]);
            }
        }
    }

    #[test]
    fn simplex_points_normalize(raw in prop::collection::vec(0.01f64..5.0, 2..9)) {
        let p = SimplexPoint::normalized(&raw).unwrap();
        prop_assert!((p.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn certificate_value_is_the_max_at_its_point() {
    for preset in ["log3", "dagger"] {
        let p = MinimaxProblem::preset(preset).unwrap();
        let c = solve_direct(&p, 8, 3, 1e-10);
        let m = p.max_at(&c.point);
        assert!((c.value - m).abs() <= 1e-12 * m, "{preset}");
        assert!(c.probe_margin >= -1e-8, "{preset}: {}", c.probe_margin);
    }
}

// ------------------------------------------------------------------ geometry

fn map() -> impl Strategy<Value = MoebiusMap> {
    prop::array::uniform8(-1.5f64..1.5).prop_filter_map("near-singular", |v| {
        let a = Complex64::new(v[0], v[1]);
        let b = Complex64::new(v[2], v[3]);
        let c = Complex64::new(v[4], v[5]);
        let d = Complex64::new(v[6], v[7]);
        let det = a * d - b * c;
        if det.norm() < 0.2 {
            return None;
        }
        let s = det.sqrt();
        MoebiusMap::new(a / s, b / s, c / s, d / s).ok()
    })
}

fn point() -> impl Strategy<Value = Point3> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.1f64..3.0).prop_map(|(x, y, t)| Point3::new(x, y, t).unwrap())
}

proptest! {
    #[test]
    fn maps_are_isometries(g in map(), z in point(), w in point()) {
        let before = dist(&z, &w);
        let after = dist(&g.apply(&z), &g.apply(&w));
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
    }

    #[test]
    fn lemma11_is_a_log_ratio(a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let sigma = |t: f64| (1.0 - t) / t;
        let v = lemma11_bound(a, b).unwrap();
        prop_assert!((v - 0.5 * (sigma(a).ln() - sigma(b).ln())).abs() <= 1e-12);
        prop_assert!((v + lemma11_bound(b, a).unwrap()).abs() <= 1e-12);
    }
}
