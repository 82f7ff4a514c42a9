//! The four subcommands. Each returns a report whose status is already set;
//! only parameter problems surface as `UsageError`.

use km_core::h3::{cap_integral, schottky_probe, H3Error};
use km_core::minimax::{self, reduced2d_solve, solve_direct, solve_equalize, MinimaxProblem};
use km_core::rigor::{appendix_suite, Lemma, RigorError, Role, Settings, Status, SuiteEntry};
use km_core::words::{discover_relations, verify_partition, Decomposition, WordError};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::report::{Outcome, Record, RunReport};

pub const MAX_DEPTH: usize = 14;
pub const CAP_TOL: f64 = 1e-8;
pub const CAP_PANELS: usize = 2048;
pub const CAP_GRID_D: [f64; 3] = [0.5, 1.0, 2.0];
pub const CAP_GRID_A: [f64; 4] = [0.1, 0.25, 0.5, 0.9];

#[derive(Debug, Error, PartialEq)]
#[error("{0}")]
pub struct UsageError(pub String);

impl From<WordError> for UsageError {
    fn from(e: WordError) -> Self {
        UsageError(e.to_string())
    }
}

fn inputs(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Identity-count targets and the γ-length searched, per preset.
fn relation_target(preset: &str) -> (usize, usize) {
    match preset {
        "log3" => (1, 4),
        _ => (2, 18),
    }
}

pub fn verify_decomposition(preset: &str, depth: usize) -> Result<RunReport, UsageError> {
    if depth > MAX_DEPTH {
        return Err(UsageError(format!("depth {depth} exceeds the maximum of {MAX_DEPTH}")));
    }
    let dec = Decomposition::preset(preset).ok_or_else(|| UsageError(format!("unknown preset `{preset}`")))?;
    let (gamma_len, expected) = relation_target(preset);
    let need = gamma_len + 4;
    if depth < need {
        return Err(WordError::DepthTooSmall { depth, gamma_len, need }.into());
    }

    let part = verify_partition(&dec, depth)?;
    let mut results = vec![Record::check("partition", part.valid)
        .value(part.words_checked as f64)
        .detail(format!("{} words up to length {depth}, {} violations", part.words_checked, part.violations.len()))];
    for v in part.violations.iter().take(8) {
        results.push(Record::info(format!("violation {}", v.word)).detail(format!("{} matches", v.matches)));
    }

    let rels = discover_relations(&dec, gamma_len, depth)?;
    let plain = rels.iter().filter(|r| r.is_plain_translate()).count();
    results.push(
        Record::check("relations", rels.len() == expected)
            .value(rels.len() as f64)
            .detail(format!(
                "found {} identities with |gamma| <= {gamma_len} ({plain} plain cone translates), expected {expected}",
                rels.len()
            )),
    );
    for (i, r) in rels.iter().enumerate() {
        let ex: Vec<String> = r.excluded.iter().map(ToString::to_string).collect();
        let mut d = format!("{}*J[{}] = G - J[{}]", r.gamma, r.source, ex.join(","));
        if r.is_plain_translate() {
            d.push_str(", plain translate");
        }
        results.push(Record::info(format!("relation {}", i + 1)).detail(d));
    }
    Ok(RunReport::new(
        "verify-decomposition",
        inputs(json!({ "preset": preset, "depth": depth, "gamma_len": gamma_len })),
        results,
    ))
}

pub struct MinimaxArgs<'a> {
    pub preset: &'a str,
    pub method: &'a str,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
}

fn target(preset: &str) -> (f64, &'static str) {
    match preset {
        "log3" => (9.0, "9"),
        _ => (km_core::alpha1(), "5+3*sqrt(2)"),
    }
}

pub fn solve_minimax(a: &MinimaxArgs<'_>) -> Result<RunReport, UsageError> {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(UsageError(format!("tolerance must be positive, got {}", a.tol)));
    }
    if a.restarts == 0 {
        return Err(UsageError("restarts must be positive".into()));
    }
    let echo = inputs(json!({
        "preset": a.preset, "method": a.method, "restarts": a.restarts, "seed": a.seed, "tol": a.tol,
    }));
    if a.preset == "reduced2d" {
        return Ok(RunReport::new("solve-minimax", echo, reduced2d_records(a.tol)));
    }

    let cert = match a.method {
        "direct" => {
            let p = MinimaxProblem::preset(a.preset).map_err(|e| UsageError(e.to_string()))?;
            solve_direct(&p, a.restarts, a.seed, a.tol.min(minimax::DEFAULT_TOL))
        }
        "equalize" => solve_equalize(a.preset).map_err(|e| UsageError(e.to_string()))?,
        m => return Err(UsageError(format!("unknown method `{m}`"))),
    };
    let (goal, goal_exact) = target(a.preset);
    let err = (cert.value - goal).abs();
    let mut value = Record::check("value", err <= a.tol)
        .value(cert.value)
        .detail(format!("target {goal_exact}, |error| {err:.3e}, method {}", cert.method));
    if let Some(ex) = &cert.exact {
        value = value.exact(ex.value.clone());
    }
    let mut results = vec![value];
    for (i, x) in cert.point.iter().enumerate() {
        let mut r = Record::info(format!("x{}", i + 1)).value(*x);
        if let Some(ex) = cert.exact.as_ref().and_then(|e| e.point.get(i)) {
            r = r.exact(ex.clone());
        }
        results.push(r);
    }
    results.push(Record::info("equalization_residual").value(cert.equalization_residual));
    results.push(Record::info("probe_margin").value(cert.probe_margin));
    if cert.boundary_escape {
        results.push(Record::info("boundary_escape").detail("minimizer came within 1e-9 of the boundary"));
    }
    Ok(RunReport::new("solve-minimax", echo, results))
}

fn reduced2d_records(tol: f64) -> Vec<Record> {
    let r = reduced2d_solve();
    let t_ref = (-9.0 + 97f64.sqrt()) / 32.0;
    let line_ref = (17.0 + 2.0 * 97f64.sqrt()) / 3.0;
    let full_err = (r.full_min_value - km_core::alpha1()).abs();
    vec![
        Record::check("t_star", (r.t_star - t_ref).abs() <= tol).value(r.t_star).exact(r.t_star_exact.clone()),
        Record::check("line_value", (r.line_value - line_ref).abs() <= tol)
            .value(r.line_value)
            .exact(r.line_value_exact.clone()),
        Record::check("full_min_value", full_err <= tol)
            .value(r.full_min_value)
            .exact(r.full_min_exact.clone())
            .detail(format!("|error| {full_err:.3e}")),
        Record::info("full_min_x1").value(r.full_min_point[0]),
        Record::info("full_min_x2").value(r.full_min_point[1]),
    ]
}

pub fn parse_lemmas(s: &str) -> Result<Vec<Lemma>, UsageError> {
    if s == "all" {
        return Ok(Lemma::ALL.to_vec());
    }
    s.parse::<Lemma>().map(|l| vec![l]).map_err(|e| UsageError(e.to_string()))
}

fn suite_record(lemma: Lemma, e: SuiteEntry) -> Record {
    let status = match (e.role, e.status) {
        (Role::Finding, _) => Outcome::Info,
        (_, Status::Proven) => Outcome::Pass,
        (_, Status::Refuted) => Outcome::Fail,
        (_, Status::Undecided) => Outcome::Undecided,
    };
    let mut notes = Vec::new();
    if e.role == Role::Finding {
        notes.push(format!("finding, {}", format!("{:?}", e.status).to_lowercase()));
    }
    if let Some(d) = e.detail {
        notes.push(d);
    }
    if let Some(c) = &e.certificate {
        notes.push(format!(
            "{} boxes, depth {}, {} bits",
            c.boxes_examined, c.max_depth_reached, c.precision_bits
        ));
        if let Some(w) = &c.witness {
            let pts: Vec<String> = w.iter().map(|(k, [lo, hi])| format!("{k} in [{lo}, {hi}]")).collect();
            notes.push(format!("witness {}", pts.join(", ")));
        }
    }
    let name = if e.name.starts_with(lemma.label()) { e.name } else { format!("{} {}", lemma.label(), e.name) };
    let mut r = Record::new(name, status);
    r.value = e.value;
    r.interval = e.interval;
    if !notes.is_empty() {
        r.detail = Some(notes.join("; "));
    }
    r
}

pub fn certify(lemma: &str, precision: u32, max_depth: usize) -> Result<RunReport, UsageError> {
    let lemmas = parse_lemmas(lemma)?;
    if !(32..=65536).contains(&precision) {
        return Err(UsageError(format!("precision must be 32..=65536 bits, got {precision}")));
    }
    if max_depth == 0 || max_depth > 200 {
        return Err(UsageError(format!("max depth must be 1..=200, got {max_depth}")));
    }
    let settings = Settings { precision, max_depth, ..Settings::default() };
    let mut results = Vec::new();
    for l in lemmas {
        match appendix_suite(l, settings) {
            Ok(entries) => results.extend(entries.into_iter().map(|e| suite_record(l, e))),
            Err(RigorError::Precision(p)) => results.push(
                Record::new(format!("{}: chain", l.label()), Outcome::Undecided)
                    .detail(format!("precision {p} is below the 128-bit chain minimum")),
            ),
            Err(e) => results.push(Record::check(format!("{}: suite", l.label()), false).detail(e.to_string())),
        }
    }
    Ok(RunReport::new(
        "certify",
        inputs(json!({ "lemma": lemma, "precision": precision, "max_depth": max_depth })),
        results,
    ))
}

pub struct SchottkyArgs {
    pub length: f64,
    pub separation: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn probe_schottky(a: &SchottkyArgs) -> Result<RunReport, UsageError> {
    if a.samples == 0 {
        return Err(UsageError("samples must be positive".into()));
    }
    let rep = schottky_probe(a.length, a.separation, a.samples, a.seed).map_err(|e| match e {
        H3Error::NotSchottky(_) | H3Error::Domain(_) => UsageError(e.to_string()),
        other => UsageError(format!("probe failed: {other}")),
    })?;
    let z = rep.argmin;
    let results = vec![
        Record::check("violations", rep.violations == 0)
            .value(rep.violations as f64)
            .detail(format!("{} samples below the floor", rep.violations)),
        Record::check("margin", rep.margin >= 0.0).value(rep.margin),
        Record::info("min_max_displacement")
            .value(rep.min_max_displacement)
            .detail(format!("at ({:.6}, {:.6}, {:.6})", z.x, z.y, z.t)),
        Record::info("floor").value(rep.floor).exact("log(5+3*sqrt(2))/2"),
    ];
    Ok(RunReport::new(
        "probe",
        inputs(json!({
            "kind": "schottky", "length": a.length, "separation": a.separation,
            "samples": a.samples, "seed": a.seed,
        })),
        results,
    ))
}

/// One (d, a) pair, or the whole documented grid when either is absent.
pub fn probe_cap(d: Option<f64>, a: Option<f64>, panels: usize) -> Result<RunReport, UsageError> {
    let pairs: Vec<(f64, f64)> = match (d, a) {
        (Some(d), Some(a)) => vec![(d, a)],
        (None, None) => CAP_GRID_D.iter().flat_map(|&d| CAP_GRID_A.iter().map(move |&a| (d, a))).collect(),
        _ => return Err(UsageError("give both --d and --a, or neither for the grid".into())),
    };
    let mut results = Vec::new();
    for (d, a) in pairs {
        let c = cap_integral(d, a, panels).map_err(|e| UsageError(e.to_string()))?;
        let err = (c.numeric - c.closed_form).abs();
        results.push(
            Record::check(format!("cap d={d} a={a}"), err <= CAP_TOL)
                .value(c.closed_form)
                .detail(format!("quadrature {}, |difference| {err:.3e}", c.numeric)),
        );
    }
    Ok(RunReport::new(
        "probe",
        inputs(json!({ "kind": "cap-integral", "d": d, "a": a, "panels": panels})),
        results,
    ))
}
