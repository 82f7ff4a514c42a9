//! Run reports and their JSON/text renderings.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

pub const DEFAULT_DIGITS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Undecided,
    /// Documented observation; never affects the run status.
    Info,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Undecided => "undecided",
            Outcome::Info => "info",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass | Outcome::Info => 0,
            Outcome::Fail => 1,
            Outcome::Undecided => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    pub status: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Record {
    pub fn new(name: impl Into<String>, status: Outcome) -> Self {
        Record { name: name.into(), status, value: None, exact: None, interval: None, detail: None }
    }

    pub fn check(name: impl Into<String>, ok: bool) -> Self {
        Record::new(name, if ok { Outcome::Pass } else { Outcome::Fail })
    }

    pub fn info(name: impl Into<String>) -> Self {
        Record::new(name, Outcome::Info)
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn exact(mut self, s: impl Into<String>) -> Self {
        self.exact = Some(s.into());
        self
    }

    pub fn detail(mut self, s: impl Into<String>) -> Self {
        self.detail = Some(s.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub results: Vec<Record>,
    pub status: Outcome,
    pub wall_time_ms: u64,
    pub tool_version: String,
}

/// Fail beats undecided beats pass; info records are ignored.
pub fn overall(results: &[Record]) -> Outcome {
    let mut out = Outcome::Pass;
    for r in results {
        match r.status {
            Outcome::Fail => return Outcome::Fail,
            Outcome::Undecided => out = Outcome::Undecided,
            _ => {}
        }
    }
    out
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.clamp(1, 17) - 1, x).parse().unwrap_or(x)
}

/// Plain decimals for moderate magnitudes, scientific otherwise.
pub fn fmt_value(v: f64) -> String {
    let m = v.abs();
    if m != 0.0 && !(1e-4..1e15).contains(&m) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl RunReport {
    pub fn new(command: &str, inputs: Map<String, Value>, results: Vec<Record>) -> Self {
        RunReport {
            command: command.to_string(),
            inputs,
            status: overall(&results),
            results,
            wall_time_ms: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Rounds every value to `digits` significant digits. Non-finite values
    /// move into the detail text, since JSON cannot carry them.
    pub fn round_values(&mut self, digits: usize) {
        for r in &mut self.results {
            match r.value {
                Some(v) if v.is_finite() => r.value = Some(round_sig(v, digits)),
                Some(v) => {
                    r.value = None;
                    let d = r.detail.take().map(|d| format!("{d}; ")).unwrap_or_default();
                    r.detail = Some(format!("{d}value {v}"));
                }
                None => {}
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "km {} {}: {} ({} ms)", self.command, self.tool_version, self.status.as_str(), self.wall_time_ms);
        if !self.inputs.is_empty() {
            let inputs: Vec<String> = self.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "  inputs: {}", inputs.join(" "));
        }
        for r in &self.results {
            let _ = write!(s, "  {:<9} {}", r.status.as_str(), r.name);
            if let Some(v) = r.value {
                let _ = write!(s, " = {}", fmt_value(v));
            }
            if let Some(e) = &r.exact {
                let _ = write!(s, " [{e}]");
            }
            if let Some([a, b]) = &r.interval {
                let _ = write!(s, " in [{a}, {b}]");
            }
            if let Some(d) = &r.detail {
                let _ = write!(s, " ({d})");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_precedence() {
        let p = Record::check("a", true);
        let u = Record::new("b", Outcome::Undecided);
        let f = Record::check("c", false);
        let i = Record::info("d");
        assert_eq!(overall(&[p.clone(), i.clone()]), Outcome::Pass);
        assert_eq!(overall(&[p.clone(), u.clone()]), Outcome::Undecided);
        assert_eq!(overall(&[u, f, p]), Outcome::Fail);
        assert_eq!(overall(&[i]), Outcome::Pass);
    }

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(round_sig(9.242640687119285, 15), 9.24264068711929);
        assert_eq!(round_sig(0.1 + 0.2, 15), 0.3);
        assert_eq!(round_sig(-1234.5678, 3), -1230.0);
        assert!(round_sig(f64::NAN, 15).is_nan());
    }

    #[test]
    fn small_values_print_in_scientific() {
        assert_eq!(fmt_value(8.88178419700125e-15), "8.88178419700125e-15");
        assert_eq!(fmt_value(0.25), "0.25");
        assert_eq!(fmt_value(0.0), "0");
    }

    #[test]
    fn nonfinite_values_move_to_detail() {
        let mut r = RunReport::new("t", Map::new(), vec![Record::info("x").value(f64::INFINITY)]);
        r.round_values(15);
        assert_eq!(r.results[0].value, None);
        assert_eq!(r.results[0].detail.as_deref(), Some("value inf"));
    }
}
