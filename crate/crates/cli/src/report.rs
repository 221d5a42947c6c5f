//! Reports, expectation checks and output formats.

use std::collections::BTreeMap;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scenario::{Expectation, Kind, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// An expectation was not met.
    Fail,
    /// The scenario does not describe a valid computation.
    Invalid,
    /// A solver failed or did not reach its gap; results so far are kept.
    Unconverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Invalid => 2,
            Status::Unconverged => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub key: String,
    pub expected: Expectation,
    pub actual: Option<Value>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub kind: Option<Kind>,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub status: Status,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub certificates: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

/// Whether `actual` meets `e`.
pub fn meets(e: &Expectation, actual: &Value) -> bool {
    let x = as_f64(actual);
    if let Some(want) = &e.value {
        let ok = match (as_f64(want), x) {
            (Some(w), Some(a)) if w.is_infinite() || a.is_infinite() => w == a,
            (Some(w), Some(a)) => (w - a).abs() <= e.tol.unwrap_or(DEFAULT_MATCH_TOL),
            _ => want == actual,
        };
        if !ok {
            return false;
        }
    }
    if let Some(lo) = e.min {
        if !x.is_some_and(|a| a >= lo) {
            return false;
        }
    }
    if let Some(hi) = e.max {
        if !x.is_some_and(|a| a <= hi) {
            return false;
        }
    }
    true
}

impl Report {
    pub fn new(s: &Scenario, seed: u64, results: BTreeMap<String, Value>, certificates: BTreeMap<String, Value>) -> Self {
        let checks = s
            .expected
            .iter()
            .map(|(k, e)| {
                let actual = results.get(k).cloned();
                let pass = actual.as_ref().is_some_and(|a| meets(e, a));
                Check { key: k.clone(), expected: e.clone(), actual, pass }
            })
            .collect();
        Report {
            scenario: s.name.clone(),
            kind: Some(s.kind),
            seed,
            version: VERSION.to_string(),
            wall_time_s: 0.0,
            status: Status::Pass,
            results,
            checks,
            certificates,
            error: None,
        }
    }

    /// Report for a file that could not be read as a scenario.
    pub fn invalid(name: &str, error: String) -> Self {
        Report {
            scenario: name.to_string(),
            kind: None,
            seed: 0,
            version: VERSION.to_string(),
            wall_time_s: 0.0,
            status: Status::Invalid,
            results: BTreeMap::new(),
            checks: Vec::new(),
            certificates: BTreeMap::new(),
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub wall_time_s: f64,
    pub passed: usize,
    pub failed: usize,
    pub reports: Vec<Report>,
}

impl Summary {
    pub fn new(reports: Vec<Report>, wall_time_s: f64) -> Self {
        let passed = reports.iter().filter(|r| r.status == Status::Pass).count();
        Summary { version: VERSION.to_string(), wall_time_s, passed, failed: reports.len() - passed, reports }
    }

    /// 0 when everything passed; otherwise the most severe status wins,
    /// with invalid input ahead of solver trouble ahead of failed checks.
    pub fn exit_code(&self) -> i32 {
        let has = |s: Status| self.reports.iter().any(|r| r.status == s);
        [Status::Invalid, Status::Unconverged, Status::Fail]
            .into_iter()
            .find(|&s| has(s))
            .map_or(0, Status::exit_code)
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    }
}

/// One row per result: scenario, status, key, value, expectation, pass.
pub fn to_csv(reports: &[Report]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "status", "seed", "key", "value", "expected", "pass"])?;
    for r in reports {
        let status = serde_json::to_value(r.status)?;
        let status = cell(Some(&status));
        let seed = r.seed.to_string();
        if r.results.is_empty() {
            w.write_record([r.scenario.as_str(), &status, &seed, "", "", "", ""])?;
        }
        for (k, v) in &r.results {
            let check = r.checks.iter().find(|c| &c.key == k);
            let expected = check.map(|c| serde_json::to_string(&c.expected)).transpose()?.unwrap_or_default();
            let pass = check.map(|c| c.pass.to_string()).unwrap_or_default();
            w.write_record([r.scenario.as_str(), &status, &seed, k, &cell(Some(v)), &expected, &pass])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn exp(v: Value) -> Expectation {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn numbers_match_within_tolerance() {
        assert!(meets(&exp(json!({"value": 1.0, "tol": 1e-3})), &json!(1.0005)));
        assert!(!meets(&exp(json!({"value": 1.0, "tol": 1e-4})), &json!(1.0005)));
        assert!(meets(&exp(json!({"value": "inf"})), &json!("inf")));
        assert!(!meets(&exp(json!({"value": "inf"})), &json!(1e300)));
    }

    #[test]
    fn bounds_and_equality() {
        assert!(meets(&exp(json!({"min": 0.5})), &json!(0.75)));
        assert!(!meets(&exp(json!({"max": 0.5})), &json!(0.75)));
        assert!(meets(&exp(json!({"value": "FORBIDDEN"})), &json!("FORBIDDEN")));
        assert!(!meets(&exp(json!({"value": true})), &json!(false)));
        assert!(!meets(&exp(json!({"min": 0.0})), &json!("not a number")));
    }
}
