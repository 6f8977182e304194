//! JSON report documents.
//!
//! Keys keep insertion order and floats are printed with 17 significant
//! digits, so two runs with the same inputs produce identical bytes apart
//! from the `timestamp_unix` field.

use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Number, Value};

use crate::fileformat::format_float;

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// A value stated in the literature for this experiment.
    Published,
    /// Computed independently by the complex-formalism oracle.
    Oracle,
    /// Known exactly from the definitions.
    Exact,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Published => "published",
            Provenance::Oracle => "oracle",
            Provenance::Exact => "exact",
        }
    }
}

/// A float as a JSON number with 17 significant digits, `null` when not
/// finite.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(Number::from_str(&format_float(v)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub provenance: Provenance,
    pub max_residual: f64,
    pub pass: bool,
}

impl Check {
    /// Compares `value` with `reference` at tolerance `tol`.
    pub fn compare(name: impl Into<String>, value: f64, reference: f64, provenance: Provenance, tol: f64) -> Self {
        let residual = (value - reference).abs();
        Self::residual(name, value, reference, provenance, residual, tol)
    }

    /// A check whose residual was computed elsewhere.
    pub fn residual(
        name: impl Into<String>,
        value: f64,
        reference: f64,
        provenance: Provenance,
        max_residual: f64,
        tol: f64,
    ) -> Self {
        Self { name: name.into(), value, reference, provenance, max_residual, pass: max_residual < tol }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(self.name.clone()));
        m.insert("value".into(), num(self.value));
        m.insert("reference".into(), num(self.reference));
        m.insert("provenance".into(), Value::String(self.provenance.tag().into()));
        m.insert("max_residual".into(), num(self.max_residual));
        m.insert("pass".into(), Value::Bool(self.pass));
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub checks: Vec<Check>,
    /// Command-specific result sections, in insertion order.
    pub sections: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), parameters: Map::new(), checks: Vec::new(), sections: Map::new() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The report without a timestamp; deterministic for a given run.
    pub fn body(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), Value::String("flagqm".into()));
        m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("parameters".into(), Value::Object(self.parameters.clone()));
        m.insert("pass".into(), Value::Bool(self.pass()));
        m.insert("checks".into(), Value::Array(self.checks.iter().map(Check::to_json).collect()));
        for (k, v) in &self.sections {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    /// Pretty-printed JSON with the current time appended.
    pub fn render(&self) -> String {
        let mut body = self.body();
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        body.as_object_mut().expect("body is an object").insert("timestamp_unix".into(), Value::from(now));
        let mut text = serde_json::to_string_pretty(&body).expect("JSON values serialize");
        text.push('\n');
        text
    }
}
