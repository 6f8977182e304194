//! Run configuration: defaults, then an optional config file, then flags.
//!
//! The config file is a flat list of `key = value` lines (TOML syntax) with
//! integer, float, string and string-list values. Unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use flagqm::bellswap::Backend;
use serde::Deserialize;
use toml::Spanned;

use crate::fileformat::DataKind;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Bellswap,
    MapState,
    MapOperator,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bellswap => "bellswap",
            Command::MapState => "map-state",
            Command::MapOperator => "map-operator",
            Command::Verify => "verify",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

/// Backend as written by the user; `Both` expands to complex then real.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Complex,
    Real,
    Both,
}

impl BackendChoice {
    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

/// Expands choices into an ordered, duplicate-free backend list.
pub fn expand_backends(choices: &[BackendChoice]) -> Vec<Backend> {
    let mut out = Vec::new();
    for c in choices {
        let add: &[Backend] = match c {
            BackendChoice::Complex => &[Backend::Complex],
            BackendChoice::Real => &[Backend::Real],
            BackendChoice::Both => &[Backend::Complex, Backend::Real],
        };
        for b in add {
            if !out.contains(b) {
                out.push(*b);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub backends: Vec<Backend>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Target representation for the map commands.
    pub to: Option<DataKind>,
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            backends: vec![Backend::Complex],
            input: None,
            out: None,
            to: None,
            seed: 0,
            trials: DEFAULT_TRIALS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(ConfigError::field("tolerance", "tolerance must be positive"));
        }
        if self.trials == 0 {
            return Err(ConfigError::field("trials", "trials must be at least 1"));
        }
        if self.backends.is_empty() {
            return Err(ConfigError::field("backend", "at least one backend is required"));
        }
        Ok(())
    }
}

/// A configuration problem, located by line and field when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, field: None, message: message.into() }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self { line: None, field: Some(field.to_string()), message: message.into() }
    }

    fn at(text: &str, offset: usize, field: &str, message: impl Into<String>) -> Self {
        Self { line: Some(line_of(text, offset)), field: Some(field.to_string()), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StringOrList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Spanned<String>>,
    backend: Option<Spanned<StringOrList>>,
    input: Option<Spanned<String>>,
    out: Option<Spanned<String>>,
    to: Option<Spanned<String>>,
    seed: Option<Spanned<i64>>,
    trials: Option<Spanned<i64>>,
    tolerance: Option<Spanned<f64>>,
}

/// Field name from a serde message such as "unknown field `foo`, expected ...".
fn quoted_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Parses a config file on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let line = e.span().map(|s| line_of(text, s.start));
        let field = quoted_field(&message).or_else(|| {
            // type errors point at the value; recover the key from its line
            let l = line?;
            let src = text.lines().nth(l - 1)?;
            Some(src.split('=').next()?.trim().to_string()).filter(|k| !k.is_empty())
        });
        ConfigError { line, field, message }
    })?;

    let mut cfg = RunConfig::default();
    if let Some(c) = raw.command {
        let span = c.span();
        cfg.command = Some(Command::parse(c.get_ref()).ok_or_else(|| {
            ConfigError::at(text, span.start, "command", format!("unknown command {:?}", c.get_ref()))
        })?);
    }
    if let Some(b) = raw.backend {
        let span = b.span();
        let names = match b.into_inner() {
            StringOrList::One(s) => vec![s],
            StringOrList::Many(v) => v,
        };
        let choices = names
            .iter()
            .map(|n| {
                BackendChoice::parse(n).ok_or_else(|| {
                    ConfigError::at(text, span.start, "backend", format!("unknown backend {n:?} (complex, real or both)"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        cfg.backends = expand_backends(&choices);
        if cfg.backends.is_empty() {
            return Err(ConfigError::at(text, span.start, "backend", "at least one backend is required"));
        }
    }
    if let Some(p) = raw.input {
        cfg.input = Some(PathBuf::from(p.into_inner()));
    }
    if let Some(p) = raw.out {
        cfg.out = Some(PathBuf::from(p.into_inner()));
    }
    if let Some(t) = raw.to {
        let span = t.span();
        cfg.to = Some(t.get_ref().parse().map_err(|_| {
            ConfigError::at(text, span.start, "to", format!("unknown representation {:?}", t.get_ref()))
        })?);
    }
    if let Some(s) = raw.seed {
        let span = s.span();
        cfg.seed = u64::try_from(*s.get_ref())
            .map_err(|_| ConfigError::at(text, span.start, "seed", "seed must be a non-negative integer"))?;
    }
    if let Some(t) = raw.trials {
        let span = t.span();
        cfg.trials = usize::try_from(*t.get_ref())
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| ConfigError::at(text, span.start, "trials", "trials must be at least 1"))?;
    }
    if let Some(t) = raw.tolerance {
        let span = t.span();
        let v = *t.get_ref();
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError::at(text, span.start, "tolerance", "tolerance must be positive"));
        }
        cfg.tolerance = v;
    }
    Ok(cfg)
}
