//! The four commands.

use std::fs;
use std::path::{Path, PathBuf};

use flagqm::bellswap::{
    bell_functional, default_spec, post_measurement_marginal, probability_table, swapped_state_reference, Backend,
    ProbabilityTable, BOB_OUTCOMES, QUANTUM_VALUE, REAL_TENSOR_BOUND, REFERENCE_S00,
};
use flagqm::complexqm::{ComplexOperator, ComplexState};
use flagqm::realmap::{s_inv, s_map, t_inv_left, t_map, RealOperator, RealState};
use flagqm::tensor::{join_complex_vec, max_abs_diff, CMatrix, CVector, RMatrix, RVector};
use flagqm::verify::{run_all, SuiteConfig};
use flagqm::SystemShape;
use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{Map, Value};

use crate::config::{Command, ConfigError, RunConfig};
use crate::fileformat::{self, DataFile, DataKind, Object};
use crate::report::{num, Check, Provenance, Report};

/// Why a run stopped before producing a verdict.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("internal error: {0}")]
    Engine(#[from] flagqm::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Engine(_) => 1,
        }
    }

    fn io(path: &Path, message: impl ToString) -> Self {
        RunError::Io { path: path.to_path_buf(), message: message.to_string() }
    }
}

/// Result of a completed run. `output` is data to write to `--out` for the
/// map commands.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub output: Option<(PathBuf, String)>,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let command = cfg.command.ok_or_else(|| ConfigError::field("command", "no command given"))?;
    match command {
        Command::Bellswap => Ok(Outcome { report: bellswap(cfg)?, output: None }),
        Command::Verify => Ok(Outcome { report: verify(cfg), output: None }),
        Command::MapState => map_state(cfg),
        Command::MapOperator => map_operator(cfg),
    }
}

fn backend_names(cfg: &RunConfig) -> Value {
    Value::Array(cfg.backends.iter().map(|b| Value::String(b.to_string())).collect())
}

fn bellswap(cfg: &RunConfig) -> Result<Report, RunError> {
    let tol = cfg.tolerance;
    let mut report = Report::new(Command::Bellswap.name());
    report.parameters.insert("backends".into(), backend_names(cfg));
    report.parameters.insert("tolerance".into(), num(tol));

    let spec = default_spec();
    let mut tables: Vec<ProbabilityTable> = Vec::new();
    let mut results = Map::new();
    for &backend in &cfg.backends {
        let table = probability_table(&spec, backend)?;
        let bell = bell_functional(&table)?;
        let tag = backend.to_string();

        report.checks.push(Check::compare(format!("{tag}: T"), bell.total, QUANTUM_VALUE, Provenance::Published, tol));
        for (b, t) in bell.per_outcome.iter().enumerate() {
            let name = format!("{tag}: T_{}", BOB_OUTCOMES[b]);
            report.checks.push(Check::compare(name, *t, QUANTUM_VALUE, Provenance::Published, tol));
        }
        let mut worst_marginal: f64 = 0.0;
        for b in 0..4 {
            for x in 1..=3 {
                for z in 1..=6 {
                    worst_marginal = worst_marginal.max((table.marginal(b, x, z)? - 0.25).abs());
                }
            }
        }
        report.checks.push(Check::residual(
            format!("{tag}: P(b) independent of settings"),
            bell.outcome_probability[0],
            0.25,
            Provenance::Published,
            worst_marginal,
            tol,
        ));
        report.checks.push(Check::residual(
            format!("{tag}: normalization"),
            1.0 - table.normalization_residual(),
            1.0,
            Provenance::Exact,
            table.normalization_residual(),
            tol,
        ));
        let min = table.min_entry();
        let mut nonneg = Check::residual(format!("{tag}: probabilities non-negative"), min, 0.0, Provenance::Exact, (-min).max(0.0), tol);
        nonneg.pass = min >= -1e-12;
        report.checks.push(nonneg);
        for (x, z, expected) in REFERENCE_S00 {
            let s = bell.s(0, x, z).expect("all settings present");
            let name = format!("{tag}: S00_{x}{z} conditional");
            report.checks.push(Check::compare(name, s.conditional, expected, Provenance::Published, tol));
        }
        if backend != Backend::Complex {
            let rho = post_measurement_marginal(&spec, 0)?;
            let residual = max_abs_diff(&rho.expanded(), &swapped_state_reference());
            let name = format!("{tag}: Alice-Charlie state after b = 00");
            report.checks.push(Check::residual(name, rho.trace(), 1.0, Provenance::Published, residual, tol));
        }

        let mut section = Map::new();
        section.insert("T".into(), num(bell.total));
        section.insert("reference_T".into(), num(bell.quantum_value));
        section.insert("real_tensor_bound".into(), num(REAL_TENSOR_BOUND));
        let per = |vals: &[f64; 4]| {
            Value::Object(BOB_OUTCOMES.iter().zip(vals).map(|(l, v)| (l.to_string(), num(*v))).collect())
        };
        section.insert("T_b".into(), per(&bell.per_outcome));
        section.insert("P_b".into(), per(&bell.outcome_probability));
        let s_values = bell
            .s_values
            .iter()
            .map(|s| {
                let mut m = Map::new();
                m.insert("b".into(), Value::String(BOB_OUTCOMES[s.b].into()));
                m.insert("x".into(), Value::from(s.x));
                m.insert("z".into(), Value::from(s.z));
                m.insert("raw".into(), num(s.raw));
                m.insert("conditional".into(), num(s.conditional));
                Value::Object(m)
            })
            .collect();
        section.insert("S".into(), Value::Array(s_values));
        let entries = ProbabilityTable::points()
            .zip(table.entries())
            .map(|(p, v)| {
                let mut m = Map::new();
                m.insert("a".into(), Value::from(p.a));
                m.insert("b".into(), Value::String(BOB_OUTCOMES[p.b].into()));
                m.insert("c".into(), Value::from(p.c));
                m.insert("x".into(), Value::from(p.x));
                m.insert("z".into(), Value::from(p.z));
                m.insert("p".into(), num(*v));
                Value::Object(m)
            })
            .collect();
        section.insert("table".into(), Value::Array(entries));
        results.insert(tag, Value::Object(section));
        tables.push(table);
    }
    report.sections.insert("results".into(), Value::Object(results));

    if tables.len() > 1 {
        let mut diff = Map::new();
        for t in &tables[1..] {
            let d = tables[0].max_difference(t);
            let name = format!("{} vs {}", tables[0].backend(), t.backend());
            report.checks.push(Check::residual(format!("differential: {name}"), d, 0.0, Provenance::Oracle, d, tol));
            diff.insert(name, num(d));
        }
        report.sections.insert("differential".into(), Value::Object(diff));
    }
    Ok(report)
}

fn verify(cfg: &RunConfig) -> Report {
    let mut report = Report::new(Command::Verify.name());
    report.parameters.insert("seed".into(), Value::from(cfg.seed));
    report.parameters.insert("trials".into(), Value::from(cfg.trials));
    report.parameters.insert("tolerance".into(), num(cfg.tolerance));
    let suite_cfg = SuiteConfig { seed: cfg.seed, trials: cfg.trials, tolerance: cfg.tolerance, ..SuiteConfig::default() };
    report.parameters.insert("max_dim".into(), Value::from(suite_cfg.max_dim));
    report.parameters.insert("max_parties".into(), Value::from(suite_cfg.max_parties));

    let results = run_all(&suite_cfg);
    let mut suites = Vec::new();
    for r in &results {
        let mut check = Check::residual(r.name, r.max_residual, 0.0, Provenance::Oracle, r.max_residual, cfg.tolerance);
        check.pass = r.pass;
        report.checks.push(check);
        let mut m = Map::new();
        m.insert("name".into(), Value::String(r.name.into()));
        m.insert("trials".into(), Value::from(r.trials));
        m.insert("max_residual".into(), num(r.max_residual));
        m.insert("pass".into(), Value::Bool(r.pass));
        m.insert("error".into(), r.error.clone().map_or(Value::Null, Value::String));
        suites.push(Value::Object(m));
    }
    report.sections.insert("suites".into(), Value::Array(suites));
    report
}

fn read_input(cfg: &RunConfig, object: Object) -> Result<(PathBuf, DataFile), RunError> {
    let path = cfg.input.clone().ok_or_else(|| ConfigError::field("input", "an input file is required"))?;
    let text = fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    let data = fileformat::parse(&text).map_err(|e| RunError::io(&path, e))?;
    if data.object != object {
        return Err(RunError::io(&path, format!("expected a {object:?} file").to_lowercase()));
    }
    Ok((path, data))
}

fn output_path(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    Ok(cfg.out.clone().ok_or_else(|| ConfigError::field("out", "an output file is required"))?)
}

fn map_parameters(report: &mut Report, input: &Path, out: &Path, from: DataKind, to: DataKind, shape: &SystemShape) {
    report.parameters.insert("input".into(), Value::String(input.display().to_string()));
    report.parameters.insert("out".into(), Value::String(out.display().to_string()));
    report.parameters.insert("from".into(), Value::String(from.name().into()));
    report.parameters.insert("to".into(), Value::String(to.name().into()));
    report.parameters.insert("dims".into(), Value::Array(shape.dims().iter().map(|&d| Value::from(d)).collect()));
}

fn default_target(from: DataKind) -> DataKind {
    match from {
        DataKind::Complex => DataKind::CompactReal,
        DataKind::Real | DataKind::CompactReal => DataKind::Complex,
    }
}

fn complex_values(v: &CVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn complex_from_values(values: &[f64]) -> CVector {
    values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn map_state(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (input, data) = read_input(cfg, Object::State)?;
    let out = output_path(cfg)?;
    let to = cfg.to.unwrap_or_else(|| default_target(data.kind));
    let shape = data.shape.clone();
    let d = shape.main_dim();
    let tol = cfg.tolerance;
    let mut report = Report::new(Command::MapState.name());
    map_parameters(&mut report, &input, &out, data.kind, to, &shape);

    let (complex, real) = match data.kind {
        DataKind::Complex => {
            let psi = ComplexState::from_vector(complex_from_values(&data.values), shape.clone())?;
            let real = s_map(&psi);
            let back = s_inv(&real);
            let r = max_abs_diff(back.amplitudes(), psi.amplitudes());
            report.checks.push(Check::residual("inverse recovers input", r, 0.0, Provenance::Exact, r, tol));
            (psi, real)
        }
        DataKind::CompactReal => {
            let re = RVector::from(data.values[..d].to_vec());
            let im = RVector::from(data.values[d..].to_vec());
            let real = RealState::new(re, im, shape.clone())?;
            (s_inv(&real), real)
        }
        DataKind::Real => {
            let v = RVector::from(data.values.clone());
            match RealState::from_canonical(&v, &shape) {
                Ok(real) => (s_inv(&real), real),
                Err(flagqm::Error::NotInImage(r)) => {
                    report.checks.push(Check::residual("input is canonical", r, 0.0, Provenance::Exact, r, tol));
                    return Ok(Outcome { report, output: None });
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let norm = complex.norm_sqr();
    report.checks.push(Check::compare("input normalized", norm, 1.0, Provenance::Exact, tol));
    let r = (real.norm_sqr() - norm).abs();
    report.checks.push(Check::residual("norm preserved", real.norm_sqr(), norm, Provenance::Exact, r, tol));
    if !report.pass() {
        return Ok(Outcome { report, output: None });
    }

    let values = match to {
        DataKind::Complex => complex_values(&join_complex_vec(real.re(), real.im())),
        DataKind::CompactReal => real.re().iter().chain(real.im()).copied().collect(),
        DataKind::Real => real.to_expanded().to_vec(),
    };
    let file = DataFile::new(Object::State, to, shape, values).expect("length follows the shape");
    Ok(Outcome { report, output: Some((out, file.render())) })
}

fn matrix(values: &[f64], n: usize) -> RMatrix {
    Array2::from_shape_vec((n, n), values.to_vec()).expect("length checked by the parser")
}

fn map_operator(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (input, data) = read_input(cfg, Object::Operator)?;
    let out = output_path(cfg)?;
    let to = cfg.to.unwrap_or_else(|| default_target(data.kind));
    let shape = data.shape.clone();
    let d = shape.main_dim();
    let tol = cfg.tolerance;
    let mut report = Report::new(Command::MapOperator.name());
    map_parameters(&mut report, &input, &out, data.kind, to, &shape);

    let (complex, real): (CMatrix, RealOperator) = match data.kind {
        DataKind::Complex => {
            let m = Array2::from_shape_vec((d, d), complex_from_values(&data.values).to_vec()).expect("length checked");
            let a = ComplexOperator::general(m, shape.clone())?;
            let real = t_map(&a);
            let back = t_inv_left(&real.expanded(), &shape)?;
            let r = max_abs_diff(back.matrix(), a.matrix());
            report.checks.push(Check::residual("left inverse recovers input", r, 0.0, Provenance::Exact, r, tol));
            (a.matrix().clone(), real)
        }
        DataKind::CompactReal => {
            let re = matrix(&data.values[..d * d], d);
            let im = matrix(&data.values[d * d..], d);
            let real = RealOperator::new(re, im, shape.clone())?;
            (real.to_complex(), real)
        }
        DataKind::Real => {
            let m = matrix(&data.values, shape.expanded_dim());
            match t_inv_left(&m, &shape) {
                Ok(a) => {
                    report.checks.push(Check::residual("input in image of T", 0.0, 0.0, Provenance::Exact, 0.0, tol));
                    let real = t_map(&a);
                    (a.matrix().clone(), real)
                }
                Err(flagqm::Error::NotInImage(r)) => {
                    report.checks.push(Check::residual("input in image of T", r, 0.0, Provenance::Exact, r, tol));
                    return Ok(Outcome { report, output: None });
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    let values = match to {
        DataKind::Complex => complex.iter().flat_map(|z| [z.re, z.im]).collect(),
        DataKind::CompactReal => real.re().iter().chain(real.im().iter()).copied().collect(),
        DataKind::Real => real.expanded().iter().copied().collect(),
    };
    let file = DataFile::new(Object::Operator, to, shape, values).expect("length follows the shape");
    Ok(Outcome { report, output: Some((out, file.render())) })
}
