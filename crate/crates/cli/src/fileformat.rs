//! Plain-text files holding one state or operator.
//!
//! ```text
//! flagqm-data 1 state compact-real 2
//! 1.0000000000000000e0 0.0000000000000000e0
//! 0.0000000000000000e0 0.0000000000000000e0
//! ```
//!
//! The header names the format version, the object (`state` or `operator`),
//! the field kind and the comma-separated subsystem dimensions. The body is
//! whitespace-separated floats in row-major order; line breaks carry no
//! meaning. Writers print 17 significant digits, so every `f64` reads back
//! bit for bit.
//!
//! Body layout by kind, with `D` the product of the dimensions:
//! - `complex`: `D` (state) or `D x D` (operator) entries, each as `re im`;
//! - `compact-real`: the real parts, then the imaginary parts, each `D` or
//!   `D x D`;
//! - `real`: the expanded canonical vector or matrix, dimension `D 2^N`,
//!   mains before flags.

use std::fmt;
use std::str::FromStr;

use flagqm::SystemShape;

pub const MAGIC: &str = "flagqm-data";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Object {
    State,
    Operator,
}

impl Object {
    fn name(self) -> &'static str {
        match self {
            Object::State => "state",
            Object::Operator => "operator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataKind {
    Complex,
    Real,
    CompactReal,
}

impl DataKind {
    pub fn name(self) -> &'static str {
        match self {
            DataKind::Complex => "complex",
            DataKind::Real => "real",
            DataKind::CompactReal => "compact-real",
        }
    }
}

impl FromStr for DataKind {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, FormatError> {
        match s {
            "complex" => Ok(DataKind::Complex),
            "real" => Ok(DataKind::Real),
            "compact-real" => Ok(DataKind::CompactReal),
            _ => Err(FormatError(format!("unknown field kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormatError(pub String);

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FormatError {}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub object: Object,
    pub kind: DataKind,
    pub shape: SystemShape,
    pub values: Vec<f64>,
}

/// Number of floats in the body.
pub fn expected_len(object: Object, kind: DataKind, shape: &SystemShape) -> usize {
    let side = match kind {
        DataKind::Complex | DataKind::CompactReal => shape.main_dim(),
        DataKind::Real => shape.expanded_dim(),
    };
    let entries = match object {
        Object::State => side,
        Object::Operator => side * side,
    };
    match kind {
        DataKind::Complex | DataKind::CompactReal => 2 * entries,
        DataKind::Real => entries,
    }
}

/// Number of floats printed per line, so rows stay recognizable.
fn row_len(object: Object, kind: DataKind, shape: &SystemShape) -> usize {
    match (object, kind) {
        (Object::State, DataKind::Complex) => 2,
        (Object::State, _) => 1,
        (Object::Operator, DataKind::Complex) => 2 * shape.main_dim(),
        (Object::Operator, DataKind::CompactReal) => shape.main_dim(),
        (Object::Operator, DataKind::Real) => shape.expanded_dim(),
    }
}

impl DataFile {
    pub fn new(object: Object, kind: DataKind, shape: SystemShape, values: Vec<f64>) -> Result<Self, FormatError> {
        let n = expected_len(object, kind, &shape);
        if values.len() != n {
            return Err(FormatError(format!("expected {n} values, found {}", values.len())));
        }
        Ok(Self { object, kind, shape, values })
    }

    pub fn render(&self) -> String {
        let dims: Vec<String> = self.shape.dims().iter().map(|d| d.to_string()).collect();
        let mut out = format!("{MAGIC} {VERSION} {} {} {}\n", self.object.name(), self.kind.name(), dims.join(","));
        for row in self.values.chunks(row_len(self.object, self.kind, &self.shape)) {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse(text: &str) -> Result<DataFile, FormatError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| FormatError("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, object, kind, dims] = fields[..] else {
        return Err(FormatError(format!("header must have 5 fields, found {}", fields.len())));
    };
    if magic != MAGIC {
        return Err(FormatError(format!("not a {MAGIC} file")));
    }
    if version != VERSION.to_string() {
        return Err(FormatError(format!("unsupported format version {version}")));
    }
    let object = match object {
        "state" => Object::State,
        "operator" => Object::Operator,
        _ => return Err(FormatError(format!("unknown object {object:?}"))),
    };
    let kind: DataKind = kind.parse()?;
    let dims = dims
        .split(',')
        .map(|d| d.parse::<usize>().map_err(|_| FormatError(format!("bad dimension {d:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let shape = SystemShape::new(dims).map_err(|e| FormatError(e.to_string()))?;

    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| FormatError(format!("line {}: bad number {tok:?}", k + 2)))?;
            if !v.is_finite() {
                return Err(FormatError(format!("line {}: non-finite value", k + 2)));
            }
            values.push(v);
        }
    }
    DataFile::new(object, kind, shape, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_example() {
        let f = DataFile::new(Object::State, DataKind::CompactReal, SystemShape::qubits(1).unwrap(), vec![1.0, 0.0, 0.0, 0.0])
            .unwrap();
        let text = f.render();
        assert_eq!(
            text,
            "flagqm-data 1 state compact-real 2\n1.0000000000000000e0\n0.0000000000000000e0\n0.0000000000000000e0\n0.0000000000000000e0\n"
        );
        assert_eq!(parse(&text).unwrap(), f);
    }

    #[test]
    fn lengths_by_kind() {
        let s = SystemShape::new(vec![2, 3]).unwrap();
        assert_eq!(expected_len(Object::State, DataKind::Complex, &s), 12);
        assert_eq!(expected_len(Object::State, DataKind::Real, &s), 24);
        assert_eq!(expected_len(Object::Operator, DataKind::CompactReal, &s), 72);
        assert_eq!(expected_len(Object::Operator, DataKind::Real, &s), 576);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse("").is_err());
        assert!(parse("flagqm-data 2 state complex 2\n1 0 0 0").is_err());
        assert!(parse("other 1 state complex 2\n1 0 0 0").is_err());
        assert!(parse("flagqm-data 1 vector complex 2\n1 0 0 0").is_err());
        assert!(parse("flagqm-data 1 state complex 1\n1 0").is_err());
        assert!(parse("flagqm-data 1 state complex 2\n1 0 0").is_err());
        assert!(parse("flagqm-data 1 state complex 2\n1 0 0 x").is_err());
        assert!(parse("flagqm-data 1 state complex 2\n1 0 0 inf").is_err());
        assert!(parse("flagqm-data 1 state complex\n1 0 0 0").is_err());
    }

    proptest::proptest! {
        #[test]
        fn render_then_parse_is_identity(
            dims in proptest::collection::vec(2usize..4, 1..3),
            kind in proptest::sample::select(vec![DataKind::Complex, DataKind::Real, DataKind::CompactReal]),
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..8),
        ) {
            let shape = SystemShape::new(dims).unwrap();
            let n = expected_len(Object::State, kind, &shape);
            let values: Vec<f64> = (0..n).map(|k| seed[k % seed.len()]).collect();
            let f = DataFile::new(Object::State, kind, shape, values).unwrap();
            let back = parse(&f.render()).unwrap();
            proptest::prop_assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            proptest::prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn floats_roundtrip_bitwise() {
        for v in [0.1, -1.0 / 3.0, std::f64::consts::FRAC_1_SQRT_2, 1e-300, 5e-324, -0.0, f64::MAX] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
