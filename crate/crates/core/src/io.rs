//! Problem (de)serialization to JSON, plus a stable problem-identity hash.
//!
//! Problem files are JSON objects with a `kind` tag (`"quadratic"` or
//! `"logistic"`); matrices are row-major nested arrays. Floats serialize via
//! shortest round-trip formatting, so `parse(serialize(p))` reproduces every
//! entry bit-exactly. Unknown fields are rejected by name.
//!
//! This module is deliberately `f64`-concrete: files, hashes, and the CLI all
//! fix the scalar type so that identity (and the traces derived from it) is
//! bit-stable.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logistic::LogisticSaddle;
use crate::problem::{
    GradientPair, HessianBlocks, ProblemConstants, ProblemError, SaddlePoint, SaddleProblem,
};
use crate::quadratic::QuadraticSaddle;

/// Errors from reading, writing, or interpreting problem files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid problem JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown field `{field}` in {place}")]
    UnknownField { field: String, place: &'static str },
    #[error("malformed {place}: {detail}")]
    Malformed { place: &'static str, detail: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Optional overrides for the regularity constants a problem computes from
/// its data. Absent fields keep the computed value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip_hess: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_radius: Option<f64>,
}

impl DeclaredConstants {
    /// Applies the overrides on top of computed constants.
    pub fn apply(&self, base: ProblemConstants<f64>) -> ProblemConstants<f64> {
        ProblemConstants {
            mu: self.mu.unwrap_or(base.mu),
            lip_grad: self.lip_grad.unwrap_or(base.lip_grad),
            lip_hess: self.lip_hess.unwrap_or(base.lip_hess),
            level_radius: self.level_radius.or(base.level_radius),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemFile {
    Quadratic {
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constants: Option<DeclaredConstants>,
    },
    Logistic {
        x_rows: Vec<Vec<f64>>,
        y_rows: Vec<Vec<f64>>,
        coupling: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constants: Option<DeclaredConstants>,
    },
}

/// Field names accepted per kind; tagged-enum deserialization cannot deny
/// unknown keys itself, so parsing checks them explicitly.
const QUADRATIC_FIELDS: [&str; 7] = ["kind", "p", "q", "a", "b", "c", "constants"];
const LOGISTIC_FIELDS: [&str; 5] = ["kind", "x_rows", "y_rows", "coupling", "constants"];

impl ProblemFile {
    /// Parses a problem file from JSON text, rejecting unknown fields.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or_else(|| IoError::Malformed {
            place: "problem file",
            detail: "top level must be a JSON object".into(),
        })?;
        let kind = obj.get("kind").and_then(|k| k.as_str()).ok_or_else(|| IoError::Malformed {
            place: "problem file",
            detail: "missing string field `kind`".into(),
        })?;
        let (allowed, place): (&[&str], _) = match kind {
            "quadratic" => (&QUADRATIC_FIELDS, "quadratic problem file"),
            "logistic" => (&LOGISTIC_FIELDS, "logistic problem file"),
            other => {
                return Err(IoError::Malformed {
                    place: "problem file",
                    detail: format!("unsupported kind `{other}`"),
                })
            }
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(IoError::UnknownField { field: key.clone(), place });
            }
        }
        Ok(serde_json::from_value(value)?)
    }

    /// Serializes to pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("problem files serialize");
        text.push('\n');
        text
    }

    /// Builds the in-memory problem, validating data and applying constant
    /// overrides.
    pub fn into_problem(self) -> Result<AnyProblem, IoError> {
        match self {
            ProblemFile::Quadratic { p, q, a, b, c, constants } => {
                let n = b.len();
                let m = c.len();
                let problem = QuadraticSaddle::new(
                    rows_to_matrix(&p, n, n, "p")?,
                    rows_to_matrix(&q, m, m, "q")?,
                    rows_to_matrix(&a, n, m, "a")?,
                    DVector::from_vec(b),
                    DVector::from_vec(c),
                )?;
                let problem = match constants {
                    Some(decl) if !decl.is_empty() => {
                        problem.clone().with_constants(decl.apply(problem.constants()))?
                    }
                    _ => problem,
                };
                Ok(AnyProblem::Quadratic(problem))
            }
            ProblemFile::Logistic { x_rows, y_rows, coupling, constants } => {
                let n = first_width(&x_rows, "x_rows")?;
                let m = first_width(&y_rows, "y_rows")?;
                let problem = LogisticSaddle::new(
                    rows_to_matrix(&x_rows, x_rows.len(), n, "x_rows")?,
                    rows_to_matrix(&y_rows, y_rows.len(), m, "y_rows")?,
                    rows_to_matrix(&coupling, n, m, "coupling")?,
                )?;
                let problem = match constants {
                    Some(decl) if !decl.is_empty() => {
                        problem.clone().with_constants(decl.apply(problem.constants()))?
                    }
                    _ => problem,
                };
                Ok(AnyProblem::Logistic(problem))
            }
        }
    }
}

fn first_width(rows: &[Vec<f64>], place: &'static str) -> Result<usize, IoError> {
    match rows.first() {
        Some(row) if !row.is_empty() => Ok(row.len()),
        _ => Err(IoError::Malformed { place, detail: "needs at least one nonempty row".into() }),
    }
}

fn rows_to_matrix(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
    place: &'static str,
) -> Result<DMatrix<f64>, IoError> {
    if rows.len() != nrows {
        return Err(IoError::Malformed {
            place,
            detail: format!("expected {nrows} rows, found {}", rows.len()),
        });
    }
    let mut out = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(IoError::Malformed {
                place,
                detail: format!("row {i} has {} entries, expected {ncols}", row.len()),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Reads and parses a problem file.
pub fn load_problem(path: &Path) -> Result<ProblemFile, IoError> {
    let text = fs::read_to_string(path)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    ProblemFile::parse(&text)
}

/// Writes a problem file as JSON.
pub fn save_problem(path: &Path, file: &ProblemFile) -> Result<(), IoError> {
    fs::write(path, file.to_json())
        .map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// A problem of either built-in family, as loaded from a file or generated
/// from a run specification.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Quadratic(QuadraticSaddle<f64>),
    Logistic(LogisticSaddle<f64>),
}

impl AnyProblem {
    /// Materializes the full on-disk description, including the effective
    /// constants (so identity survives a save/load cycle exactly).
    pub fn to_file(&self) -> ProblemFile {
        let constants = self.constants();
        let decl = DeclaredConstants {
            mu: Some(constants.mu),
            lip_grad: Some(constants.lip_grad),
            lip_hess: Some(constants.lip_hess),
            level_radius: constants.level_radius,
        };
        match self {
            AnyProblem::Quadratic(p) => ProblemFile::Quadratic {
                p: matrix_to_rows(p.p()),
                q: matrix_to_rows(p.q()),
                a: matrix_to_rows(p.coupling()),
                b: p.b().iter().copied().collect(),
                c: p.c().iter().copied().collect(),
                constants: Some(decl),
            },
            AnyProblem::Logistic(p) => ProblemFile::Logistic {
                x_rows: matrix_to_rows(p.x_data()),
                y_rows: matrix_to_rows(p.y_data()),
                coupling: matrix_to_rows(p.coupling()),
                constants: Some(decl),
            },
        }
    }
}

impl SaddleProblem<f64> for AnyProblem {
    fn dims(&self) -> (usize, usize) {
        match self {
            AnyProblem::Quadratic(p) => p.dims(),
            AnyProblem::Logistic(p) => p.dims(),
        }
    }
    fn value(&self, z: &SaddlePoint<f64>) -> f64 {
        match self {
            AnyProblem::Quadratic(p) => p.value(z),
            AnyProblem::Logistic(p) => p.value(z),
        }
    }
    fn gradient(&self, z: &SaddlePoint<f64>) -> GradientPair<f64> {
        match self {
            AnyProblem::Quadratic(p) => p.gradient(z),
            AnyProblem::Logistic(p) => p.gradient(z),
        }
    }
    fn hessian(&self, z: &SaddlePoint<f64>) -> HessianBlocks<f64> {
        match self {
            AnyProblem::Quadratic(p) => p.hessian(z),
            AnyProblem::Logistic(p) => p.hessian(z),
        }
    }
    fn constants(&self) -> ProblemConstants<f64> {
        match self {
            AnyProblem::Quadratic(p) => p.constants(),
            AnyProblem::Logistic(p) => p.constants(),
        }
    }
}

/// 64-bit FNV-1a over a byte stream.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
    fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }
    fn write_matrix(&mut self, m: &DMatrix<f64>) {
        self.write_u64(m.nrows() as u64);
        self.write_u64(m.ncols() as u64);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.write_f64(m[(i, j)]);
            }
        }
    }
}

/// Identity hash of a problem: the bit patterns of its defining data and
/// effective constants. Bit-stable across processes and platforms; used to
/// tag trace files so runs on the same instance are recognizably comparable.
pub fn problem_hash(problem: &AnyProblem) -> u64 {
    let mut h = Fnv1a::new();
    match problem {
        AnyProblem::Quadratic(p) => {
            h.write(b"quadratic");
            h.write_matrix(p.p());
            h.write_matrix(p.q());
            h.write_matrix(p.coupling());
            for v in p.b() {
                h.write_f64(*v);
            }
            for v in p.c() {
                h.write_f64(*v);
            }
        }
        AnyProblem::Logistic(p) => {
            h.write(b"logistic");
            h.write_matrix(p.x_data());
            h.write_matrix(p.y_data());
            h.write_matrix(p.coupling());
        }
    }
    let c = problem.constants();
    h.write_f64(c.mu);
    h.write_f64(c.lip_grad);
    h.write_f64(c.lip_hess);
    match c.level_radius {
        Some(r) => {
            h.write(&[1]);
            h.write_f64(r);
        }
        None => h.write(&[0]),
    }
    h.0
}

/// The hash in the fixed-width form embedded in trace files.
pub fn problem_hash_hex(problem: &AnyProblem) -> String {
    format!("{:016x}", problem_hash(problem))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_quadratic() -> AnyProblem {
        AnyProblem::Quadratic(QuadraticSaddle::generate(3, 2, 42, 0.5))
    }

    #[test]
    fn quadratic_round_trip_is_bit_exact() {
        let problem = sample_quadratic();
        let text = problem.to_file().to_json();
        let reloaded = ProblemFile::parse(&text).unwrap().into_problem().unwrap();
        match (&problem, &reloaded) {
            (AnyProblem::Quadratic(a), AnyProblem::Quadratic(b)) => {
                assert_eq!(a.p(), b.p());
                assert_eq!(a.q(), b.q());
                assert_eq!(a.coupling(), b.coupling());
                assert_eq!(a.b(), b.b());
                assert_eq!(a.c(), b.c());
            }
            _ => panic!("kind changed across round trip"),
        }
        assert_eq!(problem_hash(&problem), problem_hash(&reloaded));
        // Serialization is idempotent text-wise too.
        assert_eq!(text, reloaded.to_file().to_json());
    }

    #[test]
    fn logistic_round_trip_preserves_hash() {
        let problem = AnyProblem::Logistic(LogisticSaddle::generate(3, 2, 6, 5, 11));
        let text = problem.to_file().to_json();
        let reloaded = ProblemFile::parse(&text).unwrap().into_problem().unwrap();
        assert_eq!(problem_hash(&problem), problem_hash(&reloaded));
        assert_eq!(problem.constants().lip_grad, reloaded.constants().lip_grad);
    }

    #[test]
    fn unknown_field_is_rejected_by_name() {
        let text = r#"{"kind":"quadratic","p":[[1.0]],"q":[[1.0]],"a":[[0.0]],
                       "b":[0.0],"c":[0.0],"extra_knob":3}"#;
        let err = ProblemFile::parse(text).unwrap_err();
        assert!(matches!(err, IoError::UnknownField { ref field, .. } if field == "extra_knob"));
        assert!(err.to_string().contains("extra_knob"));
    }

    #[test]
    fn unsupported_kind_is_rejected() {
        let err = ProblemFile::parse(r#"{"kind":"bilinear"}"#).unwrap_err();
        assert!(err.to_string().contains("bilinear"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = r#"{"kind":"quadratic","p":[[1.0,0.0],[0.0]],"q":[[1.0]],
                       "a":[[0.0],[0.0]],"b":[0.0,0.0],"c":[0.0]}"#;
        let err = ProblemFile::parse(text).unwrap().into_problem().unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn constant_overrides_apply_field_wise() {
        let text = r#"{"kind":"quadratic","p":[[2.0]],"q":[[2.0]],"a":[[0.0]],
                       "b":[0.0],"c":[0.0],"constants":{"lip_grad":9.0}}"#;
        let problem = ProblemFile::parse(text).unwrap().into_problem().unwrap();
        let c = problem.constants();
        assert_eq!(c.lip_grad, 9.0);
        assert_eq!(c.mu, 2.0); // computed value kept
    }

    #[test]
    fn invalid_override_is_rejected() {
        let text = r#"{"kind":"quadratic","p":[[2.0]],"q":[[2.0]],"a":[[0.0]],
                       "b":[0.0],"c":[0.0],"constants":{"mu":-1.0}}"#;
        assert!(ProblemFile::parse(text).unwrap().into_problem().is_err());
    }

    #[test]
    fn hash_distinguishes_data_and_constants() {
        let p1 = sample_quadratic();
        let p2 = AnyProblem::Quadratic(QuadraticSaddle::generate(3, 2, 43, 0.5));
        assert_ne!(problem_hash(&p1), problem_hash(&p2));
        let tweaked = match &p1 {
            AnyProblem::Quadratic(q) => {
                let mut c = q.constants();
                c.lip_grad += 1.0;
                AnyProblem::Quadratic(q.clone().with_constants(c).unwrap())
            }
            _ => unreachable!(),
        };
        assert_ne!(problem_hash(&p1), problem_hash(&tweaked));
        assert_eq!(problem_hash_hex(&p1).len(), 16);
    }

    #[test]
    fn subnormal_and_negative_zero_survive_round_trip() {
        let mut q = QuadraticSaddle::generate(2, 2, 1, 1.0);
        let mut c = q.constants();
        c.level_radius = Some(5e-324); // smallest positive subnormal
        q = q.with_constants(c).unwrap();
        let problem = AnyProblem::Quadratic(q);
        let reloaded =
            ProblemFile::parse(&problem.to_file().to_json()).unwrap().into_problem().unwrap();
        assert_eq!(reloaded.constants().level_radius, Some(5e-324));
        assert_eq!(problem_hash(&problem), problem_hash(&reloaded));
    }
}
