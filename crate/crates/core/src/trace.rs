//! Per-iteration records and their CSV serialization.
//!
//! Every solver in this crate reports its run as a [`Trace`]: one record per
//! iterate, starting with the initial point. A record holds the state at
//! that iterate (merit, operator norm, optional distance to a reference
//! point) together with a description of the step that produced it — so the
//! initial record, which no step produced, leaves every step field empty.
//!
//! The CSV layout is fixed: a `# problem_hash=…` comment line, the exact
//! column header below, then one row per record. Floats are written with 17
//! significant digits (exact round-trip for `f64`); inapplicable columns are
//! left empty. Wall-clock timing is opt-in, because timed traces cannot be
//! byte-identical across runs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::scalar::Scalar;

/// The one fixed trace header.
pub const TRACE_HEADER: &str = "iter,merit,grad_norm,gamma,gamma_trials,step_kind,\
                                direction_norm,sub_iters,nu,lambda,dist_to_opt,wall_time_ms";

/// Which of the two step candidates the outer solver took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// The damped step `z + αd`.
    AlphaStep,
    /// The full step `z + d`.
    UnitStep,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::AlphaStep => "alpha",
            StepKind::UnitStep => "unit",
        }
    }
}

/// State at one iterate plus the step that led to it.
#[derive(Debug, Clone)]
pub struct IterationRecord<T: Scalar> {
    pub iter: usize,
    pub merit: T,
    pub grad_norm: T,
    pub gamma: Option<T>,
    pub gamma_trials: Option<usize>,
    pub step_kind: Option<StepKind>,
    pub direction_norm: Option<T>,
    pub sub_iters: Option<usize>,
    pub nu: Option<T>,
    pub lambda: Option<T>,
    pub dist_to_opt: Option<T>,
    pub wall_time: Option<Duration>,
}

impl<T: Scalar> IterationRecord<T> {
    /// A record with only the state fields set; step fields start empty.
    pub fn new(iter: usize, merit: T, grad_norm: T) -> Self {
        Self {
            iter,
            merit,
            grad_norm,
            gamma: None,
            gamma_trials: None,
            step_kind: None,
            direction_norm: None,
            sub_iters: None,
            nu: None,
            lambda: None,
            dist_to_opt: None,
            wall_time: None,
        }
    }
}

/// A full run: problem identity, timing mode, and the iterate records.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    /// Identity hash of the problem instance the run solved.
    pub problem_hash: u64,
    /// When false (the default), the wall-time column stays empty so that
    /// repeated runs produce byte-identical files.
    pub include_timing: bool,
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn new() -> Self {
        Self { problem_hash: 0, include_timing: false, records: Vec::new() }
    }

    pub fn last(&self) -> Option<&IterationRecord<T>> {
        self.records.last()
    }

    /// Renders the full CSV document.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# problem_hash={:016x}", self.problem_hash);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{:.16e},{:.16e}", r.iter, r.merit, r.grad_norm);
            push_opt_float(&mut out, r.gamma);
            push_opt_usize(&mut out, r.gamma_trials);
            match r.step_kind {
                Some(k) => {
                    out.push(',');
                    out.push_str(k.as_str());
                }
                None => out.push(','),
            }
            push_opt_float(&mut out, r.direction_norm);
            push_opt_usize(&mut out, r.sub_iters);
            push_opt_float(&mut out, r.nu);
            push_opt_float(&mut out, r.lambda);
            push_opt_float(&mut out, r.dist_to_opt);
            match r.wall_time {
                Some(d) if self.include_timing => {
                    let _ = write!(out, ",{:.3}", d.as_secs_f64() * 1e3);
                }
                _ => out.push(','),
            }
            out.push('\n');
        }
        out
    }
}

impl<T: Scalar> Default for Trace<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn push_opt_float<T: Scalar>(out: &mut String, v: Option<T>) {
    match v {
        Some(x) => {
            let _ = write!(out, ",{x:.16e}");
        }
        None => out.push(','),
    }
}

fn push_opt_usize(out: &mut String, v: Option<usize>) {
    match v {
        Some(x) => {
            let _ = write!(out, ",{x}");
        }
        None => out.push(','),
    }
}

/// Writes the trace as a CSV file.
pub fn write_trace<T: Scalar>(trace: &Trace<T>, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, trace.to_csv())
}
