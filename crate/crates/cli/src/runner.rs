//! Executes finalized run specs: builds the problem, dispatches the
//! solver, and writes the trace and summary files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use saddle_crn::baselines::{run_baseline_tracked, BaselineMethod};
use saddle_crn::crn::{solve_tracked, SolveResult, SolverError, Status};
use saddle_crn::diagnostics::{fit_error_bound, standard_check_sweep, CheckEntry, DiagnosticsError};
use saddle_crn::homotopy::{solve_hc_tracked, ContinuationState, HomotopyError};
use saddle_crn::io::{load_problem, problem_hash, problem_hash_hex, AnyProblem, IoError};
use saddle_crn::subproblem::SubproblemOptions;
use saddle_crn::trace::write_trace;
use saddle_crn::{QuadraticSaddle, SaddlePoint, SaddleProblem, SolverConfig};
use serde_json::json;
use thiserror::Error;

use crate::spec::{
    parse_run_spec, FitSpec, ProblemSpec, RunSpec, SolverKind, SpecError, StartSpec,
};

/// Why a run failed before producing a result.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Problem(#[from] IoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error(transparent)]
    Fit(#[from] DiagnosticsError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("reference point: {0}")]
    Reference(String),
}

fn solver_exit(error: &SolverError) -> i32 {
    match error {
        // Bad parameters or problem data are spec-class failures; numerical
        // breakdowns mid-run report as divergence.
        SolverError::Config(_) | SolverError::Problem(_) => 4,
        SolverError::Subproblem(_) | SolverError::GammaUnderflow { .. } => 3,
    }
}

impl RunError {
    /// Process exit code for this failure: 4 for spec problems, 5 for I/O,
    /// 3 for numerical breakdowns, 2 for a fit that found nothing usable.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) | RunError::Reference(_) => 4,
            RunError::Problem(IoError::File { .. }) => 5,
            RunError::Problem(_) => 4,
            RunError::Solver(e) => solver_exit(e),
            RunError::Homotopy(HomotopyError::Params(_)) => 4,
            RunError::Homotopy(HomotopyError::Solver(e)) => solver_exit(e),
            RunError::Fit(DiagnosticsError::InvalidNuLadder { .. }) => 4,
            RunError::Fit(_) => 2,
            RunError::Write { .. } => 5,
        }
    }
}

/// Process exit code for a finished run.
pub fn status_exit(status: Status) -> i32 {
    match status {
        Status::Converged => 0,
        Status::MaxIterations | Status::Stalled => 2,
        Status::Diverged => 3,
    }
}

/// What an executed run produced.
#[derive(Debug)]
pub struct ExecReport {
    pub exit_code: i32,
    pub status: Status,
    pub final_merit: f64,
    pub iterations: usize,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    /// The summary document, as written.
    pub summary: serde_json::Value,
}

fn resolve_path(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds the problem a finalized spec describes. Relative file paths
/// resolve against `base`.
pub fn build_problem(spec: &ProblemSpec, base: &Path) -> Result<AnyProblem, RunError> {
    if let Some(file) = &spec.file {
        let path = resolve_path(base, file);
        return Ok(load_problem(&path)?.into_problem()?);
    }
    let n = spec.n.expect("finalized generator specs carry n");
    let m = spec.m.expect("finalized generator specs carry m");
    let seed = spec.seed.expect("finalized generator specs carry a seed");
    match spec.kind.as_deref() {
        Some("quadratic") => {
            let ridge = spec.ridge.expect("finalized quadratic specs carry a ridge");
            Ok(AnyProblem::Quadratic(QuadraticSaddle::generate(n, m, seed, ridge)))
        }
        Some("logistic") => {
            let m1 = spec.m1.expect("finalized logistic specs carry M1");
            let m2 = spec.m2.expect("finalized logistic specs carry M2");
            Ok(AnyProblem::Logistic(saddle_crn::LogisticSaddle::generate(
                n, m, m1, m2, seed,
            )))
        }
        _ => unreachable!("finalized specs name a known kind"),
    }
}

fn point_from_parts(
    key: &str,
    x: &[f64],
    y: &[f64],
    dims: (usize, usize),
) -> Result<SaddlePoint<f64>, RunError> {
    if x.len() != dims.0 || y.len() != dims.1 {
        return Err(SpecError::Invalid {
            key: key.into(),
            detail: format!(
                "dimensions ({}, {}) do not match the problem's ({}, {})",
                x.len(),
                y.len(),
                dims.0,
                dims.1
            ),
        }
        .into());
    }
    Ok(SaddlePoint::new(
        DVector::from_column_slice(x),
        DVector::from_column_slice(y),
    )
    .map_err(IoError::Problem)?)
}

fn starting_point(spec: &RunSpec, problem: &AnyProblem) -> Result<SaddlePoint<f64>, RunError> {
    let (n, m) = problem.dims();
    match &spec.z0 {
        None => Ok(SaddlePoint::zeros(n, m)),
        Some(z) => point_from_parts("z0", &z.x, &z.y, (n, m)),
    }
}

/// Configuration of the high-precision run a `refine` reference performs:
/// tight inner tolerance, and pure Newton steps whenever the operator is
/// affine (the cubic term only pads the tail there).
fn refine_config(problem: &AnyProblem, epsilon: f64) -> SolverConfig<f64> {
    let gamma_bar = if problem.constants().lip_hess == 0.0 { 0.0 } else { 1.0 };
    SolverConfig {
        epsilon,
        max_iterations: 500,
        gamma_bar,
        sub: SubproblemOptions {
            tolerance: 1e-12,
            ..SubproblemOptions::default()
        },
        ..SolverConfig::default()
    }
}

fn resolve_reference(
    spec: &RunSpec,
    problem: &AnyProblem,
    z0: &SaddlePoint<f64>,
    base: &Path,
) -> Result<Option<SaddlePoint<f64>>, RunError> {
    let Some(reference) = &spec.reference else {
        return Ok(None);
    };
    match reference.kind.as_str() {
        "exact" => match problem {
            AnyProblem::Quadratic(q) => q
                .saddle_point()
                .map(Some)
                .ok_or_else(|| {
                    RunError::Reference(
                        "the quadratic's saddle system is singular; use kind `refine`".into(),
                    )
                }),
            AnyProblem::Logistic(_) => Err(RunError::Reference(
                "kind `exact` needs a quadratic problem; use kind `refine`".into(),
            )),
        },
        "refine" => {
            let epsilon = reference.epsilon.expect("finalized refine specs carry epsilon");
            let config = refine_config(problem, epsilon);
            let refined = saddle_crn::crn::solve(problem, z0, &config)?;
            match refined.status {
                // A stall at the floating-point floor still pins the point
                // to far better accuracy than any run being measured.
                Status::Converged | Status::Stalled => Ok(Some(refined.z)),
                other => Err(RunError::Reference(format!(
                    "refining run ended `{}` at merit {:e}",
                    other.as_str(),
                    refined.merit
                ))),
            }
        }
        "file" => {
            let rel = reference.path.as_ref().expect("finalized file specs carry a path");
            let path = resolve_path(base, rel);
            let text = std::fs::read_to_string(&path).map_err(|source| IoError::File {
                path: path.display().to_string(),
                source,
            })?;
            let point: StartSpec = serde_json::from_str(&text).map_err(|e| SpecError::Invalid {
                key: "reference.path".into(),
                detail: format!("{}: {e}", path.display()),
            })?;
            point_from_parts("reference.path", &point.x, &point.y, problem.dims()).map(Some)
        }
        _ => unreachable!("finalized reference kinds are known"),
    }
}

/// The continuation path and final weight, for homotopy summaries.
type Continuation = (Vec<ContinuationState<f64>>, f64);

fn dispatch(
    spec: &RunSpec,
    problem: &AnyProblem,
    z0: &SaddlePoint<f64>,
    reference: Option<&SaddlePoint<f64>>,
) -> Result<(SolveResult<f64>, Option<Continuation>), RunError> {
    match spec.solver {
        SolverKind::Crn => {
            let config = spec.crn.as_ref().expect("finalized").to_config(spec.timing);
            Ok((solve_tracked(problem, z0, &config, reference)?, None))
        }
        SolverKind::Hc => {
            let params = spec.hc.as_ref().expect("finalized").to_params(1.0, spec.timing);
            let hc = solve_hc_tracked(problem, z0, &params, reference)?;
            Ok((hc.result, Some((hc.path, hc.nu_final))))
        }
        SolverKind::HcTheta => {
            let params = spec.hc_theta.as_ref().expect("finalized").to_params(spec.timing);
            let hc = solve_hc_tracked(problem, z0, &params, reference)?;
            Ok((hc.result, Some((hc.path, hc.nu_final))))
        }
        SolverKind::Eg => {
            let config = spec
                .eg
                .as_ref()
                .expect("finalized")
                .to_config(BaselineMethod::Extragradient, spec.timing);
            Ok((run_baseline_tracked(problem, z0, &config, reference)?, None))
        }
        SolverKind::Ogda => {
            let config = spec
                .ogda
                .as_ref()
                .expect("finalized")
                .to_config(BaselineMethod::Ogda, spec.timing);
            Ok((run_baseline_tracked(problem, z0, &config, reference)?, None))
        }
    }
}

fn build_summary(
    spec: &RunSpec,
    problem: &AnyProblem,
    result: &SolveResult<f64>,
    continuation: Option<&Continuation>,
    wall_ms: f64,
    exit_code: i32,
) -> serde_json::Value {
    let mut summary = json!({
        "solver": spec.solver.as_str(),
        "status": result.status.as_str(),
        "exit_code": exit_code,
        "iterations": result.iterations,
        "final_merit": result.merit,
        "final_grad_norm": result.trace.last().map(|r| r.grad_norm),
        "wall_time_ms": wall_ms,
        "problem_hash": problem_hash_hex(problem),
        "effective": spec,
    });
    if let Some((path, nu_final)) = continuation {
        summary["nu_final"] = json!(nu_final);
        summary["continuation_steps"] = json!(path.len());
    }
    summary
}

/// Runs a finalized spec. Relative paths (problem file, reference file,
/// outputs) resolve against `base`, normally the spec file's directory.
pub fn execute(spec: &RunSpec, base: &Path) -> Result<ExecReport, RunError> {
    // Re-finalize defensively so library callers can hand in hand-built
    // specs; parse_run_spec output passes through unchanged.
    let mut spec = spec.clone();
    spec.finalize()?;

    let problem = build_problem(&spec.problem, base)?;
    let z0 = starting_point(&spec, &problem)?;
    let reference = resolve_reference(&spec, &problem, &z0, base)?;
    log::info!(
        "running {} on {} ({} x {})",
        spec.solver.as_str(),
        problem_hash_hex(&problem),
        problem.dims().0,
        problem.dims().1
    );

    let started = Instant::now();
    let (mut result, continuation) = dispatch(&spec, &problem, &z0, reference.as_ref())?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    result.trace.problem_hash = problem_hash(&problem);

    let trace_path = resolve_path(base, &spec.output.trace);
    write_trace(&result.trace, &trace_path).map_err(|source| RunError::Write {
        path: trace_path.clone(),
        source,
    })?;

    let exit_code = status_exit(result.status);
    let summary = build_summary(&spec, &problem, &result, continuation.as_ref(), wall_ms, exit_code);
    let summary_path = resolve_path(base, &spec.output.summary);
    let mut text = serde_json::to_string_pretty(&summary).expect("summaries always serialize");
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(|source| RunError::Write {
        path: summary_path.clone(),
        source,
    })?;

    log::info!(
        "{} after {} iterations, merit {:e}",
        result.status.as_str(),
        result.iterations,
        result.merit
    );
    Ok(ExecReport {
        exit_code,
        status: result.status,
        final_merit: result.merit,
        iterations: result.iterations,
        trace_path,
        summary_path,
        summary,
    })
}

/// One spec file's outcome inside a batch (also used by the single-run
/// command).
#[derive(Debug)]
pub struct BatchOutcome {
    pub name: String,
    pub exit_code: i32,
    pub message: String,
}

/// Reads, parses, and executes one spec file, folding every failure into
/// the outcome's exit code.
pub fn run_spec_file(path: &Path) -> BatchOutcome {
    let name = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            return BatchOutcome {
                name,
                exit_code: 5,
                message: format!("cannot read {}: {e}", path.display()),
            }
        }
    };
    let spec = match parse_run_spec(&text) {
        Ok(spec) => spec,
        Err(e) => {
            return BatchOutcome {
                name,
                exit_code: 4,
                message: e.to_string(),
            }
        }
    };
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    match execute(&spec, &base) {
        Ok(report) => BatchOutcome {
            name,
            exit_code: report.exit_code,
            message: format!(
                "{}: merit {:e} after {} iterations -> {}",
                report.status.as_str(),
                report.final_merit,
                report.iterations,
                report.summary_path.display()
            ),
        },
        Err(e) => BatchOutcome {
            name,
            exit_code: e.exit_code(),
            message: e.to_string(),
        },
    }
}

/// Runs every `*.json` spec in `dir` concurrently. Returns the per-file
/// outcomes in name order and the worst exit code among them.
pub fn run_batch(dir: &Path) -> Result<(Vec<BatchOutcome>, i32), RunError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(SpecError::Invalid {
            key: "batch".into(),
            detail: format!("no .json run specs in {}", dir.display()),
        }
        .into());
    }
    let outcomes: Vec<BatchOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| scope.spawn(move || run_spec_file(path)))
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("run threads do not panic"))
            .collect()
    });
    let worst = outcomes.iter().map(|o| o.exit_code).max().unwrap_or(0);
    Ok((outcomes, worst))
}

/// A derivative sweep's entries plus the overall verdict.
#[derive(Debug)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
    pub all_pass: bool,
}

impl CheckReport {
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.entries).expect("check entries always serialize");
        text.push('\n');
        text
    }
}

/// Runs the standard derivative sweep over `count` seeded instances.
pub fn run_check(count: usize) -> CheckReport {
    let entries = standard_check_sweep(count);
    let all_pass = entries.iter().all(|e| e.pass);
    CheckReport { entries, all_pass }
}

/// Fits the regularization-path error bound a fit spec describes.
pub fn run_fit(spec: &FitSpec, base: &Path) -> Result<serde_json::Value, RunError> {
    let mut spec = spec.clone();
    spec.problem.finalize()?;
    let problem = build_problem(&spec.problem, base)?;
    let fit = fit_error_bound(&problem, &spec.nus)?;
    Ok(json!({
        "theta": fit.theta,
        "c": fit.c,
        "degenerate": fit.degenerate,
        "samples": fit
            .samples
            .iter()
            .map(|(dnu, dz)| json!({"delta_nu": dnu, "delta_z": dz}))
            .collect::<Vec<_>>(),
    }))
}
