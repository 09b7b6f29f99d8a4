//! Command-line front end for the cubic-regularized Newton saddle point
//! solver: JSON run specs in, CSV traces and JSON summaries out.
//!
//! The pieces live in two modules so integration tests can drive the same
//! code paths as the binary:
//!
//! * [`spec`]: the strict, default-filling run-spec documents;
//! * [`runner`]: problem construction, solver dispatch, file output, and
//!   the process exit-code policy (0 converged, 2 out of budget, 3
//!   diverged, 4 bad spec, 5 I/O failure).

pub mod runner;
pub mod spec;

pub use runner::{
    build_problem, execute, run_batch, run_check, run_fit, run_spec_file, status_exit,
    BatchOutcome, CheckReport, ExecReport, RunError,
};
pub use spec::{
    parse_fit_spec, parse_run_spec, BaselineBlock, CrnBlock, FitSpec, GammaRuleName, HcBlock,
    HcThetaBlock, OutputSpec, ProblemSpec, ReferenceSpec, RunSpec, SolverKind, SpecError,
    StartSpec,
};
