//! Cubic-regularized Newton solver for smooth saddle point problems.
//!
//! The crate solves `min_x max_y f(x, y)` for twice-differentiable,
//! (strongly) convex-concave `f` by driving the merit function
//! `m(z) = ½‖F(z)‖²` of the operator `F(z) = (∇ₓf; −∇ᵧf)` to zero with
//! Newton-type steps obtained from a cubic-regularized local saddle model.
//! The pieces:
//!
//! * [`problem`]: problem trait, operator/merit oracles, regularity constants;
//! * [`quadratic`] / [`logistic`]: the built-in problem families;
//! * [`subproblem`]: the cubic-regularized model solved via a two-variable
//!   Newton iteration on `(‖u‖, ‖v‖)`;
//! * [`crn`]: the globalized outer solver with its γ safeguard;
//! * [`homotopy`]: path-following for the merely convex-concave case
//!   (ν-regularization driven to zero);
//! * [`baselines`]: extragradient and optimistic gradient descent-ascent;
//! * [`diagnostics`]: finite-difference checks, duality-gap comparisons,
//!   error-bound fitting, convergence-rate probes;
//! * [`trace`]: per-iteration records and their CSV serialization;
//! * [`io`]: problem (de)serialization to JSON.
//!
//! Everything is generic over the scalar type through [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below fix `f64`, which is what the CLI and
//! all reference tolerances use.

pub mod baselines;
pub mod crn;
pub mod diagnostics;
pub mod homotopy;
pub mod io;
pub mod logistic;
pub mod problem;
pub mod quadratic;
pub mod sampling;
pub mod scalar;
pub mod subproblem;
pub mod trace;

pub use baselines::{BaselineConfig, BaselineMethod};
pub use crn::{ConfigError, GammaRule, SolveResult, SolverConfig, SolverError, Status};
pub use diagnostics::{CheckEntry, DiagnosticsError, ErrorBoundFit, RateProbe};
pub use homotopy::{
    ContinuationState, HcResult, HomotopyError, HomotopyParams, Regularized,
};
pub use io::{problem_hash, problem_hash_hex, AnyProblem, DeclaredConstants, ProblemFile};
pub use logistic::LogisticSaddle;
pub use problem::{
    estimate_constants, GradientPair, HessianBlocks, ProblemConstants, ProblemError, SaddlePoint,
    SaddleProblem,
};
pub use quadratic::QuadraticSaddle;
pub use scalar::Scalar;
pub use subproblem::{
    SubproblemData, SubproblemError, SubproblemOptions, SubproblemSolution,
};
pub use trace::{IterationRecord, StepKind, Trace};

/// `f64`-concrete aliases, the configuration the CLI and tolerances target.
pub type SaddlePoint64 = SaddlePoint<f64>;
pub type GradientPair64 = GradientPair<f64>;
pub type HessianBlocks64 = HessianBlocks<f64>;
pub type ProblemConstants64 = ProblemConstants<f64>;
pub type QuadraticSaddle64 = QuadraticSaddle<f64>;
pub type LogisticSaddle64 = LogisticSaddle<f64>;
