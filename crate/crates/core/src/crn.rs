//! The globalized cubic-regularized Newton solver for saddle point problems.
//!
//! Each outer iteration assembles the cubic model at the current iterate,
//! picks the cubic weight γ by one of two rules, solves the model for the
//! step `d = (u, v)`, and moves to whichever of the two candidates `z + αd`
//! (damped) or `z + d` (full) has the smaller merit `m(z) = ½‖F(z)‖²`, with
//! ties going to the full step. The run stops as soon as `m(z) ≤ ε`.
//!
//! The two weight rules:
//!
//! * **closed form** (default): `γ = min(γ̄, 3μ²/(4b))` with
//!   `b = max(‖∇ₓf‖, ‖∇ᵧf‖)`, and `γ = γ̄` when `b = 0`. This choice makes
//!   the step-size certificate `γ(‖u‖ + ‖v‖) ≤ μ` hold a priori, so the
//!   model is solved exactly once per iteration.
//! * **backtracking**: start at `γ̄` and multiply by ρ until the solved step
//!   satisfies `γ(‖u‖ + ‖v‖) ≤ μ`. Factorizing state is shared across
//!   trials.

use std::time::Instant;

use thiserror::Error;

use crate::problem::{GradientPair, ProblemError, SaddlePoint, SaddleProblem};
use crate::scalar::{conv, to_f64, Scalar};
use crate::subproblem::{
    Prepared, SubproblemData, SubproblemError, SubproblemOptions, SubproblemSolution,
};
use crate::trace::{IterationRecord, StepKind, Trace};

/// How the cubic weight is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaRule {
    /// Shrink from `γ̄` by ρ until `γ(‖u‖+‖v‖) ≤ μ`.
    Backtracking,
    /// `γ = min(γ̄, 3μ²/(4b))`, `b = max(‖∇ₓf‖, ‖∇ᵧf‖)`; satisfies the same
    /// certificate without re-solving.
    #[default]
    ClosedForm,
}

/// Outer-solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T: Scalar> {
    /// Merit threshold that counts as solved.
    pub epsilon: T,
    /// Outer iteration budget.
    pub max_iterations: usize,
    /// Damping factor of the short step candidate.
    pub alpha: T,
    /// Cubic weight ceiling γ̄.
    pub gamma_bar: T,
    /// Backtracking shrink factor ρ.
    pub rho: T,
    pub gamma_rule: GammaRule,
    /// Inner model-solver options.
    pub sub: SubproblemOptions<T>,
    /// Reuse the previous step's norm pair to start the inner iteration.
    pub warm_start: bool,
    /// Record wall-clock times in the trace (makes traces nondeterministic).
    pub timing: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: conv(1e-12),
            max_iterations: 1000,
            alpha: conv(0.1),
            gamma_bar: T::one(),
            rho: conv(0.5),
            gamma_rule: GammaRule::default(),
            sub: SubproblemOptions::default(),
            warm_start: true,
            timing: false,
        }
    }
}

/// A configuration value that fails validation, reported by key.
#[derive(Debug, Error)]
#[error("solver config key `{key}`: {detail}")]
pub struct ConfigError {
    pub key: &'static str,
    pub detail: String,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key, detail: String| Err(ConfigError { key, detail });
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return fail("epsilon", format!("must be positive and finite, got {:e}", self.epsilon));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations", "must be at least 1".into());
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return fail("alpha", format!("must lie in (0, 1], got {:e}", self.alpha));
        }
        if !(self.gamma_bar >= T::zero() && self.gamma_bar.is_finite()) {
            return fail(
                "gamma_bar",
                format!("must be nonnegative and finite, got {:e}", self.gamma_bar),
            );
        }
        if !(self.rho > T::zero() && self.rho < T::one()) {
            return fail("rho", format!("must lie strictly inside (0, 1), got {:e}", self.rho));
        }
        if !(self.sub.tolerance > T::zero() && self.sub.tolerance.is_finite()) {
            return fail(
                "sub.tolerance",
                format!("must be positive and finite, got {:e}", self.sub.tolerance),
            );
        }
        if self.sub.max_iterations == 0 {
            return fail("sub.max_iterations", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Merit reached the threshold.
    Converged,
    /// Iteration budget exhausted with the merit still above the threshold.
    MaxIterations,
    /// Merit blew up past the divergence guard or became non-finite.
    Diverged,
    /// Merit stopped improving at its floating-point floor above the
    /// threshold.
    Stalled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::Diverged => "diverged",
            Status::Stalled => "stalled",
        }
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolveResult<T: Scalar> {
    pub z: SaddlePoint<T>,
    pub status: Status,
    pub merit: T,
    pub iterations: usize,
    pub trace: Trace<T>,
}

/// Errors that abort a run outright (as opposed to a reported [`Status`]).
#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error("cubic weight underflowed below {limit:e} during backtracking")]
    GammaUnderflow { limit: f64 },
}

/// Consecutive non-improving iterations accepted before declaring a stall.
const STALL_LIMIT: usize = 10;
/// Merit growth factor (over the initial merit) treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;
/// Backtracking aborts when γ falls below this.
const GAMMA_FLOOR: f64 = 1e-300;

fn merit_of<T: Scalar>(g: &GradientPair<T>) -> T {
    conv::<T>(0.5) * (g.gx.norm_squared() + g.gy.norm_squared())
}

/// Runs the solver from `z0`.
pub fn solve<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    config: &SolverConfig<T>,
) -> Result<SolveResult<T>, SolverError> {
    solve_tracked(problem, z0, config, None)
}

/// Runs the solver, additionally recording the distance to a reference point
/// in every trace record.
pub fn solve_tracked<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    config: &SolverConfig<T>,
    reference: Option<&SaddlePoint<T>>,
) -> Result<SolveResult<T>, SolverError> {
    config.validate()?;
    let constants = problem.constants();
    constants.validate()?;
    if constants.mu <= T::zero() {
        return Err(ProblemError::ZeroModulus.into());
    }
    problem.check_dims(z0);
    let start = Instant::now();

    let mut trace = Trace::new();
    trace.include_timing = config.timing;
    let mut z = z0.clone();
    let mut g = problem.gradient(&z);
    let mut merit = merit_of(&g);
    let initial_merit = merit;

    let record = |trace: &mut Trace<T>, iter: usize, merit: T, g: &GradientPair<T>, z: &SaddlePoint<T>| {
        let mut r = IterationRecord::new(iter, merit, g.operator_norm());
        r.dist_to_opt = reference.map(|zs| z.distance(zs));
        if config.timing {
            r.wall_time = Some(start.elapsed());
        }
        trace.records.push(r);
    };
    record(&mut trace, 0, merit, &g, &z);

    let mut status = Status::MaxIterations;
    let mut iterations = 0usize;
    let mut stall = 0usize;
    let mut warm_w: Option<(T, T)> = None;

    for iter in 0..config.max_iterations {
        if merit <= config.epsilon {
            status = Status::Converged;
            break;
        }
        if !merit.is_finite() || merit > conv::<T>(DIVERGENCE_FACTOR) * initial_merit {
            status = Status::Diverged;
            break;
        }

        let hessian = problem.hessian(&z);
        let data = SubproblemData::assemble(&hessian, &g, config.gamma_bar)?;
        let prep = Prepared::from_data(&data, config.sub.spectral)?;
        let mut sub_options = config.sub;
        if let Some(w) = warm_w.filter(|_| config.warm_start) {
            sub_options.initial_w = w;
        }

        let (gamma, trials, sol) =
            select_gamma(&prep, &g, constants.mu, config, &sub_options)?;
        let direction = SaddlePoint { x: sol.u.clone(), y: sol.v.clone() };
        let direction_norm = direction.norm();

        let z_alpha = z.add_scaled(config.alpha, &direction);
        let z_unit = z.add_scaled(T::one(), &direction);
        let g_alpha = problem.gradient(&z_alpha);
        let g_unit = problem.gradient(&z_unit);
        let m_alpha = merit_of(&g_alpha);
        let m_unit = merit_of(&g_unit);

        // Tie goes to the full step.
        let (z_new, g_new, m_new, kind) = if m_unit <= m_alpha {
            (z_unit, g_unit, m_unit, StepKind::UnitStep)
        } else {
            (z_alpha, g_alpha, m_alpha, StepKind::AlphaStep)
        };

        if !m_new.is_finite() {
            status = Status::Diverged;
            break;
        }
        stall = if m_new >= merit { stall + 1 } else { 0 };

        warm_w = Some(sol.w);
        z = z_new;
        g = g_new;
        merit = m_new;
        iterations = iter + 1;

        record(&mut trace, iterations, merit, &g, &z);
        let last = trace.records.last_mut().expect("row just pushed");
        last.gamma = Some(gamma);
        last.gamma_trials = Some(trials);
        last.step_kind = Some(kind);
        last.direction_norm = Some(direction_norm);
        last.sub_iters = Some(sol.iterations);

        if merit <= config.epsilon {
            status = Status::Converged;
            break;
        }
        if stall >= STALL_LIMIT {
            status = Status::Stalled;
            break;
        }
    }
    if merit <= config.epsilon {
        status = Status::Converged;
    }

    Ok(SolveResult { z, status, merit, iterations, trace })
}

/// Resolves the cubic weight for the current iterate and solves the model,
/// returning `(γ, trials, solution)`.
fn select_gamma<T: Scalar>(
    prep: &Prepared<T>,
    g: &GradientPair<T>,
    mu: T,
    config: &SolverConfig<T>,
    sub_options: &SubproblemOptions<T>,
) -> Result<(T, usize, SubproblemSolution<T>), SolverError> {
    match config.gamma_rule {
        GammaRule::ClosedForm => {
            let b = g.gx.norm().max(g.gy.norm());
            let gamma = if b == T::zero() {
                config.gamma_bar
            } else {
                config.gamma_bar.min(conv::<T>(0.75) * mu * mu / b)
            };
            let sol = prep.solve_with_gamma(gamma, sub_options)?;
            Ok((gamma, 1, sol))
        }
        GammaRule::Backtracking => {
            let mut gamma = config.gamma_bar;
            let mut trials = 0usize;
            loop {
                trials += 1;
                let sol = prep.solve_with_gamma(gamma, sub_options)?;
                if gamma * (sol.u.norm() + sol.v.norm()) <= mu {
                    return Ok((gamma, trials, sol));
                }
                gamma *= config.rho;
                if to_f64(gamma) < GAMMA_FLOOR {
                    return Err(SolverError::GammaUnderflow { limit: GAMMA_FLOOR });
                }
            }
        }
    }
}
