//! First-order baselines: extragradient and optimistic gradient
//! descent-ascent, both driven by the same operator `F(z) = (∇ₓf; −∇ᵧf)`
//! and reported through the same trace/result types as the Newton solver.
//!
//! * Extragradient: `z^{k+½} = zᵏ − ηF(zᵏ)`, `z^{k+1} = zᵏ − ηF(z^{k+½})`.
//! * Optimistic GDA: `z^{k+1} = zᵏ − 2ηF(zᵏ) + ηF(z^{k−1})`, seeded with
//!   `F(z^{−1}) := F(z⁰)` so the first update is a plain gradient step.

use std::time::Instant;

use nalgebra::DVector;

use crate::crn::{ConfigError, SolveResult, SolverError, Status};
use crate::problem::{SaddlePoint, SaddleProblem};
use crate::scalar::{conv, Scalar};
use crate::trace::{IterationRecord, Trace};

/// Which baseline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Extragradient,
    Ogda,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Extragradient => "eg",
            BaselineMethod::Ogda => "ogda",
        }
    }
}

/// Baseline run configuration.
#[derive(Debug, Clone, Copy)]
pub struct BaselineConfig<T: Scalar> {
    pub method: BaselineMethod,
    /// Step size η.
    pub eta: T,
    /// Merit threshold that counts as solved.
    pub epsilon: T,
    pub max_iterations: usize,
    /// Merit growth factor (over the initial merit) treated as divergence.
    pub divergence_factor: T,
    /// Record wall-clock times in the trace.
    pub timing: bool,
}

impl<T: Scalar> BaselineConfig<T> {
    pub fn new(method: BaselineMethod, eta: T) -> Self {
        Self {
            method,
            eta,
            epsilon: conv(1e-12),
            max_iterations: 100_000,
            divergence_factor: conv(1e3),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key, detail: String| Err(ConfigError { key, detail });
        if !(self.eta > T::zero() && self.eta.is_finite()) {
            return fail("eta", format!("must be positive and finite, got {:e}", self.eta));
        }
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return fail("epsilon", format!("must be positive and finite, got {:e}", self.epsilon));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations", "must be at least 1".into());
        }
        if !(self.divergence_factor > T::one()) {
            return fail(
                "divergence_factor",
                format!("must exceed 1, got {:e}", self.divergence_factor),
            );
        }
        Ok(())
    }
}

/// One full extragradient update.
pub fn eg_step<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z: &SaddlePoint<T>,
    eta: T,
) -> SaddlePoint<T> {
    let (n, m) = problem.dims();
    let f = problem.operator(z);
    let half = SaddlePoint::from_stacked(n, m, &(z.stacked() - &f * eta));
    let f_half = problem.operator(&half);
    SaddlePoint::from_stacked(n, m, &(z.stacked() - f_half * eta))
}

/// One optimistic GDA update from `z` with the previous operator value;
/// returns the new point and `F(z)` (the next step's previous value).
pub fn ogda_step<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z: &SaddlePoint<T>,
    prev_operator: &DVector<T>,
    eta: T,
) -> (SaddlePoint<T>, DVector<T>) {
    let (n, m) = problem.dims();
    let f = problem.operator(z);
    let two = conv::<T>(2.0);
    let next =
        SaddlePoint::from_stacked(n, m, &(z.stacked() - &f * (two * eta) + prev_operator * eta));
    (next, f)
}

/// Runs the chosen baseline from `z0`.
pub fn run_baseline<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    config: &BaselineConfig<T>,
) -> Result<SolveResult<T>, SolverError> {
    run_baseline_tracked(problem, z0, config, None)
}

/// Runs the chosen baseline, recording distances to a reference point.
pub fn run_baseline_tracked<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    config: &BaselineConfig<T>,
    reference: Option<&SaddlePoint<T>>,
) -> Result<SolveResult<T>, SolverError> {
    config.validate()?;
    problem.check_dims(z0);
    let start = Instant::now();
    let half = conv::<T>(0.5);

    let mut trace = Trace::new();
    trace.include_timing = config.timing;
    let mut z = z0.clone();
    let f0 = problem.operator(&z);
    let mut merit = half * f0.norm_squared();
    let initial_merit = merit;

    let record = |trace: &mut Trace<T>, iter: usize, merit: T, grad_norm: T, z: &SaddlePoint<T>| {
        let mut r = IterationRecord::new(iter, merit, grad_norm);
        r.dist_to_opt = reference.map(|zs| z.distance(zs));
        if config.timing {
            r.wall_time = Some(start.elapsed());
        }
        trace.records.push(r);
    };
    record(&mut trace, 0, merit, f0.norm(), &z);

    let mut prev_operator = f0;
    let mut status = Status::MaxIterations;
    let mut iterations = 0usize;

    for iter in 0..config.max_iterations {
        if merit <= config.epsilon {
            status = Status::Converged;
            break;
        }
        if !merit.is_finite() || merit > config.divergence_factor * initial_merit {
            status = Status::Diverged;
            break;
        }

        let z_new = match config.method {
            BaselineMethod::Extragradient => eg_step(problem, &z, config.eta),
            BaselineMethod::Ogda => {
                let (next, f) = ogda_step(problem, &z, &prev_operator, config.eta);
                prev_operator = f;
                next
            }
        };
        let displacement = z_new.distance(&z);
        let f_new = problem.operator(&z_new);
        let merit_new = half * f_new.norm_squared();

        z = z_new;
        merit = merit_new;
        iterations = iter + 1;
        record(&mut trace, iterations, merit, f_new.norm(), &z);
        trace.records.last_mut().expect("row just pushed").direction_norm = Some(displacement);

        if !merit.is_finite() {
            status = Status::Diverged;
            break;
        }
        if merit <= config.epsilon {
            status = Status::Converged;
            break;
        }
    }
    if merit <= config.epsilon {
        status = Status::Converged;
    } else if !merit.is_finite() || merit > config.divergence_factor * initial_merit {
        status = Status::Diverged;
    }

    Ok(SolveResult { z, status, merit, iterations, trace })
}
