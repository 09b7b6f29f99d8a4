//! Path-following for merely convex-concave problems.
//!
//! When the coupling function has no strong convexity (μ = 0), the solver
//! regularizes it: `f_ν = f + (ν/2)‖x‖² − (ν/2)‖y‖²` is ν-strongly
//! convex-concave with a unique saddle point `z*(ν)`, and `z*(ν) → z*` as
//! `ν → 0` at a rate controlled by an error bound
//! `‖z*(ν) − z*‖ ≤ C·ν^θ` with exponent `θ ∈ (0, 1]`.
//!
//! The run has two phases:
//!
//! 1. solve `f_{ν₀}` outright with the Newton solver until the iterate holds
//!    a *membership certificate* `m_ν(z) ≤ ν⁴ρ²/2` (which by ν-strong
//!    monotonicity places `z` within `νρ` of `z*(ν)`), where
//!    `ρ = min(1/(2L₂), R)` and `R` caps the radius when the curvature
//!    constant vanishes;
//! 2. repeatedly shrink `ν ← (1−λ)ν` along the schedule below and take one
//!    full cubic-Newton step on the new `f_ν`, re-verifying the certificate
//!    each time. The shrink factors keep every stage inside the quadratic
//!    convergence region, so one step per stage suffices.
//!
//! The schedule: `λ = τ·(ν^{1−θ}/(4L₂C + 2ν^{1−θ}))^{1/θ}`, which for θ = 1
//! is the constant `τ/(2 + 4L₂C)`. The run stops once `ν^θ ≤ ε/(C + ρ)`;
//! the triangle inequality then bounds the distance to `z*` by ε.

use thiserror::Error;

use crate::crn::{self, GammaRule, SolveResult, SolverConfig, SolverError, Status};
use crate::problem::{
    estimate_constants, GradientPair, HessianBlocks, ProblemConstants, SaddlePoint, SaddleProblem,
};
use crate::scalar::{conv, Scalar};
use crate::subproblem::{solve as solve_subproblem, SubproblemData, SubproblemOptions, SubproblemSolution};
use crate::trace::{IterationRecord, StepKind};

/// The ν-regularized view of a base problem:
/// `f_ν(x, y) = f(x, y) + (ν/2)‖x‖² − (ν/2)‖y‖²`.
pub struct Regularized<'a, T: Scalar, P: SaddleProblem<T>> {
    base: &'a P,
    nu: T,
    constants: ProblemConstants<T>,
}

impl<'a, T: Scalar, P: SaddleProblem<T>> Regularized<'a, T, P> {
    pub fn new(base: &'a P, nu: T) -> Self {
        let c = base.constants();
        let constants = ProblemConstants {
            mu: c.mu + nu,
            lip_grad: c.lip_grad + nu,
            lip_hess: c.lip_hess,
            level_radius: None,
        };
        Self { base, nu, constants }
    }

    pub fn nu(&self) -> T {
        self.nu
    }
}

impl<T: Scalar, P: SaddleProblem<T>> SaddleProblem<T> for Regularized<'_, T, P> {
    fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }

    fn value(&self, z: &SaddlePoint<T>) -> T {
        let half_nu = conv::<T>(0.5) * self.nu;
        self.base.value(z) + half_nu * (z.x.norm_squared() - z.y.norm_squared())
    }

    fn gradient(&self, z: &SaddlePoint<T>) -> GradientPair<T> {
        let mut g = self.base.gradient(z);
        g.gx += &z.x * self.nu;
        g.gy -= &z.y * self.nu;
        g
    }

    fn hessian(&self, z: &SaddlePoint<T>) -> HessianBlocks<T> {
        let mut h = self.base.hessian(z);
        let (n, m) = self.dims();
        for i in 0..n {
            h.hxx[(i, i)] += self.nu;
        }
        for j in 0..m {
            h.hyy[(j, j)] -= self.nu;
        }
        h
    }

    fn constants(&self) -> ProblemConstants<T> {
        self.constants
    }
}

/// Configuration of the continuation run.
#[derive(Debug, Clone, Copy)]
pub struct HomotopyParams<T: Scalar> {
    /// Target distance to the saddle point of the base problem.
    pub epsilon: T,
    /// Error-bound constant C in `‖z*(ν) − z*‖ ≤ C·ν^θ`.
    pub error_bound_c: T,
    /// Error-bound exponent θ ∈ (0, 1].
    pub theta: T,
    /// Schedule aggressiveness τ ∈ (0, 1].
    pub tau: T,
    /// Initial regularization weight.
    pub nu0: T,
    /// Cap R on the membership radius factor ρ = min(1/(2L₂), R).
    pub guard_cap: T,
    /// Stage budget for phase 2.
    pub max_steps: usize,
    /// Iteration budget for the phase-1 solve.
    pub phase1_max_iterations: usize,
    /// Inner model-solver options shared by both phases.
    pub sub: SubproblemOptions<T>,
    /// Record wall-clock times in the trace.
    pub timing: bool,
}

impl<T: Scalar> Default for HomotopyParams<T> {
    fn default() -> Self {
        Self {
            epsilon: conv(1e-6),
            error_bound_c: T::one(),
            theta: T::one(),
            tau: T::one(),
            nu0: T::one(),
            guard_cap: conv(1e6),
            max_steps: 100_000,
            phase1_max_iterations: 10_000,
            sub: SubproblemOptions::default(),
            timing: false,
        }
    }
}

/// A parameter that fails validation, reported by key.
#[derive(Debug, Error)]
#[error("homotopy parameter `{key}`: {detail}")]
pub struct HomotopyParamError {
    pub key: &'static str,
    pub detail: String,
}

impl<T: Scalar> HomotopyParams<T> {
    pub fn validate(&self) -> Result<(), HomotopyParamError> {
        let fail = |key, detail: String| Err(HomotopyParamError { key, detail });
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return fail("epsilon", format!("must be positive and finite, got {:e}", self.epsilon));
        }
        if !(self.error_bound_c >= T::zero() && self.error_bound_c.is_finite()) {
            return fail(
                "error_bound_c",
                format!("must be nonnegative and finite, got {:e}", self.error_bound_c),
            );
        }
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return fail("theta", format!("must lie in (0, 1], got {:e}", self.theta));
        }
        if !(self.tau > T::zero() && self.tau <= T::one()) {
            return fail("tau", format!("must lie in (0, 1], got {:e}", self.tau));
        }
        if !(self.nu0 > T::zero() && self.nu0.is_finite()) {
            return fail("nu0", format!("must be positive and finite, got {:e}", self.nu0));
        }
        if !(self.guard_cap > T::zero() && self.guard_cap.is_finite()) {
            return fail(
                "guard_cap",
                format!("must be positive and finite, got {:e}", self.guard_cap),
            );
        }
        if self.max_steps == 0 {
            return fail("max_steps", "must be at least 1".into());
        }
        if self.phase1_max_iterations == 0 {
            return fail("phase1_max_iterations", "must be at least 1".into());
        }
        Ok(())
    }
}

/// One completed continuation stage.
#[derive(Debug, Clone)]
pub struct ContinuationState<T: Scalar> {
    /// Stage index, 1-based.
    pub step: usize,
    /// Iterate after the stage's Newton step.
    pub z: SaddlePoint<T>,
    /// Regularization weight the step was taken at.
    pub nu: T,
    /// Shrink factor applied to reach this `nu`.
    pub lambda: T,
    /// Cubic weight used for the step.
    pub gamma: T,
    /// Inner iterations of the model solve.
    pub sub_iterations: usize,
    /// Measured regularized merit after the step.
    pub membership_merit: T,
    /// Threshold the merit was checked against: `ν⁴ρ²/2`, clamped from
    /// below by the floating-point noise floor of the merit evaluation.
    pub certificate: T,
}

/// Outcome of a continuation run: the combined solver result plus the
/// per-stage path.
#[derive(Debug, Clone)]
pub struct HcResult<T: Scalar> {
    pub result: SolveResult<T>,
    pub path: Vec<ContinuationState<T>>,
    /// Final regularization weight.
    pub nu_final: T,
}

/// The stage shrink factor λ at weight `nu`.
pub fn schedule_lambda<T: Scalar>(theta: T, tau: T, lip_hess: T, error_bound_c: T, nu: T) -> T {
    let four = conv::<T>(4.0);
    let two = conv::<T>(2.0);
    let s = nu.powf(T::one() - theta);
    tau * (s / (four * lip_hess * error_bound_c + two * s)).powf(T::one() / theta)
}

/// The cubic weight used for stage steps at weight `nu`:
/// `γ = L₂ν²/(2(L+ν)²)`, the quadratic-phase choice for the regularized
/// problem.
pub fn stage_gamma<T: Scalar>(lip_grad: T, lip_hess: T, nu: T) -> T {
    let lnu = lip_grad + nu;
    lip_hess * nu * nu / (conv::<T>(2.0) * lnu * lnu)
}

/// Takes one full cubic-Newton step on `f_ν` from `z`. Returns the new
/// iterate, the model solution, and the cubic weight used.
pub fn continuation_step<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z: &SaddlePoint<T>,
    nu: T,
    sub: &SubproblemOptions<T>,
) -> Result<(SaddlePoint<T>, SubproblemSolution<T>, T), SolverError> {
    let base = problem.constants();
    let reg = Regularized::new(problem, nu);
    let gamma = stage_gamma(base.lip_grad, base.lip_hess, nu);
    let data = SubproblemData::assemble(&reg.hessian(z), &reg.gradient(z), gamma)?;
    let sol = solve_subproblem(&data, sub)?;
    let direction = SaddlePoint { x: sol.u.clone(), y: sol.v.clone() };
    Ok((z.add_scaled(T::one(), &direction), sol, gamma))
}

/// Errors specific to the continuation driver.
#[derive(Debug, Error)]
pub enum HomotopyError {
    #[error(transparent)]
    Params(#[from] HomotopyParamError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Runs the full two-phase continuation from `z0`.
pub fn solve_hc<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    params: &HomotopyParams<T>,
) -> Result<HcResult<T>, HomotopyError> {
    solve_hc_tracked(problem, z0, params, None)
}

/// Runs the continuation, recording distances to a reference point in the
/// trace.
pub fn solve_hc_tracked<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
    params: &HomotopyParams<T>,
    reference: Option<&SaddlePoint<T>>,
) -> Result<HcResult<T>, HomotopyError> {
    params.validate()?;
    let base_constants = problem.constants();
    base_constants.validate().map_err(SolverError::from)?;
    problem.check_dims(z0);

    let half = conv::<T>(0.5);
    let l2 = base_constants.lip_hess;
    let rho = if l2 > T::zero() {
        (T::one() / (conv::<T>(2.0) * l2)).min(params.guard_cap)
    } else {
        params.guard_cap
    };
    let nu0 = params.nu0;

    // Phase 1: solve the ν₀-regularized problem far enough that the
    // membership certificate holds.
    let reg0 = Regularized::new(problem, nu0);
    let est = estimate_constants(&reg0, z0).map_err(SolverError::from)?;
    let lm = est.merit_smoothness().expect("radius was just estimated");
    let eps1 = if l2 > T::zero() {
        let nu4 = nu0 * nu0 * nu0 * nu0;
        (nu4 * rho * rho * half).min(conv::<T>(1e-2))
    } else {
        conv::<T>(1e-10).min(nu0 * nu0 * nu0 * nu0 * conv::<T>(1e-6))
    };
    let phase1_config = SolverConfig {
        epsilon: eps1,
        max_iterations: params.phase1_max_iterations,
        alpha: (nu0 * nu0 / (conv::<T>(2.0) * lm)).min(T::one()),
        gamma_bar: l2 * nu0 * nu0 / (conv::<T>(4.0) * lm),
        gamma_rule: GammaRule::ClosedForm,
        sub: params.sub,
        warm_start: true,
        timing: params.timing,
        ..SolverConfig::default()
    };
    let phase1 = crn::solve_tracked(&reg0, z0, &phase1_config, reference)?;

    let mut trace = phase1.trace;
    for r in &mut trace.records {
        r.nu = Some(nu0);
    }
    let mut z = phase1.z;
    let mut iterations = phase1.iterations;

    if phase1.status != Status::Converged {
        let merit = base_merit(problem, &z);
        return Ok(HcResult {
            result: SolveResult { z, status: phase1.status, merit, iterations, trace },
            path: Vec::new(),
            nu_final: nu0,
        });
    }

    // Phase 2: shrink ν along the schedule, one full Newton step per stage,
    // verifying the membership certificate after each.
    let mut nu = nu0;
    let mut path: Vec<ContinuationState<T>> = Vec::new();
    let mut status = Status::Converged;
    let mut sub_options = params.sub;
    let stop_level = params.epsilon / (params.error_bound_c + rho);

    let mut steps = 0usize;
    while nu.powf(params.theta) > stop_level {
        if steps == params.max_steps {
            status = Status::MaxIterations;
            break;
        }
        steps += 1;
        let lambda = schedule_lambda(params.theta, params.tau, l2, params.error_bound_c, nu);
        nu *= T::one() - lambda;

        // Keep the inner tolerance commensurate with the shrinking scale of
        // the step itself.
        sub_options.tolerance =
            (nu * nu).min(params.sub.tolerance).max(conv::<T>(1e-14));
        let (z_next, sol, gamma) = continuation_step(problem, &z, nu, &sub_options)?;
        sub_options.initial_w = sol.w;
        z = z_next;
        iterations += 1;

        let reg = Regularized::new(problem, nu);
        let membership = base_merit(&reg, &z);
        let nu4 = nu * nu * nu * nu;
        // Enforce the certificate down to the floating-point resolution of
        // the merit itself: each operator component carries rounding on the
        // order of ε_mach·L_ν·(1 + ‖z‖), so merits below the squared total
        // are indistinguishable from zero at working precision even though
        // the iterate sits (distance-wise) far inside the tube.
        let (dim_n, dim_m) = problem.dims();
        let eval = reg.constants().lip_grad * (T::one() + z.norm()) * T::default_epsilon();
        let noise_floor = conv::<T>((dim_n + dim_m) as f64) * eval * eval;
        let certificate = (nu4 * rho * rho * half).max(noise_floor);
        let ok = membership <= certificate && membership.is_finite();

        let m_base = base_merit(problem, &z);
        let g_base = problem.gradient(&z);
        let mut record = IterationRecord::new(iterations, m_base, g_base.operator_norm());
        record.gamma = Some(gamma);
        record.gamma_trials = Some(1);
        record.step_kind = Some(StepKind::UnitStep);
        record.direction_norm =
            Some((sol.u.norm_squared() + sol.v.norm_squared()).sqrt());
        record.sub_iters = Some(sol.iterations);
        record.nu = Some(nu);
        record.lambda = Some(lambda);
        record.dist_to_opt = reference.map(|zs| z.distance(zs));
        trace.records.push(record);

        path.push(ContinuationState {
            step: steps,
            z: z.clone(),
            nu,
            lambda,
            gamma,
            sub_iterations: sol.iterations,
            membership_merit: membership,
            certificate,
        });

        if !ok {
            status = Status::Diverged;
            break;
        }
    }

    let merit = base_merit(problem, &z);
    Ok(HcResult {
        result: SolveResult { z, status, merit, iterations, trace },
        path,
        nu_final: nu,
    })
}

fn base_merit<T: Scalar, P: SaddleProblem<T>>(problem: &P, z: &SaddlePoint<T>) -> T {
    let g = problem.gradient(z);
    conv::<T>(0.5) * (g.gx.norm_squared() + g.gy.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticSaddle;
    use approx::assert_relative_eq;
    use nalgebra::{dvector, DMatrix};

    /// f(x, y) = xy − x: merely bilinear, saddle at (0, 1); the regularized
    /// saddle is z*(ν) = (ν/(1+ν²), 1/(1+ν²)).
    fn shifted_bilinear() -> QuadraticSaddle<f64> {
        QuadraticSaddle::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            dvector![1.0],
            dvector![0.0],
        )
        .unwrap()
    }

    fn regularized_saddle(nu: f64) -> SaddlePoint<f64> {
        SaddlePoint::new(dvector![nu / (1.0 + nu * nu)], dvector![1.0 / (1.0 + nu * nu)])
            .unwrap()
    }

    #[test]
    fn regularized_wrapper_shifts_gradient_and_hessian() {
        let p = shifted_bilinear();
        let reg = Regularized::new(&p, 0.5);
        let z = SaddlePoint::new(dvector![2.0], dvector![3.0]).unwrap();
        // Base: gx = y − 1, gy = x. Regularized: gx + νx, gy − νy.
        let g = reg.gradient(&z);
        assert_relative_eq!(g.gx[0], 3.0 - 1.0 + 0.5 * 2.0, max_relative = 1e-15);
        assert_relative_eq!(g.gy[0], 2.0 - 0.5 * 3.0, max_relative = 1e-15);
        let h = reg.hessian(&z);
        assert_eq!(h.hxx[(0, 0)], 0.5);
        assert_eq!(h.hyy[(0, 0)], -0.5);
        assert_eq!(h.hxy[(0, 0)], 1.0);
        let c = reg.constants();
        assert_eq!(c.mu, 0.5);
        assert_relative_eq!(c.lip_grad, p.constants().lip_grad + 0.5, max_relative = 1e-15);
        // Value picks up (ν/2)(‖x‖² − ‖y‖²).
        assert_relative_eq!(
            reg.value(&z),
            p.value(&z) + 0.25 * (4.0 - 9.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn schedule_reduces_to_constant_for_theta_one() {
        // λ = τ/(2 + 4L₂C); with L₂ = 0 and τ = 1 this is 1/2.
        assert_relative_eq!(schedule_lambda(1.0, 1.0, 0.0, 1.0, 0.37), 0.5, max_relative = 1e-15);
        // With 4L₂C = 4: λ = 1/6.
        assert_relative_eq!(
            schedule_lambda(1.0, 1.0, 1.0, 1.0, 0.9),
            1.0 / 6.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn schedule_for_half_theta_without_curvature_is_one_quarter() {
        for nu in [1.0, 0.3, 1e-4] {
            assert_relative_eq!(
                schedule_lambda(0.5, 1.0, 0.0, 1.0, nu),
                0.25,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn continuation_tracks_the_central_path() {
        let p = shifted_bilinear();
        for epsilon in [1e-4, 1e-6] {
            let params = HomotopyParams {
                epsilon,
                error_bound_c: 1.0,
                ..HomotopyParams::default()
            };
            let hc = solve_hc(&p, &SaddlePoint::zeros(1, 1), &params).unwrap();
            assert_eq!(hc.result.status, Status::Converged, "epsilon {epsilon}");
            // Every stage iterate sits within ν·ρ of the regularized saddle.
            let rho = 1e6;
            for state in &hc.path {
                let zs = regularized_saddle(state.nu);
                assert!(
                    state.z.distance(&zs) <= state.nu * rho,
                    "stage {} left the certified tube",
                    state.step
                );
                assert!(state.membership_merit <= state.certificate);
            }
            // Final answer is ε-close to the true saddle (0, 1).
            let d =
                hc.result.z.distance(&SaddlePoint::new(dvector![0.0], dvector![1.0]).unwrap());
            assert!(d <= epsilon, "final distance {d} at epsilon {epsilon}");
        }
    }

    #[test]
    fn theta_one_uses_a_constant_shrink_factor() {
        let p = shifted_bilinear();
        let params = HomotopyParams { epsilon: 1e-3, ..HomotopyParams::default() };
        let hc = solve_hc(&p, &SaddlePoint::zeros(1, 1), &params).unwrap();
        assert!(hc.path.len() >= 2);
        for state in &hc.path {
            assert_relative_eq!(state.lambda, 0.5, max_relative = 1e-12);
        }
        // ν decays geometrically at rate (1 − λ) = 1/2.
        for pair in hc.path.windows(2) {
            assert_relative_eq!(pair[1].nu, pair[0].nu * 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn stop_level_matches_the_guard_inequality() {
        let p = shifted_bilinear();
        let params = HomotopyParams {
            epsilon: 1e-5,
            error_bound_c: 1.0,
            ..HomotopyParams::default()
        };
        let hc = solve_hc(&p, &SaddlePoint::zeros(1, 1), &params).unwrap();
        let rho = 1e6;
        let stop = params.epsilon / (params.error_bound_c + rho);
        assert!(hc.nu_final <= stop);
        // The previous stage was still above the stop level.
        if hc.path.len() >= 2 {
            let prev = hc.path[hc.path.len() - 2].nu;
            assert!(prev > stop);
        }
    }

    #[test]
    fn trace_rows_carry_nu_lambda_and_unit_steps() {
        let p = shifted_bilinear();
        let params = HomotopyParams { epsilon: 1e-3, ..HomotopyParams::default() };
        let hc = solve_hc(&p, &SaddlePoint::zeros(1, 1), &params).unwrap();
        let records = &hc.result.trace.records;
        assert!(records[0].nu == Some(1.0) && records[0].lambda.is_none());
        let stage_rows: Vec<_> = records.iter().filter(|r| r.lambda.is_some()).collect();
        assert_eq!(stage_rows.len(), hc.path.len());
        for (row, state) in stage_rows.iter().zip(&hc.path) {
            assert_eq!(row.nu, Some(state.nu));
            assert_eq!(row.step_kind, Some(StepKind::UnitStep));
            assert_eq!(row.gamma, Some(state.gamma));
        }
    }

    #[test]
    fn strongly_convex_slice_keeps_certificates_with_curvature() {
        // A problem with L₂ > 0 (logistic) but vanishing μ after dropping
        // its own regularizers is hard to build; instead check phase 2 on a
        // strongly convex quadratic treated through the homotopy interface —
        // certificates must still hold at every stage.
        let p = QuadraticSaddle::<f64>::generate(2, 2, 31, 1.0);
        let params = HomotopyParams {
            epsilon: 1e-2,
            error_bound_c: 1.0,
            nu0: 0.5,
            ..HomotopyParams::default()
        };
        let hc = solve_hc(&p, &SaddlePoint::zeros(2, 2), &params).unwrap();
        assert_eq!(hc.result.status, Status::Converged);
        for state in &hc.path {
            assert!(state.membership_merit <= state.certificate);
        }
        // The base problem is strongly monotone, so the final iterate is
        // close to its saddle as well.
        let zs = p.saddle_point().unwrap();
        assert!(hc.result.z.distance(&zs) <= 1e-2);
    }

    #[test]
    fn parameter_validation_names_keys() {
        let mut params = HomotopyParams::<f64>::default();
        params.theta = 0.0;
        assert_eq!(params.validate().unwrap_err().key, "theta");
        let mut params = HomotopyParams::<f64>::default();
        params.tau = 2.0;
        assert_eq!(params.validate().unwrap_err().key, "tau");
        let mut params = HomotopyParams::<f64>::default();
        params.nu0 = -1.0;
        assert_eq!(params.validate().unwrap_err().key, "nu0");
    }

    #[test]
    fn phase1_budget_exhaustion_reports_an_empty_path() {
        // Declaring a (valid) curvature bound forces a positive model weight
        // in phase 1, so a single inner step from far away lands well short
        // of the phase-1 target and the stage loop must never start.
        let p = shifted_bilinear()
            .with_constants(ProblemConstants {
                mu: 0.0,
                lip_grad: 1.0,
                lip_hess: 10.0,
                level_radius: None,
            })
            .unwrap();
        let params = HomotopyParams {
            phase1_max_iterations: 1,
            nu0: 1e-3,
            ..HomotopyParams::default()
        };
        let z_far = SaddlePoint::new(dvector![1e4], dvector![-1e4]).unwrap();
        let hc = solve_hc(&p, &z_far, &params).unwrap();
        assert_eq!(hc.result.status, Status::MaxIterations);
        assert!(hc.path.is_empty());
        assert_eq!(hc.nu_final, 1e-3);
    }
}
