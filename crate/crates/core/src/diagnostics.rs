//! Independent verification oracles.
//!
//! Everything here double-checks the analytic machinery elsewhere in the
//! crate by an unrelated route: derivatives against central finite
//! differences, the merit function against an exactly computed duality gap
//! on quadratic problems, the regularization path against a Hölder-fit of
//! its displacements, and solver traces against the theoretical tail rate.
//! The checks are deliberately slow and simple — they are referees, not
//! production paths.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{self, GammaRule, SolverConfig, SolverError, Status};
use crate::homotopy::{stage_gamma, Regularized};
use crate::logistic::LogisticSaddle;
use crate::problem::{
    estimate_constants, ProblemConstants, ProblemError, SaddlePoint, SaddleProblem,
};
use crate::quadratic::QuadraticSaddle;
use crate::sampling::{rng_from_seed, standard_normal_vector};
use crate::scalar::{conv, to_f64, Scalar};
use crate::subproblem::{jacobian_l, residual_l, SubproblemData, SubproblemError};
use crate::trace::Trace;

/// Failures of the verification oracles themselves.
#[derive(Debug, Error)]
pub enum DiagnosticsError {
    /// The duality gap needs strictly positive definite inner blocks.
    #[error("inner Hessian block {block} is singular or indefinite; the duality gap needs strictly convex-concave quadratics")]
    SingularInnerHessian { block: &'static str },
    /// The regularization ladder handed to the fit was unusable.
    #[error("invalid regularization ladder: {detail}")]
    InvalidNuLadder { detail: String },
    /// A path solve did not converge, so its endpoint is untrusted.
    #[error("path solve at nu = {nu:e} ended with status {status:?}")]
    PathSolve { nu: f64, status: Status },
    /// A trace did not expose enough usable tail records.
    #[error("trace tail has {found} usable record(s) inside the quadratic region; at least {needed} are required")]
    InsufficientTail { found: usize, needed: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
}

/// Relative deviation with an absolute floor, so comparisons at stationary
/// points (both sides ≈ 0) stay well defined.
fn rel_err<T: Scalar>(analytic: T, numeric: T) -> T {
    let denom = analytic.abs().max(numeric.abs()).max(conv::<T>(1e-12));
    (analytic - numeric).abs() / denom
}

fn perturbed<T: Scalar>(z: &SaddlePoint<T>, coord: usize, delta: T) -> SaddlePoint<T> {
    let (n, m) = z.dims();
    let mut stacked = z.stacked();
    stacked[coord] += delta;
    SaddlePoint::from_stacked(n, m, &stacked)
}

/// Worst relative disagreement, over coordinates, between the analytic
/// merit gradient and central finite differences of the merit itself.
///
/// Each coordinate uses the scaled width `h·(1 + |zᵢ|)`.
pub fn fd_check_gradient<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z: &SaddlePoint<T>,
    h: T,
) -> T {
    assert!(h > T::zero(), "finite-difference width must be positive");
    let (n, m) = problem.check_dims(z);
    let analytic = problem.merit_gradient(z);
    let mut worst = T::zero();
    for i in 0..n + m {
        let hi = h * (T::one() + z.stacked()[i].abs());
        let plus = problem.merit(&perturbed(z, i, hi));
        let minus = problem.merit(&perturbed(z, i, -hi));
        let fd = (plus - minus) / (conv::<T>(2.0) * hi);
        worst = worst.max(rel_err(analytic[i], fd));
    }
    worst
}

/// Worst relative disagreement, over matrix entries, between the analytic
/// operator Jacobian and central finite differences of the operator.
pub fn fd_check_operator_jacobian<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z: &SaddlePoint<T>,
    h: T,
) -> T {
    assert!(h > T::zero(), "finite-difference width must be positive");
    let (n, m) = problem.check_dims(z);
    let analytic = problem.operator_jacobian(z);
    let mut worst = T::zero();
    for j in 0..n + m {
        let hj = h * (T::one() + z.stacked()[j].abs());
        let plus = problem.operator(&perturbed(z, j, hj));
        let minus = problem.operator(&perturbed(z, j, -hj));
        let fd = (plus - minus) / (conv::<T>(2.0) * hj);
        for i in 0..n + m {
            worst = worst.max(rel_err(analytic[(i, j)], fd[i]));
        }
    }
    worst
}

/// Worst relative disagreement between the analytic 2×2 Jacobian of the
/// norm-condition residual and its finite differences in `w`.
///
/// Coordinates sitting closer than one width to the `w ≥ 0` boundary use a
/// one-sided (forward) difference so the probes stay feasible.
pub fn fd_check_subproblem_jacobian<T: Scalar>(
    data: &SubproblemData<T>,
    w: (T, T),
    h: T,
) -> Result<T, DiagnosticsError> {
    assert!(h > T::zero(), "finite-difference width must be positive");
    assert!(
        w.0 >= T::zero() && w.1 >= T::zero(),
        "norm estimates must be nonnegative"
    );
    let analytic = jacobian_l(data, w)?;
    let base = residual_l(data, w)?;
    let mut worst = T::zero();
    for j in 0..2 {
        let wj = if j == 0 { w.0 } else { w.1 };
        let hj = h * (T::one() + wj.abs());
        let bump = |delta: T| if j == 0 { (w.0 + delta, w.1) } else { (w.0, w.1 + delta) };
        let fd = if wj - hj >= T::zero() {
            let plus = residual_l(data, bump(hj))?;
            let minus = residual_l(data, bump(-hj))?;
            let scale = conv::<T>(2.0) * hj;
            ((plus.0 - minus.0) / scale, (plus.1 - minus.1) / scale)
        } else {
            let plus = residual_l(data, bump(hj))?;
            ((plus.0 - base.0) / hj, (plus.1 - base.1) / hj)
        };
        worst = worst.max(rel_err(analytic[0][j], fd.0));
        worst = worst.max(rel_err(analytic[1][j], fd.1));
    }
    Ok(worst)
}

/// The exact duality gap `max_y f(x, y) − min_x f(x, y)` of a strictly
/// convex-concave quadratic at `z = (x, y)`.
///
/// Both inner problems have closed-form optima (one dense solve each), and
/// the gap equals the sum of the two optimality shortfalls
/// `½‖y − y°‖²_Q + ½‖x − x°‖²_P`, which keeps the result nonnegative by
/// construction instead of as a difference of near-equal values.
pub fn duality_gap_quadratic<T: Scalar>(
    problem: &QuadraticSaddle<T>,
    z: &SaddlePoint<T>,
) -> Result<T, DiagnosticsError> {
    problem.check_dims(z);
    let chol_p = Cholesky::new(problem.p().clone())
        .ok_or(DiagnosticsError::SingularInnerHessian { block: "P" })?;
    let chol_q = Cholesky::new(problem.q().clone())
        .ok_or(DiagnosticsError::SingularInnerHessian { block: "Q" })?;
    // Inner maximizer over y at fixed x: Q y° = Aᵀx + c.
    let y_opt = chol_q.solve(&(problem.coupling().transpose() * &z.x + problem.c()));
    // Inner minimizer over x at fixed y: P x° = b − A y.
    let x_opt = chol_p.solve(&(problem.b() - problem.coupling() * &z.y));
    let dy = &z.y - y_opt;
    let dx = &z.x - x_opt;
    let half = conv::<T>(0.5);
    Ok(half * (problem.q() * &dy).dot(&dy) + half * (problem.p() * &dx).dot(&dx))
}

/// Result of fitting the path-regularity relation
/// `‖z*(ν₁) − z*(ν₂)‖ ≤ C·|ν₁ − ν₂|^θ` along a ladder of weights.
#[derive(Debug, Clone)]
pub struct ErrorBoundFit<T: Scalar> {
    /// Fitted multiplicative constant Ĉ.
    pub c: T,
    /// Fitted Hölder exponent θ̂.
    pub theta: T,
    /// True when the path collapsed to a point (every displacement at the
    /// solver's noise level); the fit is then reported as the exact
    /// constant path `C = 0, θ = 1`.
    pub degenerate: bool,
    /// Per-pair samples `(Δν, ‖Δz*‖)` the regression saw, in ladder order.
    pub samples: Vec<(T, T)>,
}

/// Fits `(Ĉ, θ̂)` by computing the regularized solution `z*(ν)` for every
/// weight on the ladder and least-squares regressing `log ‖Δz*‖` on
/// `log Δν` over consecutive pairs.
///
/// The ladder must hold at least five strictly descending positive values.
/// Each path point is solved to near machine precision, warm-started from
/// its predecessor; pairs whose displacement is indistinguishable from the
/// solver's own noise are excluded from the regression.
pub fn fit_error_bound<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    nus: &[T],
) -> Result<ErrorBoundFit<T>, DiagnosticsError> {
    if nus.len() < 5 {
        return Err(DiagnosticsError::InvalidNuLadder {
            detail: format!("need at least 5 values, got {}", nus.len()),
        });
    }
    if nus.iter().any(|&nu| !(nu > T::zero())) {
        return Err(DiagnosticsError::InvalidNuLadder {
            detail: "every value must be positive".to_string(),
        });
    }
    if nus.windows(2).any(|pair| pair[1] >= pair[0]) {
        return Err(DiagnosticsError::InvalidNuLadder {
            detail: "values must be strictly descending".to_string(),
        });
    }

    let base = problem.constants();
    let lip_hess = base.lip_hess;
    let epsilon = conv::<T>(1e-26);
    let mut z = SaddlePoint::zeros(problem.dims().0, problem.dims().1);
    let mut path: Vec<SaddlePoint<T>> = Vec::with_capacity(nus.len());
    for &nu in nus {
        let reg = Regularized::new(problem, nu);
        let est = estimate_constants(&reg, &z)?;
        let lm = est.merit_smoothness().expect("radius estimated above");
        let config = SolverConfig {
            epsilon,
            max_iterations: 500,
            alpha: (est.mu * est.mu / (conv::<T>(2.0) * lm)).min(T::one()),
            gamma_bar: if lip_hess > T::zero() {
                stage_gamma(base.lip_grad, lip_hess, nu)
            } else {
                T::zero()
            },
            gamma_rule: GammaRule::ClosedForm,
            ..SolverConfig::default()
        };
        let result = crn::solve(&reg, &z, &config)?;
        if result.status != Status::Converged {
            return Err(DiagnosticsError::PathSolve {
                nu: to_f64(nu),
                status: result.status,
            });
        }
        z = result.z.clone();
        path.push(result.z);
    }

    let mut samples: Vec<(T, T)> = Vec::with_capacity(nus.len() - 1);
    for (pair, zs) in nus.windows(2).zip(path.windows(2)) {
        samples.push((pair[0] - pair[1], zs[0].distance(&zs[1])));
    }

    // A displacement below ~100× the distance accuracy of the inner solves
    // carries no exponent information. dist error ≤ ‖F‖/μ_ν ≤ √(2ε)/ν.
    let noise = |pair: &(T, T), nu_small: T| {
        pair.1 <= conv::<T>(100.0) * (conv::<T>(2.0) * epsilon).sqrt() / nu_small
    };
    let retained: Vec<(f64, f64)> = samples
        .iter()
        .zip(nus.windows(2))
        .filter(|(pair, nu_pair)| !noise(pair, nu_pair[1]))
        .map(|(pair, _)| (to_f64(pair.0).ln(), to_f64(pair.1).ln()))
        .collect();
    if retained.len() < 2 {
        return Ok(ErrorBoundFit {
            c: T::zero(),
            theta: T::one(),
            degenerate: true,
            samples,
        });
    }

    let count = retained.len() as f64;
    let mean_x = retained.iter().map(|&(x, _)| x).sum::<f64>() / count;
    let mean_y = retained.iter().map(|&(_, y)| y).sum::<f64>() / count;
    let sxx: f64 = retained.iter().map(|&(x, _)| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 =
        retained.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(DiagnosticsError::InvalidNuLadder {
            detail: "consecutive differences must vary to identify the exponent".to_string(),
        });
    }
    let theta = sxy / sxx;
    let c = (mean_y - theta * mean_x).exp();
    Ok(ErrorBoundFit {
        c: conv::<T>(c),
        theta: conv::<T>(theta),
        degenerate: false,
        samples,
    })
}

/// Tail-rate probe of a trace against the one-step quadratic contraction
/// `dₖ₊₁ ≤ (L·L₂/μ²)·dₖ²` inside the region `d ≤ μ²/(L·L₂)`.
#[derive(Debug, Clone)]
pub struct RateProbe<T: Scalar> {
    /// Consecutive distance pairs `(dₖ, dₖ₊₁)` from the qualifying tail.
    pub pairs: Vec<(T, T)>,
    /// Largest empirical coefficient `dₖ₊₁/dₖ²` over the tail; `None` with
    /// fewer than three pairs (never extrapolated) or when no pair has a
    /// positive starting distance.
    pub fitted: Option<T>,
    /// Theoretical coefficient `L·L₂/μ²`.
    pub bound: T,
    /// Radius `μ²/(L·L₂)` of the region the tail was restricted to
    /// (infinite when the curvature constant is zero).
    pub region_radius: T,
}

/// Extracts the quadratic-phase tail of a trace: the longest run of final
/// records whose recorded distances sit inside the contraction region.
///
/// The trace must have been produced with a reference solution, so its
/// distance column is populated; at least two qualifying tail records are
/// needed to form a single pair.
pub fn probe_quadratic_rate<T: Scalar>(
    trace: &Trace<T>,
    constants: &ProblemConstants<T>,
) -> Result<RateProbe<T>, DiagnosticsError> {
    constants.validate()?;
    let bound = constants.lip_grad * constants.lip_hess / (constants.mu * constants.mu);
    let region_radius =
        if bound > T::zero() { T::one() / bound } else { conv::<T>(f64::INFINITY) };

    let mut tail: Vec<T> = Vec::new();
    for record in trace.records.iter().rev() {
        match record.dist_to_opt {
            Some(d) if d.is_finite() && d <= region_radius => tail.push(d),
            _ => break,
        }
    }
    tail.reverse();

    if tail.len() < 2 {
        return Err(DiagnosticsError::InsufficientTail { found: tail.len(), needed: 2 });
    }
    let pairs: Vec<(T, T)> =
        tail.windows(2).map(|pair| (pair[0], pair[1])).collect();
    let fitted = if pairs.len() >= 3 {
        pairs
            .iter()
            .filter(|(d, _)| *d > T::zero())
            .map(|&(d, d_next)| d_next / (d * d))
            .fold(None, |acc: Option<T>, ratio| {
                Some(acc.map_or(ratio, |best| best.max(ratio)))
            })
    } else {
        None
    };
    Ok(RateProbe { pairs, fitted, bound, region_radius })
}

/// One line of the machine-readable diagnostics report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEntry {
    /// Which oracle ran (`merit_gradient`, `operator_jacobian`,
    /// `subproblem_jacobian`).
    pub check_name: String,
    /// Seed of the generated instance the check ran on.
    pub instance_seed: u64,
    /// Worst relative error the oracle observed.
    pub max_rel_error: f64,
    /// Whether the error stayed within the sweep threshold.
    pub pass: bool,
}

/// Relative-error threshold of the standard sweep.
pub const SWEEP_THRESHOLD: f64 = 1e-5;

/// Finite-difference width of the standard sweep.
pub const SWEEP_WIDTH: f64 = 1e-6;

/// Runs the standard derivative sweep over `count` seeded instances.
///
/// Even seeds build small random quadratics, odd seeds small logistic
/// instances; every instance is checked at a seeded point against all
/// three oracles (merit gradient, operator Jacobian, model-residual
/// Jacobian), producing `3·count` report entries.
pub fn standard_check_sweep(count: usize) -> Vec<CheckEntry> {
    let mut report = Vec::with_capacity(3 * count);
    for seed in 0..count as u64 {
        let n = 2 + (seed % 5) as usize;
        let m = 2 + ((seed / 5) % 5) as usize;
        let problem: Box<dyn SaddleProblem<f64>> = if seed % 2 == 0 {
            Box::new(QuadraticSaddle::generate(n, m, seed, 1.0))
        } else {
            Box::new(LogisticSaddle::generate(n, m, 30, 30, seed))
        };
        let mut rng = rng_from_seed(seed ^ 0x0ff5_e7);
        let z = SaddlePoint::new(
            standard_normal_vector(&mut rng, n),
            standard_normal_vector(&mut rng, m),
        )
        .expect("sampled point is finite");

        let mut push = |name: &str, err: f64| {
            report.push(CheckEntry {
                check_name: name.to_string(),
                instance_seed: seed,
                max_rel_error: err,
                pass: err <= SWEEP_THRESHOLD,
            });
        };
        push("merit_gradient", fd_check_gradient(&problem.as_ref(), &z, SWEEP_WIDTH));
        push(
            "operator_jacobian",
            fd_check_operator_jacobian(&problem.as_ref(), &z, SWEEP_WIDTH),
        );

        let gamma = [0.1, 1.0, 10.0][(seed % 3) as usize];
        let data =
            SubproblemData::assemble(&problem.hessian(&z), &problem.gradient(&z), gamma)
                .expect("generated instances are strictly convex-concave");
        let err = fd_check_subproblem_jacobian(&data, (0.5, 0.5), SWEEP_WIDTH)
            .map_or(f64::INFINITY, |e| e);
        push("subproblem_jacobian", err);
    }
    report
}
