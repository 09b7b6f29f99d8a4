//! Behavioural contracts of the outer solvers, checked against independent
//! recomputation rather than the solver's own bookkeeping. Iterates are
//! recovered by re-running the (deterministic) solver with a truncated
//! budget, so every per-iteration claim can be audited from the outside.

use saddle_crn::baselines::{eg_step, run_baseline, BaselineConfig, BaselineMethod};
use saddle_crn::crn::{solve, GammaRule, SolverConfig, Status};
use saddle_crn::diagnostics::duality_gap_quadratic;
use saddle_crn::logistic::LogisticSaddle;
use saddle_crn::problem::{estimate_constants, SaddlePoint, SaddleProblem};
use saddle_crn::quadratic::QuadraticSaddle;
use saddle_crn::sampling::{rng_from_seed, standard_normal_vector};
use saddle_crn::subproblem::{solve as solve_sub, SubproblemData};

fn seeded_point(seed: u64, n: usize, m: usize, scale: f64) -> SaddlePoint<f64> {
    let mut rng = rng_from_seed(seed);
    SaddlePoint::new(
        standard_normal_vector::<f64>(&mut rng, n) * scale,
        standard_normal_vector::<f64>(&mut rng, m) * scale,
    )
    .unwrap()
}

/// Iterate `k` of a run, recovered by re-running with a truncated budget.
fn iterate_at<P: SaddleProblem<f64>>(
    problem: &P,
    z0: &SaddlePoint<f64>,
    config: &SolverConfig<f64>,
    k: usize,
) -> SaddlePoint<f64> {
    if k == 0 {
        return z0.clone();
    }
    let truncated = SolverConfig { max_iterations: k, ..*config };
    solve(problem, z0, &truncated).unwrap().z
}

/// With the theoretical damping `α = μ²/(2Lm)`, every accepted step must
/// decrease the merit by at least `(μ⁴/(8Lm))‖d‖²`, whichever of the two
/// candidates won.
#[test]
fn theoretical_step_size_guarantees_the_descent_increment() {
    let p = LogisticSaddle::<f64>::generate(2, 2, 20, 20, 3);
    let z0 = seeded_point(91, 2, 2, 3.0);
    let est = estimate_constants(&p, &z0).unwrap();
    let lm = est.merit_smoothness().unwrap();
    let mu = est.mu;
    let alpha = (mu * mu / (2.0 * lm)).min(1.0);
    let gamma_bar = est.lip_hess * mu * mu / (4.0 * lm);
    let config = SolverConfig {
        epsilon: 1e-10,
        max_iterations: 300,
        alpha,
        gamma_bar,
        sub: saddle_crn::subproblem::SubproblemOptions {
            tolerance: 1e-10,
            ..Default::default()
        },
        ..SolverConfig::default()
    };
    let result = solve(&p, &z0, &config).unwrap();
    assert!(result.iterations >= 3, "expected several steps to audit, got {}", result.iterations);

    let rows = &result.trace.records;
    let decrement = mu.powi(4) / (8.0 * lm);
    for pair in rows.windows(2) {
        let d = pair[1].direction_norm.unwrap();
        let drop = pair[1].merit - pair[0].merit;
        assert!(
            drop <= -decrement * d * d + 1e-15 * (1.0 + pair[0].merit),
            "iteration {}: merit change {drop:e} vs required {:e}",
            pair[1].iter,
            -decrement * d * d
        );
    }
}

/// Every accepted iteration must respect `γ(‖u‖+‖v‖) ≤ μ`, and under the
/// closed-form rule the recorded weight must equal `min(γ̄, 3μ²/(4b))`
/// recomputed from the iterate's raw gradient.
#[test]
fn accepted_cubic_weights_respect_the_modulus_condition() {
    let p = LogisticSaddle::<f64>::generate(2, 3, 25, 25, 11);
    let z0 = seeded_point(17, 2, 3, 1.0);
    let mu = p.constants().mu;

    for rule in [GammaRule::ClosedForm, GammaRule::Backtracking] {
        let config = SolverConfig {
            epsilon: 1e-12,
            gamma_rule: rule,
            sub: saddle_crn::subproblem::SubproblemOptions {
                tolerance: 1e-10,
                ..Default::default()
            },
            ..SolverConfig::default()
        };
        let result = solve(&p, &z0, &config).unwrap();
        assert_eq!(result.status, Status::Converged);

        for k in 1..=result.iterations {
            let origin = iterate_at(&p, &z0, &config, k - 1);
            let row = &result.trace.records[k];
            let gamma = row.gamma.unwrap();

            let g = p.gradient(&origin);
            if rule == GammaRule::ClosedForm {
                let b = g.gx.norm().max(g.gy.norm());
                let expected = if b == 0.0 { config.gamma_bar } else { config.gamma_bar.min(0.75 * mu * mu / b) };
                assert_eq!(gamma, expected, "closed-form weight mismatch at iteration {k}");
            }

            let data = SubproblemData::assemble(&p.hessian(&origin), &g, gamma).unwrap();
            let sol = solve_sub(&data, &config.sub).unwrap();
            assert!(
                gamma * (sol.u.norm() + sol.v.norm()) <= mu + 1e-8,
                "rule {rule:?}, iteration {k}: γ(‖u‖+‖v‖) = {:e} vs μ = {mu:e}",
                gamma * (sol.u.norm() + sol.v.norm())
            );
        }
    }
}

/// At every iterate of a run on a strictly convex-concave quadratic, the
/// duality gap and the merit bracket each other with the `μ/L²` and `L/μ²`
/// factors.
#[test]
fn duality_gap_stays_sandwiched_along_a_run() {
    let p = QuadraticSaddle::<f64>::generate(3, 3, 41, 1.0);
    let z0 = seeded_point(5, 3, 3, 2.0);
    let c = p.constants();
    let config = SolverConfig { epsilon: 1e-14, gamma_bar: 1.0, ..SolverConfig::default() };
    let result = solve(&p, &z0, &config).unwrap();
    assert_eq!(result.status, Status::Converged);
    assert!(result.iterations >= 3, "want several iterates, got {}", result.iterations);

    for k in 0..=result.iterations {
        let z = iterate_at(&p, &z0, &config, k);
        let m = p.merit(&z);
        let gap = duality_gap_quadratic(&p, &z).unwrap();
        let lower = c.mu / (c.lip_grad * c.lip_grad) * m;
        let upper = c.lip_grad / (c.mu * c.mu) * m;
        assert!(gap >= lower - 1e-10, "iterate {k}: gap {gap:e} below {lower:e}");
        assert!(gap <= upper + 1e-10, "iterate {k}: gap {gap:e} above {upper:e}");
    }
}

#[test]
fn baselines_fix_the_saddle_point() {
    // Saddle at the origin exactly (zero linear terms), so the fixed-point
    // property can be asserted bitwise.
    let p = QuadraticSaddle::<f64>::new(
        nalgebra::dmatrix![2.0, 0.0; 0.0, 2.0],
        nalgebra::dmatrix![2.0, 0.0; 0.0, 2.0],
        nalgebra::dmatrix![1.0, 0.0; 0.0, 1.0],
        nalgebra::DVector::zeros(2),
        nalgebra::DVector::zeros(2),
    )
    .unwrap();
    let zs = SaddlePoint::zeros(2, 2);
    let stepped = eg_step(&p, &zs, 0.05);
    assert_eq!(stepped.x, zs.x);
    assert_eq!(stepped.y, zs.y);

    for method in [BaselineMethod::Extragradient, BaselineMethod::Ogda] {
        let config = BaselineConfig::new(method, 0.05);
        let result = run_baseline(&p, &zs, &config).unwrap();
        assert_eq!(result.status, Status::Converged);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.trace.records.len(), 1);
        assert_eq!(result.z.distance(&zs), 0.0);
    }
}

/// Baseline traces and cubic-solver traces must share the exact column
/// schema so runs can be compared file-to-file.
#[test]
fn baseline_and_newton_traces_share_the_header() {
    let p = QuadraticSaddle::<f64>::generate(2, 2, 8, 1.0);
    let z0 = seeded_point(2, 2, 2, 1.0);
    let crn = solve(&p, &z0, &SolverConfig::default()).unwrap();
    let eg = run_baseline(
        &p,
        &z0,
        &BaselineConfig::new(BaselineMethod::Extragradient, 0.04),
    )
    .unwrap();
    let header = |csv: &str| csv.lines().nth(1).unwrap().to_string();
    assert_eq!(header(&crn.trace.to_csv()), header(&eg.trace.to_csv()));
}
