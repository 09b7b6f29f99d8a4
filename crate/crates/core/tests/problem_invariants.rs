//! Sampled regularity checks of the built-in problem families: the declared
//! modulus and Lipschitz bounds must dominate what random evaluations
//! actually exhibit, and the merit must bracket the distance to the saddle
//! point the way the theory promises.

use nalgebra::DVector;
use saddle_crn::homotopy::Regularized;
use saddle_crn::logistic::LogisticSaddle;
use saddle_crn::problem::{estimate_constants, SaddlePoint, SaddleProblem};
use saddle_crn::quadratic::QuadraticSaddle;
use saddle_crn::sampling::{rng_from_seed, standard_normal_vector, SeededRng};

fn random_point(rng: &mut SeededRng, n: usize, m: usize, scale: f64) -> SaddlePoint<f64> {
    SaddlePoint::new(
        standard_normal_vector::<f64>(rng, n) * scale,
        standard_normal_vector::<f64>(rng, m) * scale,
    )
    .unwrap()
}

/// `(F(z) − F(z′))ᵀ(z − z′) ≥ (μ − 1e-8)‖z − z′‖²` on random pairs.
fn assert_strongly_monotone<P: SaddleProblem<f64>>(problem: &P, seed: u64, pairs: usize) {
    let (n, m) = problem.dims();
    let mu = problem.constants().mu;
    let mut rng = rng_from_seed(seed);
    for _ in 0..pairs {
        let z = random_point(&mut rng, n, m, 2.0);
        let zp = random_point(&mut rng, n, m, 2.0);
        let df = problem.operator(&z) - problem.operator(&zp);
        let dz = z.stacked() - zp.stacked();
        let gap: f64 = df.dot(&dz) - (mu - 1e-8) * dz.norm_squared();
        assert!(gap >= 0.0, "monotonicity defect {gap:e}");
    }
}

#[test]
fn declared_modulus_bounds_sampled_monotonicity() {
    for seed in 0..10u64 {
        assert_strongly_monotone(&QuadraticSaddle::<f64>::generate(4, 3, seed, 1.0), seed, 10);
        assert_strongly_monotone(&LogisticSaddle::<f64>::generate(3, 4, 25, 30, seed), seed, 10);
    }
}

/// Operator and merit-gradient differences within the level set of `z0`
/// stay under the declared `L` and `Lm` slopes.
fn assert_lipschitz_within_level_set<P: SaddleProblem<f64>>(problem: &P, seed: u64) {
    let (n, m) = problem.dims();
    let mut rng = rng_from_seed(seed);
    let z0 = random_point(&mut rng, n, m, 1.0);
    let constants = estimate_constants(problem, &z0).unwrap();
    let l = constants.lip_grad;
    let lm = constants.merit_smoothness().unwrap();
    let level = problem.merit(&z0);

    let mut accepted = 0usize;
    let mut z_prev: Option<SaddlePoint<f64>> = None;
    while accepted < 40 {
        // Rejection-sample the level set {m(z) ≤ m(z0)}; shrinking draws
        // toward the region's interior keeps the acceptance rate usable.
        let z = random_point(&mut rng, n, m, 0.6);
        if problem.merit(&z) > level {
            continue;
        }
        accepted += 1;
        if let Some(zp) = &z_prev {
            let dz = z.distance(zp);
            let df = (problem.operator(&z) - problem.operator(zp)).norm();
            let dg = (problem.merit_gradient(&z) - problem.merit_gradient(zp)).norm();
            assert!(df <= (l + 1e-8) * dz, "operator slope {:e} vs L {l:e}", df / dz);
            assert!(dg <= (lm + 1e-8) * dz, "merit slope {:e} vs Lm {lm:e}", dg / dz);
        }
        z_prev = Some(z);
    }
}

#[test]
fn declared_slopes_dominate_level_set_samples() {
    for seed in 0..10u64 {
        assert_lipschitz_within_level_set(&QuadraticSaddle::<f64>::generate(4, 3, seed, 1.0), seed);
        assert_lipschitz_within_level_set(
            &LogisticSaddle::<f64>::generate(3, 3, 20, 25, seed),
            seed,
        );
    }
}

#[test]
fn operator_norm_brackets_the_distance_to_the_saddle() {
    for seed in 0..20u64 {
        let p = QuadraticSaddle::<f64>::generate(4, 4, seed, 1.0);
        let zs = p.saddle_point().unwrap();
        let c = p.constants();
        let mut rng = rng_from_seed(seed ^ 0xd15);
        for _ in 0..5 {
            let z = random_point(&mut rng, 4, 4, 3.0);
            let dist = z.distance(&zs);
            let fnorm = p.gradient(&z).operator_norm();
            assert!(c.mu * dist <= fnorm * (1.0 + 1e-12) + 1e-12);
            assert!(fnorm <= c.lip_grad * dist * (1.0 + 1e-12) + 1e-12);
        }
    }
}

/// The regularized operator vanishes along the closed-form central path of
/// `f(x, y) = xy − x`: `z*(ν) = (ν/(1+ν²), 1/(1+ν²))` satisfies
/// `∇ₓf = −νx` and `∇ᵧf = νy` exactly.
#[test]
fn central_path_points_are_stationary_for_the_regularized_problem() {
    let p = QuadraticSaddle::<f64>::new(
        nalgebra::dmatrix![0.0],
        nalgebra::dmatrix![0.0],
        nalgebra::dmatrix![1.0],
        DVector::from_vec(vec![1.0]),
        DVector::from_vec(vec![0.0]),
    )
    .unwrap();
    for nu in [1.0, 0.25, 1e-2, 1e-4, 1e-8] {
        let denom = 1.0 + nu * nu;
        let zs = SaddlePoint::new(DVector::from_vec(vec![nu / denom]), DVector::from_vec(vec![1.0 / denom]))
            .unwrap();
        let reg = Regularized::new(&p, nu);
        assert!(reg.gradient(&zs).operator_norm() <= 1e-15 * (1.0 + nu));

        // Component form of the same statement on the base problem.
        let g = p.gradient(&zs);
        assert!((g.gx[0] + nu * zs.x[0]).abs() <= 1e-15);
        assert!((g.gy[0] - nu * zs.y[0]).abs() <= 1e-15);
    }
}
