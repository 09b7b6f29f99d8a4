//! Logistic-loss saddle point problems, the nonquadratic benchmark family:
//!
//! `f(x, y) = (1/M₁) Σᵢ ln(1+exp(−aᵢᵀx)) + ½‖x‖² + xᵀAy
//!            − (1/M₂) Σⱼ ln(1+exp(−bⱼᵀy)) − ½‖y‖²`
//!
//! Two regularized logistic losses coupled bilinearly: strongly convex in x,
//! strongly concave in y with modulus exactly 1. The declared L and L₂ are
//! closed-form upper bounds computed from the data at construction:
//!
//! * `L = max(1 + λmax(XᵀX)/(4M₁), 1 + λmax(YᵀY)/(4M₂)) + σmax(A)`, from
//!   splitting ∇F into its block-diagonal symmetric part (logistic curvature
//!   weight σ(t)σ(−t) ≤ ¼) and the skew coupling;
//! * `L₂ = (1/(6√3)) · max(Σᵢ‖aᵢ‖³/M₁, Σⱼ‖bⱼ‖³/M₂)`, since
//!   |d/dt σ(t)σ(−t)| ≤ 1/(6√3) and ∇F(z)−∇F(z′) is block diagonal.
//!
//! Upper bounds keep every certificate in this crate valid (all uses of L,
//! L₂ are monotone); tests check the sampled Lipschitz inequalities hold.

use nalgebra::{DMatrix, DVector};

use crate::problem::{
    all_finite, GradientPair, HessianBlocks, ProblemConstants, ProblemError, SaddlePoint,
    SaddleProblem,
};
use crate::sampling::{rng_from_seed, standard_normal_matrix};
use crate::scalar::{conv, Scalar};

/// Maximum of |d/dt σ(t)σ(−t)|, attained at σ = (3±√3)/6.
const SIGMOID_CURVATURE_SLOPE_MAX: f64 = 0.096225044864937627;

/// A validated logistic saddle point problem.
#[derive(Debug, Clone)]
pub struct LogisticSaddle<T: Scalar> {
    /// M₁×n matrix with rows aᵢ.
    x_data: DMatrix<T>,
    /// M₂×m matrix with rows bⱼ.
    y_data: DMatrix<T>,
    /// n×m coupling matrix A.
    coupling: DMatrix<T>,
    constants: ProblemConstants<T>,
}

/// Numerically stable `ln(1 + eˢ)`.
fn softplus<T: Scalar>(s: T) -> T {
    s.max(T::zero()) + (-s.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid `1/(1 + e⁻ᵗ)`.
fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> LogisticSaddle<T> {
    /// Builds the problem from data matrices, computing the constants.
    pub fn new(
        x_data: DMatrix<T>,
        y_data: DMatrix<T>,
        coupling: DMatrix<T>,
    ) -> Result<Self, ProblemError> {
        let (n, m) = (coupling.nrows(), coupling.ncols());
        if n == 0 || m == 0 || x_data.nrows() == 0 || y_data.nrows() == 0 {
            return Err(ProblemError::InconsistentDimensions {
                place: "logistic problem",
                detail: "all dimensions and sample counts must be at least 1".into(),
            });
        }
        if x_data.ncols() != n || y_data.ncols() != m {
            return Err(ProblemError::InconsistentDimensions {
                place: "logistic problem",
                detail: format!(
                    "coupling is {n}x{m} but data have {} and {} columns",
                    x_data.ncols(),
                    y_data.ncols()
                ),
            });
        }
        for mat in [&x_data, &y_data, &coupling] {
            if !all_finite(mat) {
                return Err(ProblemError::NonFinite { place: "logistic data" });
            }
        }
        let constants = Self::derive_constants(&x_data, &y_data, &coupling);
        Ok(Self { x_data, y_data, coupling, constants })
    }

    /// Random instance with standard-normal data rows and coupling, drawn
    /// from `seed` (x rows, then y rows, then the coupling).
    pub fn generate(n: usize, m: usize, m1: usize, m2: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let x_data = standard_normal_matrix(&mut rng, m1, n);
        let y_data = standard_normal_matrix(&mut rng, m2, m);
        let coupling = standard_normal_matrix(&mut rng, n, m);
        Self::new(x_data, y_data, coupling).expect("generated logistic instance is valid")
    }

    /// Overrides the computed constants with declared ones (validated).
    pub fn with_constants(mut self, constants: ProblemConstants<T>) -> Result<Self, ProblemError> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    fn derive_constants(
        x_data: &DMatrix<T>,
        y_data: &DMatrix<T>,
        coupling: &DMatrix<T>,
    ) -> ProblemConstants<T> {
        let m1 = conv::<T>(x_data.nrows() as f64);
        let m2 = conv::<T>(y_data.nrows() as f64);
        let quarter = conv::<T>(0.25);

        let lam_x = largest_gram_eigenvalue(x_data);
        let lam_y = largest_gram_eigenvalue(y_data);
        let diag_bound =
            (T::one() + quarter * lam_x / m1).max(T::one() + quarter * lam_y / m2);
        let sigma_a = largest_gram_eigenvalue(coupling).max(T::zero()).sqrt();
        let lip_grad = diag_bound + sigma_a;

        let cube_sum = |data: &DMatrix<T>| -> T {
            data.row_iter().fold(T::zero(), |acc, row| {
                let norm = row.norm();
                acc + norm * norm * norm
            })
        };
        let lip_hess = conv::<T>(SIGMOID_CURVATURE_SLOPE_MAX)
            * (cube_sum(x_data) / m1).max(cube_sum(y_data) / m2);

        ProblemConstants { mu: T::one(), lip_grad, lip_hess, level_radius: None }
    }

    pub fn x_data(&self) -> &DMatrix<T> {
        &self.x_data
    }
    pub fn y_data(&self) -> &DMatrix<T> {
        &self.y_data
    }
    pub fn coupling(&self) -> &DMatrix<T> {
        &self.coupling
    }
}

/// λmax(MᵀM) via the smaller of the two Gram matrices.
fn largest_gram_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    let gram = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.transpose() * m };
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |acc, v| acc.max(v))
}

impl<T: Scalar> SaddleProblem<T> for LogisticSaddle<T> {
    fn dims(&self) -> (usize, usize) {
        (self.coupling.nrows(), self.coupling.ncols())
    }

    fn value(&self, z: &SaddlePoint<T>) -> T {
        self.check_dims(z);
        let half = conv::<T>(0.5);
        let m1 = conv::<T>(self.x_data.nrows() as f64);
        let m2 = conv::<T>(self.y_data.nrows() as f64);
        let tx = &self.x_data * &z.x;
        let ty = &self.y_data * &z.y;
        let loss_x = tx.iter().fold(T::zero(), |acc, t| acc + softplus(-*t)) / m1;
        let loss_y = ty.iter().fold(T::zero(), |acc, t| acc + softplus(-*t)) / m2;
        loss_x + half * z.x.norm_squared() + z.x.dot(&(&self.coupling * &z.y))
            - loss_y
            - half * z.y.norm_squared()
    }

    fn gradient(&self, z: &SaddlePoint<T>) -> GradientPair<T> {
        self.check_dims(z);
        let m1 = conv::<T>(self.x_data.nrows() as f64);
        let m2 = conv::<T>(self.y_data.nrows() as f64);
        // d/dt ln(1+e⁻ᵗ) = −σ(−t).
        let sx = (&self.x_data * &z.x).map(|t| sigmoid(-t) / m1);
        let sy = (&self.y_data * &z.y).map(|t| sigmoid(-t) / m2);
        GradientPair {
            gx: &z.x + &self.coupling * &z.y - self.x_data.transpose() * sx,
            gy: self.coupling.transpose() * &z.x - &z.y + self.y_data.transpose() * sy,
        }
    }

    fn hessian(&self, z: &SaddlePoint<T>) -> HessianBlocks<T> {
        self.check_dims(z);
        let (n, m) = self.dims();
        let m1 = conv::<T>(self.x_data.nrows() as f64);
        let m2 = conv::<T>(self.y_data.nrows() as f64);
        // d²/dt² ln(1+e⁻ᵗ) = σ(t)σ(−t).
        let hxx = weighted_gram(&self.x_data, &z.x, m1) + DMatrix::identity(n, n);
        let hyy = -(weighted_gram(&self.y_data, &z.y, m2) + DMatrix::identity(m, m));
        HessianBlocks { hxx, hxy: self.coupling.clone(), hyy }
    }

    fn constants(&self) -> ProblemConstants<T> {
        self.constants
    }
}

/// `Dᵀ diag(σ(tᵢ)σ(−tᵢ)/count) D` for `t = D·v`, symmetrized against gemm
/// rounding.
fn weighted_gram<T: Scalar>(data: &DMatrix<T>, v: &DVector<T>, count: T) -> DMatrix<T> {
    let t = data * v;
    let mut scaled = data.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        let w = sigmoid(t[i]) * sigmoid(-t[i]) / count;
        row *= w;
    }
    let g = data.transpose() * scaled;
    let gt = g.transpose();
    (g + gt) * conv::<T>(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn softplus_is_overflow_safe_and_accurate() {
        assert!(softplus(1000.0f64).is_finite());
        assert!(softplus(-1000.0f64).is_finite());
        assert_relative_eq!(softplus(0.0f64), 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(softplus(3.0f64), (1.0 + 3f64.exp()).ln(), max_relative = 1e-15);
        // For very negative s, ln(1+eˢ) ≈ eˢ.
        assert_relative_eq!(softplus(-40.0f64), (-40f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn sigmoid_matches_naive_in_safe_range() {
        for &t in &[-30.0, -2.0, 0.0, 0.5, 10.0] {
            assert_relative_eq!(sigmoid(t), 1.0 / (1.0 + (-t as f64).exp()), max_relative = 1e-15);
        }
        assert!(sigmoid(-1000.0f64) >= 0.0);
        assert!(sigmoid(1000.0f64) <= 1.0);
    }

    #[test]
    fn zero_data_rows_give_identity_curvature() {
        // aᵢ = 0 makes the loss constant: Hxx = I.
        let p = LogisticSaddle::<f64>::new(
            DMatrix::zeros(3, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let h = p.hessian(&SaddlePoint::zeros(2, 2));
        assert_eq!(h.hxx, DMatrix::identity(2, 2));
        assert_eq!(h.hyy, -DMatrix::identity(2, 2));
        assert_eq!(p.constants().lip_hess, 0.0);
    }

    #[test]
    fn single_sample_gradient_at_origin() {
        // M₁ = 1, a₁ = (1), A = 0: ∇ₓf(0) = −σ(0)·a₁ = −½.
        let p = LogisticSaddle::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let g = p.gradient(&SaddlePoint::zeros(1, 1));
        assert_relative_eq!(g.gx[0], -0.5, max_relative = 1e-15);
        assert_eq!(g.gy[0], 0.0);
    }

    #[test]
    fn value_gradient_hessian_chain_consistency() {
        let p = LogisticSaddle::<f64>::generate(3, 2, 10, 8, 21);
        let z = SaddlePoint::new(dvector![0.3, -0.2, 0.5], dvector![-0.1, 0.4]).unwrap();
        let g = p.gradient(&z);
        let h = 1e-6;
        for i in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp.x[i] += h;
            zm.x[i] -= h;
            let fd = (p.value(&zp) - p.value(&zm)) / (2.0 * h);
            assert_relative_eq!(fd, g.gx[i], max_relative = 1e-6, epsilon = 1e-10);
        }
        let hess = p.hessian(&z);
        for j in 0..2 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp.y[j] += h;
            zm.y[j] -= h;
            let gp = p.gradient(&zp);
            let gm = p.gradient(&zm);
            for r in 0..2 {
                let fd = (gp.gy[r] - gm.gy[r]) / (2.0 * h);
                assert_relative_eq!(fd, hess.hyy[(r, j)], max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn declared_bounds_dominate_sampled_lipschitz_ratios() {
        let p = LogisticSaddle::<f64>::generate(4, 3, 20, 15, 33);
        let c = p.constants();
        let mut rng = crate::sampling::rng_from_seed(99);
        for _ in 0..25 {
            let z1 = SaddlePoint::new(
                crate::sampling::standard_normal_vector(&mut rng, 4),
                crate::sampling::standard_normal_vector(&mut rng, 3),
            )
            .unwrap();
            let z2 = SaddlePoint::new(
                crate::sampling::standard_normal_vector(&mut rng, 4),
                crate::sampling::standard_normal_vector(&mut rng, 3),
            )
            .unwrap();
            let dz = z1.distance(&z2);
            let df = (p.operator(&z1) - p.operator(&z2)).norm();
            assert!(df <= (c.lip_grad + 1e-8) * dz, "operator Lipschitz bound violated");
            let dj = p.operator_jacobian(&z1) - p.operator_jacobian(&z2);
            let spec_norm = dj.svd(false, false).singular_values[0];
            assert!(spec_norm <= (c.lip_hess + 1e-8) * dz, "Jacobian Lipschitz bound violated");
        }
    }

    #[test]
    fn modulus_is_exactly_one() {
        let p = LogisticSaddle::<f64>::generate(3, 3, 12, 12, 5);
        assert_eq!(p.constants().mu, 1.0);
        // Strong monotonicity of F with modulus 1, sampled.
        let mut rng = crate::sampling::rng_from_seed(7);
        for _ in 0..10 {
            let z1 = SaddlePoint::new(
                crate::sampling::standard_normal_vector(&mut rng, 3),
                crate::sampling::standard_normal_vector(&mut rng, 3),
            )
            .unwrap();
            let z2 = SaddlePoint::new(
                crate::sampling::standard_normal_vector(&mut rng, 3),
                crate::sampling::standard_normal_vector(&mut rng, 3),
            )
            .unwrap();
            let df = p.operator(&z1) - p.operator(&z2);
            let dz = z1.stacked() - z2.stacked();
            assert!(df.dot(&dz) >= dz.norm_squared() * (1.0 - 1e-9));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = LogisticSaddle::<f64>::generate(3, 2, 5, 4, 77);
        let b = LogisticSaddle::<f64>::generate(3, 2, 5, 4, 77);
        assert_eq!(a.x_data(), b.x_data());
        assert_eq!(a.coupling(), b.coupling());
    }
}
