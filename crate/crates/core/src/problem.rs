//! Smooth saddle point problems `min_x max_y f(x, y)` and their derived
//! quantities.
//!
//! A problem exposes value / gradient / Hessian-block oracles through the
//! [`SaddleProblem`] trait. Everything the solvers consume is derived from
//! those three oracles:
//!
//! * the operator `F(z) = (∇ₓf(z); −∇ᵧf(z))`, whose zeros are the saddle
//!   points,
//! * its Jacobian `∇F(z) = [[Hxx, Hxy], [−Hxyᵀ, −Hyy]]` (nonsymmetric:
//!   symmetric positive part plus skew coupling),
//! * the merit function `m(z) = ½‖F(z)‖²` and its gradient `∇F(z)ᵀ F(z)`.
//!
//! Dimension mismatches between a point and a problem are contract
//! violations and panic; numerical-domain failures (non-finite entries,
//! indefinite blocks, missing strong convexity) are reported as
//! [`ProblemError`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{conv, Scalar};

/// Errors from problem construction, validation, and constant estimation.
#[derive(Debug, Error)]
pub enum ProblemError {
    /// A supplied vector or matrix contains NaN or infinite entries.
    #[error("non-finite entry in {place}")]
    NonFinite { place: &'static str },

    /// A matrix that must be symmetric is not (beyond rounding).
    #[error("matrix {name} is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { name: &'static str, max_asymmetry: f64 },

    /// A diagonal block fails positive semidefiniteness.
    #[error("matrix {name} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { name: &'static str, min_eigenvalue: f64 },

    /// The strong convexity-concavity modulus is zero, so merit-driven
    /// stepping has no certificate. Regularize the problem and use the
    /// homotopy solver instead.
    #[error(
        "strong modulus mu is zero: the problem is only convex-concave; \
         wrap it with the homotopy solver (nu-regularization) instead of \
         calling the merit-driven solver directly"
    )]
    ZeroModulus,

    /// Declared constants are inconsistent (e.g. L < mu or negative values).
    #[error("invalid problem constants: {reason}")]
    InvalidConstants { reason: String },

    /// Data matrices with incompatible shapes were supplied to a constructor.
    #[error("inconsistent dimensions in {place}: {detail}")]
    InconsistentDimensions { place: &'static str, detail: String },
}

/// A primal-dual point `z = (x, y)`, also used for displacements in the same
/// product space.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint<T: Scalar> {
    pub x: DVector<T>,
    pub y: DVector<T>,
}

impl<T: Scalar> SaddlePoint<T> {
    /// Builds a point, rejecting non-finite entries.
    pub fn new(x: DVector<T>, y: DVector<T>) -> Result<Self, ProblemError> {
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(ProblemError::NonFinite { place: "saddle point" });
        }
        Ok(Self { x, y })
    }

    /// The origin of the product space with block sizes `n` and `m`.
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: DVector::zeros(n), y: DVector::zeros(m) }
    }

    /// Block sizes `(n, m)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// Both blocks stacked into a single vector `[x; y]`.
    pub fn stacked(&self) -> DVector<T> {
        let (n, m) = self.dims();
        DVector::from_fn(n + m, |i, _| if i < n { self.x[i] } else { self.y[i - n] })
    }

    /// Splits a stacked vector back into blocks of sizes `n` and `m`.
    pub fn from_stacked(n: usize, m: usize, z: &DVector<T>) -> Self {
        assert_eq!(z.len(), n + m, "stacked vector length must be n + m");
        Self { x: z.rows(0, n).into_owned(), y: z.rows(n, m).into_owned() }
    }

    /// Euclidean norm of the stacked point.
    pub fn norm(&self) -> T {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    /// `self + s * d`, blockwise.
    pub fn add_scaled(&self, s: T, d: &Self) -> Self {
        assert_eq!(self.dims(), d.dims(), "displacement dimensions must match the point");
        Self { x: &self.x + &d.x * s, y: &self.y + &d.y * s }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.dims(), other.dims(), "points must share dimensions");
        ((&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()).sqrt()
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }
}

/// The pair `(∇ₓf, ∇ᵧf)` at a point. Note the sign convention: these are the
/// raw partial gradients; the operator negates the `y` block.
#[derive(Debug, Clone)]
pub struct GradientPair<T: Scalar> {
    pub gx: DVector<T>,
    pub gy: DVector<T>,
}

impl<T: Scalar> GradientPair<T> {
    /// Norm of the stacked raw gradient, which equals `‖F(z)‖`.
    pub fn operator_norm(&self) -> T {
        (self.gx.norm_squared() + self.gy.norm_squared()).sqrt()
    }
}

/// The three independent Hessian blocks at a point:
/// `Hxx = ∇²ₓₓf`, `Hxy = ∇²ₓᵧf`, `Hyy = ∇²ᵧᵧf`.
///
/// For a convex-concave `f`, `Hxx ⪰ 0` and `Hyy ⪯ 0`.
#[derive(Debug, Clone)]
pub struct HessianBlocks<T: Scalar> {
    pub hxx: DMatrix<T>,
    pub hxy: DMatrix<T>,
    pub hyy: DMatrix<T>,
}

/// Regularity constants a problem declares about itself.
///
/// All of them are (upper/lower) bounds, not necessarily tight: `mu` is a
/// lower bound on the strong convexity-concavity modulus, `lip_grad` an upper
/// bound on the gradient Lipschitz constant L (equivalently `sup‖∇F‖`), and
/// `lip_hess` an upper bound on the Hessian Lipschitz constant L₂ of `∇F`.
/// Replacing a constant by a looser bound keeps every certificate in this
/// crate valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants<T: Scalar> {
    /// Strong convexity-concavity modulus μ (0 for the merely convex-concave case).
    pub mu: T,
    /// Gradient Lipschitz constant L.
    pub lip_grad: T,
    /// Hessian Lipschitz constant L₂ (0 for quadratics).
    pub lip_hess: T,
    /// Radius D of the initial merit level set around z⁰, if known or estimated.
    pub level_radius: Option<T>,
}

impl<T: Scalar> ProblemConstants<T> {
    /// Smoothness constant of the merit function,
    /// `Lm = L² + L·L₂·D`, available once `level_radius` is known.
    /// Quadratics (`L₂ = 0`) do not need the radius.
    pub fn merit_smoothness(&self) -> Option<T> {
        let l = self.lip_grad;
        if self.lip_hess == T::zero() {
            Some(l * l)
        } else {
            self.level_radius.map(|d| l * l + l * self.lip_hess * d)
        }
    }

    /// Condition number κ = L/μ, defined when μ > 0.
    pub fn condition(&self) -> Option<T> {
        (self.mu > T::zero()).then(|| self.lip_grad / self.mu)
    }

    /// Checks internal consistency (finiteness, signs, L ≥ μ).
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |reason: &str| ProblemError::InvalidConstants { reason: reason.to_string() };
        if !(self.mu.is_finite() && self.lip_grad.is_finite() && self.lip_hess.is_finite()) {
            return Err(bad("non-finite constant"));
        }
        if self.mu < T::zero() {
            return Err(bad("mu < 0"));
        }
        if self.lip_hess < T::zero() {
            return Err(bad("lip_hess < 0"));
        }
        if self.lip_grad < self.mu {
            return Err(bad("lip_grad < mu (a Lipschitz bound can never undercut the modulus)"));
        }
        if let Some(d) = self.level_radius {
            if !(d.is_finite() && d >= T::zero()) {
                return Err(bad("level_radius must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// A twice-differentiable saddle point problem.
///
/// Implementations provide the three oracles plus declared constants; the
/// derived quantities (`operator`, `operator_jacobian`, `merit`,
/// `merit_gradient`) come for free. Oracles must be pure: all solvers share
/// problems immutably, including across threads.
///
/// # Panics
///
/// All methods panic when the point's dimensions do not match the problem's
/// (a contract violation, not a recoverable error).
pub trait SaddleProblem<T: Scalar> {
    /// Block sizes `(n, m)` of the primal and dual variables.
    fn dims(&self) -> (usize, usize);

    /// The objective value `f(x, y)`.
    fn value(&self, z: &SaddlePoint<T>) -> T;

    /// Raw partial gradients `(∇ₓf, ∇ᵧf)`.
    fn gradient(&self, z: &SaddlePoint<T>) -> GradientPair<T>;

    /// Hessian blocks at `z`.
    fn hessian(&self, z: &SaddlePoint<T>) -> HessianBlocks<T>;

    /// Declared regularity constants.
    fn constants(&self) -> ProblemConstants<T>;

    /// The monotone operator `F(z) = (∇ₓf; −∇ᵧf)`, stacked.
    fn operator(&self, z: &SaddlePoint<T>) -> DVector<T> {
        let (n, m) = self.check_dims(z);
        let g = self.gradient(z);
        DVector::from_fn(n + m, |i, _| if i < n { g.gx[i] } else { -g.gy[i - n] })
    }

    /// The operator Jacobian `∇F(z) = [[Hxx, Hxy], [−Hxyᵀ, −Hyy]]`.
    fn operator_jacobian(&self, z: &SaddlePoint<T>) -> DMatrix<T> {
        let (n, m) = self.check_dims(z);
        let h = self.hessian(z);
        let mut j = DMatrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&h.hxx);
        j.view_mut((0, n), (n, m)).copy_from(&h.hxy);
        j.view_mut((n, 0), (m, n)).copy_from(&(-h.hxy.transpose()));
        j.view_mut((n, n), (m, m)).copy_from(&(-&h.hyy));
        j
    }

    /// Merit function `m(z) = ½‖F(z)‖²`: nonnegative, zero exactly at saddle
    /// points.
    fn merit(&self, z: &SaddlePoint<T>) -> T {
        let g = self.gradient(z);
        conv::<T>(0.5) * (g.gx.norm_squared() + g.gy.norm_squared())
    }

    /// Merit gradient `∇m(z) = ∇F(z)ᵀ F(z)`, stacked.
    fn merit_gradient(&self, z: &SaddlePoint<T>) -> DVector<T> {
        let f = self.operator(z);
        self.operator_jacobian(z).transpose() * f
    }

    /// Asserts the point matches the problem; returns `(n, m)`.
    fn check_dims(&self, z: &SaddlePoint<T>) -> (usize, usize) {
        let dims = self.dims();
        assert_eq!(z.dims(), dims, "point dimensions must match the problem's");
        dims
    }
}

/// Blanket impl so `&P` is usable wherever a problem is expected.
impl<T: Scalar, P: SaddleProblem<T> + ?Sized> SaddleProblem<T> for &P {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn value(&self, z: &SaddlePoint<T>) -> T {
        (**self).value(z)
    }
    fn gradient(&self, z: &SaddlePoint<T>) -> GradientPair<T> {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &SaddlePoint<T>) -> HessianBlocks<T> {
        (**self).hessian(z)
    }
    fn constants(&self) -> ProblemConstants<T> {
        (**self).constants()
    }
}

/// Completes a problem's constants for a run starting at `z0`.
///
/// Declared constants are taken as-is and never overwritten; only a missing
/// level-set radius D is filled in with the bound `2‖F(z⁰)‖/μ` (valid because
/// every z with `m(z) ≤ m(z⁰)` satisfies
/// `‖z−z⁰‖ ≤ (‖F(z)‖+‖F(z⁰)‖)/μ ≤ 2‖F(z⁰)‖/μ`).
///
/// Fails with [`ProblemError::ZeroModulus`] when μ = 0: the merit-driven
/// solver has no certificate then, and the homotopy solver is the correct
/// entry point.
pub fn estimate_constants<T: Scalar, P: SaddleProblem<T>>(
    problem: &P,
    z0: &SaddlePoint<T>,
) -> Result<ProblemConstants<T>, ProblemError> {
    let mut c = problem.constants();
    c.validate()?;
    if c.mu <= T::zero() {
        return Err(ProblemError::ZeroModulus);
    }
    if c.level_radius.is_none() {
        let fnorm = problem.gradient(z0).operator_norm();
        if !fnorm.is_finite() {
            return Err(ProblemError::NonFinite { place: "operator at z0" });
        }
        c.level_radius = Some(conv::<T>(2.0) * fnorm / c.mu);
    }
    Ok(c)
}

/// Largest absolute asymmetry `max |Aij − Aji|` of a square matrix.
pub(crate) fn max_asymmetry<T: Scalar>(a: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            let d = (a[(i, j)] - a[(j, i)]).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Checks that all entries of a matrix are finite.
pub(crate) fn all_finite<T: Scalar>(a: &DMatrix<T>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Largest absolute entry of a matrix.
pub(crate) fn max_abs<T: Scalar>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticSaddle;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn bilinear_coupling() -> QuadraticSaddle<f64> {
        // f(x, y) = x² + xy − y², i.e. P = Q = [[2]], A = [[1]].
        QuadraticSaddle::new(
            DMatrix::from_row_slice(1, 1, &[2.0]),
            DMatrix::from_row_slice(1, 1, &[2.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            dvector![0.0],
            dvector![0.0],
        )
        .unwrap()
    }

    #[test]
    fn operator_of_scalar_quadratic() {
        let p = bilinear_coupling();
        let z = SaddlePoint::new(dvector![1.0], dvector![1.0]).unwrap();
        let f = p.operator(&z);
        assert_eq!(f, dvector![3.0, 1.0]);
    }

    #[test]
    fn operator_of_pure_bilinear() {
        // f(x, y) = xy: F(z) = (y, −x).
        let p = QuadraticSaddle::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            dvector![0.0],
            dvector![0.0],
        )
        .unwrap();
        let z = SaddlePoint::new(dvector![1.0], dvector![0.0]).unwrap();
        assert_eq!(p.operator(&z), dvector![0.0, -1.0]);
        let j = p.operator_jacobian(&z);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn jacobian_block_signs() {
        let p = bilinear_coupling();
        let z = SaddlePoint::zeros(1, 1);
        let j = p.operator_jacobian(&z);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 2.0]));
    }

    #[test]
    fn merit_and_merit_gradient() {
        let p = bilinear_coupling();
        let z = SaddlePoint::new(dvector![1.0], dvector![1.0]).unwrap();
        assert_relative_eq!(p.merit(&z), 5.0, max_relative = 1e-15);
        let gm = p.merit_gradient(&z);
        assert_relative_eq!(gm[0], 5.0, max_relative = 1e-14);
        assert_relative_eq!(gm[1], 5.0, max_relative = 1e-14);
    }

    #[test]
    fn merit_zero_exactly_at_saddle() {
        let p = bilinear_coupling();
        // F(z*) = 0 at the origin for homogeneous quadratics.
        let z = SaddlePoint::zeros(1, 1);
        assert_eq!(p.merit(&z), 0.0);
        assert!(p.merit_gradient(&z).norm() == 0.0);
    }

    #[test]
    fn estimate_fills_level_radius() {
        let p = bilinear_coupling();
        let z0 = SaddlePoint::new(dvector![1.0], dvector![1.0]).unwrap();
        let c = estimate_constants(&p, &z0).unwrap();
        // mu = 2, ‖F(z0)‖ = √10, so D = 2√10/2 = √10.
        assert_relative_eq!(c.mu, 2.0, max_relative = 1e-12);
        assert_relative_eq!(c.level_radius.unwrap(), 10f64.sqrt(), max_relative = 1e-12);
        // Lm for a quadratic is L² regardless of D.
        assert_relative_eq!(c.merit_smoothness().unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn estimate_rejects_zero_modulus() {
        // f(x, y) = xy − x is merely convex-concave.
        let p = QuadraticSaddle::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            dvector![1.0],
            dvector![0.0],
        )
        .unwrap();
        let err = estimate_constants(&p, &SaddlePoint::zeros(1, 1)).unwrap_err();
        assert!(matches!(err, ProblemError::ZeroModulus));
        // The message must point at the homotopy solver.
        assert!(err.to_string().contains("homotopy"));
    }

    #[test]
    fn declared_radius_is_kept() {
        let mut c = bilinear_coupling().constants();
        c.level_radius = Some(123.0);
        struct Declared(QuadraticSaddle<f64>, ProblemConstants<f64>);
        impl SaddleProblem<f64> for Declared {
            fn dims(&self) -> (usize, usize) {
                self.0.dims()
            }
            fn value(&self, z: &SaddlePoint<f64>) -> f64 {
                self.0.value(z)
            }
            fn gradient(&self, z: &SaddlePoint<f64>) -> GradientPair<f64> {
                self.0.gradient(z)
            }
            fn hessian(&self, z: &SaddlePoint<f64>) -> HessianBlocks<f64> {
                self.0.hessian(z)
            }
            fn constants(&self) -> ProblemConstants<f64> {
                self.1
            }
        }
        let p = Declared(bilinear_coupling(), c);
        let got = estimate_constants(&p, &SaddlePoint::zeros(1, 1)).unwrap();
        assert_eq!(got.level_radius, Some(123.0));
    }

    #[test]
    #[should_panic(expected = "point dimensions")]
    fn dimension_mismatch_is_contract_violation() {
        let p = bilinear_coupling();
        let z = SaddlePoint::zeros(2, 1);
        let _ = p.merit(&z);
    }

    #[test]
    fn stacking_round_trips() {
        let z = SaddlePoint::new(dvector![1.0, 2.0], dvector![3.0]).unwrap();
        let s = z.stacked();
        assert_eq!(s, dvector![1.0, 2.0, 3.0]);
        assert_eq!(SaddlePoint::from_stacked(2, 1, &s), z);
    }

    #[test]
    fn non_finite_points_are_rejected() {
        assert!(SaddlePoint::new(dvector![f64::NAN], dvector![0.0]).is_err());
        assert!(SaddlePoint::new(dvector![0.0], dvector![f64::INFINITY]).is_err());
    }
}
