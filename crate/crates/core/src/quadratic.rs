//! Quadratic saddle point problems
//! `f(x, y) = ½xᵀPx − bᵀx + xᵀAy − ½yᵀQy + cᵀy`
//! with `P, Q` symmetric positive semidefinite.
//!
//! The operator is affine, `F(z) = [[P, A], [−Aᵀ, Q]]z − (b; −c)`, so the
//! constants are exact: μ = min(λmin(P), λmin(Q)), L = σmax(∇F), L₂ = 0, and
//! the (unique, when ∇F is invertible) saddle point solves
//! `[[P, A], [−Aᵀ, Q]] z = (b; c)`.

use nalgebra::{DMatrix, DVector};

use crate::problem::{
    all_finite, max_abs, max_asymmetry, GradientPair, HessianBlocks, ProblemConstants,
    ProblemError, SaddlePoint, SaddleProblem,
};
use crate::sampling::{rng_from_seed, standard_normal_matrix, standard_normal_vector};
use crate::scalar::{conv, to_f64, Scalar};

/// A validated quadratic saddle point problem.
#[derive(Debug, Clone)]
pub struct QuadraticSaddle<T: Scalar> {
    p: DMatrix<T>,
    q: DMatrix<T>,
    a: DMatrix<T>,
    b: DVector<T>,
    c: DVector<T>,
    constants: ProblemConstants<T>,
}

impl<T: Scalar> QuadraticSaddle<T> {
    /// Builds and validates the problem, computing its exact constants.
    ///
    /// `p` must be n×n symmetric PSD, `q` m×m symmetric PSD, `a` n×m, with
    /// n, m ≥ 1. Symmetry and semidefiniteness are checked up to a rounding
    /// tolerance relative to the matrix scale.
    pub fn new(
        p: DMatrix<T>,
        q: DMatrix<T>,
        a: DMatrix<T>,
        b: DVector<T>,
        c: DVector<T>,
    ) -> Result<Self, ProblemError> {
        let (n, m) = (a.nrows(), a.ncols());
        if n == 0 || m == 0 {
            return Err(ProblemError::InconsistentDimensions {
                place: "quadratic problem",
                detail: "both blocks must have dimension at least 1".into(),
            });
        }
        let shape_err = |detail: String| ProblemError::InconsistentDimensions {
            place: "quadratic problem",
            detail,
        };
        if p.shape() != (n, n) {
            return Err(shape_err(format!("P must be {n}x{n}, got {:?}", p.shape())));
        }
        if q.shape() != (m, m) {
            return Err(shape_err(format!("Q must be {m}x{m}, got {:?}", q.shape())));
        }
        if b.len() != n || c.len() != m {
            return Err(shape_err(format!(
                "b must have length {n} and c length {m}, got {} and {}",
                b.len(),
                c.len()
            )));
        }
        for mat in [&p, &q, &a] {
            if !all_finite(mat) {
                return Err(ProblemError::NonFinite { place: "quadratic matrix data" });
            }
        }
        for (mat, name) in [(&p, "P"), (&q, "Q")] {
            let scale = max_abs(mat).max(T::one());
            let asym = max_asymmetry(mat);
            if asym > conv::<T>(1e-10) * scale {
                return Err(ProblemError::NotSymmetric { name, max_asymmetry: to_f64(asym) });
            }
        }
        if !b.iter().all(|v| v.is_finite()) || !c.iter().all(|v| v.is_finite()) {
            return Err(ProblemError::NonFinite { place: "quadratic vector data" });
        }

        let min_p = min_eigenvalue_checked(&p, "P")?;
        let min_q = min_eigenvalue_checked(&q, "Q")?;
        let mu = min_p.min(min_q).max(T::zero());

        // L = σmax of the constant operator Jacobian.
        let mut jac = DMatrix::zeros(n + m, n + m);
        jac.view_mut((0, 0), (n, n)).copy_from(&p);
        jac.view_mut((0, n), (n, m)).copy_from(&a);
        jac.view_mut((n, 0), (m, n)).copy_from(&(-a.transpose()));
        jac.view_mut((n, n), (m, m)).copy_from(&q);
        let gram = jac.transpose() * &jac;
        let lip_grad = largest_eigenvalue(&gram).max(T::zero()).sqrt();

        let constants =
            ProblemConstants { mu, lip_grad, lip_hess: T::zero(), level_radius: None };
        Ok(Self { p, q, a, b, c, constants })
    }

    /// Random strongly-convex-concave instance: `P = GᵀG/n + ridge·I` (and
    /// likewise `Q`), standard-normal `A, b, c`, all drawn from `seed`.
    pub fn generate(n: usize, m: usize, seed: u64, ridge: T) -> Self {
        let mut rng = rng_from_seed(seed);
        let gp: DMatrix<T> = standard_normal_matrix(&mut rng, n, n);
        let gq: DMatrix<T> = standard_normal_matrix(&mut rng, m, m);
        let a: DMatrix<T> = standard_normal_matrix(&mut rng, n, m);
        let b: DVector<T> = standard_normal_vector(&mut rng, n);
        let c: DVector<T> = standard_normal_vector(&mut rng, m);
        let p = symmetrize(gp.transpose() * &gp / conv::<T>(n as f64))
            + DMatrix::identity(n, n) * ridge;
        let q = symmetrize(gq.transpose() * &gq / conv::<T>(m as f64))
            + DMatrix::identity(m, m) * ridge;
        Self::new(p, q, a, b, c).expect("generated quadratic is valid by construction")
    }

    /// Overrides the computed constants with declared ones (validated).
    pub fn with_constants(mut self, constants: ProblemConstants<T>) -> Result<Self, ProblemError> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    /// The stationary point, solving `[[P, A], [−Aᵀ, Q]] z = (b; c)`.
    ///
    /// `None` when the operator Jacobian is singular (then stationary points
    /// are non-unique or absent).
    pub fn saddle_point(&self) -> Option<SaddlePoint<T>> {
        let (n, m) = self.dims();
        let mut mat = DMatrix::zeros(n + m, n + m);
        mat.view_mut((0, 0), (n, n)).copy_from(&self.p);
        mat.view_mut((0, n), (n, m)).copy_from(&self.a);
        mat.view_mut((n, 0), (m, n)).copy_from(&(-self.a.transpose()));
        mat.view_mut((n, n), (m, m)).copy_from(&self.q);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&self.b);
        rhs.rows_mut(n, m).copy_from(&self.c);
        let sol = mat.lu().solve(&rhs)?;
        Some(SaddlePoint::from_stacked(n, m, &sol))
    }

    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }
    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }
    pub fn coupling(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DVector<T> {
        &self.b
    }
    pub fn c(&self) -> &DVector<T> {
        &self.c
    }
}

fn symmetrize<T: Scalar>(mut m: DMatrix<T>) -> DMatrix<T> {
    let t = m.transpose();
    m += &t;
    m * conv::<T>(0.5)
}

fn largest_eigenvalue<T: Scalar>(sym: &DMatrix<T>) -> T {
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |acc, v| acc.max(v))
}

fn min_eigenvalue_checked<T: Scalar>(
    sym: &DMatrix<T>,
    name: &'static str,
) -> Result<T, ProblemError> {
    let eig = sym.clone().symmetric_eigen();
    let mut min = eig.eigenvalues[0];
    let mut max_abs = T::zero();
    for v in eig.eigenvalues.iter() {
        min = min.min(*v);
        max_abs = max_abs.max(v.abs());
    }
    let tol = conv::<T>(1e-10) * max_abs.max(T::one());
    if min < -tol {
        return Err(ProblemError::NotPositiveSemidefinite { name, min_eigenvalue: to_f64(min) });
    }
    Ok(min)
}

impl<T: Scalar> SaddleProblem<T> for QuadraticSaddle<T> {
    fn dims(&self) -> (usize, usize) {
        (self.a.nrows(), self.a.ncols())
    }

    fn value(&self, z: &SaddlePoint<T>) -> T {
        self.check_dims(z);
        let half = conv::<T>(0.5);
        half * z.x.dot(&(&self.p * &z.x)) - self.b.dot(&z.x) + z.x.dot(&(&self.a * &z.y))
            - half * z.y.dot(&(&self.q * &z.y))
            + self.c.dot(&z.y)
    }

    fn gradient(&self, z: &SaddlePoint<T>) -> GradientPair<T> {
        self.check_dims(z);
        GradientPair {
            gx: &self.p * &z.x - &self.b + &self.a * &z.y,
            gy: self.a.transpose() * &z.x - &self.q * &z.y + &self.c,
        }
    }

    fn hessian(&self, z: &SaddlePoint<T>) -> HessianBlocks<T> {
        self.check_dims(z);
        HessianBlocks { hxx: self.p.clone(), hxy: self.a.clone(), hyy: -self.q.clone() }
    }

    fn constants(&self) -> ProblemConstants<T> {
        self.constants
    }
}
