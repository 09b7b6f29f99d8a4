//! The cubic-regularized local saddle model and its solver.
//!
//! One outer step of the solver needs the stationary point of
//!
//! `γ‖u‖u + Q₁u + Av = b₁`,
//! `γ‖v‖v + Q₂v − Aᵀu = b₂`,
//!
//! with `Q₁, Q₂` symmetric positive definite. Writing `w = (‖u‖, ‖v‖)`
//! reduces this to two scalar unknowns: for fixed `w` the system is linear
//! with resolvents `R₁ = (γw₁I + Q₁)⁻¹`, `R₂ = (γw₂I + Q₂)⁻¹`, eliminated
//! through the u-side reduction
//!
//! `(I + R₁AR₂Aᵀ)u = R₁(b₁ − AR₂b₂)`, `v = R₂(b₂ + Aᵀu)`,
//!
//! and `w` must satisfy the norm conditions
//! `l(w) = (‖u(w)‖² − w₁², ‖v(w)‖² − w₂²) = 0`. A damped two-variable Newton
//! iteration on `l` does the rest; its 2×2 Jacobian comes from implicit
//! differentiation of the linear system and costs three extra resolvent
//! applications per iteration.
//!
//! Resolvents are applied either by per-iteration Cholesky factorizations
//! (small problems) or through a one-time eigendecomposition of `Q₁`, `Q₂`
//! (large problems, where the shifted factorizations would be redone for
//! every `γ` trial and Newton step).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use thiserror::Error;

use crate::problem::{all_finite, max_abs, max_asymmetry, GradientPair, HessianBlocks};
use crate::scalar::{conv, to_f64, Scalar};

/// Dimension above which resolvents switch from per-iteration Cholesky to a
/// one-time eigendecomposition (unless overridden).
const SPECTRAL_DIM_THRESHOLD: usize = 64;

/// Relative symmetry tolerance accepted for the curvature blocks.
const SYMMETRY_TOL: f64 = 1e-8;

/// Errors from assembling or solving the model.
#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("curvature block {block} is not positive definite")]
    NotPositiveDefinite { block: &'static str },
    #[error("subproblem data contains non-finite entries")]
    NonFinite,
    #[error("curvature block {block} deviates from symmetry by {deviation:e}")]
    Asymmetric { block: &'static str, deviation: f64 },
    #[error("cubic weight gamma must be finite and nonnegative, got {gamma:e}")]
    InvalidGamma { gamma: f64 },
    #[error("inconsistent subproblem dimensions: {detail}")]
    InconsistentDims { detail: String },
    #[error(
        "norm-condition Newton iteration stopped at residual {residual:e} after {iterations} \
         steps (tolerance {tolerance:e})"
    )]
    NonConvergence { iterations: usize, tolerance: f64, residual: f64 },
    #[error("norm-condition Jacobian is numerically singular at w = ({w1:e}, {w2:e})")]
    SingularJacobian { w1: f64, w2: f64 },
    #[error("factorization failed in the {place}")]
    Factorization { place: &'static str },
}

/// The assembled model: curvature blocks, coupling, right-hand sides, and
/// the cubic weight.
#[derive(Debug, Clone)]
pub struct SubproblemData<T: Scalar> {
    pub q1: DMatrix<T>,
    pub q2: DMatrix<T>,
    pub coupling: DMatrix<T>,
    pub b1: DVector<T>,
    pub b2: DVector<T>,
    pub gamma: T,
}

impl<T: Scalar> SubproblemData<T> {
    /// Assembles the model at a point from its Hessian blocks and gradient:
    /// `Q₁ = ∇²ₓₓf`, `Q₂ = −∇²ᵧᵧf`, `A = ∇²ₓᵧf`, `b₁ = −∇ₓf`, `b₂ = ∇ᵧf`.
    /// Validates symmetry and positive definiteness of the curvature blocks.
    pub fn assemble(
        hessian: &HessianBlocks<T>,
        gradient: &GradientPair<T>,
        gamma: T,
    ) -> Result<Self, SubproblemError> {
        check_gamma(gamma)?;
        let q1 = hessian.hxx.clone();
        let q2 = -&hessian.hyy;
        for (block, name) in [(&q1, "Q1"), (&q2, "Q2")] {
            if !all_finite(block) {
                return Err(SubproblemError::NonFinite);
            }
            let dev = max_asymmetry(block);
            let scale = max_abs(block).max(T::one());
            if dev > conv::<T>(SYMMETRY_TOL) * scale {
                return Err(SubproblemError::Asymmetric { block: name, deviation: to_f64(dev) });
            }
            if block.clone().cholesky().is_none() {
                return Err(SubproblemError::NotPositiveDefinite { block: name });
            }
        }
        if !all_finite(&hessian.hxy) || !gradient.gx.iter().all(|v| v.is_finite())
            || !gradient.gy.iter().all(|v| v.is_finite())
        {
            return Err(SubproblemError::NonFinite);
        }
        let data = Self {
            q1,
            q2,
            coupling: hessian.hxy.clone(),
            b1: -&gradient.gx,
            b2: gradient.gy.clone(),
            gamma,
        };
        data.check_dims()?;
        Ok(data)
    }

    fn check_dims(&self) -> Result<(), SubproblemError> {
        let (n, m) = (self.coupling.nrows(), self.coupling.ncols());
        let ok = self.q1.shape() == (n, n)
            && self.q2.shape() == (m, m)
            && self.b1.len() == n
            && self.b2.len() == m
            && n > 0
            && m > 0;
        if ok {
            Ok(())
        } else {
            Err(SubproblemError::InconsistentDims {
                detail: format!(
                    "Q1 {:?}, Q2 {:?}, coupling {:?}, b1 {}, b2 {}",
                    self.q1.shape(),
                    self.q2.shape(),
                    self.coupling.shape(),
                    self.b1.len(),
                    self.b2.len()
                ),
            })
        }
    }
}

fn check_gamma<T: Scalar>(gamma: T) -> Result<(), SubproblemError> {
    if !gamma.is_finite() || gamma < T::zero() {
        return Err(SubproblemError::InvalidGamma { gamma: to_f64(gamma) });
    }
    Ok(())
}

/// Options for the norm-condition Newton iteration.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemOptions<T: Scalar> {
    /// Convergence threshold, applied to `‖l(w)‖` and to the
    /// self-consistency gaps `|‖u‖ − w₁|`, `|‖v‖ − w₂|` alike.
    pub tolerance: T,
    /// Maximum Newton updates before giving up.
    pub max_iterations: usize,
    /// Force the resolvent strategy; `None` picks by dimension.
    pub spectral: Option<bool>,
    /// Starting point for `w = (‖u‖, ‖v‖)`.
    pub initial_w: (T, T),
}

impl<T: Scalar> Default for SubproblemOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: conv(1e-5),
            max_iterations: 100,
            spectral: None,
            initial_w: (conv(0.5), conv(0.5)),
        }
    }
}

/// A solved model instance.
#[derive(Debug, Clone)]
pub struct SubproblemSolution<T: Scalar> {
    pub u: DVector<T>,
    pub v: DVector<T>,
    /// The norm pair the Newton iteration converged to.
    pub w: (T, T),
    /// Newton updates performed.
    pub iterations: usize,
    /// `‖l(w)‖` at the returned `w`.
    pub residual_l: T,
    /// Euclidean residual of the full nonlinear stationarity system at the
    /// returned `(u, v)`.
    pub residual_stationarity: T,
}

/// Solves the assembled model with `data.gamma`.
pub fn solve<T: Scalar>(
    data: &SubproblemData<T>,
    options: &SubproblemOptions<T>,
) -> Result<SubproblemSolution<T>, SubproblemError> {
    Prepared::from_data(data, options.spectral)?.solve_with_gamma(data.gamma, options)
}

/// Recovers `(u, v)` from the linearized system at a fixed norm pair `w`.
pub fn recover_uv<T: Scalar>(
    data: &SubproblemData<T>,
    w: (T, T),
) -> Result<(DVector<T>, DVector<T>), SubproblemError> {
    let prep = Prepared::from_data(data, None)?;
    let fac = prep.factor(data.gamma, clamp_w(w))?;
    fac.solve_uv()
}

/// The norm-condition residual `l(w) = (‖u(w)‖² − w₁², ‖v(w)‖² − w₂²)`.
pub fn residual_l<T: Scalar>(
    data: &SubproblemData<T>,
    w: (T, T),
) -> Result<(T, T), SubproblemError> {
    let (u, v) = recover_uv(data, w)?;
    Ok(norm_conditions(&u, &v, w))
}

/// The 2×2 Jacobian of `l` at `w`, row-major.
pub fn jacobian_l<T: Scalar>(
    data: &SubproblemData<T>,
    w: (T, T),
) -> Result<[[T; 2]; 2], SubproblemError> {
    let prep = Prepared::from_data(data, None)?;
    let w = clamp_w(w);
    let fac = prep.factor(data.gamma, w)?;
    let (u, v) = fac.solve_uv()?;
    fac.jacobian(&u, &v, w)
}

/// Euclidean residual of the nonlinear stationarity system at `(u, v)`.
pub fn stationarity_residual<T: Scalar>(
    data: &SubproblemData<T>,
    u: &DVector<T>,
    v: &DVector<T>,
) -> T {
    assert_eq!(u.len(), self_dim(&data.q1), "u has wrong dimension");
    assert_eq!(v.len(), self_dim(&data.q2), "v has wrong dimension");
    let r1 = u * (data.gamma * u.norm()) + &data.q1 * u + &data.coupling * v - &data.b1;
    let r2 = v * (data.gamma * v.norm()) + &data.q2 * v - data.coupling.transpose() * u - &data.b2;
    (r1.norm_squared() + r2.norm_squared()).sqrt()
}

fn self_dim<T: Scalar>(m: &DMatrix<T>) -> usize {
    m.nrows()
}

fn norm_conditions<T: Scalar>(u: &DVector<T>, v: &DVector<T>, w: (T, T)) -> (T, T) {
    (u.norm_squared() - w.0 * w.0, v.norm_squared() - w.1 * w.1)
}

fn l_norm<T: Scalar>(l: (T, T)) -> T {
    (l.0 * l.0 + l.1 * l.1).sqrt()
}

/// The quantity acceptance tests against the tolerance: the norm-condition
/// residual together with the self-consistency gaps `|‖u‖ − wᵢ|`.
fn acceptance_residual<T: Scalar>(u: &DVector<T>, v: &DVector<T>, w: (T, T), l: (T, T)) -> T {
    l_norm(l).max((u.norm() - w.0).abs()).max((v.norm() - w.1).abs())
}

fn clamp_w<T: Scalar>(w: (T, T)) -> (T, T) {
    (w.0.max(T::zero()), w.1.max(T::zero()))
}

/// γ-independent state reusable across cubic-weight trials: block copies
/// plus, in spectral mode, the eigendecompositions of the curvature blocks.
pub struct Prepared<T: Scalar> {
    q1: DMatrix<T>,
    q2: DMatrix<T>,
    coupling: DMatrix<T>,
    b1: DVector<T>,
    b2: DVector<T>,
    /// `(V, λ)` with `Q = V diag(λ) Vᵀ`, present in spectral mode.
    spec1: Option<(DMatrix<T>, DVector<T>)>,
    spec2: Option<(DMatrix<T>, DVector<T>)>,
}

impl<T: Scalar> Prepared<T> {
    /// Copies the blocks out of `data` (its `gamma` is ignored here; each
    /// solve passes one) and precomputes eigendecompositions when the
    /// spectral strategy is selected or auto-enabled by dimension.
    pub fn from_data(
        data: &SubproblemData<T>,
        spectral: Option<bool>,
    ) -> Result<Self, SubproblemError> {
        data.check_dims()?;
        for block in [&data.q1, &data.q2, &data.coupling] {
            if !all_finite(block) {
                return Err(SubproblemError::NonFinite);
            }
        }
        if !data.b1.iter().all(|v| v.is_finite()) || !data.b2.iter().all(|v| v.is_finite()) {
            return Err(SubproblemError::NonFinite);
        }
        let (n, m) = (data.coupling.nrows(), data.coupling.ncols());
        let use_spectral = spectral.unwrap_or(n.max(m) > SPECTRAL_DIM_THRESHOLD);
        let decompose = |q: &DMatrix<T>, name: &'static str| {
            let eig = q.clone().symmetric_eigen();
            if eig.eigenvalues.iter().any(|&lam| lam <= T::zero()) {
                return Err(SubproblemError::NotPositiveDefinite { block: name });
            }
            Ok((eig.eigenvectors, eig.eigenvalues))
        };
        let (spec1, spec2) = if use_spectral {
            (Some(decompose(&data.q1, "Q1")?), Some(decompose(&data.q2, "Q2")?))
        } else {
            (None, None)
        };
        Ok(Self {
            q1: data.q1.clone(),
            q2: data.q2.clone(),
            coupling: data.coupling.clone(),
            b1: data.b1.clone(),
            b2: data.b2.clone(),
            spec1,
            spec2,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.coupling.nrows(), self.coupling.ncols())
    }

    /// Factors the resolvents and the u-side reduction at `(gamma, w)`.
    fn factor(&self, gamma: T, w: (T, T)) -> Result<Factored<'_, T>, SubproblemError> {
        let r1 = resolvent_factor(&self.q1, self.spec1.as_ref(), gamma * w.0)?;
        let r2 = resolvent_factor(&self.q2, self.spec2.as_ref(), gamma * w.1)?;
        // Reduction matrix I + R₁AR₂Aᵀ, formed explicitly and LU-factored.
        let s2 = apply_resolvent(&r2, self.spec2.as_ref(), &self.coupling.transpose());
        let g = &self.coupling * s2;
        let mut cu = apply_resolvent(&r1, self.spec1.as_ref(), &g);
        for i in 0..cu.nrows() {
            cu[(i, i)] += T::one();
        }
        let cu = cu.lu();
        Ok(Factored { prep: self, gamma, r1, r2, cu })
    }

    /// Solves the model for one cubic weight, reusing this preparation.
    pub fn solve_with_gamma(
        &self,
        gamma: T,
        options: &SubproblemOptions<T>,
    ) -> Result<SubproblemSolution<T>, SubproblemError> {
        check_gamma(gamma)?;
        let tol = options.tolerance;
        let mut w = clamp_w(options.initial_w);
        let mut fac = self.factor(gamma, w)?;
        let (mut u, mut v) = fac.solve_uv()?;

        if gamma == T::zero() {
            // The system is already linear; (u, v) is exact and the norm
            // conditions close by definition.
            let w = (u.norm(), v.norm());
            return Ok(self.finish(u, v, w, 0, gamma));
        }

        let mut l = norm_conditions(&u, &v, w);
        let mut iterations = 0usize;
        loop {
            // Acceptance requires the residual of the norm conditions AND
            // the norm gaps themselves to close: for small norms,
            // |‖u‖ − w₁| ≈ |l₁|/(‖u‖ + w₁) can exceed ‖l‖ by orders of
            // magnitude, and downstream consumers rely on w being the
            // actual norm pair.
            if acceptance_residual(&u, &v, w, l) <= tol {
                return Ok(self.finish(u, v, w, iterations, gamma));
            }
            if iterations == options.max_iterations {
                return Err(SubproblemError::NonConvergence {
                    iterations,
                    tolerance: to_f64(tol),
                    residual: to_f64(acceptance_residual(&u, &v, w, l)),
                });
            }
            let jac = fac.jacobian(&u, &v, w)?;
            let delta = newton_direction(jac, l, w)?;

            // Damped update: halve the step while the residual fails to
            // decrease, then take the last candidate regardless so the
            // iteration can escape non-monotone stretches.
            let mut t = T::one();
            let (mut wc, mut fc, mut uc, mut vc, mut lc);
            let mut halvings = 0;
            loop {
                wc = clamp_w((w.0 - t * delta.0, w.1 - t * delta.1));
                fc = self.factor(gamma, wc)?;
                let uv = fc.solve_uv()?;
                uc = uv.0;
                vc = uv.1;
                lc = norm_conditions(&uc, &vc, wc);
                if l_norm(lc) < l_norm(l) || halvings >= 20 {
                    break;
                }
                t *= conv::<T>(0.5);
                halvings += 1;
            }
            w = wc;
            fac = fc;
            u = uc;
            v = vc;
            l = lc;
            iterations += 1;
        }
    }

    fn finish(
        &self,
        u: DVector<T>,
        v: DVector<T>,
        w: (T, T),
        iterations: usize,
        gamma: T,
    ) -> SubproblemSolution<T> {
        let l = norm_conditions(&u, &v, w);
        let data = SubproblemData {
            q1: self.q1.clone(),
            q2: self.q2.clone(),
            coupling: self.coupling.clone(),
            b1: self.b1.clone(),
            b2: self.b2.clone(),
            gamma,
        };
        let stationarity = stationarity_residual(&data, &u, &v);
        SubproblemSolution {
            u,
            v,
            w,
            iterations,
            residual_l: l_norm(l),
            residual_stationarity: stationarity,
        }
    }
}

enum ResolventFac<T: Scalar> {
    Chol(Cholesky<T, Dyn>),
    /// Reciprocal shifted eigenvalues `1/(shift + λᵢ)` in the stored basis.
    InvDiag(DVector<T>),
}

fn resolvent_factor<T: Scalar>(
    q: &DMatrix<T>,
    spec: Option<&(DMatrix<T>, DVector<T>)>,
    shift: T,
) -> Result<ResolventFac<T>, SubproblemError> {
    match spec {
        Some((_, lam)) => {
            if lam.iter().any(|&l| shift + l <= T::zero()) {
                return Err(SubproblemError::Factorization { place: "resolvent" });
            }
            Ok(ResolventFac::InvDiag(lam.map(|l| T::one() / (shift + l))))
        }
        None => {
            let mut shifted = q.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += shift;
            }
            shifted
                .cholesky()
                .map(ResolventFac::Chol)
                .ok_or(SubproblemError::Factorization { place: "resolvent" })
        }
    }
}

fn apply_resolvent<T: Scalar>(
    fac: &ResolventFac<T>,
    spec: Option<&(DMatrix<T>, DVector<T>)>,
    x: &DMatrix<T>,
) -> DMatrix<T> {
    match fac {
        ResolventFac::Chol(c) => c.solve(x),
        ResolventFac::InvDiag(d) => {
            let basis = &spec.expect("spectral factor requires stored basis").0;
            let mut y = basis.transpose() * x;
            for (i, mut row) in y.row_iter_mut().enumerate() {
                row *= d[i];
            }
            basis * y
        }
    }
}

/// Per-`(γ, w)` factorizations: both resolvents and the LU of the u-side
/// reduction matrix. Every linear solve in the Newton iteration routes
/// through these.
struct Factored<'p, T: Scalar> {
    prep: &'p Prepared<T>,
    gamma: T,
    r1: ResolventFac<T>,
    r2: ResolventFac<T>,
    cu: LU<T, Dyn, Dyn>,
}

impl<T: Scalar> Factored<'_, T> {
    fn apply_r1(&self, x: &DMatrix<T>) -> DMatrix<T> {
        apply_resolvent(&self.r1, self.prep.spec1.as_ref(), x)
    }
    fn apply_r2(&self, x: &DMatrix<T>) -> DMatrix<T> {
        apply_resolvent(&self.r2, self.prep.spec2.as_ref(), x)
    }
    fn solve_cu(&self, rhs: DMatrix<T>) -> Result<DMatrix<T>, SubproblemError> {
        self.cu.solve(&rhs).ok_or(SubproblemError::Factorization { place: "u-side reduction" })
    }

    /// Solves the linearized system at this factorization's `(γ, w)`.
    fn solve_uv(&self) -> Result<(DVector<T>, DVector<T>), SubproblemError> {
        let p = self.prep;
        let rhs = matrix_col(&p.b1) - &p.coupling * self.apply_r2(&matrix_col(&p.b2));
        let du = self.apply_r1(&rhs);
        let u = self.solve_cu(du)?;
        let v = self.apply_r2(&(matrix_col(&p.b2) + p.coupling.transpose() * &u));
        Ok((col_vector(u), col_vector(v)))
    }

    /// Jacobian of the norm conditions via implicit differentiation:
    /// `∂u/∂w₁ = −γCu⁻¹R₁u` (with `∂v/∂w₁ = R₂Aᵀ∂u/∂w₁`), and on the other
    /// axis `∂u/∂w₂ = γCu⁻¹R₁AR₂v`, `∂v/∂w₂ = R₂(−γv + Aᵀ∂u/∂w₂)`.
    fn jacobian(
        &self,
        u: &DVector<T>,
        v: &DVector<T>,
        w: (T, T),
    ) -> Result<[[T; 2]; 2], SubproblemError> {
        let p = self.prep;
        let gamma = self.gamma;
        let two = conv::<T>(2.0);

        let du_dw1 = -(self.solve_cu(self.apply_r1(&matrix_col(u)))? * gamma);
        let dv_dw1 = self.apply_r2(&(p.coupling.transpose() * &du_dw1));

        let r2v = self.apply_r2(&matrix_col(v));
        let du_dw2 = self.solve_cu(self.apply_r1(&(&p.coupling * r2v)))? * gamma;
        let dv_dw2 =
            self.apply_r2(&(p.coupling.transpose() * &du_dw2 - matrix_col(v) * gamma));

        Ok([
            [two * dot_col(u, &du_dw1) - two * w.0, two * dot_col(u, &du_dw2)],
            [two * dot_col(v, &dv_dw1), two * dot_col(v, &dv_dw2) - two * w.1],
        ])
    }
}

fn matrix_col<T: Scalar>(v: &DVector<T>) -> DMatrix<T> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn col_vector<T: Scalar>(m: DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

fn dot_col<T: Scalar>(v: &DVector<T>, col: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..v.len() {
        acc += v[i] * col[(i, 0)];
    }
    acc
}

/// Solves the 2×2 Newton system `Jδ = l`, guarding against a numerically
/// singular Jacobian.
fn newton_direction<T: Scalar>(
    jac: [[T; 2]; 2],
    l: (T, T),
    w: (T, T),
) -> Result<(T, T), SubproblemError> {
    let [[j11, j12], [j21, j22]] = jac;
    let det = j11 * j22 - j12 * j21;
    let scale = ((j11 * j22).abs() + (j12 * j21).abs()).max(conv(1e-30));
    if det.abs() <= conv::<T>(1e-14) * scale {
        return Err(SubproblemError::SingularJacobian { w1: to_f64(w.0), w2: to_f64(w.1) });
    }
    Ok(((j22 * l.0 - j12 * l.1) / det, (j11 * l.1 - j21 * l.0) / det))
}
