//! Steady states and local turnpike rates for smooth nonlinear models
//! `ẏ = Ay + f(y, u)` with running cost `f⁰(y, u)`.
//!
//! The Hamiltonian is `H(y, λ, u) = ⟨λ, f(y, u)⟩ − f⁰(y, u)`. Eliminating the
//! control from the linearized optimality system gives the saddle operator
//! `[[𝒜, W], [𝒞*𝒞, −𝒜ᵀ]]` with
//!
//! * `𝒜 = A + f_y − f_u H_uu⁻¹ H_uy`
//! * `W = −f_u H_uu⁻¹ f_uᵀ` (positive semidefinite under the Legendre condition)
//! * `𝒞*𝒞 = H_yu H_uu⁻¹ H_uy − H_yy`
//!
//! whose Riccati equation `𝒜ᵀ𝒫 + 𝒫𝒜 − 𝒫W𝒫 + 𝒞*𝒞 = 0` yields the local rate.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Result, TurnpikeError};
use crate::linalg::{eigenvalues, psd_factor, sym_eigenvalues, symmetrize};
use crate::riccati::{check_detectability, check_stabilizability, solve_care_gram, RiccatiSolution};
use crate::steady::SteadyTriple;
use crate::zoo::{dirichlet_laplacian, grid_nodes, LqProblem};

/// Central-difference step `ε^{1/3}(1 + |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        cols.push((f(&xp) - f(&xm)) / (2.0 * h));
    }
    if cols.is_empty() {
        return DMatrix::zeros(f(x).len(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let h = fd_step(x[j]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Second derivatives of `H` in `(y, u)` at a point.
#[derive(Debug, Clone)]
pub struct HamiltonianHessian {
    pub h_yy: DMatrix<f64>,
    pub h_yu: DMatrix<f64>,
    pub h_uu: DMatrix<f64>,
}

/// A control-affine-or-not smooth model. Only `f` and `f0` are required;
/// every derivative falls back to central finite differences.
///
/// Implementations must be callable concurrently with distinct arguments.
pub trait NonlinearModel {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    /// Linear part `A`.
    fn a(&self) -> DMatrix<f64>;
    fn f(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn f0(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64;

    fn f_y(&self, y: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(|yy| self.f(yy, u), y)
    }

    fn f_u(&self, y: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(|uu| self.f(y, uu), u)
    }

    fn f0_y(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        fd_gradient(|yy| self.f0(yy, u), y)
    }

    fn f0_u(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        fd_gradient(|uu| self.f0(y, uu), u)
    }

    /// Defaults to central differences of [`hamiltonian_gradient`].
    fn hamiltonian_hessian(&self, y: &DVector<f64>, u: &DVector<f64>, lambda: &DVector<f64>) -> HamiltonianHessian {
        fd_hamiltonian_hessian(self, y, u, lambda)
    }
}

/// `(H_y, H_u) = (f_yᵀλ − f⁰_y, f_uᵀλ − f⁰_u)`.
pub fn hamiltonian_gradient<M: NonlinearModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let h_y = model.f_y(y, u).transpose() * lambda - model.f0_y(y, u);
    let h_u = model.f_u(y, u).transpose() * lambda - model.f0_u(y, u);
    (h_y, h_u)
}

pub fn fd_hamiltonian_hessian<M: NonlinearModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> HamiltonianHessian {
    let h_yy = fd_jacobian(|yy| hamiltonian_gradient(model, yy, u, lambda).0, y);
    let h_uy = fd_jacobian(|yy| hamiltonian_gradient(model, yy, u, lambda).1, y);
    let h_uu = fd_jacobian(|uu| hamiltonian_gradient(model, y, uu, lambda).1, u);
    HamiltonianHessian {
        h_yy: symmetrize(&h_yy),
        h_yu: h_uy.transpose(),
        h_uu: symmetrize(&h_uu),
    }
}

fn check_point<M: NonlinearModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<()> {
    if y.len() != model.n() {
        return Err(dim_err("y", model.n(), y.len()));
    }
    if u.len() != model.m() {
        return Err(dim_err("u", model.m(), u.len()));
    }
    if lambda.len() != model.n() {
        return Err(dim_err("lambda", model.n(), lambda.len()));
    }
    Ok(())
}

/// Stacked steady optimality residual `(Ay + f; −Aᵀλ − H_y; H_u)`.
pub fn static_residual<M: NonlinearModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> DVector<f64> {
    let (n, m) = (model.n(), model.m());
    let a = model.a();
    let (h_y, h_u) = hamiltonian_gradient(model, y, u, lambda);
    let mut r = DVector::zeros(2 * n + m);
    r.rows_mut(0, n).copy_from(&(&a * y + model.f(y, u)));
    r.rows_mut(n, n).copy_from(&(-(a.transpose() * lambda) - h_y));
    r.rows_mut(2 * n, m).copy_from(&h_u);
    r
}

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_MAX_HALVINGS: usize = 30;

/// Damped Newton iteration on [`static_residual`], starting from `(y, u, λ)`.
pub fn solve_static_nonlinear<M: NonlinearModel + ?Sized>(
    model: &M,
    y: DVector<f64>,
    u: DVector<f64>,
    lambda: DVector<f64>,
) -> Result<SteadyTriple> {
    check_point(model, &y, &u, &lambda)?;
    let (n, m) = (model.n(), model.m());
    let a = model.a();
    let (mut y, mut u, mut lambda) = (y, u, lambda);
    let mut r = static_residual(model, &y, &u, &lambda);
    for _ in 0..NEWTON_MAX_ITER {
        let norm = r.norm();
        if norm <= NEWTON_TOL {
            return Ok(SteadyTriple {
                y_s: y,
                u_s: u,
                lambda_s: lambda,
                residual_norm: norm,
            });
        }
        let fy = model.f_y(&y, &u);
        let fu = model.f_u(&y, &u);
        let hess = model.hamiltonian_hessian(&y, &u, &lambda);
        let a_full = &a + &fy;
        let mut jac = DMatrix::zeros(2 * n + m, 2 * n + m);
        // unknown order (y, λ, u), matching the residual blocks
        jac.view_mut((0, 0), (n, n)).copy_from(&a_full);
        jac.view_mut((0, 2 * n), (n, m)).copy_from(&fu);
        jac.view_mut((n, 0), (n, n)).copy_from(&(-&hess.h_yy));
        jac.view_mut((n, n), (n, n)).copy_from(&(-a_full.transpose()));
        jac.view_mut((n, 2 * n), (n, m)).copy_from(&(-&hess.h_yu));
        jac.view_mut((2 * n, 0), (m, n)).copy_from(&hess.h_yu.transpose());
        jac.view_mut((2 * n, n), (m, n)).copy_from(&fu.transpose());
        jac.view_mut((2 * n, 2 * n), (m, m)).copy_from(&hess.h_uu);
        let step = jac
            .lu()
            .solve(&(-&r))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(TurnpikeError::SingularJacobian)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let ty = &y + step.rows(0, n) * alpha;
            let tl = &lambda + step.rows(n, n) * alpha;
            let tu = &u + step.rows(2 * n, m) * alpha;
            let tr = static_residual(model, &ty, &tu, &tl);
            if tr.norm() < norm {
                (y, lambda, u, r) = (ty, tl, tu, tr);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(TurnpikeError::NoConvergence {
                what: "nonlinear steady state (damping exhausted)",
                iterations: NEWTON_MAX_ITER,
                residual: norm,
            });
        }
    }
    let norm = r.norm();
    if norm <= NEWTON_TOL {
        return Ok(SteadyTriple {
            y_s: y,
            u_s: u,
            lambda_s: lambda,
            residual_norm: norm,
        });
    }
    Err(TurnpikeError::NoConvergence {
        what: "nonlinear steady state",
        iterations: NEWTON_MAX_ITER,
        residual: norm,
    })
}

/// Linearized saddle operators at a steady triple.
#[derive(Debug, Clone)]
pub struct SaddleLinearization {
    pub cal_a: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub ctc: DMatrix<f64>,
    /// Symmetric factor with `𝒞ᵀ𝒞 = 𝒞*𝒞`.
    pub cal_c: DMatrix<f64>,
    /// `H_λu = f_u`
    pub h_lambda_u: DMatrix<f64>,
    pub h_uu: DMatrix<f64>,
    /// Populated when the stabilizability and detectability checks pass.
    pub local_rate: Option<f64>,
}

pub fn linearize<M: NonlinearModel + ?Sized>(model: &M, triple: &SteadyTriple) -> Result<SaddleLinearization> {
    let (y, u, lambda) = (&triple.y_s, &triple.u_s, &triple.lambda_s);
    check_point(model, y, u, lambda)?;
    let hess = model.hamiltonian_hessian(y, u, lambda);
    let neg_uu = symmetrize(&(-&hess.h_uu));
    let min_eig = sym_eigenvalues(&neg_uu).into_iter().fold(f64::INFINITY, f64::min);
    if model.m() > 0 && !(min_eig > 1e-10) {
        return Err(TurnpikeError::LegendreViolation { min_eig });
    }
    let chol = nalgebra::Cholesky::new(neg_uu).ok_or(TurnpikeError::LegendreViolation { min_eig })?;
    let fu = model.f_u(y, u);
    let h_uy = hess.h_yu.transpose();
    // (−H_uu)⁻¹ applied to H_uy and f_uᵀ
    let k_y = chol.solve(&h_uy);
    let k_l = chol.solve(&fu.transpose());
    let cal_a = model.a() + model.f_y(y, u) + &fu * &k_y;
    let w = symmetrize(&(&fu * &k_l));
    let ctc = symmetrize(&(-(&hess.h_yu * &k_y) - &hess.h_yy));
    let clip = 1e-10 * (1.0 + ctc.norm());
    let cal_c = psd_factor(&ctc, clip).map_err(|min_eig| TurnpikeError::IndefiniteCtC { min_eig })?;
    let mut lin = SaddleLinearization {
        cal_a,
        w,
        ctc,
        cal_c,
        h_lambda_u: fu,
        h_uu: hess.h_uu,
        local_rate: None,
    };
    lin.local_rate = local_turnpike_rate(&lin).ok();
    Ok(lin)
}

/// Stabilizing solution of `𝒜ᵀ𝒫 + 𝒫𝒜 − 𝒫W𝒫 + 𝒞*𝒞 = 0`, after checking
/// `(𝒜, H_λu)` stabilizable and `(𝒜, 𝒞)` detectable.
pub fn saddle_riccati(lin: &SaddleLinearization) -> Result<RiccatiSolution> {
    let stab = check_stabilizability(&lin.cal_a, &lin.h_lambda_u)?;
    if !stab.verdict {
        let l = stab.offending_eigenvalue.unwrap_or_default();
        return Err(TurnpikeError::NotStabilizable { re: l.re, im: l.im });
    }
    let det = check_detectability(&lin.cal_a, &lin.cal_c)?;
    if !det.verdict {
        let l = det.offending_eigenvalue.unwrap_or_default();
        return Err(TurnpikeError::NotDetectable { re: l.re, im: l.im });
    }
    solve_care_gram(&lin.cal_a, &lin.w, &lin.ctc)
}

/// `ν = −max Re λ(𝒜 − W𝒫)`.
pub fn local_turnpike_rate(lin: &SaddleLinearization) -> Result<f64> {
    Ok(saddle_riccati(lin)?.nu)
}

/// `[[𝒜, W], [𝒞*𝒞, −𝒜ᵀ]]`
pub fn saddle_matrix(lin: &SaddleLinearization) -> DMatrix<f64> {
    crate::linalg::block2(&lin.cal_a, &lin.w, &lin.ctc, &(-lin.cal_a.transpose()))
}

/// Largest distance between an eigenvalue `μ` of the saddle matrix and its
/// greedily matched partner among the reflected eigenvalues `−conj(μ)`.
pub fn spectral_symmetry_defect(lin: &SaddleLinearization) -> Result<f64> {
    let eig = eigenvalues(&saddle_matrix(lin))?;
    let mut pool: Vec<_> = eig.iter().map(|l| -l.conj()).collect();
    let mut worst: f64 = 0.0;
    for l in &eig {
        let (idx, dist) = pool
            .iter()
            .enumerate()
            .map(|(i, r)| (i, (l - r).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("as many partners as eigenvalues");
        worst = worst.max(dist);
        pool.swap_remove(idx);
    }
    Ok(worst)
}

/// Relative discrepancies between a model's derivatives and central
/// differences, each measured as `‖analytic − fd‖_F / max(1, ‖fd‖_F)`.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeCheck {
    /// `f_y`, `f_u`, `f⁰_y`, `f⁰_u` against differences of `f`, `f⁰`.
    pub first_order: f64,
    /// Hessian blocks of `H` against differences of the first derivatives.
    pub second_order: f64,
}

pub fn check_derivatives<M: NonlinearModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<DerivativeCheck> {
    check_point(model, y, u, lambda)?;
    let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).norm() / b.norm().max(1.0);
    let col = |v: DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let first = [
        rel(&model.f_y(y, u), &fd_jacobian(|yy| model.f(yy, u), y)),
        rel(&model.f_u(y, u), &fd_jacobian(|uu| model.f(y, uu), u)),
        rel(&col(model.f0_y(y, u)), &col(fd_gradient(|yy| model.f0(yy, u), y))),
        rel(&col(model.f0_u(y, u)), &col(fd_gradient(|uu| model.f0(y, uu), u))),
    ];
    let analytic = model.hamiltonian_hessian(y, u, lambda);
    let fd = fd_hamiltonian_hessian(model, y, u, lambda);
    let second = [
        rel(&analytic.h_yy, &fd.h_yy),
        rel(&analytic.h_yu, &fd.h_yu),
        rel(&analytic.h_uu, &fd.h_uu),
    ];
    Ok(DerivativeCheck {
        first_order: first.into_iter().fold(0.0, f64::max),
        second_order: second.into_iter().fold(0.0, f64::max),
    })
}

/// An LQ problem with constant targets viewed as a nonlinear model:
/// `f = Bu`, `f⁰ = ½‖C(y − y_d)‖² + ½(u − u_d)ᵀQ(u − u_d)`.
#[derive(Debug, Clone)]
pub struct LqModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub y_d: DVector<f64>,
    pub u_d: DVector<f64>,
}

impl LqModel {
    /// Uses the targets at `t = 0`; errors when they are not constant.
    pub fn from_problem(prob: &LqProblem) -> Result<Self> {
        if !prob.has_constant_targets() {
            return Err(TurnpikeError::Validation {
                field: "y_d/u_d".into(),
                reason: "nonlinear steady analysis needs constant targets".into(),
            });
        }
        Ok(LqModel {
            a: prob.a.clone(),
            b: prob.b.clone(),
            c: prob.c.clone(),
            q: prob.q.clone(),
            y_d: prob.y_d_at(0.0),
            u_d: prob.u_d_at(0.0),
        })
    }
}

impl NonlinearModel for LqModel {
    fn n(&self) -> usize {
        self.a.nrows()
    }
    fn m(&self) -> usize {
        self.b.ncols()
    }
    fn a(&self) -> DMatrix<f64> {
        self.a.clone()
    }
    fn f(&self, _y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.b * u
    }
    fn f0(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let e = &self.c * (y - &self.y_d);
        let du = u - &self.u_d;
        0.5 * e.norm_squared() + 0.5 * du.dot(&(&self.q * &du))
    }
    fn f_y(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.n(), self.n())
    }
    fn f_u(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
    fn f0_y(&self, y: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        self.c.transpose() * (&self.c * (y - &self.y_d))
    }
    fn f0_u(&self, _y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.q * (u - &self.u_d)
    }
    fn hamiltonian_hessian(&self, _y: &DVector<f64>, _u: &DVector<f64>, _l: &DVector<f64>) -> HamiltonianHessian {
        HamiltonianHessian {
            h_yy: -(self.c.transpose() * &self.c),
            h_yu: DMatrix::zeros(self.n(), self.m()),
            h_uu: -self.q.clone(),
        }
    }
}

/// `ẏ = −y − y³ + u`, `f⁰ = ½(y − y_d)² + ½u²`.
#[derive(Debug, Clone, Copy)]
pub struct CubicScalar {
    pub y_d: f64,
}

impl NonlinearModel for CubicScalar {
    fn n(&self) -> usize {
        1
    }
    fn m(&self) -> usize {
        1
    }
    fn a(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0)
    }
    fn f(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, -y[0].powi(3) + u[0])
    }
    fn f0(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * (y[0] - self.y_d).powi(2) + 0.5 * u[0] * u[0]
    }
    fn f_y(&self, y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -3.0 * y[0] * y[0])
    }
    fn f_u(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }
    fn f0_y(&self, y: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, y[0] - self.y_d)
    }
    fn f0_u(&self, _y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, u[0])
    }
    fn hamiltonian_hessian(&self, y: &DVector<f64>, _u: &DVector<f64>, l: &DVector<f64>) -> HamiltonianHessian {
        HamiltonianHessian {
            h_yy: DMatrix::from_element(1, 1, -6.0 * y[0] * l[0] - 1.0),
            h_yu: DMatrix::zeros(1, 1),
            h_uu: DMatrix::from_element(1, 1, -1.0),
        }
    }
}

/// Semilinear heat equation `y_t = y_xx − y³ + χ_ω u` on `n` interior nodes
/// of (0, 1), with cost `½∫|y − y_d|² + ½∫_ω|u|²`. First derivatives are
/// analytic; second derivatives use the finite-difference fallback.
#[derive(Debug, Clone)]
pub struct CubicHeat {
    pub lap: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub y_d: DVector<f64>,
    h: f64,
}

impl CubicHeat {
    pub fn new(n: usize, omega: RangeInclusive<usize>, target: impl Fn(f64) -> f64) -> Result<Self> {
        let mut prob = crate::zoo::heat_1d(n, &vec![0.0; n], 1..=n, omega)?;
        let b = std::mem::replace(&mut prob.b, DMatrix::zeros(0, 0));
        let y_d = DVector::from_iterator(n, grid_nodes(n).into_iter().map(target));
        Ok(CubicHeat {
            lap: dirichlet_laplacian(n),
            b,
            y_d,
            h: 1.0 / (n as f64 + 1.0),
        })
    }
}

impl NonlinearModel for CubicHeat {
    fn n(&self) -> usize {
        self.lap.nrows()
    }
    fn m(&self) -> usize {
        self.b.ncols()
    }
    fn a(&self) -> DMatrix<f64> {
        self.lap.clone()
    }
    fn f(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        -y.map(|v| v * v * v) + &self.b * u
    }
    fn f0(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * self.h * (y - &self.y_d).norm_squared() + 0.5 * u.norm_squared()
    }
    fn f_y(&self, y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&y.map(|v| -3.0 * v * v))
    }
    fn f_u(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
    fn f0_y(&self, y: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        (y - &self.y_d) * self.h
    }
    fn f0_u(&self, _y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn zero_guess<M: NonlinearModel>(m: &M) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (DVector::zeros(m.n()), DVector::zeros(m.m()), DVector::zeros(m.n()))
    }

    #[test]
    fn lq_model_reproduces_static_triple() {
        let prob = zoo::scalar_tracking();
        let model = LqModel::from_problem(&prob).unwrap();
        let (y, u, l) = zero_guess(&model);
        let s = solve_static_nonlinear(&model, y, u, l).unwrap();
        for x in [s.y_s[0], s.u_s[0], s.lambda_s[0]] {
            assert!((x - 0.5).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn lq_linearization_is_exact() {
        let prob = zoo::double_integrator_circle().with_targets(
            crate::signal::Signal::Constant(vec![1.0, 0.0]),
            crate::signal::Signal::zeros(1),
        );
        let model = LqModel::from_problem(&prob).unwrap();
        let (y, u, l) = zero_guess(&model);
        let s = solve_static_nonlinear(&model, y, u, l).unwrap();
        let lin = linearize(&model, &s).unwrap();
        assert_eq!(lin.cal_a, prob.a);
        assert_eq!(lin.w, prob.gram().unwrap());
        assert_eq!(lin.ctc, prob.ctc());
        let nu = lin.local_rate.unwrap();
        assert!((nu - 3f64.sqrt() / 2.0).abs() < 1e-8);
    }

    #[test]
    fn cubic_scalar_matches_manifold_scan() {
        let model = CubicScalar { y_d: 0.2 };
        let (y, u, l) = zero_guess(&model);
        let s = solve_static_nonlinear(&model, y, u, l).unwrap();
        assert!(s.residual_norm <= NEWTON_TOL);
        // minimize f⁰ along the steady manifold u = y + y³
        let cost = |y: f64| 0.5 * (y - 0.2).powi(2) + 0.5 * (y + y * y * y).powi(2);
        let best = (0..=200_000)
            .map(|i| i as f64 * 1e-6 - 0.1)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        assert!((s.y_s[0] - best).abs() < 2e-6, "{} vs {best}", s.y_s[0]);
        assert!((s.u_s[0] - s.lambda_s[0]).abs() < 1e-12);
    }

    #[test]
    fn cubic_scalar_saddle_structure() {
        let model = CubicScalar { y_d: 0.2 };
        let (y, u, l) = zero_guess(&model);
        let s = solve_static_nonlinear(&model, y, u, l).unwrap();
        let lin = linearize(&model, &s).unwrap();
        let (ys, ls) = (s.y_s[0], s.lambda_s[0]);
        assert!((lin.cal_a[(0, 0)] - (-1.0 - 3.0 * ys * ys)).abs() < 1e-14);
        assert!((lin.ctc[(0, 0)] - (1.0 + 6.0 * ys * ls)).abs() < 1e-14);
        assert_eq!(lin.w[(0, 0)], 1.0);
        let nu = lin.local_rate.unwrap();
        let expected = (lin.cal_a[(0, 0)].powi(2) + lin.ctc[(0, 0)]).sqrt();
        assert!((nu - expected).abs() < 1e-8);
        let eig = crate::linalg::eigenvalues(&saddle_matrix(&lin)).unwrap();
        for e in eig {
            assert!((e.re.abs() - nu).abs() < 1e-8 && e.im.abs() < 1e-12);
        }
        assert!(spectral_symmetry_defect(&lin).unwrap() < 1e-7);
    }

    #[test]
    fn saddle_matrix_is_jacobian_of_extremal_flow() {
        // u eliminated through H_u = 0, i.e. u = λ
        let model = CubicScalar { y_d: 0.2 };
        let (y, u, l) = zero_guess(&model);
        let s = solve_static_nonlinear(&model, y, u, l).unwrap();
        let lin = linearize(&model, &s).unwrap();
        let flow = |x: &DVector<f64>| {
            let (y, l) = (x[0], x[1]);
            v(&[-y - y.powi(3) + l, (y - 0.2) + l + 3.0 * y * y * l])
        };
        let jac = fd_jacobian(flow, &v(&[s.y_s[0], s.lambda_s[0]]));
        assert!((jac - saddle_matrix(&lin)).norm() < 1e-8);
    }

    #[test]
    fn derivatives_cross_validate() {
        let model = CubicScalar { y_d: 0.2 };
        let c = check_derivatives(&model, &v(&[0.7]), &v(&[-0.3]), &v(&[1.1])).unwrap();
        assert!(c.first_order < 1e-5 && c.second_order < 1e-4, "{c:?}");
        let heat = CubicHeat::new(8, 3..=6, |x| 0.1 * (std::f64::consts::PI * x).sin()).unwrap();
        let y = DVector::from_fn(8, |i, _| 0.1 * i as f64);
        let c = check_derivatives(&heat, &y, &DVector::from_element(4, 0.2), &DVector::from_element(8, -0.5)).unwrap();
        assert!(c.first_order < 1e-5, "{c:?}");
    }

    #[test]
    fn cubic_heat_converges_from_zero() {
        let heat = CubicHeat::new(8, 3..=6, |x| 0.1 * (std::f64::consts::PI * x).sin()).unwrap();
        let (y, u, l) = zero_guess(&heat);
        let s = solve_static_nonlinear(&heat, y, u, l).unwrap();
        assert!(s.residual_norm <= NEWTON_TOL);
        let lin = linearize(&heat, &s).unwrap();
        assert!(lin.local_rate.unwrap() > 0.0);
        assert!(spectral_symmetry_defect(&lin).unwrap() < 1e-7);
    }

    #[test]
    fn legendre_violation_is_reported() {
        struct Concave;
        impl NonlinearModel for Concave {
            fn n(&self) -> usize {
                1
            }
            fn m(&self) -> usize {
                1
            }
            fn a(&self) -> DMatrix<f64> {
                DMatrix::from_element(1, 1, -1.0)
            }
            fn f(&self, _y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
                u.clone()
            }
            fn f0(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
                0.5 * y[0] * y[0] - 0.5 * u[0] * u[0]
            }
        }
        let s = SteadyTriple {
            y_s: v(&[0.0]),
            u_s: v(&[0.0]),
            lambda_s: v(&[0.0]),
            residual_norm: 0.0,
        };
        assert!(matches!(linearize(&Concave, &s), Err(TurnpikeError::LegendreViolation { .. })));
    }

    #[test]
    fn zero_observation_with_hurwitz_a() {
        // f⁰ = ½u² only: 𝒞 = 0 and ν = |spectral abscissa of 𝒜|
        let model = LqModel {
            a: DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -3.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::zeros(1, 2),
            q: DMatrix::identity(1, 1),
            y_d: DVector::zeros(2),
            u_d: DVector::zeros(1),
        };
        let s = SteadyTriple {
            y_s: DVector::zeros(2),
            u_s: DVector::zeros(1),
            lambda_s: DVector::zeros(2),
            residual_norm: 0.0,
        };
        let lin = linearize(&model, &s).unwrap();
        assert!((lin.local_rate.unwrap() - 1.0).abs() < 1e-10);
    }
}
