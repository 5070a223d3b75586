//! Continuous algebraic Riccati and Lyapunov equations, plus the spectral and
//! stabilizability diagnostics the rest of the crate leans on.
//!
//! Sign conventions: the Riccati equation is
//! `AᵀP + PA − P G P + CᵀC = 0` with `G = B Q⁻¹ Bᵀ`, the closed loop is
//! `A_cl = A − G P`, and the Lyapunov equation is `A_cl E + E A_clᵀ = W`.
//! With `W = G ⪰ 0` its solution `E = −∫ S(t) G S(t)ᵀ dt` is negative
//! semidefinite.

use nalgebra::DMatrix;

use crate::error::{dim_err, Result, TurnpikeError};
use crate::linalg::{self, block2, symmetrize, ComplexSchur, C64};

/// Relative symmetry tolerance, applied as `TOL_SYM·‖X‖_F`.
pub const TOL_SYM: f64 = 1e-10;
/// Absolute semidefiniteness tolerance on eigenvalues.
pub const TOL_PSD: f64 = 1e-8;
/// Relative residual tolerance, applied as `TOL_RES·(1 + ‖P‖_F²)`.
pub const TOL_RES: f64 = 1e-9;

const NEWTON_SWEEPS: usize = 5;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub a_cl: DMatrix<f64>,
    /// Decay rate `−max Re λ(A_cl)`.
    pub nu: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub e: DMatrix<f64>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct StabilizabilityCertificate {
    pub verdict: bool,
    /// Gain `K` with `A + B K` Hurwitz when the verdict is positive.
    pub witness_gain: Option<DMatrix<f64>>,
    pub offending_eigenvalue: Option<C64>,
}

/// Gram matrix `B Q⁻¹ Bᵀ`, checking that `Q` is symmetric positive definite.
pub fn control_gram(b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = b.ncols();
    if q.shape() != (m, m) {
        return Err(dim_err("Q", format!("{m}x{m}"), format!("{}x{}", q.nrows(), q.ncols())));
    }
    if linalg::asymmetry(q) > TOL_SYM * (1.0 + q.norm()) {
        return Err(TurnpikeError::SingularQ);
    }
    let chol = nalgebra::Cholesky::new(symmetrize(q)).ok_or(TurnpikeError::SingularQ)?;
    let qinv_bt = chol.solve(&b.transpose());
    Ok(symmetrize(&(b * qinv_bt)))
}

pub fn care_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a - p * g * p + ctc).norm()
}

pub fn care_tolerance(p: &DMatrix<f64>) -> f64 {
    TOL_RES * (1.0 + p.norm_squared())
}

/// Stabilizing solution of the CARE for the LQ data `(A, B, C, Q)`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(dim_err("A", "square", format!("{}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n {
        return Err(dim_err("B rows", n, b.nrows()));
    }
    if c.ncols() != n {
        return Err(dim_err("C cols", n, c.ncols()));
    }
    let g = control_gram(b, q)?;
    if let Some(l) = hautus(a, b)? {
        return Err(TurnpikeError::NotStabilizable { re: l.re, im: l.im });
    }
    if let Some(l) = hautus(&a.transpose(), &c.transpose())? {
        return Err(TurnpikeError::NotDetectable { re: l.re, im: l.im });
    }
    solve_care_gram(a, &g, &(c.transpose() * c))
}

/// CARE `AᵀP + PA − P G P + CtC = 0` for given Gram matrices (no pre-checks).
///
/// Ordered Schur on the Hamiltonian `[[A, −G], [−CtC, −Aᵀ]]` followed by
/// Newton-Kleinman refinement.
pub fn solve_care_gram(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let p0 = schur_care(a, g, ctc)?;
    let mut best = p0.clone();
    let mut best_res = care_residual(a, g, ctc, &best);
    let mut p = p0;
    for _ in 0..NEWTON_SWEEPS {
        if best_res <= 1e-14 * (1.0 + best.norm_squared()) {
            break;
        }
        let ak = a - g * &p;
        let rhs = -(ctc + &p * g * &p);
        let next = match linalg::lyapunov(&ak.transpose(), &rhs) {
            Ok(x) => symmetrize(&x),
            Err(_) => break,
        };
        let res = care_residual(a, g, ctc, &next);
        p = next;
        if res < best_res {
            best_res = res;
            best = p.clone();
        } else {
            break;
        }
    }
    if !best_res.is_finite() || best_res > care_tolerance(&best) {
        return Err(TurnpikeError::NoConvergence {
            what: "Newton-Kleinman refinement",
            iterations: NEWTON_SWEEPS,
            residual: best_res,
        });
    }
    let a_cl = a - g * &best;
    let abscissa = spectral_abscissa(&a_cl)?;
    if abscissa >= 0.0 {
        return Err(TurnpikeError::NotHurwitz { abscissa });
    }
    debug_assert_eq!(best.nrows(), n);
    Ok(RiccatiSolution {
        p: best,
        a_cl,
        nu: -abscissa,
        residual_norm: best_res,
    })
}

fn schur_care(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ham = block2(a, &(-g), &(-ctc), &(-a.transpose()));
    let mut schur = ComplexSchur::new(&ham)?;
    let axis_tol = 1e-10 * (1.0 + ham.norm());
    if schur.eigenvalues().iter().any(|l| l.re.abs() <= axis_tol) {
        return Err(TurnpikeError::IllConditioned(
            "Hamiltonian matrix has eigenvalues on the imaginary axis".into(),
        ));
    }
    let k = schur.reorder(|l| l.re < 0.0);
    if k != n {
        return Err(TurnpikeError::IllConditioned(format!(
            "stable invariant subspace has dimension {k}, expected {n}"
        )));
    }
    let u1 = schur.z.view((0, 0), (n, n)).into_owned();
    let u2 = schur.z.view((n, 0), (n, n)).into_owned();
    // P = U2 U1⁻¹  <=>  U1ᵀ Pᵀ = U2ᵀ
    let lu = u1.transpose().lu();
    let pt = lu
        .solve(&u2.transpose())
        .ok_or_else(|| TurnpikeError::IllConditioned("stable subspace basis U1 is singular".into()))?;
    let p = pt.transpose().map(|z| z.re);
    if p.iter().any(|v| !v.is_finite()) {
        return Err(TurnpikeError::IllConditioned("stable subspace basis U1 is singular".into()));
    }
    Ok(symmetrize(&p))
}

/// Solves `A_cl E + E A_clᵀ = W` for Hurwitz `A_cl` and symmetric `W`.
pub fn solve_lyapunov(a_cl: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || w.shape() != (n, n) {
        return Err(dim_err("Lyapunov data", format!("{n}x{n}"), format!("{}x{}", w.nrows(), w.ncols())));
    }
    if linalg::asymmetry(w) > TOL_SYM * (1.0 + w.norm()) {
        return Err(TurnpikeError::Validation {
            field: "W".into(),
            reason: "not symmetric".into(),
        });
    }
    if n == 0 {
        return Ok(LyapunovSolution { e: DMatrix::zeros(0, 0), residual_norm: 0.0 });
    }
    let abscissa = spectral_abscissa(a_cl)?;
    if abscissa >= 0.0 {
        return Err(TurnpikeError::NotHurwitz { abscissa });
    }
    let e = symmetrize(&linalg::lyapunov(a_cl, w)?);
    let residual_norm = lyapunov_residual(a_cl, w, &e);
    Ok(LyapunovSolution { e, residual_norm })
}

pub fn lyapunov_residual(a_cl: &DMatrix<f64>, w: &DMatrix<f64>, e: &DMatrix<f64>) -> f64 {
    (a_cl * e + e * a_cl.transpose() - w).norm()
}

/// `max Re λ(A)`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Hautus test; returns the first eigenvalue with `Re λ ≥ 0` at which
/// `[A − λI, B]` loses rank.
fn hautus(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Option<C64>> {
    let n = a.nrows();
    let m = b.ncols();
    let scale = 1.0 + a.norm() + b.norm();
    let unstable_tol = 1e-9 * (1.0 + a.norm());
    for l in linalg::eigenvalues(a)? {
        if l.re < -unstable_tol {
            continue;
        }
        let mut pencil = DMatrix::<C64>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                pencil[(i, j)] = C64::new(a[(i, j)], 0.0);
            }
            pencil[(i, i)] -= l;
            for j in 0..m {
                pencil[(i, n + j)] = C64::new(b[(i, j)], 0.0);
            }
        }
        let sv = pencil.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        // with m = 0 there are only n singular values; all must be nonzero
        if smin <= 1e-9 * scale {
            return Ok(Some(l));
        }
    }
    Ok(None)
}

/// Hautus stabilizability test with a constructive stabilizing gain.
pub fn check_stabilizability(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<StabilizabilityCertificate> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(dim_err("(A, B)", format!("{n} rows"), format!("{}", b.nrows())));
    }
    if let Some(l) = hautus(a, b)? {
        return Ok(StabilizabilityCertificate {
            verdict: false,
            witness_gain: None,
            offending_eigenvalue: Some(l),
        });
    }
    // LQR gain for identity weights: K = −BᵀX with AᵀX + XA − XBBᵀX + I = 0.
    let g = b * b.transpose();
    let id = DMatrix::identity(n, n);
    let gain = solve_care_gram(a, &g, &id).ok().map(|sol| -(b.transpose() * sol.p));
    let gain = gain.filter(|k| spectral_abscissa(&(a + b * k)).map(|s| s < 0.0).unwrap_or(false));
    Ok(StabilizabilityCertificate {
        verdict: true,
        witness_gain: gain,
        offending_eigenvalue: None,
    })
}

/// `(A, C)` is detectable iff `(Aᵀ, Cᵀ)` is stabilizable.
pub fn check_detectability(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<StabilizabilityCertificate> {
    check_stabilizability(&a.transpose(), &c.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn scalar_care() {
        let sol = solve_care(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0])).unwrap();
        let s2 = 2f64.sqrt();
        assert!((sol.p[(0, 0)] - (s2 - 1.0)).abs() < 1e-12);
        assert!((sol.a_cl[(0, 0)] + s2).abs() < 1e-12);
        assert!((sol.nu - s2).abs() < 1e-12);
        // residual substitution: −2P − P² + 1 = 0
        let p = sol.p[(0, 0)];
        assert!((-2.0 * p - p * p + 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_observation_with_stable_a_gives_zero() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let b = m(2, 1, &[1.0, 2.0]);
        let sol = solve_care(&a, &b, &DMatrix::zeros(1, 2), &DMatrix::identity(1, 1)).unwrap();
        assert!(sol.p.norm() < 1e-14);
        assert!((&sol.a_cl - &a).norm() < 1e-14);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        let a = DMatrix::<f64>::identity(2, 2);
        let err = solve_care(&a, &DMatrix::zeros(2, 1), &DMatrix::identity(2, 2), &DMatrix::identity(1, 1));
        assert!(matches!(err, Err(TurnpikeError::NotStabilizable { .. })));
        let err = solve_care(&a, &DMatrix::identity(2, 2), &DMatrix::zeros(1, 2), &DMatrix::identity(2, 2));
        assert!(matches!(err, Err(TurnpikeError::NotDetectable { .. })));
    }

    #[test]
    fn nonsymmetric_q_is_rejected() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let q = m(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            solve_care(&a, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2), &q),
            Err(TurnpikeError::SingularQ)
        ));
    }

    #[test]
    fn lyapunov_scalar_and_zero_rhs() {
        let s2 = 2f64.sqrt();
        let sol = solve_lyapunov(&m(1, 1, &[-s2]), &m(1, 1, &[1.0])).unwrap();
        assert!((sol.e[(0, 0)] + 1.0 / (2.0 * s2)).abs() < 1e-14);
        let a = m(2, 2, &[0.0, 1.0, -1.0, -3f64.sqrt()]);
        let z = solve_lyapunov(&a, &DMatrix::zeros(2, 2)).unwrap();
        assert!(z.e.norm() < 1e-15);
        assert!(matches!(
            solve_lyapunov(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2)),
            Err(TurnpikeError::NotHurwitz { .. })
        ));
    }

    #[test]
    fn spectral_abscissa_examples() {
        let s3 = 3f64.sqrt();
        assert!((spectral_abscissa(&m(2, 2, &[0.0, 1.0, -1.0, -s3])).unwrap() + s3 / 2.0).abs() < 1e-12);
        assert!((spectral_abscissa(&(-DMatrix::<f64>::identity(2, 2))).unwrap() + 1.0).abs() < 1e-15);
        assert!(spectral_abscissa(&m(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn stabilizability_examples() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let cert = check_stabilizability(&a, &b).unwrap();
        assert!(cert.verdict);
        let k = cert.witness_gain.unwrap();
        assert!(spectral_abscissa(&(&a + &b * k)).unwrap() < 0.0);

        let cert = check_stabilizability(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 1)).unwrap();
        assert!(!cert.verdict);
        let l = cert.offending_eigenvalue.unwrap();
        assert!((l.re - 1.0).abs() < 1e-12 && l.im.abs() < 1e-12);

        let cert = check_stabilizability(&(-DMatrix::<f64>::identity(2, 2)), &DMatrix::zeros(2, 1)).unwrap();
        assert!(cert.verdict);
    }

    #[test]
    fn singular_lyapunov_solution_for_decoupled_stable_system() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let b = m(2, 1, &[1.0, 0.0]);
        let q = DMatrix::identity(1, 1);
        let sol = solve_care(&a, &b, &DMatrix::zeros(1, 2), &q).unwrap();
        let g = control_gram(&b, &q).unwrap();
        let lyap = solve_lyapunov(&sol.a_cl, &g).unwrap();
        assert!((&lyap.e - m(2, 2, &[-0.5, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }
}
