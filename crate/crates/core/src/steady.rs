//! Optimal steady state for constant targets.

use nalgebra::{DMatrix, DVector};

use crate::dichotomy::assemble_hamiltonian;
use crate::error::{dim_err, Result, TurnpikeError};

/// Extremal triple `(y_s, u_s, λ_s)` of the static problem.
#[derive(Debug, Clone)]
pub struct SteadyTriple {
    pub y_s: DVector<f64>,
    pub u_s: DVector<f64>,
    pub lambda_s: DVector<f64>,
    pub residual_norm: f64,
}

pub fn static_tolerance(y_d: &DVector<f64>, u_d: &DVector<f64>) -> f64 {
    1e-9 * (1.0 + y_d.norm() + u_d.norm())
}

/// Solves `M (y_s; λ_s) = (−B u_d; CᵀC y_d)` with `u_s = u_d + Q⁻¹Bᵀλ_s`.
pub fn solve_static(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    y_d: &DVector<f64>,
    u_d: &DVector<f64>,
) -> Result<SteadyTriple> {
    let n = a.nrows();
    let m = b.ncols();
    if y_d.len() != n {
        return Err(dim_err("y_d", n, y_d.len()));
    }
    if u_d.len() != m {
        return Err(dim_err("u_d", m, u_d.len()));
    }
    let mb = assemble_hamiltonian(a, b, c, q)?;
    let ctc = c.transpose() * c;
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(&(-(b * u_d)));
    rhs.rows_mut(n, n).copy_from(&(&ctc * y_d));

    let sv = mb.m.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-13 * smax.max(1.0)) {
        return Err(TurnpikeError::SingularSystem(format!(
            "static optimality system (smallest singular value {smin:e})"
        )));
    }
    let x = mb
        .m
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| TurnpikeError::SingularSystem("static optimality system".into()))?;
    let y_s = x.rows(0, n).into_owned();
    let lambda_s = x.rows(n, n).into_owned();
    let qinv_bt = q
        .clone()
        .cholesky()
        .ok_or(TurnpikeError::SingularQ)?
        .solve(&b.transpose());
    let u_s = u_d + &qinv_bt * &lambda_s;
    let residual_norm = static_residual(a, b, c, &qinv_bt, y_d, u_d, &y_s, &u_s, &lambda_s);
    Ok(SteadyTriple {
        y_s,
        u_s,
        lambda_s,
        residual_norm,
    })
}

#[allow(clippy::too_many_arguments)]
fn static_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    qinv_bt: &DMatrix<f64>,
    y_d: &DVector<f64>,
    u_d: &DVector<f64>,
    y_s: &DVector<f64>,
    u_s: &DVector<f64>,
    lambda_s: &DVector<f64>,
) -> f64 {
    let r1 = (a * y_s + b * u_s).norm();
    let r2 = (c.transpose() * (c * (y_s - y_d)) - a.transpose() * lambda_s).norm();
    let r3 = (u_s - u_d - qinv_bt * lambda_s).norm();
    r1.max(r2).max(r3)
}
