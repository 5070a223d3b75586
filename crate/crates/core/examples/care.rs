//! Stabilizing Riccati solution and closed-loop decay rate for the double
//! integrator.

use turnpike::riccati::{care_tolerance, solve_care};
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let sol = solve_care(&prob.a, &prob.b, &prob.c, &prob.q)?;
    println!("P = {}", sol.p);
    println!("A_cl = {}", sol.a_cl);
    println!("nu = {:.12} (sqrt(3)/2 = {:.12})", sol.nu, 3f64.sqrt() / 2.0);
    println!("residual = {:.3e} (tol {:.1e})", sol.residual_norm, care_tolerance(&sol.p));
    Ok(())
}
