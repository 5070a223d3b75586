//! Lyapunov solution, dichotomy transform and block diagonalization of the
//! Hamiltonian, plus a rank-deficient Lyapunov solution.

use turnpike::dichotomy::{block_diagonalize, diag_tolerance, Decoupling};
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q)?;
    println!("E = {}", dec.e());
    println!("Lyapunov residual = {:.3e}", dec.lyapunov.residual_norm);
    println!("cond(T) = {:.3}", dec.transform.condition());
    let defect = block_diagonalize(&dec.block, &dec.transform, dec.a_cl())?;
    println!("block diagonalization defect = {defect:.3e} (tol {:.1e})", diag_tolerance(&dec.block));

    let singular = zoo::singular_lyapunov_example();
    let dec = Decoupling::new(&singular.a, &singular.b, &singular.c, &singular.q)?;
    let sv = dec.e().singular_values();
    println!("singular instance: E = {}smallest singular value = {:.3e}", dec.e(), sv.min());
    Ok(())
}
