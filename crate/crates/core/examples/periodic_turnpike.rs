//! Periodic turnpike of the double integrator tracking the unit circle.

use turnpike::dichotomy::Decoupling;
use turnpike::periodic::periodic_turnpike;
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q)?;
    let tp = periodic_turnpike(&prob, &dec, 400)?;
    println!("periodicity residual = {:.3e}", tp.periodicity_residual);
    println!("optimality residual  = {:.3e}", tp.optimality_residual);
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "ybar_1", "ybar_2", "ubar");
    for k in (0..=8).map(|i| i as f64 / 8.0) {
        let p = tp.eval(k);
        println!("{k:>6.3} {:>12.6} {:>12.6} {:>12.6}", p.y[0], p.y[1], p.u[0]);
    }
    Ok(())
}
