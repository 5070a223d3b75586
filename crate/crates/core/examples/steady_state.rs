//! Optimal steady state for a constant target, and the periodic turnpike of
//! the same problem collapsing onto it.

use turnpike::dichotomy::Decoupling;
use turnpike::periodic::{periodic_turnpike, DEFAULT_SAMPLES};
use turnpike::signal::Signal;
use turnpike::steady::solve_static;
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle().with_targets(Signal::Constant(vec![1.0, 0.0]), Signal::zeros(1));
    let (yd, ud) = (prob.y_d_at(0.0), prob.u_d_at(0.0));
    let s = solve_static(&prob.a, &prob.b, &prob.c, &prob.q, &yd, &ud)?;
    println!("y_s = {:?}, u_s = {:?}, lambda_s = {:?}", s.y_s.as_slice(), s.u_s.as_slice(), s.lambda_s.as_slice());
    println!("residual = {:.3e}", s.residual_norm);

    let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q)?;
    let tp = periodic_turnpike(&prob, &dec, DEFAULT_SAMPLES)?;
    let gap = tp.y.values.iter().map(|y| (y - &s.y_s).norm()).fold(0.0, f64::max);
    println!("sup |y_periodic - y_s| = {gap:.3e}");
    Ok(())
}
