//! Observed order of agreement between the dichotomy solver and the direct
//! Crank-Nicolson discretization as the grid is refined.

use turnpike::horizon::{solve_horizon_direct, solve_horizon_dichotomy};
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let horizon = 20.0;
    let mut prev: Option<f64> = None;
    for steps in [1000, 2000, 4000, 8000] {
        let a = solve_horizon_dichotomy(&prob, horizon, steps)?.trajectory;
        let b = solve_horizon_direct(&prob, horizon, steps)?;
        let diff = a.max_difference(&b)?;
        match prev {
            Some(p) => println!("N = {steps:>5}: diff = {diff:.3e}, order = {:.3}", (p / diff).log2()),
            None => println!("N = {steps:>5}: diff = {diff:.3e}"),
        }
        prev = Some(diff);
    }
    Ok(())
}
