//! Fitted turnpike decay rate against the spectral rate, for the double
//! integrator and the semi-discretized heat equation.

use turnpike::decay::{compare_rate, deviation_series, fit_envelope, Reference};
use turnpike::horizon::solve_horizon_dichotomy;
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let cases = [(zoo::double_integrator_circle(), 20.0, 4000), (zoo::heat_tracking(50)?, 10.0, 1000)];
    for (prob, horizon, steps) in cases {
        let sol = solve_horizon_dichotomy(&prob, horizon, steps)?;
        let series = deviation_series(&sol.trajectory, Reference::Periodic(&sol.turnpike))?;
        let fit = fit_envelope(&series, horizon)?;
        let nu = sol.decoupling.riccati.nu;
        println!(
            "{:<18} nu_hat = {:.5}  nu = {:.5}  rel err = {:.2}%  c_hat = {:.3e}  d(T/2) = {:.3e}",
            prob.label,
            fit.nu_hat,
            nu,
            100.0 * compare_rate(&fit, nu),
            fit.c_hat,
            series.values[steps / 2]
        );
    }
    Ok(())
}
