//! Steady state and local turnpike rate of nonlinear problems: a scalar
//! cubic model and a semilinear heat equation.

use nalgebra::DVector;
use turnpike::nonlinear::{
    check_derivatives, linearize, solve_static_nonlinear, spectral_symmetry_defect, CubicHeat, CubicScalar,
    NonlinearModel,
};

fn report<M: NonlinearModel>(name: &str, model: &M) -> turnpike::Result<()> {
    let zero = |k| DVector::zeros(k);
    let s = solve_static_nonlinear(model, zero(model.n()), zero(model.m()), zero(model.n()))?;
    let lin = linearize(model, &s)?;
    let checks = check_derivatives(model, &s.y_s, &s.u_s, &s.lambda_s)?;
    println!("{name}:");
    println!("  Newton residual      {:.3e}", s.residual_norm);
    println!("  local rate           {:?}", lin.local_rate);
    println!("  derivative check     {:.3e} / {:.3e}", checks.first_order, checks.second_order);
    println!("  spectral symmetry    {:.3e}", spectral_symmetry_defect(&lin)?);
    Ok(())
}

fn main() -> turnpike::Result<()> {
    report("cubic scalar", &CubicScalar { y_d: 0.5 })?;
    let heat = CubicHeat::new(8, 1..=8, |x| 2.0 * (std::f64::consts::PI * x).sin())?;
    report("cubic heat (n = 8)", &heat)
}
