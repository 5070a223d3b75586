//! Boundary-to-boundary amplification of the homogeneous optimality system
//! for growing horizons.

use turnpike::horizon::check_stability_estimate;
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let ratios = check_stability_estimate(&prob, &[5.0, 10.0, 20.0, 40.0], 100.0, 8, 0)?;
    for r in ratios {
        println!("T = {:>4}: r = {:.6}", r.horizon, r.ratio);
    }
    Ok(())
}
