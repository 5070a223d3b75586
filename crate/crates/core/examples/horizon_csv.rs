//! Finite-horizon solution of the circle-tracking problem written as CSV,
//! with the periodic turnpike alongside. Pass an output path to write a file;
//! otherwise the first rows are printed.

use std::io::Write;

use turnpike::horizon::{solve_horizon_direct, solve_horizon_dichotomy};
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let prob = zoo::double_integrator_circle();
    let (horizon, steps) = (20.0, 4000);
    let sol = solve_horizon_dichotomy(&prob, horizon, steps)?;
    let direct = solve_horizon_direct(&prob, horizon, steps)?;
    eprintln!("dichotomy vs Crank-Nicolson: {:.3e}", sol.trajectory.max_difference(&direct)?);
    eprintln!("boundary coupling off-diagonals: {:?}", sol.coupling.off_diagonal_norms());

    match std::env::args().nth(1) {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            sol.trajectory.write_csv_with_turnpike(&mut f, &sol.turnpike)?;
            f.flush()?;
            eprintln!("wrote {path}");
        }
        None => {
            let mut buf = Vec::new();
            sol.trajectory.write_csv_with_turnpike(&mut buf, &sol.turnpike)?;
            for line in String::from_utf8_lossy(&buf).lines().take(6) {
                println!("{line}");
            }
        }
    }
    Ok(())
}
