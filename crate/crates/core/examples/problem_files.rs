//! Saving a problem to JSON, loading it back and running the CLI pipeline on
//! the file.

use turnpike::cli::{run, Command, ProblemSource, RunConfig};
use turnpike::zoo;

fn main() -> turnpike::Result<()> {
    let dir = std::env::temp_dir().join("turnpike-problem-files");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("heat-12.json");
    let prob = zoo::heat_tracking(12)?;
    zoo::save_problem(&prob, &path)?;
    let back = zoo::load_problem(&path)?;
    println!("round trip exact: {}", back == prob);

    let cfg = RunConfig {
        command: Command::Decay,
        problem: ProblemSource::File(path),
        horizons: vec![10.0],
        steps: Some(1000),
        out: dir.join("out"),
        seed: 0,
    };
    let summary = run(&cfg)?;
    print!("{}", summary.text);
    Ok(())
}
