//! Command-line front end: `turnpike <command> [--problem …] [--T …] [--N …]`.
//!
//! Every command writes its artifacts plus a `summary.txt` into the output
//! directory (`--out`, overridden by `TURNPIKE_OUT`) and prints the summary.
//! Outputs depend only on the arguments, so repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::decay::{compare_rate, deviation_series, fit_envelope, write_fit_row, Reference, FIT_HEADER};
use crate::dichotomy::{block_diagonalize, diag_tolerance, Decoupling};
use crate::error::{Result, TurnpikeError};
use crate::horizon::{check_stability_estimate, fmt, solve_horizon_dichotomy, HorizonSolution};
use crate::periodic::{periodic_turnpike, DEFAULT_SAMPLES};
use crate::riccati::{care_tolerance, solve_care};
use crate::steady::{solve_static, static_tolerance};
use crate::zoo::{by_name, load_problem, LqProblem};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "TURNPIKE_OUT";
/// Minimum number of time steps accepted on the command line.
pub const MIN_STEPS: usize = 16;
/// Steps per unit time for `sweep` when `--N` is absent.
pub const SWEEP_STEPS_PER_UNIT: usize = 100;
/// Largest state dimension whose matrices are printed in summaries.
const PRINT_MAX_N: usize = 6;
/// Random boundary pairs per horizon in `sweep`.
pub const SWEEP_SAMPLES: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "turnpike", version, about = "Turnpike analysis for LQ tracking problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Built-in problem name or path to a JSON problem file.
    #[arg(long)]
    pub problem: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Riccati solution, closed loop and decay rate.
    Care(Common),
    /// Optimal steady state for constant targets.
    Static(Common),
    /// Periodic turnpike sampled over one period.
    Periodic {
        #[command(flatten)]
        common: Common,
        /// Samples per period.
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Finite-horizon optimal trajectory.
    Horizon {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Trajectory, deviation from the turnpike and fitted decay envelope.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Boundary-to-boundary stability ratios for a list of horizons.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons.
        #[arg(long = "T", value_delimiter = ',')]
        t: Vec<f64>,
        /// Time steps per unit time.
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Full worked example: trajectory with turnpike columns and decay fit.
    Example {
        /// Built-in problem name.
        #[arg(long)]
        name: String,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Care,
    Static,
    Periodic,
    Horizon,
    Decay,
    Sweep,
    Example,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Zoo(String),
    File(PathBuf),
}

impl ProblemSource {
    /// Paths that exist (or end in `.json`) are files; anything else is a
    /// built-in name.
    pub fn parse(s: &str) -> Self {
        let p = Path::new(s);
        if p.exists() || s.ends_with(".json") {
            ProblemSource::File(p.to_path_buf())
        } else {
            ProblemSource::Zoo(s.to_string())
        }
    }

    pub fn load(&self) -> Result<LqProblem> {
        match self {
            ProblemSource::Zoo(name) => by_name(name),
            ProblemSource::File(path) => load_problem(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemSource,
    /// One horizon, or the list for `sweep`.
    pub horizons: Vec<f64>,
    pub steps: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
}

fn config_err(msg: impl Into<String>) -> TurnpikeError {
    TurnpikeError::Config(msg.into())
}

fn need_problem(p: Option<String>, command: &str) -> Result<ProblemSource> {
    p.map(|s| ProblemSource::parse(&s))
        .ok_or_else(|| config_err(format!("`{command}` needs --problem")))
}

fn need_horizon(t: Option<f64>, command: &str) -> Result<Vec<f64>> {
    match t {
        Some(t) if t > 0.0 && t.is_finite() => Ok(vec![t]),
        Some(t) => Err(config_err(format!("--T must be positive, got {t}"))),
        None => Err(config_err(format!("`{command}` needs --T"))),
    }
}

fn need_steps(n: Option<usize>, command: &str) -> Result<Option<usize>> {
    match n {
        Some(n) if n >= MIN_STEPS => Ok(Some(n)),
        Some(n) => Err(config_err(format!("--N must be at least {MIN_STEPS}, got {n}"))),
        None => Err(config_err(format!("`{command}` needs --N"))),
    }
}

fn resolve_out(out: Option<PathBuf>, env: Option<String>) -> PathBuf {
    env.filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .or(out)
        .unwrap_or_else(|| PathBuf::from("turnpike-out"))
}

impl RunConfig {
    /// Validates parsed arguments; `env_out` is the value of [`OUT_ENV`].
    pub fn from_cli(cli: Cli, env_out: Option<String>) -> Result<Self> {
        let (command, problem, horizons, steps, out, seed) = match cli.command {
            CliCommand::Care(c) => (Command::Care, need_problem(c.problem, "care")?, vec![], None, c.out, c.seed),
            CliCommand::Static(c) => (Command::Static, need_problem(c.problem, "static")?, vec![], None, c.out, c.seed),
            CliCommand::Periodic { common: c, n } => {
                let steps = n.map(|n| need_steps(Some(n), "periodic")).transpose()?.flatten();
                (Command::Periodic, need_problem(c.problem, "periodic")?, vec![], steps, c.out, c.seed)
            }
            CliCommand::Horizon { common: c, t, n } => (
                Command::Horizon,
                need_problem(c.problem, "horizon")?,
                need_horizon(t, "horizon")?,
                need_steps(n, "horizon")?,
                c.out,
                c.seed,
            ),
            CliCommand::Decay { common: c, t, n } => (
                Command::Decay,
                need_problem(c.problem, "decay")?,
                need_horizon(t, "decay")?,
                need_steps(n, "decay")?,
                c.out,
                c.seed,
            ),
            CliCommand::Sweep { common: c, t, n } => {
                if t.is_empty() {
                    return Err(config_err("`sweep` needs --T with a comma-separated list"));
                }
                if let Some(bad) = t.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
                    return Err(config_err(format!("--T must be positive, got {bad}")));
                }
                if n == Some(0) {
                    return Err(config_err("--N must be positive"));
                }
                let problem = c
                    .problem
                    .map(|s| ProblemSource::parse(&s))
                    .unwrap_or_else(|| ProblemSource::Zoo("double-integrator".into()));
                (Command::Sweep, problem, t, n, c.out, c.seed)
            }
            CliCommand::Example { name, t, n, out, seed } => (
                Command::Example,
                ProblemSource::Zoo(name),
                need_horizon(t, "example")?,
                need_steps(n, "example")?,
                out,
                seed,
            ),
        };
        Ok(RunConfig {
            command,
            problem,
            horizons,
            steps,
            out: resolve_out(out, env_out),
            seed,
        })
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub text: String,
    pub files: Vec<PathBuf>,
    /// Whether every invariant checked along the way held.
    pub passed: bool,
}

struct Report {
    text: String,
    files: Vec<PathBuf>,
    passed: bool,
    out: PathBuf,
}

impl Report {
    fn new(out: &Path, prob: &LqProblem, command: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "command: {command}");
        let _ = writeln!(text, "problem: {} (n={}, m={}, p={}, Pi={})", prob.label, prob.n(), prob.m(), prob.p(), prob.period);
        Report {
            text,
            files: Vec::new(),
            passed: true,
            out: out.to_path_buf(),
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn check(&mut self, name: &str, value: f64, tol: f64) {
        let ok = value <= tol;
        self.passed &= ok;
        self.line(format!("[{}] {name}: {value:.3e} (tol {tol:.1e})", if ok { "pass" } else { "FAIL" }));
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self) -> Result<RunSummary> {
        self.line(format!("invariants: {}", if self.passed { "all pass" } else { "FAILURES" }));
        let text = self.text.clone();
        self.file("summary.txt", |w| w.write_all(text.as_bytes()))?;
        Ok(RunSummary {
            text: self.text,
            files: self.files,
            passed: self.passed,
        })
    }
}

#[derive(Serialize)]
struct CareRecord<'a> {
    label: &'a str,
    p: Vec<Vec<f64>>,
    a_cl: Vec<Vec<f64>>,
    nu: f64,
    residual: f64,
}

#[derive(Serialize)]
struct StaticRecord<'a> {
    label: &'a str,
    y_s: Vec<f64>,
    u_s: Vec<f64>,
    lambda_s: Vec<f64>,
    residual: f64,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn horizon_checks(rep: &mut Report, sol: &HorizonSolution, prob: &LqProblem) -> Result<()> {
    let ric = &sol.decoupling.riccati;
    rep.line(format!("nu_spectral: {}", fmt(ric.nu)));
    rep.check("CARE residual", ric.residual_norm, care_tolerance(&ric.p));
    let diag = block_diagonalize(&sol.decoupling.block, &sol.decoupling.transform, &ric.a_cl)?;
    rep.check("block diagonalization", diag, diag_tolerance(&sol.decoupling.block));
    rep.check("turnpike periodicity", sol.turnpike.periodicity_residual, 1e-9 * (1.0 + sol.turnpike.y.max_norm()));
    let c = &sol.coupling;
    rep.check("boundary coupling residual", c.residual, 1e-10 * (1.0 + c.rhs.norm()));
    rep.check("boundary conditions", sol.trajectory.boundary_residual, 1e-9 * (1.0 + prob.y0.norm()));
    rep.line(format!("bvp residual (central differences): {:.3e}", sol.trajectory.bvp_residual));
    rep.line(format!("turnpike optimality residual: {:.3e}", sol.turnpike.optimality_residual));
    Ok(())
}

fn fit_report(rep: &mut Report, sol: &HorizonSolution, prob: &LqProblem, horizon: f64) -> Result<()> {
    let series = deviation_series(&sol.trajectory, Reference::Periodic(&sol.turnpike))?;
    let fit = fit_envelope(&series, horizon)?;
    let nu = sol.decoupling.riccati.nu;
    let mid = series.values[series.values.len() / 2];
    rep.line(format!("nu_hat: {}", fmt(fit.nu_hat)));
    rep.line(format!("c_hat: {}", fmt(fit.c_hat)));
    rep.line(format!("relative rate error: {:.3e}", compare_rate(&fit, nu)));
    rep.line(format!("rms log error: {:.3e}", fit.rms_log_error));
    rep.line(format!("deviation at T/2: {:.3e}", mid));
    let majorized = fit.majorizes(&series, 0.05 * horizon, 0.95 * horizon);
    rep.passed &= majorized;
    rep.line(format!("[{}] envelope majorizes deviation on the fit window", if majorized { "pass" } else { "FAIL" }));
    let label = prob.label.clone();
    rep.file("fit.csv", |w| {
        writeln!(w, "{FIT_HEADER}")?;
        write_fit_row(w, &label, &fit, nu)
    })
}

/// Executes one configured run.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let prob = cfg.problem.load()?;
    fs::create_dir_all(&cfg.out)?;
    match cfg.command {
        Command::Care => {
            let mut rep = Report::new(&cfg.out, &prob, "care");
            let sol = solve_care(&prob.a, &prob.b, &prob.c, &prob.q)?;
            rep.line(format!("nu: {}", fmt(sol.nu)));
            if prob.n() <= PRINT_MAX_N {
                rep.line(format!("P: {:?}", rows(&sol.p)));
                rep.line(format!("A_cl: {:?}", rows(&sol.a_cl)));
            } else {
                rep.line("P, A_cl: see care.json");
            }
            rep.check("CARE residual", sol.residual_norm, care_tolerance(&sol.p));
            let rec = CareRecord {
                label: &prob.label,
                p: rows(&sol.p),
                a_cl: rows(&sol.a_cl),
                nu: sol.nu,
                residual: sol.residual_norm,
            };
            let json = serde_json::to_string_pretty(&rec).expect("plain data serializes");
            rep.file("care.json", |w| writeln!(w, "{json}"))?;
            rep.finish()
        }
        Command::Static => {
            if !prob.has_constant_targets() {
                return Err(config_err(format!("`static` needs constant targets; `{}` has time-varying ones", prob.label)));
            }
            let mut rep = Report::new(&cfg.out, &prob, "static");
            let (yd, ud) = (prob.y_d_at(0.0), prob.u_d_at(0.0));
            let s = solve_static(&prob.a, &prob.b, &prob.c, &prob.q, &yd, &ud)?;
            rep.line(format!("y_s: {:?}", s.y_s.as_slice()));
            rep.line(format!("u_s: {:?}", s.u_s.as_slice()));
            rep.line(format!("lambda_s: {:?}", s.lambda_s.as_slice()));
            rep.check("static residual", s.residual_norm, static_tolerance(&yd, &ud));
            let rec = StaticRecord {
                label: &prob.label,
                y_s: s.y_s.as_slice().to_vec(),
                u_s: s.u_s.as_slice().to_vec(),
                lambda_s: s.lambda_s.as_slice().to_vec(),
                residual: s.residual_norm,
            };
            let json = serde_json::to_string_pretty(&rec).expect("plain data serializes");
            rep.file("static.json", |w| writeln!(w, "{json}"))?;
            rep.finish()
        }
        Command::Periodic => {
            let mut rep = Report::new(&cfg.out, &prob, "periodic");
            let samples = cfg.steps.unwrap_or(DEFAULT_SAMPLES);
            rep.line(format!("samples per period: {samples}{}", if cfg.steps.is_none() { " (default)" } else { "" }));
            let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q)?;
            let tp = periodic_turnpike(&prob, &dec, samples)?;
            rep.line(format!("nu_spectral: {}", fmt(dec.riccati.nu)));
            rep.check("turnpike periodicity", tp.periodicity_residual, 1e-9 * (1.0 + tp.y.max_norm()));
            rep.line(format!("turnpike optimality residual: {:.3e}", tp.optimality_residual));
            let (n, m) = (prob.n(), prob.m());
            rep.file("turnpike.csv", |w| {
                let mut header = vec!["t".to_string()];
                header.extend((1..=n).map(|j| format!("ybar_{j}")));
                header.extend((1..=n).map(|j| format!("lambdabar_{j}")));
                header.extend((1..=m).map(|j| format!("ubar_{j}")));
                writeln!(w, "{}", header.join(","))?;
                for k in 0..=samples {
                    let mut row = vec![fmt(tp.y.time(k))];
                    row.extend(tp.y.values[k].iter().map(|&v| fmt(v)));
                    row.extend(tp.lambda.values[k].iter().map(|&v| fmt(v)));
                    row.extend(tp.u.values[k].iter().map(|&v| fmt(v)));
                    writeln!(w, "{}", row.join(","))?;
                }
                Ok(())
            })?;
            rep.finish()
        }
        Command::Horizon | Command::Decay | Command::Example => {
            let name = match cfg.command {
                Command::Horizon => "horizon",
                Command::Decay => "decay",
                _ => "example",
            };
            let horizon = cfg.horizons[0];
            let steps = cfg.steps.expect("validated");
            let mut rep = Report::new(&cfg.out, &prob, name);
            rep.line(format!("T: {horizon}, N: {steps}"));
            let sol = solve_horizon_dichotomy(&prob, horizon, steps)?;
            horizon_checks(&mut rep, &sol, &prob)?;
            rep.file("trajectory.csv", |w| {
                if cfg.command == Command::Horizon {
                    sol.trajectory.write_csv(w)
                } else {
                    sol.trajectory.write_csv_with_turnpike(w, &sol.turnpike)
                }
            })?;
            if cfg.command != Command::Horizon {
                fit_report(&mut rep, &sol, &prob, horizon)?;
            }
            rep.finish()
        }
        Command::Sweep => {
            let mut rep = Report::new(&cfg.out, &prob, "sweep");
            let per_unit = cfg.steps.unwrap_or(SWEEP_STEPS_PER_UNIT);
            rep.line(format!(
                "steps per unit time: {per_unit}{}; samples: {SWEEP_SAMPLES}; seed: {}",
                if cfg.steps.is_none() { " (default)" } else { "" },
                cfg.seed
            ));
            let results: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
                let handles: Vec<_> = cfg
                    .horizons
                    .iter()
                    .map(|&t| {
                        let prob = &prob;
                        s.spawn(move || check_stability_estimate(prob, &[t], per_unit as f64, SWEEP_SAMPLES, cfg.seed))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
            let mut ratios = Vec::new();
            for r in results {
                ratios.extend(r?);
            }
            for r in &ratios {
                rep.line(format!("r({}) = {}", r.horizon, fmt(r.ratio)));
            }
            let long: Vec<f64> = ratios.iter().filter(|r| r.horizon >= 10.0).map(|r| r.ratio).collect();
            if long.len() >= 2 {
                let hi = long.iter().copied().fold(f64::MIN, f64::max);
                let lo = long.iter().copied().fold(f64::MAX, f64::min);
                rep.check("relative spread of r(T) for T >= 10", (hi - lo) / hi, 0.05);
            }
            rep.file("sweep.csv", |w| {
                writeln!(w, "T,ratio")?;
                for r in &ratios {
                    writeln!(w, "{},{}", fmt(r.horizon), fmt(r.ratio))?;
                }
                Ok(())
            })?;
            rep.finish()
        }
    }
}

/// Exit code for a failed run: 2 for configuration and input errors, 1 for
/// everything raised by the numerical modules.
pub fn exit_code(err: &TurnpikeError) -> i32 {
    match err {
        TurnpikeError::Config(_) | TurnpikeError::Parse { .. } | TurnpikeError::Validation { .. } => 2,
        _ => 1,
    }
}

/// Parses `args`, runs, prints the summary and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = RunConfig::from_cli(cli, std::env::var(OUT_ENV).ok()).and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            print!("{}", summary.text);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        let cli = Cli::try_parse_from(args).map_err(|e| config_err(e.to_string()))?;
        RunConfig::from_cli(cli, None)
    }

    #[test]
    fn missing_horizon_is_a_config_error() {
        let e = parse(&["turnpike", "horizon", "--problem", "scalar", "--N", "100"]).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("--T"));
    }

    #[test]
    fn small_n_is_rejected() {
        let e = parse(&["turnpike", "decay", "--problem", "scalar", "--T", "5", "--N", "8"]).unwrap_err();
        assert!(e.to_string().contains("--N"));
    }

    #[test]
    fn sweep_parses_lists() {
        let cfg = parse(&["turnpike", "sweep", "--T", "5,10,20,40"]).unwrap();
        assert_eq!(cfg.horizons, vec![5.0, 10.0, 20.0, 40.0]);
        assert_eq!(cfg.problem, ProblemSource::Zoo("double-integrator".into()));
    }

    #[test]
    fn env_overrides_out() {
        assert_eq!(resolve_out(Some("a".into()), Some("b".into())), PathBuf::from("b"));
        assert_eq!(resolve_out(Some("a".into()), None), PathBuf::from("a"));
        assert_eq!(resolve_out(None, Some(String::new())), PathBuf::from("turnpike-out"));
    }

    #[test]
    fn module_errors_exit_with_one() {
        assert_eq!(exit_code(&TurnpikeError::SingularCoupling), 1);
        assert_eq!(exit_code(&TurnpikeError::NotStabilizable { re: 0.0, im: 0.0 }), 1);
    }

    #[test]
    fn unknown_problem_fails() {
        let cfg = parse(&["turnpike", "care", "--problem", "no-such-problem"]).unwrap();
        assert!(run(&cfg).is_err());
    }
}
