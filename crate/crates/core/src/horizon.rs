//! Finite-horizon optimality system on `[0, T]`.
//!
//! Two independent solvers:
//!
//! * [`solve_horizon_dichotomy`] writes the solution as periodic turnpike plus
//!   a deviation. In the decoupled coordinates the deviation is
//!   `v(t) = S(t) v₀` and `w(t) = S(T − t)ᵀ w_T` with `S(t) = exp(t A_cl)`, so
//!   only a `2n × 2n` boundary system has to be solved.
//! * [`solve_horizon_direct`] discretizes the full two-point boundary value
//!   problem with Crank–Nicolson and solves it exactly by a backward block
//!   elimination sweep. It serves as the oracle for the first solver.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dichotomy::{assemble_hamiltonian, Decoupling};
use crate::error::{Result, TurnpikeError};
use crate::linalg::expm;
use crate::periodic::{periodic_turnpike, PeriodicTurnpike, DEFAULT_SAMPLES};
use crate::zoo::LqProblem;

/// Sampled solution `(y, λ, u)` on `t_k = kT/N`, `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub lambda: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    /// Largest central-difference residual of the optimality system at
    /// interior nodes.
    pub bvp_residual: f64,
    /// `‖y(0) − y₀‖ + ‖λ(T)‖` before the endpoints are pinned.
    pub boundary_residual: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    /// Largest `‖(y, λ, u)‖` difference at common sample times; both
    /// trajectories must live on the same grid.
    pub fn max_difference(&self, other: &Trajectory) -> Result<f64> {
        if self.steps() != other.steps() || (self.horizon() - other.horizon()).abs() > 1e-12 * self.horizon() {
            return Err(TurnpikeError::GridMismatch(format!(
                "{} steps over {} vs {} steps over {}",
                self.steps(),
                self.horizon(),
                other.steps(),
                other.horizon()
            )));
        }
        Ok((0..self.times.len())
            .map(|k| {
                let dy = (&self.y[k] - &other.y[k]).norm_squared();
                let dl = (&self.lambda[k] - &other.lambda[k]).norm_squared();
                let du = (&self.u[k] - &other.u[k]).norm_squared();
                (dy + dl + du).sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,y_1..,lambda_1..,u_1..`, 17 significant digits.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        self.write_csv_with(out, None)
    }

    /// Same as [`Trajectory::write_csv`] with the turnpike sampled alongside in
    /// `ybar_*`, `lambdabar_*`, `ubar_*` columns.
    pub fn write_csv_with_turnpike(&self, out: &mut impl Write, tp: &PeriodicTurnpike) -> std::io::Result<()> {
        self.write_csv_with(out, Some(tp))
    }

    fn write_csv_with(&self, out: &mut impl Write, tp: Option<&PeriodicTurnpike>) -> std::io::Result<()> {
        let n = self.y[0].len();
        let m = self.u[0].len();
        let mut header = vec!["t".to_string()];
        let prefixes: &[&str] = if tp.is_some() {
            &["y", "lambda", "u", "ybar", "lambdabar", "ubar"]
        } else {
            &["y", "lambda", "u"]
        };
        for (i, pre) in prefixes.iter().enumerate() {
            let dim = if i % 3 == 2 { m } else { n };
            header.extend((1..=dim).map(|j| format!("{pre}_{j}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt(self.times[k])];
            row.extend(self.y[k].iter().map(|&v| fmt(v)));
            row.extend(self.lambda[k].iter().map(|&v| fmt(v)));
            row.extend(self.u[k].iter().map(|&v| fmt(v)));
            if let Some(tp) = tp {
                let at = tp.eval(self.times[k]);
                row.extend(at.y.iter().map(|&v| fmt(v)));
                row.extend(at.lambda.iter().map(|&v| fmt(v)));
                row.extend(at.u.iter().map(|&v| fmt(v)));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip-exact rendering with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Boundary system `K (v₀, w_T) = (y₀ − y^Π(0), −λ^Π(T))` with
/// `K = [[I, −E S(T)ᵀ], [−P S(T), I + PE]]`.
#[derive(Debug, Clone)]
pub struct BoundaryCoupling {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub v0: DVector<f64>,
    pub w_t: DVector<f64>,
    /// `S(T)`
    pub propagator: DMatrix<f64>,
    pub residual: f64,
}

impl BoundaryCoupling {
    /// `(‖E S(T)ᵀ‖₂, ‖P S(T)‖₂)`, the blocks that vanish as `T → ∞`.
    pub fn off_diagonal_norms(&self) -> (f64, f64) {
        let n = self.v0.len();
        let upper = self.matrix.view((0, n), (n, n)).into_owned();
        let lower = self.matrix.view((n, 0), (n, n)).into_owned();
        (spectral_norm(&upper), spectral_norm(&lower))
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn check_horizon(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(TurnpikeError::InvalidHorizon(format!("horizon must be positive, got {horizon}")));
    }
    if steps < 2 {
        return Err(TurnpikeError::InvalidHorizon(format!("need at least 2 time steps, got {steps}")));
    }
    Ok(())
}

/// Turnpike resolution matching a horizon step: `Π/h` when that is an
/// integer, so that horizon nodes land on turnpike samples, and otherwise
/// at least [`DEFAULT_SAMPLES`].
pub fn turnpike_samples_for(period: f64, step: f64) -> usize {
    let ratio = period / step;
    let r = ratio.round();
    if r >= 2.0 && (ratio - r).abs() < 1e-9 * ratio {
        r as usize
    } else {
        DEFAULT_SAMPLES.max(ratio.ceil() as usize)
    }
}

fn mat_pow(m: &DMatrix<f64>, mut k: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut acc = DMatrix::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    acc
}

/// Everything the dichotomy solver produced along the way.
#[derive(Debug, Clone)]
pub struct HorizonSolution {
    pub trajectory: Trajectory,
    pub coupling: BoundaryCoupling,
    pub turnpike: PeriodicTurnpike,
    pub decoupling: Decoupling,
}

/// Turnpike-plus-deviation solver; builds the Riccati data and turnpike.
pub fn solve_horizon_dichotomy(prob: &LqProblem, horizon: f64, steps: usize) -> Result<HorizonSolution> {
    check_horizon(horizon, steps)?;
    prob.validate()?;
    let decoupling = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q)?;
    let samples = turnpike_samples_for(prob.period, horizon / steps as f64);
    let turnpike = periodic_turnpike(prob, &decoupling, samples)?;
    let (trajectory, coupling) = solve_horizon_with(prob, &decoupling, &turnpike, horizon, steps)?;
    Ok(HorizonSolution {
        trajectory,
        coupling,
        turnpike,
        decoupling,
    })
}

/// Dichotomy solver reusing precomputed Riccati data and turnpike.
pub fn solve_horizon_with(
    prob: &LqProblem,
    dec: &Decoupling,
    tp: &PeriodicTurnpike,
    horizon: f64,
    steps: usize,
) -> Result<(Trajectory, BoundaryCoupling)> {
    check_horizon(horizon, steps)?;
    let n = dec.n();
    if prob.y0.len() != n {
        return Err(crate::error::dim_err("y0", n, prob.y0.len()));
    }
    let h = horizon / steps as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let (p, e) = (dec.p(), dec.e());
    let i_pe = &id + p * e;

    let s_h = expm(&(dec.a_cl() * h))?;
    let s_t = mat_pow(&s_h, steps);
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    k.view_mut((0, 0), (n, n)).copy_from(&id);
    k.view_mut((0, n), (n, n)).copy_from(&(-(e * s_t.transpose())));
    k.view_mut((n, 0), (n, n)).copy_from(&(-(p * &s_t)));
    k.view_mut((n, n), (n, n)).copy_from(&i_pe);

    let start = tp.eval(0.0);
    let end = tp.eval(horizon);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(&(&prob.y0 - &start.y));
    rhs.rows_mut(n, n).copy_from(&(-&end.lambda));

    let sv = k.singular_values();
    if !(sv.min() > 1e-13 * sv.max()) {
        return Err(TurnpikeError::SingularCoupling);
    }
    let x = k.clone().lu().solve(&rhs).ok_or(TurnpikeError::SingularCoupling)?;
    let residual = (&k * &x - &rhs).norm();
    let v0 = x.rows(0, n).into_owned();
    let w_t = x.rows(n, n).into_owned();

    let mut v = Vec::with_capacity(steps + 1);
    v.push(v0.clone());
    for j in 0..steps {
        let next = &s_h * &v[j];
        v.push(next);
    }
    let s_ht = s_h.transpose();
    let mut w = vec![DVector::zeros(n); steps + 1];
    w[steps] = w_t.clone();
    for j in (0..steps).rev() {
        w[j] = &s_ht * &w[j + 1];
    }

    let times: Vec<f64> = (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect();
    let mut ys = Vec::with_capacity(steps + 1);
    let mut ls = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let at = if j == 0 {
            start.clone()
        } else if j == steps {
            end.clone()
        } else {
            tp.eval(times[j])
        };
        let dl = &i_pe * &w[j] - p * &v[j];
        ys.push(at.y + &v[j] - e * &w[j]);
        us.push(at.u + &dec.qinv_bt * &dl);
        ls.push(at.lambda + dl);
    }
    let traj = finish(prob, &dec.qinv_bt, times, ys, ls, us)?;
    Ok((
        traj,
        BoundaryCoupling {
            matrix: k,
            rhs,
            v0,
            w_t,
            propagator: s_t,
            residual,
        },
    ))
}

/// Computes residuals, then pins `y(0) = y₀` and `λ(T) = 0` exactly.
fn finish(
    prob: &LqProblem,
    qinv_bt: &DMatrix<f64>,
    times: Vec<f64>,
    mut ys: Vec<DVector<f64>>,
    mut ls: Vec<DVector<f64>>,
    mut us: Vec<DVector<f64>>,
) -> Result<Trajectory> {
    let steps = times.len() - 1;
    let h = times[1] - times[0];
    let boundary_residual = (&ys[0] - &prob.y0).norm() + ls[steps].norm();
    let g = qinv_bt.clone();
    let ctc = prob.ctc();
    let a = &prob.a;
    let mut bvp_residual: f64 = 0.0;
    for k in 1..steps {
        let t = times[k];
        let u = prob.u_d_at(t) + &g * &ls[k];
        let fy = a * &ys[k] + &prob.b * u;
        let fl = &ctc * (&ys[k] - prob.y_d_at(t)) - a.transpose() * &ls[k];
        let ry = (&ys[k + 1] - &ys[k - 1]) / (2.0 * h) - fy;
        let rl = (&ls[k + 1] - &ls[k - 1]) / (2.0 * h) - fl;
        bvp_residual = bvp_residual.max((ry.norm_squared() + rl.norm_squared()).sqrt());
    }
    if ys.iter().chain(&ls).any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(TurnpikeError::SingularDiscretization { step: 0 });
    }
    ys[0] = prob.y0.clone();
    ls[steps].fill(0.0);
    us[steps] = prob.u_d_at(times[steps]);
    Ok(Trajectory {
        times,
        y: ys,
        lambda: ls,
        u: us,
        bvp_residual,
        boundary_residual,
    })
}

/// Crank–Nicolson solution of `ẋ = M x + f(t)` with `y(0) = y₀`,
/// `λ(T) = λ_T`, by backward elimination of the adjoint.
///
/// Each step `L x_{k+1} = R x_k + c_k` with `L = I − hM/2`, `R = I + hM/2` is
/// combined with the affine relation `λ_{k+1} = R_{k+1} y_{k+1} + s_{k+1}`
/// to express `(y_{k+1}, λ_k)` in terms of `y_k`.
type Samples = Vec<DVector<f64>>;

fn cn_sweep(
    m: &DMatrix<f64>,
    forcing: impl Fn(f64) -> DVector<f64>,
    y0: &DVector<f64>,
    lambda_t: &DVector<f64>,
    horizon: f64,
    steps: usize,
) -> Result<(Samples, Samples)> {
    let n = y0.len();
    let h = horizon / steps as f64;
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    let l = &id - m * (0.5 * h);
    let r = &id + m * (0.5 * h);
    let l_y = l.columns(0, n).into_owned();
    let l_l = l.columns(n, n).into_owned();
    let r_y = r.columns(0, n).into_owned();
    let r_l = r.columns(n, n).into_owned();
    let time = |k: usize| horizon * k as f64 / steps as f64;

    let mut riccati = DMatrix::<f64>::zeros(n, n);
    let mut offset = lambda_t.clone();
    let mut gains = Vec::with_capacity(steps);
    let mut f_next = forcing(time(steps));
    for k in (0..steps).rev() {
        let f_k = forcing(time(k));
        let c = (&f_k + &f_next) * (0.5 * h);
        let mut kmat = DMatrix::zeros(2 * n, 2 * n);
        kmat.columns_mut(0, n).copy_from(&(&l_y + &l_l * &riccati));
        kmat.columns_mut(n, n).copy_from(&(-&r_l));
        let mut rhs = DMatrix::zeros(2 * n, n + 1);
        rhs.columns_mut(0, n).copy_from(&r_y);
        rhs.column_mut(n).copy_from(&(c - &l_l * &offset));
        let x = kmat
            .lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or(TurnpikeError::SingularDiscretization { step: k })?;
        let forward = x.view((0, 0), (n, n)).into_owned();
        let forward_offset = x.view((0, n), (n, 1)).column(0).into_owned();
        riccati = x.view((n, 0), (n, n)).into_owned();
        offset = x.view((n, n), (n, 1)).column(0).into_owned();
        gains.push((forward, forward_offset, riccati.clone(), offset.clone()));
        f_next = f_k;
    }
    gains.reverse();

    let mut ys = Vec::with_capacity(steps + 1);
    let mut ls = Vec::with_capacity(steps + 1);
    ys.push(y0.clone());
    for (forward, forward_offset, ric, off) in &gains {
        let y = ys.last().unwrap();
        ls.push(ric * y + off);
        let next = forward * y + forward_offset;
        ys.push(next);
    }
    ls.push(lambda_t.clone());
    Ok((ys, ls))
}

/// Direct Crank–Nicolson solve of the full optimality system.
pub fn solve_horizon_direct(prob: &LqProblem, horizon: f64, steps: usize) -> Result<Trajectory> {
    check_horizon(horizon, steps)?;
    prob.validate()?;
    let n = prob.n();
    let mb = assemble_hamiltonian(&prob.a, &prob.b, &prob.c, &prob.q)?;
    let qinv_bt = nalgebra::Cholesky::new(prob.q.clone())
        .ok_or(TurnpikeError::SingularQ)?
        .solve(&prob.b.transpose());
    let ctc = mb.ctc();
    let forcing = |t: f64| {
        let mut f = DVector::zeros(2 * n);
        f.rows_mut(0, n).copy_from(&(&prob.b * prob.u_d_at(t)));
        f.rows_mut(n, n).copy_from(&(-(&ctc * prob.y_d_at(t))));
        f
    };
    let (ys, ls) = cn_sweep(&mb.m, forcing, &prob.y0, &DVector::zeros(n), horizon, steps)?;
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let us = times
        .iter()
        .zip(&ls)
        .map(|(&t, l)| prob.u_d_at(t) + &qinv_bt * l)
        .collect();
    finish(prob, &qinv_bt, times, ys, ls, us)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRatio {
    pub horizon: f64,
    /// `max (‖y(T)‖ + ‖λ(0)‖)/(‖y(0)‖ + ‖λ(T)‖)` over the boundary samples.
    pub ratio: f64,
}

/// Empirical bound on the homogeneous boundary-to-boundary map: for each
/// horizon, solves the target-free system from `samples` seeded random
/// boundary pairs (the same pairs for every horizon) with step close to
/// `1/steps_per_unit`.
pub fn check_stability_estimate(
    prob: &LqProblem,
    horizons: &[f64],
    steps_per_unit: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<StabilityRatio>> {
    if !(steps_per_unit > 0.0) || samples == 0 {
        return Err(TurnpikeError::InvalidHorizon(format!(
            "need positive resolution and samples, got {steps_per_unit} and {samples}"
        )));
    }
    let n = prob.n();
    let mb = assemble_hamiltonian(&prob.a, &prob.b, &prob.c, &prob.q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..samples)
        .map(|_| {
            let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            (a, b)
        })
        .collect();
    horizons
        .iter()
        .map(|&horizon| {
            let steps = ((horizon * steps_per_unit).round() as usize).max(2);
            check_horizon(horizon, steps)?;
            let mut worst: f64 = 0.0;
            for (a, b) in &pairs {
                let (ys, ls) = cn_sweep(&mb.m, |_| DVector::zeros(2 * n), a, b, horizon, steps)?;
                let r = (ys[steps].norm() + ls[0].norm()) / (a.norm() + b.norm());
                worst = worst.max(r);
            }
            Ok(StabilityRatio { horizon, ratio: worst })
        })
        .collect()
}
