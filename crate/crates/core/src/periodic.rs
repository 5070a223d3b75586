//! Periodic turnpike `(y^Π, λ^Π, u^Π)`.
//!
//! In the decoupled coordinates `(z, q) = T (y, λ)` the optimality system
//! splits into `ż = A_cl z + g` and `q̇ = −A_clᵀ q + h`. Both are stable in
//! their natural direction of time (forward for `z`, backward for `q`), so each
//! has a unique `Π`-periodic solution. They are computed with Crank–Nicolson
//! stepping and a discrete periodic closure, which makes the sampled solution
//! exactly periodic at the discrete level.

use nalgebra::{DMatrix, DVector};

use crate::dichotomy::Decoupling;
use crate::error::{Result, TurnpikeError};
use crate::linalg::expm;
use crate::signal::Signal;
use crate::zoo::LqProblem;

/// Samples per period when the caller does not choose.
pub const DEFAULT_SAMPLES: usize = 200;

/// Uniform samples `x(kΠ/N)`, `k = 0..=N`, of a `Π`-periodic signal.
#[derive(Debug, Clone)]
pub struct PeriodicSignal {
    pub period: f64,
    pub values: Vec<DVector<f64>>,
}

impl PeriodicSignal {
    pub fn samples(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.period / self.samples() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.period * k as f64 / self.samples() as f64
    }

    /// `‖x(Π) − x(0)‖`
    pub fn closure_defect(&self) -> f64 {
        (&self.values[self.samples()] - &self.values[0]).norm()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `exp(Π A_cl)`
pub fn monodromy(a_cl: &DMatrix<f64>, period: f64) -> Result<DMatrix<f64>> {
    expm(&(a_cl * period))
}

fn check_grid(period: f64, samples: usize) -> Result<()> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(TurnpikeError::PeriodMismatch(format!("period must be positive, got {period}")));
    }
    if samples < 2 {
        return Err(TurnpikeError::GridMismatch(format!("need at least 2 samples per period, got {samples}")));
    }
    Ok(())
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

/// Periodic solution of `ẋ = a x + f(t)` from samples `f_k`, `k = 0..=N`.
fn cn_periodic(a: &DMatrix<f64>, forcing: &[DVector<f64>], period: f64) -> Result<Vec<DVector<f64>>> {
    let n = a.nrows();
    let steps = forcing.len() - 1;
    let h = period / steps as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = (&id - a * (0.5 * h)).lu();
    let phi = lhs
        .solve(&(&id + a * (0.5 * h)))
        .ok_or(TurnpikeError::SingularDiscretization { step: 0 })?;
    let kick = |k: usize| -> DVector<f64> {
        lhs.solve(&((&forcing[k] + &forcing[k + 1]) * (0.5 * h)))
            .expect("factorization already checked")
    };
    let kicks: Vec<DVector<f64>> = (0..steps).map(kick).collect();

    let mut forced = DVector::zeros(n);
    for k_vec in &kicks {
        forced = &phi * forced + k_vec;
    }
    let closure = &id - mat_pow(&phi, steps);
    let sv = closure.singular_values();
    if !(sv.min() > 1e-12 * sv.max().max(1.0)) {
        return Err(TurnpikeError::SingularMonodromy);
    }
    let x0 = closure.lu().solve(&forced).ok_or(TurnpikeError::SingularMonodromy)?;

    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0);
    for k_vec in &kicks {
        let next = &phi * out.last().unwrap() + k_vec;
        out.push(next);
    }
    Ok(out)
}

/// Periodic solution of `ż = A_cl z + g(t)` on `samples` steps per period.
pub fn periodic_z(
    a_cl: &DMatrix<f64>,
    g: impl Fn(f64) -> DVector<f64>,
    period: f64,
    samples: usize,
) -> Result<PeriodicSignal> {
    check_grid(period, samples)?;
    let forcing: Vec<_> = (0..=samples).map(|k| g(period * k as f64 / samples as f64)).collect();
    Ok(PeriodicSignal {
        period,
        values: cn_periodic(a_cl, &forcing, period)?,
    })
}

/// Periodic solution of `q̇ = −A_clᵀ q + h(t)`, integrated in reversed time
/// `s = Π − t` where it reads `dr/ds = A_clᵀ r − h(Π − s)`.
pub fn periodic_q(
    a_cl: &DMatrix<f64>,
    h: impl Fn(f64) -> DVector<f64>,
    period: f64,
    samples: usize,
) -> Result<PeriodicSignal> {
    check_grid(period, samples)?;
    let forcing: Vec<_> = (0..=samples)
        .map(|k| -h(period * (samples - k) as f64 / samples as f64))
        .collect();
    let mut r = cn_periodic(&a_cl.transpose(), &forcing, period)?;
    r.reverse();
    Ok(PeriodicSignal { period, values: r })
}

/// State, adjoint and control at one instant.
#[derive(Debug, Clone)]
pub struct TurnpikePoint {
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct PeriodicTurnpike {
    pub period: f64,
    pub z: PeriodicSignal,
    pub q: PeriodicSignal,
    pub y: PeriodicSignal,
    pub lambda: PeriodicSignal,
    pub u: PeriodicSignal,
    /// Right-hand side of the optimality system at each sample, used for
    /// Hermite interpolation between samples.
    pub y_dot: Vec<DVector<f64>>,
    pub lambda_dot: Vec<DVector<f64>>,
    /// Largest central-difference residual of the optimality system.
    pub optimality_residual: f64,
    /// Largest `‖x(Π) − x(0)‖` over `y`, `λ`, `u`.
    pub periodicity_residual: f64,
    u_d: Signal,
    qinv_bt: DMatrix<f64>,
}

/// Maps `(z, q)` back to `(y^Π, λ^Π, u^Π)`.
pub fn synthesize(z: &PeriodicSignal, q: &PeriodicSignal, dec: &Decoupling, prob: &LqProblem) -> Result<PeriodicTurnpike> {
    if z.samples() != q.samples() || z.period != q.period {
        return Err(TurnpikeError::GridMismatch(format!(
            "z has {} samples over {}, q has {} over {}",
            z.samples(),
            z.period,
            q.samples(),
            q.period
        )));
    }
    if (z.period - prob.period).abs() > 1e-12 * prob.period {
        return Err(TurnpikeError::PeriodMismatch(format!(
            "turnpike period {} differs from problem period {}",
            z.period, prob.period
        )));
    }
    let n = dec.n();
    let id = DMatrix::<f64>::identity(n, n);
    let (p, e) = (dec.p(), dec.e());
    let i_pe = &id + p * e;
    let mut ys = Vec::with_capacity(z.values.len());
    let mut ls = Vec::with_capacity(z.values.len());
    let mut us = Vec::with_capacity(z.values.len());
    for (zk, qk) in z.values.iter().zip(&q.values) {
        ys.push(zk - e * qk);
        let lk = &i_pe * qk - p * zk;
        us.push(&dec.qinv_bt * &lk);
        ls.push(lk);
    }
    for (k, uk) in us.iter_mut().enumerate() {
        *uk += prob.u_d_at(z.time(k));
    }

    let a = &prob.a;
    let g = dec.block.gram();
    let ctc = dec.block.ctc();
    let mut y_dot = Vec::with_capacity(ys.len());
    let mut lambda_dot = Vec::with_capacity(ys.len());
    for k in 0..ys.len() {
        let t = z.time(k);
        y_dot.push(a * &ys[k] + &g * &ls[k] + &prob.b * prob.u_d_at(t));
        lambda_dot.push(&ctc * (&ys[k] - prob.y_d_at(t)) - a.transpose() * &ls[k]);
    }

    let steps = z.samples();
    let h = z.step();
    let mut optimality_residual: f64 = 0.0;
    for k in 0..steps {
        let prev = if k == 0 { steps - 1 } else { k - 1 };
        let dy = (&ys[k + 1] - &ys[prev]) / (2.0 * h) - &y_dot[k];
        let dl = (&ls[k + 1] - &ls[prev]) / (2.0 * h) - &lambda_dot[k];
        optimality_residual = optimality_residual.max(dy.norm().max(dl.norm()));
    }

    let wrap = |values: Vec<DVector<f64>>| PeriodicSignal {
        period: z.period,
        values,
    };
    let (y, lambda, u) = (wrap(ys), wrap(ls), wrap(us));
    let periodicity_residual = y.closure_defect().max(lambda.closure_defect()).max(u.closure_defect());
    Ok(PeriodicTurnpike {
        period: z.period,
        z: z.clone(),
        q: q.clone(),
        y,
        lambda,
        u,
        y_dot,
        lambda_dot,
        optimality_residual,
        periodicity_residual,
        u_d: prob.u_d.clone(),
        qinv_bt: dec.qinv_bt.clone(),
    })
}

/// Periodic turnpike of `prob` sampled on `samples` steps per period.
pub fn periodic_turnpike(prob: &LqProblem, dec: &Decoupling, samples: usize) -> Result<PeriodicTurnpike> {
    let n = dec.n();
    let id = DMatrix::<f64>::identity(n, n);
    let (p, e) = (dec.p(), dec.e());
    let ctc = dec.block.ctc();
    let g_u = (&id + e * p) * &prob.b;
    let g_y = e * &ctc;
    let h_u = p * &prob.b;
    let g = |t: f64| {
        let (ud, yd) = (prob.u_d_at(t), prob.y_d_at(t));
        &g_u * &ud - &g_y * &yd
    };
    let h = |t: f64| {
        let (ud, yd) = (prob.u_d_at(t), prob.y_d_at(t));
        &h_u * &ud - &ctc * &yd
    };
    let z = periodic_z(dec.a_cl(), g, prob.period, samples)?;
    let q = periodic_q(dec.a_cl(), h, prob.period, samples)?;
    synthesize(&z, &q, dec, prob)
}

impl PeriodicTurnpike {
    pub fn samples(&self) -> usize {
        self.y.samples()
    }

    /// Evaluates the turnpike at any `t`, reduced modulo `Π`. Sample times
    /// return the stored values; elsewhere cubic Hermite interpolation with
    /// the stored derivatives is used.
    pub fn eval(&self, t: f64) -> TurnpikePoint {
        let steps = self.samples();
        let h = self.y.step();
        let tau = reduce_mod(t, self.period);
        let s = tau / h;
        let k = s.round();
        if (s - k).abs() < 1e-9 {
            let k = (k as usize) % steps;
            return TurnpikePoint {
                y: self.y.values[k].clone(),
                lambda: self.lambda.values[k].clone(),
                u: self.u.values[k].clone(),
            };
        }
        let k = (s.floor() as usize).min(steps - 1);
        let theta = s - k as f64;
        let y = hermite(&self.y.values[k], &self.y.values[k + 1], &self.y_dot[k], &self.y_dot[k + 1], h, theta);
        let lambda = hermite(
            &self.lambda.values[k],
            &self.lambda.values[k + 1],
            &self.lambda_dot[k],
            &self.lambda_dot[k + 1],
            h,
            theta,
        );
        let u = self.u_d.eval(tau, self.period) + &self.qinv_bt * &lambda;
        TurnpikePoint { y, lambda, u }
    }
}

/// `t mod Π` in `[0, Π)`, snapping values within `1e−12·Π` of `Π` to zero.
pub fn reduce_mod(t: f64, period: f64) -> f64 {
    let tau = t - (t / period).floor() * period;
    if period - tau < 1e-12 * period || tau < 0.0 {
        0.0
    } else {
        tau
    }
}

fn hermite(
    x0: &DVector<f64>,
    x1: &DVector<f64>,
    d0: &DVector<f64>,
    d1: &DVector<f64>,
    h: f64,
    s: f64,
) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    x0 * h00 + d0 * (h10 * h) + x1 * h01 + d1 * (h11 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::solve_static;
    use crate::zoo;

    #[test]
    fn zero_forcing_gives_zero_turnpike() {
        let prob = zoo::scalar_tracking().with_targets(Signal::zeros(1), Signal::zeros(1));
        let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q).unwrap();
        let tp = periodic_turnpike(&prob, &dec, 50).unwrap();
        assert_eq!(tp.y.max_norm() + tp.lambda.max_norm() + tp.u.max_norm(), 0.0);
    }

    #[test]
    fn constant_targets_reduce_to_steady_state() {
        let prob = zoo::scalar_tracking();
        let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q).unwrap();
        let tp = periodic_turnpike(&prob, &dec, 40).unwrap();
        let s = solve_static(&prob.a, &prob.b, &prob.c, &prob.q, &prob.y_d_at(0.0), &prob.u_d_at(0.0)).unwrap();
        for k in 0..=40 {
            assert!((&tp.y.values[k] - &s.y_s).norm() < 1e-12);
            assert!((&tp.lambda.values[k] - &s.lambda_s).norm() < 1e-12);
            assert!((&tp.u.values[k] - &s.u_s).norm() < 1e-12);
        }
    }

    #[test]
    fn double_integrator_turnpike_is_periodic_and_consistent() {
        let prob = zoo::double_integrator_circle();
        let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q).unwrap();
        let tp = periodic_turnpike(&prob, &dec, 400).unwrap();
        assert!(tp.periodicity_residual <= 1e-9, "{}", tp.periodicity_residual);
        let scale = 1.0 + tp.y.max_norm() + tp.lambda.max_norm();
        assert!(tp.optimality_residual <= 1e-3 * scale, "{}", tp.optimality_residual);
        // halving the step cuts the residual by about four
        let fine = periodic_turnpike(&prob, &dec, 800).unwrap();
        let ratio = tp.optimality_residual / fine.optimality_residual;
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn eval_hits_samples_and_wraps() {
        let prob = zoo::double_integrator_circle();
        let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q).unwrap();
        let tp = periodic_turnpike(&prob, &dec, 100).unwrap();
        let at = tp.eval(3.0 + 0.25);
        assert_eq!(at.y, tp.y.values[25]);
        let mid = tp.eval(0.125 + 1e-3);
        let lo = &tp.y.values[12];
        let hi = &tp.y.values[13];
        assert!((&mid.y - lo).norm() < (hi - lo).norm() * 2.0);
        assert_eq!(reduce_mod(1.0 - 1e-14, 1.0), 0.0);
        assert_eq!(reduce_mod(-0.25, 1.0), 0.75);
    }

    #[test]
    fn singular_closure_is_rejected() {
        // a purely oscillatory generator with period matching the grid
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        let r = periodic_z(&a, |_| DVector::zeros(2), 1.0, 10);
        assert!(matches!(r, Err(TurnpikeError::SingularMonodromy)));
    }

    #[test]
    fn monodromy_of_double_integrator_contracts() {
        let s3 = 3f64.sqrt();
        let a_cl = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -s3]);
        let m = monodromy(&a_cl, 1.0).unwrap();
        let rho = m.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
        assert!((rho - (-s3 / 2.0).exp()).abs() < 1e-12);
    }
}
