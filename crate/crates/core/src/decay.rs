//! Deviation from the turnpike and its two-sided exponential envelope
//! `c (e^{−νt} + e^{−ν(T−t)})`.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Result, TurnpikeError};
use crate::horizon::{fmt, Trajectory};
use crate::periodic::PeriodicTurnpike;
use crate::steady::SteadyTriple;

/// Minimum number of usable samples for a fit.
pub const MIN_SAMPLES: usize = 8;

/// Fit window as fractions of the horizon.
pub const WINDOW: (f64, f64) = (0.05, 0.95);

/// Deviations at or below this level are round-off and take no part in
/// fitting or majorization.
pub const ROUND_OFF_FLOOR: f64 = 100.0 * f64::EPSILON;

const NU_MIN: f64 = 1e-4;
const NU_MAX: f64 = 1e4;

/// What the trajectory is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Steady(&'a SteadyTriple),
    Periodic(&'a PeriodicTurnpike),
}

#[derive(Debug, Clone)]
pub struct DeviationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// `d(t_k) = ‖y − ȳ‖ + ‖u − ū‖ + ‖λ − λ̄‖` at each sample.
pub fn deviation_series(traj: &Trajectory, reference: Reference<'_>) -> Result<DeviationSeries> {
    let n = traj.y[0].len();
    let dim = match reference {
        Reference::Steady(s) => s.y_s.len(),
        Reference::Periodic(tp) => tp.y.values[0].len(),
    };
    if dim != n {
        return Err(TurnpikeError::GridMismatch(format!(
            "trajectory has state dimension {n}, reference has {dim}"
        )));
    }
    let values = traj
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (y, u, l): (DVector<f64>, DVector<f64>, DVector<f64>) = match reference {
                Reference::Steady(s) => (s.y_s.clone(), s.u_s.clone(), s.lambda_s.clone()),
                Reference::Periodic(tp) => {
                    let at = tp.eval(t);
                    (at.y, at.u, at.lambda)
                }
            };
            (&traj.y[k] - y).norm() + (&traj.u[k] - u).norm() + (&traj.lambda[k] - l).norm()
        })
        .collect();
    Ok(DeviationSeries {
        times: traj.times.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c_hat: f64,
    pub nu_hat: f64,
    /// RMS of the log-residual over the samples used.
    pub rms_log_error: f64,
    pub horizon: f64,
    pub samples_used: usize,
}

/// `log(e^{−νt} + e^{−ν(T−t)})` without underflow.
fn log_shape(nu: f64, t: f64, horizon: f64) -> f64 {
    let near = t.min(horizon - t);
    let far = t.max(horizon - t);
    -nu * near + (-nu * (far - near)).exp().ln_1p()
}

impl DecayFit {
    pub fn envelope(&self, t: f64) -> f64 {
        self.c_hat * log_shape(self.nu_hat, t, self.horizon).exp()
    }

    /// Whether `d ≤ envelope·e^{2·rms}` at every sample with time in
    /// `[from, to]` and `d` above [`ROUND_OFF_FLOOR`].
    pub fn majorizes(&self, series: &DeviationSeries, from: f64, to: f64) -> bool {
        let slack = (2.0 * self.rms_log_error).exp();
        series
            .times
            .iter()
            .zip(&series.values)
            .filter(|(&t, &d)| t >= from && t <= to && d > ROUND_OFF_FLOOR)
            .all(|(&t, &d)| d <= self.envelope(t) * slack)
    }
}

/// Least-squares fit of `log d` against `log c + log(e^{−νt} + e^{−ν(T−t)})`
/// over the window `[0.05T, 0.95T]`, ignoring samples at round-off level.
///
/// `log c` has a closed form for fixed `ν`; `ν` itself is found by a
/// logarithmic scan followed by golden-section refinement.
pub fn fit_envelope(series: &DeviationSeries, horizon: f64) -> Result<DecayFit> {
    let (lo, hi) = (WINDOW.0 * horizon, WINDOW.1 * horizon);
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(&t, &d)| t >= lo && t <= hi && d > ROUND_OFF_FLOOR && d.is_finite())
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < MIN_SAMPLES {
        return Err(TurnpikeError::DegenerateData(format!(
            "{} usable samples in the fit window, need {MIN_SAMPLES}",
            pts.len()
        )));
    }
    let fit_at = |nu: f64| -> (f64, f64) {
        let log_c = pts.iter().map(|&(t, ld)| ld - log_shape(nu, t, horizon)).sum::<f64>() / pts.len() as f64;
        let sse = pts
            .iter()
            .map(|&(t, ld)| {
                let r = ld - log_c - log_shape(nu, t, horizon);
                r * r
            })
            .sum::<f64>();
        (log_c, sse)
    };

    const SCAN: usize = 161;
    let grid: Vec<f64> = (0..SCAN)
        .map(|i| NU_MIN * (NU_MAX / NU_MIN).powf(i as f64 / (SCAN - 1) as f64))
        .collect();
    let best = (0..SCAN)
        .min_by(|&i, &j| fit_at(grid[i]).1.total_cmp(&fit_at(grid[j]).1))
        .unwrap();
    if best == 0 {
        return Err(TurnpikeError::NoDecay { rate: grid[0] });
    }
    let (mut a, mut b) = (grid[best - 1], grid[(best + 1).min(SCAN - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (fit_at(x1).1, fit_at(x2).1);
    while b - a > 1e-12 * b {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = fit_at(x1).1;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = fit_at(x2).1;
        }
    }
    let nu_hat = 0.5 * (a + b);
    if nu_hat <= NU_MIN * 1.0001 {
        return Err(TurnpikeError::NoDecay { rate: nu_hat });
    }
    let (log_c, sse) = fit_at(nu_hat);
    Ok(DecayFit {
        c_hat: log_c.exp(),
        nu_hat,
        rms_log_error: (sse / pts.len() as f64).sqrt(),
        horizon,
        samples_used: pts.len(),
    })
}

/// `|ν̂ − ν| / ν`
pub fn compare_rate(fit: &DecayFit, nu_spectral: f64) -> f64 {
    (fit.nu_hat - nu_spectral).abs() / nu_spectral
}

/// Header of the fit CSV.
pub const FIT_HEADER: &str = "problem,T,c_hat,nu_hat,nu_spectral,rel_err,rms_log_error";

/// One fit CSV row.
pub fn write_fit_row(out: &mut impl Write, problem: &str, fit: &DecayFit, nu_spectral: f64) -> std::io::Result<()> {
    writeln!(
        out,
        "{problem},{},{},{},{},{},{}",
        fmt(fit.horizon),
        fmt(fit.c_hat),
        fmt(fit.nu_hat),
        fmt(nu_spectral),
        fmt(compare_rate(fit, nu_spectral)),
        fmt(fit.rms_log_error)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, nu: f64, horizon: f64, k: usize) -> DeviationSeries {
        let times: Vec<f64> = (0..=k).map(|i| horizon * i as f64 / k as f64).collect();
        let values = times.iter().map(|&t| c * ((-nu * t).exp() + (-nu * (horizon - t)).exp())).collect();
        DeviationSeries { times, values }
    }

    #[test]
    fn exact_envelope_is_recovered() {
        let s = synthetic(0.7, 1.3, 20.0, 400);
        let fit = fit_envelope(&s, 20.0).unwrap();
        assert!((fit.nu_hat - 1.3).abs() < 1e-8, "{}", fit.nu_hat);
        assert!((fit.c_hat - 0.7).abs() < 1e-7);
        assert!(fit.rms_log_error < 1e-8);
        assert!(fit.majorizes(&s, 1.0, 19.0));
    }

    #[test]
    fn too_few_samples() {
        let s = synthetic(1.0, 1.0, 10.0, 6);
        assert!(matches!(fit_envelope(&s, 10.0), Err(TurnpikeError::DegenerateData(_))));
    }

    #[test]
    fn flat_series_has_no_decay() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let values = vec![1.0; times.len()];
        let r = fit_envelope(&DeviationSeries { times, values }, 10.0);
        assert!(matches!(r, Err(TurnpikeError::NoDecay { .. })), "{r:?}");
    }

    #[test]
    fn round_off_samples_are_ignored() {
        let mut s = synthetic(1.0, 2.0, 30.0, 600);
        for v in s.values.iter_mut() {
            if *v < 1e-14 {
                *v = 0.0;
            }
        }
        let fit = fit_envelope(&s, 30.0).unwrap();
        assert!((fit.nu_hat - 2.0).abs() < 1e-6);
    }

    #[test]
    fn log_shape_is_stable() {
        assert!((log_shape(1.0, 0.0, 4.0) - (1.0 + (-4f64).exp()).ln()).abs() < 1e-15);
        assert!(log_shape(1e3, 100.0, 200.0).is_finite());
    }
}
