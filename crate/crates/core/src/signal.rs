//! Periodic target signals `y_d(·)`, `u_d(·)`.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TurnpikeError};

/// Relative periodicity tolerance for tabulated signals.
pub const TOL_PER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    /// Multiple of the base frequency `2π/Π`.
    pub k: u32,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub offset: Vec<f64>,
    pub harmonics: Vec<Harmonic>,
}

/// A `Π`-periodic vector signal.
///
/// `Table` holds uniformly spaced samples over `[0, Π]` (both endpoints
/// included) and is evaluated by linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "lowercase")]
pub enum Signal {
    Constant(Vec<f64>),
    Sinusoid(Sinusoid),
    Table(Vec<Vec<f64>>),
}

impl Signal {
    pub fn zeros(dim: usize) -> Self {
        Signal::Constant(vec![0.0; dim])
    }

    /// Samples `f` at `samples + 1` uniform points of `[0, period]`.
    pub fn from_fn(period: f64, samples: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let rows = (0..=samples)
            .map(|i| f(period * i as f64 / samples as f64))
            .collect();
        Signal::Table(rows)
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Constant(v) => v.len(),
            Signal::Sinusoid(s) => s.offset.len(),
            Signal::Table(rows) => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Signal::Constant(_) => true,
            Signal::Sinusoid(s) => s
                .harmonics
                .iter()
                .all(|h| h.k == 0 || (h.cos.iter().all(|&c| c == 0.0) && h.sin.iter().all(|&c| c == 0.0))),
            Signal::Table(rows) => rows.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn eval(&self, t: f64, period: f64) -> DVector<f64> {
        match self {
            Signal::Constant(v) => DVector::from_column_slice(v),
            Signal::Sinusoid(s) => {
                let mut out = DVector::from_column_slice(&s.offset);
                for h in &s.harmonics {
                    let arg = 2.0 * PI * h.k as f64 * t / period;
                    let (sn, cs) = arg.sin_cos();
                    for i in 0..out.len() {
                        out[i] += h.cos[i] * cs + h.sin[i] * sn;
                    }
                }
                out
            }
            Signal::Table(rows) => {
                let intervals = rows.len() - 1;
                let tau = t.rem_euclid(period) / period * intervals as f64;
                let i = (tau.floor() as usize).min(intervals - 1);
                let frac = tau - i as f64;
                let (lo, hi) = (&rows[i], &rows[i + 1]);
                DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(a, b)| a + frac * (b - a)))
            }
        }
    }

    /// Checks dimension and periodicity; `field` names the signal in errors.
    pub fn validate(&self, dim: usize, field: &str) -> Result<()> {
        let bad = |reason: String| TurnpikeError::Validation {
            field: field.to_string(),
            reason,
        };
        if self.dim() != dim {
            return Err(bad(format!("dimension {} but expected {dim}", self.dim())));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Signal::Constant(v) => {
                if !finite(v) {
                    return Err(bad("non-finite entry".into()));
                }
            }
            Signal::Sinusoid(s) => {
                if !finite(&s.offset) {
                    return Err(bad("non-finite entry".into()));
                }
                for h in &s.harmonics {
                    if h.cos.len() != dim || h.sin.len() != dim {
                        return Err(bad(format!("harmonic {} has wrong coefficient length", h.k)));
                    }
                    if !finite(&h.cos) || !finite(&h.sin) {
                        return Err(bad("non-finite entry".into()));
                    }
                }
            }
            Signal::Table(rows) => {
                if rows.len() < 2 {
                    return Err(bad("table needs at least two samples".into()));
                }
                if rows.iter().any(|r| r.len() != dim || !finite(r)) {
                    return Err(bad("table rows have inconsistent length or non-finite entries".into()));
                }
                let first = &rows[0];
                let last = &rows[rows.len() - 1];
                let scale = 1.0 + rows.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                let gap = first.iter().zip(last).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if gap > TOL_PER * scale {
                    return Err(bad("signal not periodic".into()));
                }
            }
        }
        Ok(())
    }
}
