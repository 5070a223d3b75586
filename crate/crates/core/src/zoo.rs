//! Problem instances: the double integrator tracking a circle, semi-discretized
//! heat and wave equations, and JSON problem files.

use std::ops::RangeInclusive;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TurnpikeError};
use crate::riccati::{control_gram, TOL_SYM};
use crate::signal::{Harmonic, Signal, Sinusoid};

/// A linear-quadratic tracking instance
/// `ẏ = Ay + Bu`, cost `½∫ ‖C(y − y_d)‖² + ‖Q^{1/2}(u − u_d)‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqProblem {
    pub label: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub period: f64,
    pub y_d: Signal,
    pub u_d: Signal,
    pub y0: DVector<f64>,
    /// Gram matrix of the energy inner product, when the state space carries one.
    pub energy_weights: Option<DMatrix<f64>>,
}

impl LqProblem {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn gram(&self) -> Result<DMatrix<f64>> {
        control_gram(&self.b, &self.q)
    }

    pub fn ctc(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }

    pub fn y_d_at(&self, t: f64) -> DVector<f64> {
        self.y_d.eval(t, self.period)
    }

    pub fn u_d_at(&self, t: f64) -> DVector<f64> {
        self.u_d.eval(t, self.period)
    }

    pub fn has_constant_targets(&self) -> bool {
        self.y_d.is_constant() && self.u_d.is_constant()
    }

    pub fn with_targets(mut self, y_d: Signal, u_d: Signal) -> Self {
        self.y_d = y_d;
        self.u_d = u_d;
        self
    }

    pub fn with_initial_state(mut self, y0: DVector<f64>) -> Self {
        self.y0 = y0;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks every structural invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| TurnpikeError::Validation {
            field: field.to_string(),
            reason,
        };
        let (n, m) = (self.n(), self.m());
        if n == 0 {
            return Err(bad("A", "empty state space".into()));
        }
        if self.a.ncols() != n {
            return Err(bad("A", format!("must be square, got {}x{}", n, self.a.ncols())));
        }
        if self.b.nrows() != n {
            return Err(bad("B", format!("must have {n} rows, got {}", self.b.nrows())));
        }
        if self.c.ncols() != n {
            return Err(bad("C", format!("must have {n} columns, got {}", self.c.ncols())));
        }
        if self.q.shape() != (m, m) {
            return Err(bad("Q", format!("must be {m}x{m}, got {}x{}", self.q.nrows(), self.q.ncols())));
        }
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("C", &self.c), ("Q", &self.q)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(bad(name, "non-finite entry".into()));
            }
        }
        if (&self.q - self.q.transpose()).norm() > TOL_SYM * (1.0 + self.q.norm()) {
            return Err(bad("Q", "not symmetric".into()));
        }
        if m > 0 {
            let min_eig = self.q.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            if !(min_eig > 0.0) {
                return Err(bad("Q", format!("not positive definite (smallest eigenvalue {min_eig:e})")));
            }
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(bad("Pi", format!("period must be positive, got {}", self.period)));
        }
        if self.y0.len() != n {
            return Err(bad("y0", format!("length {} but expected {n}", self.y0.len())));
        }
        self.y_d.validate(n, "y_d")?;
        self.u_d.validate(m, "u_d")?;
        if let Some(w) = &self.energy_weights {
            if w.shape() != (n, n) {
                return Err(bad("energy_weights", format!("must be {n}x{n}")));
            }
        }
        Ok(())
    }
}

fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

/// Double integrator tracking the unit circle with period 1.
pub fn double_integrator_circle() -> LqProblem {
    LqProblem {
        label: "double-integrator".into(),
        a: mat(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        b: mat(2, 1, &[0.0, 1.0]),
        c: DMatrix::identity(2, 2),
        q: DMatrix::identity(1, 1),
        period: 1.0,
        y_d: Signal::Sinusoid(Sinusoid {
            offset: vec![0.0, 0.0],
            harmonics: vec![Harmonic {
                k: 1,
                cos: vec![1.0, 0.0],
                sin: vec![0.0, 1.0],
            }],
        }),
        u_d: Signal::zeros(1),
        y0: DVector::from_column_slice(&[0.1, 0.0]),
        energy_weights: None,
    }
}

/// `ẏ = −y + u`, unit weights, constant target `y_d = 1`.
pub fn scalar_tracking() -> LqProblem {
    LqProblem {
        label: "scalar".into(),
        a: mat(1, 1, &[-1.0]),
        b: mat(1, 1, &[1.0]),
        c: mat(1, 1, &[1.0]),
        q: mat(1, 1, &[1.0]),
        period: 1.0,
        y_d: Signal::Constant(vec![1.0]),
        u_d: Signal::zeros(1),
        y0: DVector::from_column_slice(&[0.5]),
        energy_weights: None,
    }
}

/// Two decoupled stable modes, control on the first, nothing observed: the
/// Lyapunov solution `E` is singular.
pub fn singular_lyapunov_example() -> LqProblem {
    LqProblem {
        label: "singular-e".into(),
        a: -DMatrix::identity(2, 2),
        b: mat(2, 1, &[1.0, 0.0]),
        c: DMatrix::zeros(1, 2),
        q: DMatrix::identity(1, 1),
        period: 1.0,
        y_d: Signal::zeros(2),
        u_d: Signal::zeros(1),
        y0: DVector::zeros(2),
        energy_weights: None,
    }
}

fn check_range(n: usize, r: &RangeInclusive<usize>, name: &str) -> Result<()> {
    if r.is_empty() || *r.start() < 1 || *r.end() > n {
        return Err(TurnpikeError::BadSubdomain(format!(
            "{name} = {}..={} must be a nonempty range within 1..={n}",
            r.start(),
            r.end()
        )));
    }
    Ok(())
}

/// `n × |ω|` injection of the nodes in `omega` (1-based), scaled by `scale`.
fn selection(n: usize, omega: &RangeInclusive<usize>, scale: f64) -> DMatrix<f64> {
    let cols: Vec<usize> = omega.clone().collect();
    let mut s = DMatrix::zeros(n, cols.len());
    for (j, &node) in cols.iter().enumerate() {
        s[(node - 1, j)] = scale;
    }
    s
}

/// Dirichlet Laplacian `(1/h²) tridiag(1, −2, 1)` on `n` interior nodes of (0, 1).
pub fn dirichlet_laplacian(n: usize) -> DMatrix<f64> {
    let h = 1.0 / (n as f64 + 1.0);
    let s = 1.0 / (h * h);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * s
        } else if i.abs_diff(j) == 1 {
            s
        } else {
            0.0
        }
    })
}

/// Node coordinates `x_i = i h`, `i = 1..=n`.
pub fn grid_nodes(n: usize) -> Vec<f64> {
    let h = 1.0 / (n as f64 + 1.0);
    (1..=n).map(|i| i as f64 * h).collect()
}

/// Heat equation `y_t − y_xx + a(x) y = χ_{ω₂} u` on (0, 1) with Dirichlet
/// ends, observed on `ω₁`. Targets default to zero and period 1.
pub fn heat_1d(
    n: usize,
    potential: &[f64],
    omega1: RangeInclusive<usize>,
    omega2: RangeInclusive<usize>,
) -> Result<LqProblem> {
    if n < 3 {
        return Err(TurnpikeError::BadSubdomain(format!("need at least 3 interior nodes, got {n}")));
    }
    if potential.len() != n {
        return Err(TurnpikeError::Validation {
            field: "a".into(),
            reason: format!("potential has {} samples, expected {n}", potential.len()),
        });
    }
    check_range(n, &omega1, "omega1")?;
    check_range(n, &omega2, "omega2")?;
    let h = 1.0 / (n as f64 + 1.0);
    let a = dirichlet_laplacian(n) - DMatrix::from_diagonal(&DVector::from_column_slice(potential));
    let b = selection(n, &omega2, h.sqrt());
    let c = selection(n, &omega1, h.sqrt()).transpose();
    let m = b.ncols();
    Ok(LqProblem {
        label: format!("heat-{n}"),
        a,
        b,
        c,
        q: DMatrix::identity(m, m),
        period: 1.0,
        y_d: Signal::Constant(vec![0.0; n]),
        u_d: Signal::zeros(m),
        y0: DVector::zeros(n),
        energy_weights: None,
    })
}

/// Wave equation `z_tt − z_xx = χ_{ω₂} u` as a first-order system in
/// `(z, z_t)`, observing the velocity on `ω₁`.
pub fn wave_1d(n: usize, omega1: RangeInclusive<usize>, omega2: RangeInclusive<usize>) -> Result<LqProblem> {
    if n < 3 {
        return Err(TurnpikeError::BadSubdomain(format!("need at least 3 interior nodes, got {n}")));
    }
    check_range(n, &omega1, "omega1")?;
    check_range(n, &omega2, "omega2")?;
    let h = 1.0 / (n as f64 + 1.0);
    let lap = dirichlet_laplacian(n);
    let zero = DMatrix::zeros(n, n);
    let id = DMatrix::identity(n, n);
    let a = crate::linalg::block2(&zero, &id, &lap, &zero);
    let s2 = selection(n, &omega2, h.sqrt());
    let mut b = DMatrix::zeros(2 * n, s2.ncols());
    b.view_mut((n, 0), (n, s2.ncols())).copy_from(&s2);
    let s1 = selection(n, &omega1, h.sqrt()).transpose();
    let mut c = DMatrix::zeros(s1.nrows(), 2 * n);
    c.view_mut((0, n), (s1.nrows(), n)).copy_from(&s1);
    let m = b.ncols();
    // energy ‖z‖²_{H¹₀} + ‖z_t‖²_{L²} in discrete form
    let energy = crate::linalg::block2(&(-&lap * h), &zero, &zero, &(id * h));
    Ok(LqProblem {
        label: format!("wave-{n}"),
        a,
        b,
        c,
        q: DMatrix::identity(m, m),
        period: 1.0,
        y_d: Signal::Constant(vec![0.0; 2 * n]),
        u_d: Signal::zeros(m),
        y0: DVector::zeros(2 * n),
        energy_weights: Some(energy),
    })
}

/// Heat problem used by the decay and oracle checks: full-domain control and
/// observation, smooth targets made of the two lowest Dirichlet modes, and a
/// small first-mode initial state so that both boundary layers are visible.
pub fn heat_tracking(n: usize) -> Result<LqProblem> {
    let x = grid_nodes(n);
    let mode = |k: f64| x.iter().map(|&xi| (k * std::f64::consts::PI * xi).sin()).collect::<Vec<_>>();
    let (m1, m2) = (mode(1.0), mode(2.0));
    let y_d = Signal::Sinusoid(Sinusoid {
        offset: m1.clone(),
        harmonics: vec![Harmonic {
            k: 1,
            cos: m1.iter().map(|v| 0.5 * v).collect(),
            sin: m2.iter().map(|v| 0.25 * v).collect(),
        }],
    });
    let prob = heat_1d(n, &vec![0.0; n], 1..=n, 1..=n)?;
    let m = prob.m();
    Ok(prob
        .with_targets(y_d, Signal::zeros(m))
        .with_initial_state(DVector::from_iterator(n, m1.iter().map(|v| 0.01 * v)))
        .with_label(format!("heat-{n}")))
}

/// Looks up a built-in problem by name.
pub fn by_name(name: &str) -> Result<LqProblem> {
    match name {
        "double-integrator" => Ok(double_integrator_circle()),
        "scalar" => Ok(scalar_tracking()),
        "singular-e" => Ok(singular_lyapunov_example()),
        "heat" => heat_tracking(50),
        "wave" => wave_1d(10, 1..=10, 1..=10),
        other => {
            if let Some(n) = other.strip_prefix("heat-").and_then(|s| s.parse().ok()) {
                heat_tracking(n)
            } else {
                Err(TurnpikeError::Config(format!(
                    "unknown problem `{other}` (known: double-integrator, scalar, singular-e, heat, heat-<n>, wave)"
                )))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    label: String,
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "Pi")]
    pi: f64,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    y0: Vec<f64>,
    y_d: Signal,
    u_d: Signal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy_weights: Option<Vec<Vec<f64>>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, field: &str) -> Result<DMatrix<f64>> {
    let bad = |reason: String| TurnpikeError::Validation {
        field: field.to_string(),
        reason,
    };
    if rows.len() != nrows {
        return Err(bad(format!("expected {nrows} rows, got {}", rows.len())));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(bad(format!("row {i} has {} entries, expected {ncols}", r.len())));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn problem_to_json(prob: &LqProblem) -> String {
    let file = ProblemFile {
        label: prob.label.clone(),
        n: prob.n(),
        m: prob.m(),
        p: prob.p(),
        pi: prob.period,
        a: rows_of(&prob.a),
        b: rows_of(&prob.b),
        c: rows_of(&prob.c),
        q: rows_of(&prob.q),
        y0: prob.y0.iter().copied().collect(),
        y_d: prob.y_d.clone(),
        u_d: prob.u_d.clone(),
        energy_weights: prob.energy_weights.as_ref().map(rows_of),
    };
    serde_json::to_string_pretty(&file).expect("problem serialization cannot fail")
}

pub fn problem_from_json(text: &str, origin: &str) -> Result<LqProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| TurnpikeError::Parse {
        path: origin.to_string(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;
    let prob = LqProblem {
        label: file.label,
        a: matrix_from_rows(&file.a, file.n, file.n, "A")?,
        b: matrix_from_rows(&file.b, file.n, file.m, "B")?,
        c: matrix_from_rows(&file.c, file.p, file.n, "C")?,
        q: matrix_from_rows(&file.q, file.m, file.m, "Q")?,
        period: file.pi,
        y_d: file.y_d,
        u_d: file.u_d,
        y0: DVector::from_vec(file.y0),
        energy_weights: match file.energy_weights {
            Some(rows) => Some(matrix_from_rows(&rows, file.n, file.n, "energy_weights")?),
            None => None,
        },
    };
    prob.validate()?;
    Ok(prob)
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<LqProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    problem_from_json(&text, &path.display().to_string())
}

pub fn save_problem(prob: &LqProblem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, problem_to_json(prob))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{check_detectability, check_stabilizability, spectral_abscissa};

    #[test]
    fn double_integrator_fields() {
        let p = double_integrator_circle();
        assert_eq!((p.n(), p.m(), p.p()), (2, 1, 2));
        assert_eq!(p.period, 1.0);
        assert_eq!(p.y0.as_slice(), &[0.1, 0.0]);
        assert_eq!(p.y_d_at(0.0).as_slice(), &[1.0, 0.0]);
        let q = p.y_d_at(0.25);
        assert!(q[0].abs() < 1e-15 && (q[1] - 1.0).abs() < 1e-15);
        p.validate().unwrap();
    }

    #[test]
    fn heat_stencil_n3() {
        let p = heat_1d(3, &[0.0; 3], 1..=3, 2..=2).unwrap();
        let expected = mat(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]) * 16.0;
        assert!((&p.a - expected).norm() < 1e-12);
        assert_eq!(p.b, mat(3, 1, &[0.0, 0.5, 0.0]));
    }

    #[test]
    fn heat_spectral_abscissa_matches_closed_form() {
        for n in [10, 30] {
            let p = heat_1d(n, &vec![0.0; n], 1..=n, 1..=n).unwrap();
            let h = 1.0 / (n as f64 + 1.0);
            let exact = 2.0 * ((std::f64::consts::PI * h).cos() - 1.0) / (h * h);
            let s = spectral_abscissa(&p.a).unwrap();
            assert!((s - exact).abs() < 1e-9 * exact.abs());
            assert!((s + std::f64::consts::PI.powi(2)).abs() < 2.0 * h * h * 100.0);
            assert!(check_stabilizability(&p.a, &p.b).unwrap().verdict);
            assert!(check_detectability(&p.a, &p.c).unwrap().verdict);
        }
    }

    #[test]
    fn wave_structure() {
        let p = wave_1d(3, 1..=3, 1..=3).unwrap();
        let lower_left = p.a.view((3, 0), (3, 3)).into_owned();
        assert_eq!(lower_left, dirichlet_laplacian(3));
        assert_eq!(p.a.view((0, 3), (3, 3)).into_owned(), DMatrix::identity(3, 3));
        let btb = p.b.transpose() * &p.b;
        assert!((btb - DMatrix::identity(3, 3) * 0.25).norm() < 1e-15);
        assert!(spectral_abscissa(&p.a).unwrap().abs() < 1e-10);
        // skew-adjoint in the energy inner product: G A + Aᵀ G = 0
        let g = p.energy_weights.as_ref().unwrap();
        assert!((g * &p.a + p.a.transpose() * g).norm() < 1e-12);
        assert!(check_stabilizability(&p.a, &p.b).unwrap().verdict);
        assert!(check_detectability(&p.a, &p.c).unwrap().verdict);
    }

    #[test]
    fn empty_subdomain_is_rejected() {
        #[allow(clippy::reversed_empty_ranges)]
        let r = heat_1d(5, &[0.0; 5], 3..=2, 1..=5);
        assert!(matches!(r, Err(TurnpikeError::BadSubdomain(_))));
        assert!(matches!(wave_1d(5, 1..=6, 1..=5), Err(TurnpikeError::BadSubdomain(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = double_integrator_circle();
        let text = problem_to_json(&p);
        assert_eq!(problem_from_json(&text, "mem").unwrap(), p);

        let bad_q = text.replace("\"Q\": [\n    [\n      1.0\n    ]\n  ]", "\"Q\": [[1.0, 0.0]]");
        assert!(problem_from_json(&bad_q, "mem").is_err());

        let mut nonsym = heat_1d(3, &[0.0; 3], 1..=3, 1..=2).unwrap();
        nonsym.q = mat(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        let err = problem_from_json(&problem_to_json(&nonsym), "mem").unwrap_err();
        assert!(matches!(&err, TurnpikeError::Validation { field, .. } if field == "Q"), "{err}");

        let open = p.clone().with_targets(
            Signal::Table(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
            Signal::zeros(1),
        );
        let err = problem_from_json(&problem_to_json(&open), "mem").unwrap_err().to_string();
        assert!(err.contains("signal not periodic"), "{err}");

        let err = problem_from_json("{ \"label\": 3 }", "in.json").unwrap_err();
        assert!(matches!(err, TurnpikeError::Parse { .. }));
    }
}
