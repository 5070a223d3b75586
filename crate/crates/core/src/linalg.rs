//! Dense kernels shared by the solvers: ordered complex Schur forms and
//! Lyapunov solvers.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TurnpikeError};

pub type C64 = Complex<f64>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 20_000;
const SCHUR_RETRIES: usize = 4;

/// Complex Schur decomposition `m = z t z*` with `t` upper triangular.
pub struct ComplexSchur {
    pub z: DMatrix<C64>,
    pub t: DMatrix<C64>,
}

impl ComplexSchur {
    /// Falls back to a few deterministic random orthogonal similarities
    /// `QᵀmQ` when the QR iteration stalls (it has no exceptional shifts and
    /// can cycle on spectra symmetric about the imaginary axis).
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for attempt in 0..=SCHUR_RETRIES {
            let (q, mq) = if attempt == 0 {
                (None, m.clone())
            } else {
                let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let q = g.qr().q();
                let mq = q.transpose() * m * &q;
                (Some(q), mq)
            };
            let Some(schur) = nalgebra::linalg::Schur::try_new(to_complex(&mq), SCHUR_EPS, SCHUR_MAX_ITER) else {
                continue;
            };
            let (z, mut t) = schur.unpack();
            // nalgebra leaves roundoff below the diagonal; the triangular
            // solvers below rely on exact zeros.
            for j in 0..t.ncols() {
                for i in (j + 1)..t.nrows() {
                    t[(i, j)] = C64::new(0.0, 0.0);
                }
            }
            let z = match q {
                Some(q) => to_complex(&q) * z,
                None => z,
            };
            return Ok(Self { z, t });
        }
        Err(TurnpikeError::EigenFailure)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Swap the adjacent diagonal entries `k` and `k + 1` by a unitary rotation.
    fn swap(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k, k + 1)];
        let c = self.t[(k + 1, k + 1)];
        // (b, c - a) is an eigenvector of the 2x2 block for eigenvalue c.
        let mut x1 = b;
        let mut x2 = c - a;
        let nrm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
        if nrm == 0.0 {
            return;
        }
        x1 /= nrm;
        x2 /= nrm;
        let y1 = -x2.conj();
        let y2 = x1.conj();
        let n = self.t.nrows();
        // rows k, k+1  <-  G* rows
        for j in 0..n {
            let r1 = self.t[(k, j)];
            let r2 = self.t[(k + 1, j)];
            self.t[(k, j)] = x1.conj() * r1 + x2.conj() * r2;
            self.t[(k + 1, j)] = y1.conj() * r1 + y2.conj() * r2;
        }
        // cols k, k+1  <-  cols G
        for i in 0..n {
            let c1 = self.t[(i, k)];
            let c2 = self.t[(i, k + 1)];
            self.t[(i, k)] = c1 * x1 + c2 * x2;
            self.t[(i, k + 1)] = c1 * y1 + c2 * y2;
            let z1 = self.z[(i, k)];
            let z2 = self.z[(i, k + 1)];
            self.z[(i, k)] = z1 * x1 + z2 * x2;
            self.z[(i, k + 1)] = z1 * y1 + z2 * y2;
        }
        self.t[(k + 1, k)] = C64::new(0.0, 0.0);
    }

    /// Reorder so that every eigenvalue accepted by `select` leads the
    /// diagonal. Returns the number of selected eigenvalues.
    pub fn reorder(&mut self, select: impl Fn(C64) -> bool) -> usize {
        let n = self.t.nrows();
        let mut placed = 0;
        for i in 0..n {
            if select(self.t[(i, i)]) {
                let mut k = i;
                while k > placed {
                    self.swap(k - 1);
                    k -= 1;
                }
                placed += 1;
            }
        }
        placed
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(ComplexSchur::new(m)?.eigenvalues())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Solves `a x + x aᵀ = w` by vectorising into an `n² × n²` dense system.
pub fn lyapunov_kronecker(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = DVector::from_column_slice(w.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| TurnpikeError::SingularSystem("Kronecker Lyapunov operator".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TurnpikeError::SingularSystem("Kronecker Lyapunov operator".into()));
    }
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Bartels-Stewart solve of `a x + x aᵀ = w` on the complex Schur form of `a`.
pub fn lyapunov_bartels_stewart(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let schur = ComplexSchur::new(a)?;
    let (u, t) = (&schur.z, &schur.t);
    let f = u.adjoint() * to_complex(w) * u;
    let mut y = DMatrix::<C64>::zeros(n, n);
    let scale = 1.0 + t.norm();
    for j in (0..n).rev() {
        let mut rhs: DVector<C64> = f.column(j).into_owned();
        for k in (j + 1)..n {
            let c = t[(j, k)].conj();
            if c != C64::new(0.0, 0.0) {
                rhs -= y.column(k) * c;
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for l in (i + 1)..n {
                s -= t[(i, l)] * y[(l, j)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() <= 1e-14 * scale {
                return Err(TurnpikeError::SingularSystem(
                    "Lyapunov operator: eigenvalues λ_i + conj(λ_j) = 0".into(),
                ));
            }
            y[(i, j)] = s / d;
        }
    }
    let x = u * y * u.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves `a x + x aᵀ = w`, switching from the Kronecker form to
/// Bartels-Stewart above `KRONECKER_MAX_N`.
pub fn lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() <= KRONECKER_MAX_N {
        lyapunov_kronecker(a, w)
    } else {
        lyapunov_bartels_stewart(a, w)
    }
}

pub const KRONECKER_MAX_N: usize = 12;

/// Symmetric square root factor `f` with `fᵀ f = m`; eigenvalues in
/// `[-clip, 0)` are set to zero, anything more negative is returned as `Err`.
pub fn psd_factor(m: &DMatrix<f64>, clip: f64) -> std::result::Result<DMatrix<f64>, f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -clip {
        return Err(min);
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&sqrt) * v.transpose())
}

pub fn block2(
    a11: &DMatrix<f64>,
    a12: &DMatrix<f64>,
    a21: &DMatrix<f64>,
    a22: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a11);
    m.view_mut((0, c1), (r1, c2)).copy_from(a12);
    m.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    m.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    m
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = m.exp();
    if e.iter().all(|v| v.is_finite()) {
        Ok(e)
    } else {
        Err(TurnpikeError::ExpOverflow)
    }
}
