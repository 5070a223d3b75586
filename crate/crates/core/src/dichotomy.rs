//! Hamiltonian block operator of the LQ optimality system and the change of
//! variables that splits it into a contracting and an expanding half.

use nalgebra::DMatrix;

use crate::error::{dim_err, Result, TurnpikeError};
use crate::linalg::{block2, symmetrize};
use crate::riccati::{control_gram, solve_care, solve_lyapunov, LyapunovSolution, RiccatiSolution};

/// `M = [[A, G], [CᵀC, −Aᵀ]]` with `G = B Q⁻¹ Bᵀ`.
#[derive(Debug, Clone)]
pub struct HamiltonianBlock {
    pub m: DMatrix<f64>,
    pub n: usize,
}

impl HamiltonianBlock {
    pub fn a(&self) -> DMatrix<f64> {
        self.m.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.m.view((0, self.n), (self.n, self.n)).into_owned()
    }

    pub fn ctc(&self) -> DMatrix<f64> {
        self.m.view((self.n, 0), (self.n, self.n)).into_owned()
    }
}

pub fn assemble_hamiltonian(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<HamiltonianBlock> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(dim_err("A", "square", format!("{}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n {
        return Err(dim_err("B rows", n, b.nrows()));
    }
    if c.ncols() != n {
        return Err(dim_err("C cols", n, c.ncols()));
    }
    let g = control_gram(b, q)?;
    Ok(from_grams(a, &g, &(c.transpose() * c)))
}

pub fn from_grams(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>) -> HamiltonianBlock {
    HamiltonianBlock {
        m: block2(a, g, ctc, &(-a.transpose())),
        n: a.nrows(),
    }
}

/// `T = [[I + EP, E], [P, I]]` and its inverse `[[I, −E], [−P, I + PE]]`.
#[derive(Debug, Clone)]
pub struct DichotomyTransform {
    pub p: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
}

pub fn build_transform(p: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DichotomyTransform> {
    let n = p.nrows();
    if p.ncols() != n || e.shape() != (n, n) {
        return Err(dim_err("(P, E)", format!("{n}x{n}"), format!("{}x{}", e.nrows(), e.ncols())));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let t = block2(&(&id + e * p), e, p, &id);
    let t_inv = block2(&id, &(-e), &(-p), &(&id + p * e));
    Ok(DichotomyTransform {
        p: p.clone(),
        e: e.clone(),
        t,
        t_inv,
    })
}

impl DichotomyTransform {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// `T₁ = [[I, 0], [P, I]]`
    pub fn t1(&self) -> DMatrix<f64> {
        let n = self.n();
        let id = DMatrix::identity(n, n);
        block2(&id, &DMatrix::zeros(n, n), &self.p, &id)
    }

    /// `T₂ = T₁⁻¹ = [[I, 0], [−P, I]]`
    pub fn t2(&self) -> DMatrix<f64> {
        let n = self.n();
        let id = DMatrix::identity(n, n);
        block2(&id, &DMatrix::zeros(n, n), &(-&self.p), &id)
    }

    /// `T₃ = [[I, E], [0, I]]`
    pub fn t3(&self) -> DMatrix<f64> {
        let n = self.n();
        let id = DMatrix::identity(n, n);
        block2(&id, &self.e, &DMatrix::zeros(n, n), &id)
    }

    /// `T₄ = T₃⁻¹ = [[I, −E], [0, I]]`
    pub fn t4(&self) -> DMatrix<f64> {
        let n = self.n();
        let id = DMatrix::identity(n, n);
        block2(&id, &(-&self.e), &DMatrix::zeros(n, n), &id)
    }

    /// `‖T‖_F ‖T⁻¹‖_F`, reported as a conditioning diagnostic.
    pub fn condition(&self) -> f64 {
        self.t.norm() * self.t_inv.norm()
    }

    pub fn inverse_defect(&self) -> f64 {
        let k = self.t.nrows();
        (&self.t * &self.t_inv - DMatrix::<f64>::identity(k, k)).norm()
    }
}

/// `T₁ M T₂`, upper block triangular when `P` solves the Riccati equation.
pub fn triangularize(mb: &HamiltonianBlock, tr: &DichotomyTransform) -> Result<DMatrix<f64>> {
    check_same(mb, tr)?;
    Ok(tr.t1() * &mb.m * tr.t2())
}

/// `‖T M T⁻¹ − diag(A_cl, −A_clᵀ)‖_F`.
pub fn block_diagonalize(mb: &HamiltonianBlock, tr: &DichotomyTransform, a_cl: &DMatrix<f64>) -> Result<f64> {
    check_same(mb, tr)?;
    if a_cl.shape() != (mb.n, mb.n) {
        return Err(dim_err("A_cl", format!("{0}x{0}", mb.n), format!("{}x{}", a_cl.nrows(), a_cl.ncols())));
    }
    let n = mb.n;
    let target = block2(a_cl, &DMatrix::zeros(n, n), &DMatrix::zeros(n, n), &(-a_cl.transpose()));
    Ok((&tr.t * &mb.m * &tr.t_inv - target).norm())
}

/// Default tolerance `1e−8·(1 + ‖M‖_F)` for [`block_diagonalize`].
pub fn diag_tolerance(mb: &HamiltonianBlock) -> f64 {
    1e-8 * (1.0 + mb.m.norm())
}

fn check_same(mb: &HamiltonianBlock, tr: &DichotomyTransform) -> Result<()> {
    if tr.n() != mb.n {
        return Err(dim_err("transform", mb.n, tr.n()));
    }
    Ok(())
}

/// Everything the stepping code needs from one LQ instance: the Riccati and
/// Lyapunov solutions, the dichotomy transform and the Gram matrices.
#[derive(Debug, Clone)]
pub struct Decoupling {
    pub riccati: RiccatiSolution,
    pub lyapunov: LyapunovSolution,
    pub transform: DichotomyTransform,
    pub block: HamiltonianBlock,
    /// `Q⁻¹Bᵀ`
    pub qinv_bt: DMatrix<f64>,
}

impl Decoupling {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let block = assemble_hamiltonian(a, b, c, q)?;
        let riccati = solve_care(a, b, c, q)?;
        let lyapunov = solve_lyapunov(&riccati.a_cl, &block.gram())?;
        let transform = build_transform(&riccati.p, &lyapunov.e)?;
        let qinv_bt = nalgebra::Cholesky::new(symmetrize(q))
            .ok_or(TurnpikeError::SingularQ)?
            .solve(&b.transpose());
        Ok(Decoupling {
            riccati,
            lyapunov,
            transform,
            block,
            qinv_bt,
        })
    }

    pub fn n(&self) -> usize {
        self.block.n
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.riccati.p
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.lyapunov.e
    }

    pub fn a_cl(&self) -> &DMatrix<f64> {
        &self.riccati.a_cl
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn double_integrator_block() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let mb = assemble_hamiltonian(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
        let expected = m(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0],
        );
        assert_eq!(mb.m, expected);
    }

    #[test]
    fn scalar_block_and_zero_coupling() {
        let mb = assemble_hamiltonian(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0])).unwrap();
        assert_eq!(mb.m, m(2, 2, &[-1.0, 1.0, 1.0, 1.0]));
        let a = m(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let mb = assemble_hamiltonian(&a, &DMatrix::zeros(2, 1), &DMatrix::zeros(1, 2), &m(1, 1, &[1.0])).unwrap();
        assert_eq!(mb.m, block2(&a, &DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2), &(-a.transpose())));
        let tr = build_transform(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(tr.t, DMatrix::identity(4, 4));
        assert_eq!(block_diagonalize(&mb, &tr, &a).unwrap(), 0.0);
    }

    #[test]
    fn transform_inverse_and_blocks() {
        let s3 = 3f64.sqrt();
        let p = m(2, 2, &[s3, 1.0, 1.0, s3]);
        let e = DMatrix::identity(2, 2) * (-1.0 / (2.0 * s3));
        let tr = build_transform(&p, &e).unwrap();
        let top = tr.t.view((0, 0), (2, 2)).into_owned();
        let expected = m(2, 2, &[0.5, -1.0 / (2.0 * s3), -1.0 / (2.0 * s3), 0.5]);
        assert!((top - expected).norm() < 1e-15);
        assert!(tr.inverse_defect() < 1e-14);
        assert!((tr.t1() * tr.t2() - DMatrix::<f64>::identity(4, 4)).norm() == 0.0);
        assert!((tr.t3() * tr.t4() - DMatrix::<f64>::identity(4, 4)).norm() == 0.0);
        assert!((tr.t3() * tr.t1() - &tr.t).norm() < 1e-15);
    }

    #[test]
    fn wrong_riccati_solution_is_detected() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let c = DMatrix::identity(2, 2);
        let mb = assemble_hamiltonian(&a, &b, &c, &DMatrix::identity(1, 1)).unwrap();
        let tr = build_transform(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2)).unwrap();
        let res = block_diagonalize(&mb, &tr, &a).unwrap();
        assert!(res >= (c.transpose() * &c).norm());
    }
}
