//! Independent reference computations for the solver outputs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turnpike::dichotomy::Decoupling;
use turnpike::linalg::{eigenvalues, expm};
use turnpike::periodic::{monodromy, periodic_q, periodic_z};
use turnpike::riccati::{check_stabilizability, solve_care, solve_lyapunov};
use turnpike::zoo;

/// Composite Simpson rule on `[0, len]` with `intervals` (even) pieces, where
/// the integrand is evaluated as `f(k, t_k)`.
fn simpson(len: f64, intervals: usize, mut f: impl FnMut(usize, f64) -> DMatrix<f64>) -> DMatrix<f64> {
    assert!(intervals.is_multiple_of(2));
    let h = len / intervals as f64;
    let mut acc = f(0, 0.0) + f(intervals, len);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(k, k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

fn random_stabilizable(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if check_stabilizability(&a, &b).unwrap().verdict {
            return (a, b, c, DMatrix::identity(2, 2));
        }
    }
}

#[test]
fn lyapunov_solution_matches_gramian_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 4, 6] {
        let (a, b, c, q) = random_stabilizable(&mut rng, n);
        let ric = solve_care(&a, &b, &c, &q).unwrap();
        let g = &b * &b.transpose();
        let e = solve_lyapunov(&ric.a_cl, &g).unwrap().e;
        // E = −∫₀^∞ S(t) G S(t)ᵀ dt: Simpson on a short base interval, then
        // doubling with ∫₀^{2τ} = ∫₀^τ + S(τ) (∫₀^τ) S(τ)ᵀ
        let tau0 = 0.01 / (1.0 + ric.a_cl.norm());
        let intervals = 64;
        let step = expm(&(&ric.a_cl * (tau0 / intervals as f64))).unwrap();
        let mut powers = vec![DMatrix::identity(n, n)];
        for k in 0..intervals {
            let next = &step * &powers[k];
            powers.push(next);
        }
        let mut integral = simpson(tau0, intervals, |k, _| &powers[k] * &g * powers[k].transpose());
        let mut s = powers[intervals].clone();
        while s.norm() > 1e-17 {
            integral = &integral + &s * &integral * s.transpose();
            s = &s * &s;
        }
        let err = (&e + &integral).norm() / e.norm();
        assert!(err < 1e-8, "n = {n}: relative error {err:e}");
    }
}

/// `z(0) = (I − S(Π))⁻¹ ∫₀^Π S(Π − s) g(s) ds` by Simpson quadrature.
fn z0_by_quadrature(a_cl: &DMatrix<f64>, g: &dyn Fn(f64) -> DVector<f64>, period: f64) -> DVector<f64> {
    let n = a_cl.nrows();
    let intervals = 2000;
    let integral = simpson(period, intervals, |_, s| {
        let v = expm(&(a_cl * (period - s))).unwrap() * g(s);
        DMatrix::from_column_slice(n, 1, v.as_slice())
    });
    let closure = DMatrix::identity(n, n) - monodromy(a_cl, period).unwrap();
    closure.lu().solve(&integral.column(0).into_owned()).unwrap()
}

/// `q(0) = −(I − S(Π)ᵀ)⁻¹ ∫₀^Π S(s)ᵀ h(s) ds`.
fn q0_by_quadrature(a_cl: &DMatrix<f64>, h: &dyn Fn(f64) -> DVector<f64>, period: f64) -> DVector<f64> {
    let n = a_cl.nrows();
    let intervals = 2000;
    let integral = simpson(period, intervals, |_, s| {
        let v = expm(&(a_cl * s)).unwrap().transpose() * h(s);
        DMatrix::from_column_slice(n, 1, v.as_slice())
    });
    let closure = DMatrix::identity(n, n) - monodromy(a_cl, period).unwrap().transpose();
    -closure.lu().solve(&integral.column(0).into_owned()).unwrap()
}

#[test]
fn periodic_halves_match_variation_of_constants() {
    let prob = zoo::double_integrator_circle();
    let dec = Decoupling::new(&prob.a, &prob.b, &prob.c, &prob.q).unwrap();
    let a_cl = dec.a_cl().clone();
    let g = |t: f64| DVector::from_column_slice(&[(6.0 * t).cos(), (12.0 * t).sin() - 0.3]);
    let h = |t: f64| DVector::from_column_slice(&[(12.0 * t).sin(), 0.5 + (6.0 * t).cos()]);
    let period = std::f64::consts::PI / 3.0;

    let z_ref = z0_by_quadrature(&a_cl, &g, period);
    let q_ref = q0_by_quadrature(&a_cl, &h, period);
    let mut errs = Vec::new();
    for samples in [200, 400] {
        let z = periodic_z(&a_cl, g, period, samples).unwrap();
        let q = periodic_q(&a_cl, h, period, samples).unwrap();
        errs.push(((&z.values[0] - &z_ref).norm(), (&q.values[0] - &q_ref).norm()));
    }
    let (z_err, q_err) = errs[1];
    assert!(z_err < 1e-4 * (1.0 + z_ref.norm()) && q_err < 1e-4 * (1.0 + q_ref.norm()), "{errs:?}");
    let z_order = (errs[0].0 / errs[1].0).log2();
    let q_order = (errs[0].1 / errs[1].1).log2();
    assert!(z_order > 1.8 && q_order > 1.8, "orders {z_order}, {q_order}");
}

fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let mut blocks = Vec::new();
    let mut cur = b.clone();
    for _ in 0..n {
        blocks.push(cur.clone());
        cur = a * cur;
    }
    let cols: Vec<_> = blocks.iter().flat_map(|m| m.column_iter().map(|c| c.into_owned())).collect();
    DMatrix::from_columns(&cols).rank(1e-9)
}

#[test]
fn controllable_pairs_are_stabilizable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let n = rng.gen_range(2..=6);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        let b = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
        if kalman_rank(&a, &b) == n {
            let cert = check_stabilizability(&a, &b).unwrap();
            assert!(cert.verdict);
            let k = cert.witness_gain.expect("witness gain");
            let abscissa = eigenvalues(&(&a + &b * k)).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
            assert!(abscissa < 0.0);
        }
    }
}

#[test]
fn hidden_unstable_mode_defeats_stabilizability() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        // block upper-triangular in a random basis: the last mode is
        // unreachable and unstable
        let n = 4;
        let mut core = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for j in 0..n - 1 {
            core[(n - 1, j)] = 0.0;
        }
        core[(n - 1, n - 1)] = 0.5;
        let mut b = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
        b[(n - 1, 0)] = 0.0;
        let v = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { rng.gen_range(-0.5..0.5) });
        let vinv = v.clone().try_inverse().unwrap();
        let a = &v * core * &vinv;
        let b = &v * b;
        assert!(kalman_rank(&a, &b) < n);
        let cert = check_stabilizability(&a, &b).unwrap();
        assert!(!cert.verdict);
        let l = cert.offending_eigenvalue.unwrap();
        assert!((l.re - 0.5).abs() < 1e-8 && l.im.abs() < 1e-8, "{l}");
    }
}

#[test]
fn closed_loop_spectrum_is_stable_half_of_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [1, 3, 5, 8] {
        let (a, b, c, q) = random_stabilizable(&mut rng, n);
        let dec = Decoupling::new(&a, &b, &c, &q).unwrap();
        let ham: Vec<_> = eigenvalues(&dec.block.m).unwrap().into_iter().filter(|l| l.re < 0.0).collect();
        let mut cl = eigenvalues(dec.a_cl()).unwrap();
        assert_eq!(ham.len(), n);
        for x in &ham {
            let (idx, dist) = cl
                .iter()
                .enumerate()
                .map(|(i, y)| (i, (x - y).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(dist < 1e-7 * (1.0 + x.norm()), "n = {n}: {x} unmatched ({dist:e})");
            cl.swap_remove(idx);
        }
    }
}

#[test]
fn scalar_riccati_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let (a, b, c, q) = (
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
        );
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let sol = solve_care(&m(a), &m(b), &m(c), &m(q)).unwrap();
        let g = b * b / q;
        let p = (a + (a * a + g * c * c).sqrt()) / g;
        assert!((sol.p[(0, 0)] - p).abs() < 1e-10 * (1.0 + p), "{} vs {p}", sol.p[(0, 0)]);
        assert!((sol.nu - (a * a + g * c * c).sqrt()).abs() < 1e-10 * (1.0 + sol.nu));
    }
}
