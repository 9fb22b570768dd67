use nalgebra::{DMatrix, DVector};

use crate::error::{PhdaeError, Result};
use crate::index::{check_index_le_one, INDEX_ONE_TOL};
use crate::linalg::{self, SquareSvd, RANK_TOL};
use crate::system::{Interval, PhdaeSystem, Snapshot, DEFAULT_GRID};
use crate::transform::congruence_snapshot;

pub(crate) fn sub(m: &DMatrix<f64>, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<f64> {
    m.view((r0, c0), (nr, nc)).into_owned()
}

/// Block form `E = diag(E11, 0)`, `Q = diag(Q11, Q22)` of an index-one pHDAE.
#[derive(Clone, Debug)]
pub struct CanonicalIndexOne {
    /// Size of the differential block `x1`.
    pub n1: usize,
    /// Size of the algebraic block `x2`.
    pub n2: usize,
    pub e11: DMatrix<f64>,
    pub l11: DMatrix<f64>,
    pub l12: DMatrix<f64>,
    pub l21: DMatrix<f64>,
    pub l22: DMatrix<f64>,
    pub q11: DMatrix<f64>,
    pub q22: DMatrix<f64>,
    pub k11: DMatrix<f64>,
    pub k12: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    /// All transformed coefficients.
    pub form: Snapshot,
    /// Left factor: the canonical form is `congruence_snapshot(original, u, v)`.
    pub u: DMatrix<f64>,
    /// Right factor: original states are `x = v [x1; x2]`.
    pub v: DMatrix<f64>,
    /// `||(J12 - R12) Q22 - E11 K12||_F`.
    pub coupling_residual: f64,
    /// Largest entry of the off-diagonal `Q` blocks after the transformation.
    pub q_offdiag: f64,
    /// `Q12` immediately after the SVD step, before any block elimination.
    pub q12_after_svd: f64,
    pub cond_l22: f64,
    pub cond_q22: f64,
    pub interval: Interval,
}

impl CanonicalIndexOne {
    pub fn j(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        self.split(&self.form.j)
    }

    pub fn r(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        self.split(&self.form.r)
    }

    fn split(&self, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (a, b) = (self.n1, self.n2);
        (sub(m, 0, 0, a, a), sub(m, 0, a, a, b), sub(m, a, 0, b, a), sub(m, a, a, b, b))
    }

    /// Canonical coordinates `[x1; x2] = V^{-1} x`.
    pub fn to_canonical(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let m = linalg::solve(&self.v, &DMatrix::from_column_slice(x.len(), 1, x.as_slice()), "V")?;
        Ok(m.column(0).into_owned())
    }

    /// `||L22 Q22 x2 + L21 Q11 x1 + (B2 - P2) u||` for a state in original coordinates.
    pub fn constraint_residual(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        let z = self.to_canonical(x)?;
        let x1 = z.rows(0, self.n1);
        let x2 = z.rows(self.n1, self.n2);
        let r = &self.l22 * (&self.q22 * x2) + &self.l21 * (&self.q11 * x1) + (&self.b2 - &self.p2) * u;
        Ok(r.norm())
    }
}

/// Transforms an index-one pHDAE with constant coefficients to canonical form.
///
/// An SVD of `E` gives `(U~, V~)`; `T` then removes the `(1,2)` block of
/// `(J - R) Q - E K` and `T~` block-diagonalizes `Q`. `K11` is read from the
/// transformed coefficients rather than assembled from a closed formula.
pub fn index_one_canonical(sys: &PhdaeSystem, tol: f64) -> Result<CanonicalIndexOne> {
    let c = sys.constant_snapshot("index-one canonical form")?;
    if !check_index_le_one(sys, DEFAULT_GRID, INDEX_ONE_TOL)? {
        return Err(PhdaeError::HighIndex);
    }
    let n = sys.n();
    let svd = SquareSvd::new(&c.e);
    let n1 = svd.rank(RANK_TOL);
    let n2 = n - n1;
    let c1 = congruence_snapshot(&c, &svd.u, &svd.v)?;
    let q12_after_svd = sub(&c1.q, 0, n1, n1, n2).amax();

    let lt = &c1.j - &c1.r;
    let e11 = sub(&c1.e, 0, 0, n1, n1);
    let l12t = sub(&lt, 0, n1, n1, n2);
    let l22 = sub(&lt, n1, n1, n2, n2);
    let q22 = sub(&c1.q, n1, n1, n2, n2);
    let k12 = sub(&c1.k, 0, n1, n1, n2);

    // T21 = -L22^{-T} (L~12 - E11 K12 Q22^{-1})^T
    let ek = &e11 * &k12;
    let ek_q22inv = linalg::solve(&q22.transpose(), &ek.transpose(), "Q22")?.transpose();
    let t21 = -linalg::solve(&l22.transpose(), &(l12t - ek_q22inv).transpose(), "L22")?;
    let mut t = DMatrix::identity(n, n);
    t.view_mut((n1, 0), (n2, n1)).copy_from(&t21);
    let c2 = congruence_snapshot(&c1, &t, &DMatrix::identity(n, n))?;

    let q21t = sub(&c2.q, n1, 0, n2, n1);
    let q22c = sub(&c2.q, n1, n1, n2, n2);
    let mut tt = DMatrix::identity(n, n);
    tt.view_mut((n1, 0), (n2, n1)).copy_from(&(-linalg::solve(&q22c, &q21t, "Q22")?));
    let form = congruence_snapshot(&c2, &DMatrix::identity(n, n), &tt)?;

    let u = &svd.u * &t;
    let v = &svd.v * &tt;
    let l = &form.j - &form.r;
    let split = |m: &DMatrix<f64>| (sub(m, 0, 0, n1, n1), sub(m, 0, n1, n1, n2), sub(m, n1, 0, n2, n1), sub(m, n1, n1, n2, n2));
    let (l11, l12, l21, l22) = split(&l);
    let (q11, q12, q21, q22) = split(&form.q);
    let (k11, k12, _, _) = split(&form.k);
    let e11 = sub(&form.e, 0, 0, n1, n1);
    let coupling = &l12 * &q22 - &e11 * &k12;
    let coupling_residual = linalg::fro(&coupling);
    let scale = 1.0 + linalg::fro(&l) * linalg::fro(&form.q) + linalg::fro(&form.e) * linalg::fro(&form.k);
    if coupling_residual > tol * scale {
        return Err(PhdaeError::Structure(format!(
            "canonical coupling block (J12 - R12) Q22 - E11 K12 has residual {coupling_residual:.3e}"
        )));
    }
    let q_offdiag = q12.amax().max(q21.amax());
    if q12.amax() > tol * (1.0 + linalg::fro(&form.q)) {
        return Err(PhdaeError::Structure(format!(
            "Q12 = {:.3e} does not vanish; Q^T E is not symmetric",
            q12.amax()
        )));
    }
    let b1 = sub(&form.b, 0, 0, n1, sys.m());
    let p1 = sub(&form.p, 0, 0, n1, sys.m());
    let b2 = sub(&form.b, n1, 0, n2, sys.m());
    let p2 = sub(&form.p, n1, 0, n2, sys.m());
    Ok(CanonicalIndexOne {
        n1,
        n2,
        cond_l22: linalg::cond(&l22),
        cond_q22: linalg::cond(&q22),
        e11,
        l11,
        l12,
        l21,
        l22,
        q11,
        q22,
        k11,
        k12,
        b1,
        p1,
        b2,
        p2,
        form,
        u,
        v,
        coupling_residual,
        q_offdiag,
        q12_after_svd,
        interval: sys.interval(),
    })
}

/// Implicit port-Hamiltonian ODE for `x1` with the algebraic map `x2 = G x1 + H u`.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub canonical: CanonicalIndexOne,
    /// Coefficients `(E11, Q11, J11, R11, K11, B^, P^, S^, N^)`.
    pub ode: PhdaeSystem,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl ReducedSystem {
    pub fn n1(&self) -> usize {
        self.canonical.n1
    }

    pub fn x2(&self, x1: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.g * x1 + &self.h * u
    }

    /// Consistent state in original coordinates.
    pub fn lift(&self, x1: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let x2 = self.x2(x1, u);
        let z = DVector::from_iterator(x1.len() + x2.len(), x1.iter().chain(x2.iter()).cloned());
        &self.canonical.v * z
    }

    /// The `x1` part of an original-coordinate state.
    pub fn restrict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.canonical.to_canonical(x)?.rows(0, self.n1()).into_owned())
    }

    /// `X = [[I, 0], [G, H], [0, I]]`.
    pub fn x_map(&self) -> DMatrix<f64> {
        let (n1, n2, m) = (self.canonical.n1, self.canonical.n2, self.ode.m());
        let mut x = DMatrix::zeros(n1 + n2 + m, n1 + m);
        x.view_mut((0, 0), (n1, n1)).fill_with_identity();
        x.view_mut((n1, 0), (n2, n1)).copy_from(&self.g);
        x.view_mut((n1, n1), (n2, m)).copy_from(&self.h);
        x.view_mut((n1 + n2, n1), (m, m)).fill_with_identity();
        x
    }

    /// `X^T W X` with `W` of the canonical form.
    pub fn w_x(&self) -> DMatrix<f64> {
        let x = self.x_map();
        x.transpose() * self.canonical.form.w() * x
    }

    /// `||W^ - X^T W X||_F`.
    pub fn w_residual(&self) -> f64 {
        linalg::fro(&(self.ode.w_matrix(self.canonical.interval.t0) - self.w_x()))
    }
}

/// Eliminates `x2` from a canonical index-one form.
pub fn reduce_index_one(c: &CanonicalIndexOne) -> Result<ReducedSystem> {
    let n1 = c.n1;
    let (j11, _, j21, _) = c.j();
    let (r11, r12, _, _) = c.r();
    let bp2 = &c.b2 + &c.p2;
    let bm2 = &c.b2 - &c.p2;
    // (J21^T - R12) L22^{-T} (B2 + P2)
    let y = linalg::solve(&c.l22.transpose(), &bp2, "L22")?;
    let corr = (j21.transpose() - &r12) * y * 0.5;
    let b_hat = &c.b1 - &corr;
    let p_hat = &c.p1 - &corr;
    let t1 = bp2.transpose() * linalg::solve(&c.l22, &bm2, "L22")?;
    let s_hat = &c.form.s - (&t1 + t1.transpose()) * 0.5;
    let n_hat = &c.form.n - (&t1 - t1.transpose()) * 0.5;
    let lq = &c.l22 * &c.q22;
    let g = -linalg::solve(&lq, &(&c.l21 * &c.q11), "L22 Q22")?;
    let h = -linalg::solve(&lq, &bm2, "L22 Q22")?;
    let snap = Snapshot::with_ports(
        c.e11.clone(),
        c.q11.clone(),
        j11,
        r11,
        c.k11.clone(),
        b_hat,
        p_hat,
        s_hat,
        n_hat,
    );
    debug_assert_eq!(snap.e.nrows(), n1);
    let ode = PhdaeSystem::constant(snap, c.interval)?;
    Ok(ReducedSystem {
        canonical: c.clone(),
        ode,
        g,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_index_one, IndexOneOptions, Mixing};
    use crate::system::DEFAULT_TOL;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> PhdaeSystem {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        PhdaeSystem::constant(Snapshot::unported(e, j, r), Interval::unit()).unwrap()
    }

    #[test]
    fn hand_computed_two_by_two() {
        let c = index_one_canonical(&two_by_two(), 1e-12).unwrap();
        assert_eq!((c.n1, c.n2), (1, 1));
        assert!((c.e11[(0, 0)] - 1.0).abs() < 1e-15);
        // L = [[0, 1], [-1, -1]]: L22 = -1, Q22 = 1, T21 = 1
        assert!((c.l22[(0, 0)] + 1.0).abs() < 1e-15);
        assert!((c.q22[(0, 0)] - 1.0).abs() < 1e-15);
        let expected_u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!((&c.u - expected_u).amax() < 1e-15);
        assert!(c.coupling_residual <= 1e-12);
        // x2 = -(L22 Q22)^{-1} L21 Q11 x1 with L21 = -1 - 1
        let red = reduce_index_one(&c).unwrap();
        assert!((red.g[(0, 0)] + 2.0).abs() < 1e-15);
        assert_eq!(red.ode.n(), 1);
        let x1 = DVector::from_element(1, 0.7);
        let x = red.lift(&x1, &DVector::zeros(0));
        assert!((x[0] - 0.7).abs() < 1e-15);
        // the second equation of the original system: 0 = -x1 - x2
        assert!((x[0] + x[1]).abs() < 1e-15);
    }

    #[test]
    fn invertible_e_is_orthogonally_equivalent() {
        let sys = crate::models::preset("acoustic").unwrap();
        let c = index_one_canonical(&sys, DEFAULT_TOL).unwrap();
        assert_eq!(c.n2, 0);
        let vtv = c.v.transpose() * &c.v;
        assert!((vtv - DMatrix::identity(6, 6)).amax() < 1e-13);
        let red = reduce_index_one(&c).unwrap();
        let x = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let h = sys.hamiltonian(&x, 0.0).unwrap();
        let x1 = red.restrict(&x).unwrap();
        assert!((red.ode.hamiltonian(&x1, 0.0).unwrap() - h).abs() < 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn no_port_coupling_leaves_ports_unchanged() {
        // B2 = P2 = 0 in canonical coordinates
        let c0 = index_one_canonical(&two_by_two(), 1e-12).unwrap();
        let mut c = c0.clone();
        c.b1 = DMatrix::from_row_slice(1, 1, &[0.4]);
        c.p1 = DMatrix::from_row_slice(1, 1, &[0.1]);
        c.b2 = DMatrix::zeros(1, 1);
        c.p2 = DMatrix::zeros(1, 1);
        c.form.s = DMatrix::from_row_slice(1, 1, &[0.3]);
        c.form.n = DMatrix::zeros(1, 1);
        c.form.b = DMatrix::from_row_slice(2, 1, &[0.4, 0.0]);
        c.form.p = DMatrix::from_row_slice(2, 1, &[0.1, 0.0]);
        let red = reduce_index_one(&c).unwrap();
        let k = red.ode.at(0.0);
        assert_eq!(k.b, c.b1);
        assert_eq!(k.p, c.p1);
        assert_eq!(k.s, c.form.s);
        assert_eq!(k.n, c.form.n);
    }

    #[test]
    fn high_index_and_time_varying_are_refused() {
        let gas = crate::models::preset("gas").unwrap();
        assert!(matches!(index_one_canonical(&gas, DEFAULT_TOL), Err(PhdaeError::HighIndex)));
        let c = two_by_two();
        let mut coeffs = c.coeffs().clone();
        coeffs.e = crate::MatFun::new(vec![c.at(0.0).e, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])]).unwrap();
        let tv = PhdaeSystem::assemble(coeffs, 2, 0, Interval::unit()).unwrap();
        assert!(matches!(index_one_canonical(&tv, DEFAULT_TOL), Err(PhdaeError::NotConstant(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_systems_reduce_consistently(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..3, m in 0usize..3, with_k in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let opts = IndexOneOptions { n1, n2, m, with_k, mixing: Mixing::Orthogonal, ..Default::default() };
            let g = random_index_one(&mut rng, opts).unwrap();
            let c = index_one_canonical(&g.system, DEFAULT_TOL).unwrap();
            prop_assert_eq!((c.n1, c.n2), (n1, n2));
            prop_assert!(c.coupling_residual <= 1e-10, "{}", c.coupling_residual);
            prop_assert!(c.q12_after_svd <= 1e-10);
            let sym = &c.q11.transpose() * &c.e11 - c.e11.transpose() * &c.q11;
            prop_assert!(sym.amax() <= 1e-10);
            prop_assert!(PhdaeSystem::constant(c.form.clone(), Interval::unit()).unwrap().verify_structure(DEFAULT_GRID, DEFAULT_TOL).passed);

            let red = reduce_index_one(&c).unwrap();
            let k = red.ode.at(0.0);
            prop_assert_eq!(&k.s, &k.s.transpose());
            prop_assert_eq!(&k.n, &(-k.n.transpose()));
            prop_assert!(((&k.b - &k.p) - (&c.b1 - &c.p1)).amax() <= 1e-14 * (1.0 + c.b1.amax() + c.p1.amax()));
            let w = red.w_x();
            prop_assert!(red.w_residual() <= 1e-10 * (1.0 + linalg::fro(&w)), "{}", red.w_residual());
            prop_assert!(red.ode.verify_structure(DEFAULT_GRID, DEFAULT_TOL).passed);
            // S^ + N^ = S + N - (B2 + P2)^T L22^{-1} (B2 - P2)
            let direct = c.form.feedthrough()
                - (&c.b2 + &c.p2).transpose() * linalg::solve(&c.l22, &(&c.b2 - &c.p2), "L22").unwrap();
            prop_assert!((k.feedthrough() - direct).amax() <= 1e-12 * (1.0 + k.feedthrough().amax()));

            for _ in 0..3 {
                let x1 = DVector::from_fn(n1, |_, _| rng.gen_range(-1.0..1.0));
                let u = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
                let x = red.lift(&x1, &u);
                let h = g.system.hamiltonian(&x, 0.0).unwrap();
                let hr = red.ode.hamiltonian(&x1, 0.0).unwrap();
                prop_assert!((h - hr).abs() <= 1e-10 * (1.0 + h.abs()));
                prop_assert!(c.constraint_residual(&x, &u).unwrap() <= 1e-10 * (1.0 + x.norm()));
                // the original algebraic equations hold on lifted states
                let cs = g.system.at(0.0);
                let z2 = linalg::left_null(&cs.e, RANK_TOL);
                let alg = z2.transpose() * (cs.a() * &x + cs.input() * &u);
                prop_assert!(alg.norm() <= 1e-9 * (1.0 + x.norm()));
                // outputs agree
                let y = g.system.output(&x, &u, 0.0);
                let yr = red.ode.output(&x1, &u, 0.0);
                prop_assert!((y - yr).norm() <= 1e-9 * (1.0 + x.norm()));
            }
        }
    }
}
