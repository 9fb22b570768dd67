//! Random pHDAEs with known structure, built backwards from the index-one
//! block form so that tests have ground truth.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::linalg;
use crate::system::{Coeffs, Interval, PhdaeSystem, Snapshot};
use crate::transform::congruence_snapshot;

fn uniform<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Orthogonal factor of the QR decomposition of a random matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    uniform(rng, n, n).qr().q()
}

/// `O1 diag(s) O2` with singular values in `[1, max_sv]`.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize, max_sv: f64) -> DMatrix<f64> {
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(1.0..=max_sv)));
    random_orthogonal(rng, n) * s * random_orthogonal(rng, n)
}

/// Symmetric positive definite with eigenvalues at least `floor`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let a = uniform(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

pub fn random_skew<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = uniform(rng, n, n);
    &a - a.transpose()
}

/// Symmetric positive semidefinite of the given rank.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> DMatrix<f64> {
    let z = uniform(rng, n, rank);
    &z * z.transpose()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mixing {
    /// Return the block form itself.
    None,
    Orthogonal,
    /// Invertible factors with condition number at most 10.
    Invertible,
}

#[derive(Clone, Copy, Debug)]
pub struct IndexOneOptions {
    /// Differential block size (rank of `E`).
    pub n1: usize,
    /// Algebraic block size.
    pub n2: usize,
    pub m: usize,
    /// Include a nonzero `K` compatible with constant `Q^T E`.
    pub with_k: bool,
    pub mixing: Mixing,
    /// Upper bound on the condition numbers of `L22` and `Q22`.
    pub max_cond: f64,
}

impl Default for IndexOneOptions {
    fn default() -> Self {
        Self {
            n1: 3,
            n2: 2,
            m: 2,
            with_k: true,
            mixing: Mixing::Orthogonal,
            max_cond: 1e3,
        }
    }
}

/// A generated system together with the block form it came from.
#[derive(Clone, Debug)]
pub struct GeneratedSystem {
    pub system: PhdaeSystem,
    /// Coefficients with `E = diag(E11, 0)`, `Q = [[Q11, 0], [Q21, Q22]]`.
    pub blocks: Snapshot,
    /// `system = congruence_snapshot(blocks, u, v)`.
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub n1: usize,
    pub n2: usize,
}

/// Builds a constant-coefficient index-one pHDAE.
///
/// `Q11 = E11^{-1} H` with `H` SPD gives `Q^T E = diag(H, 0)`; the dissipation
/// block is drawn as one PSD matrix `[[R, P], [P^T, S]]`, and `K11 = H^{-1} Omega`
/// with `Omega` skew keeps `Q^T E K` skew so `Q^T E` stays constant.
pub fn random_index_one<R: Rng>(rng: &mut R, opts: IndexOneOptions) -> Result<GeneratedSystem> {
    let IndexOneOptions { n1, n2, m, .. } = opts;
    let n = n1 + n2;
    let blocks = loop {
        let e11 = random_spd(rng, n1, 0.5);
        let h = random_spd(rng, n1, 0.5);
        let q11 = linalg::solve(&e11, &h, "E11")?;
        let q22 = random_invertible(rng, n2, 3.0);
        let mut q = DMatrix::zeros(n, n);
        q.view_mut((0, 0), (n1, n1)).copy_from(&q11);
        q.view_mut((n1, 0), (n2, n1)).copy_from(&uniform(rng, n2, n1));
        q.view_mut((n1, n1), (n2, n2)).copy_from(&q22);
        let mut e = DMatrix::zeros(n, n);
        e.view_mut((0, 0), (n1, n1)).copy_from(&e11);

        let j = random_skew(rng, n);
        let rank = rng.gen_range(1..=n + m);
        let w = random_psd(rng, n + m, rank);
        let r = linalg::sym(&w.view((0, 0), (n, n)).into_owned());
        let p = w.view((0, n), (n, m)).into_owned();
        let s = linalg::sym(&w.view((n, n), (m, m)).into_owned());

        let mut k = DMatrix::zeros(n, n);
        if opts.with_k {
            let omega = random_skew(rng, n1) * 0.5;
            k.view_mut((0, 0), (n1, n1)).copy_from(&linalg::solve(&h, &omega, "H")?);
            k.view_mut((n1, 0), (n2, n)).copy_from(&uniform(rng, n2, n));
        }
        let l22 = (&j - &r).view((n1, n1), (n2, n2)).into_owned();
        if n2 > 0 && linalg::cond(&l22) > opts.max_cond {
            continue;
        }
        break Coeffs {
            e,
            q,
            j,
            r,
            k,
            b: uniform(rng, n, m),
            p,
            s,
            n: random_skew(rng, m) * 0.5,
        };
    };
    let (u, v) = match opts.mixing {
        Mixing::None => (DMatrix::identity(n, n), DMatrix::identity(n, n)),
        Mixing::Orthogonal => (random_orthogonal(rng, n), random_orthogonal(rng, n)),
        Mixing::Invertible => (random_invertible(rng, n, 10.0), random_invertible(rng, n, 10.0)),
    };
    let mixed = congruence_snapshot(&blocks, &u, &v)?;
    Ok(GeneratedSystem {
        system: PhdaeSystem::constant(mixed, Interval::unit())?,
        blocks,
        u,
        v,
        n1,
        n2,
    })
}
