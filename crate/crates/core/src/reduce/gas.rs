use nalgebra::{DMatrix, DVector};

use crate::error::{PhdaeError, Result};
use crate::linalg::{self, SquareSvd, RANK_TOL};
use crate::system::{Coeffs, PhdaeSystem, Snapshot};

use super::canonical::sub;

/// Split of a gas network along an SVD of the multiplier coupling `N~`.
///
/// In the coordinates `x2 = W [x22; x23]`, `x3 = Y x3'` the system reads
/// `E x' + (R - J) x = B u` with the constraint `Sigma x23 = 0`, an ODE for
/// `(x1, x22)` and an explicit formula for the multiplier `x3'`.
#[derive(Clone, Debug)]
pub struct GasReduction {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub m: usize,
    /// Orthogonal `W = [kernel of N~, row space of N~]`.
    pub w: DMatrix<f64>,
    pub sigma: DVector<f64>,
    /// Orthogonal factor with `N~ W[:, n2-n3..] = Y Sigma`.
    pub y: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m22: DMatrix<f64>,
    pub m23: DMatrix<f64>,
    pub g12: DMatrix<f64>,
    pub g13: DMatrix<f64>,
    pub d22: DMatrix<f64>,
    pub d23: DMatrix<f64>,
    pub b22: DMatrix<f64>,
    pub b32: DMatrix<f64>,
    /// Implicit port-Hamiltonian ODE on `(x1, x22)`.
    pub ode: PhdaeSystem,
    transform: DMatrix<f64>,
    original: Snapshot,
}

fn negligible(m: &DMatrix<f64>, scale: f64) -> bool {
    m.amax() <= 1e-13 * scale
}

fn structure(msg: &str) -> PhdaeError {
    PhdaeError::Structure(format!("not a gas network: {msg}"))
}

impl GasReduction {
    pub fn ode_size(&self) -> usize {
        self.n1 + self.n2 - self.n3
    }

    /// Split coordinates `(x1, x22, x23, x3')` of an original state.
    pub fn to_split(&self, x: &DVector<f64>) -> DVector<f64> {
        self.transform.transpose() * x
    }

    /// Original state from split coordinates.
    pub fn from_split(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.transform * z
    }

    /// ODE state `(x1, x22)` of an original state.
    pub fn reduced_state(&self, x: &DVector<f64>) -> DVector<f64> {
        self.to_split(x).rows(0, self.ode_size()).into_owned()
    }

    /// `x22'` from the reduced ODE.
    pub fn x22_rate(&self, xr: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (x1, x22) = (xr.rows(0, self.n1), xr.rows(self.n1, self.n2 - self.n3));
        let rhs = self.g12.transpose() * x1 - &self.d22 * x22 + &self.b22 * u;
        Ok(linalg::solve(&self.m22, &col(&rhs), "M22")?.column(0).into_owned())
    }

    /// Multiplier `x3' = Sigma^{-1}(M23^T x22' - G13^T x1 + D23^T x22 - B32 u)`
    /// in split coordinates.
    pub fn multiplier_split(&self, xr: &DVector<f64>, dx22: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (x1, x22) = (xr.rows(0, self.n1), xr.rows(self.n1, self.n2 - self.n3));
        let v = self.m23.transpose() * dx22 - self.g13.transpose() * x1 + self.d23.transpose() * x22 - &self.b32 * u;
        v.component_div(&self.sigma)
    }

    /// Multiplier in original coordinates.
    pub fn multiplier(&self, xr: &DVector<f64>, dx22: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.y * self.multiplier_split(xr, dx22, u)
    }

    /// Original state with `x23 = 0` and the multiplier recovered.
    pub fn lift(&self, xr: &DVector<f64>, x3_split: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.n1 + self.n2 + self.n3);
        z.rows_mut(0, self.ode_size()).copy_from(xr);
        z.rows_mut(self.n1 + self.n2, self.n3).copy_from(x3_split);
        self.from_split(&z)
    }

    /// Consistent initial state for `(x1, x22)` and `u(t0)`.
    pub fn consistent_state(&self, xr: &DVector<f64>, u0: &DVector<f64>) -> Result<DVector<f64>> {
        let dx22 = self.x22_rate(xr, u0)?;
        Ok(self.lift(xr, &self.multiplier_split(xr, &dx22, u0)))
    }

    /// `max(||x23||, ||x3' - formula||)` at `t0`.
    pub fn consistency_residual(&self, x: &DVector<f64>, u0: &DVector<f64>) -> Result<f64> {
        let z = self.to_split(x);
        let k = self.n2 - self.n3;
        let x23 = z.rows(self.n1 + k, self.n3);
        let xr = z.rows(0, self.n1 + k).into_owned();
        let dx22 = self.x22_rate(&xr, u0)?;
        let x3 = z.rows(self.n1 + self.n2, self.n3);
        Ok(x23.norm().max((x3 - self.multiplier_split(&xr, &dx22, u0)).norm()))
    }

    /// `(E_s, A_s, B_s)` of the split system `E_s z' + A_s z = B_s u`.
    pub fn split_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let t = &self.transform;
        let tt = t.transpose();
        let c = &self.original;
        (&tt * &c.e * t, -(&tt * c.a() * t), tt * &c.b)
    }

    /// Steps `k` where `||B32 (u_{k+1} - u_k)|| > jump_tol`; such jumps make the
    /// multiplier discontinuous.
    pub fn flag_discontinuities(&self, inputs: &[DVector<f64>], jump_tol: f64) -> Vec<usize> {
        inputs
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (&self.b32 * (&w[1] - &w[0])).norm() > jump_tol)
            .map(|(k, _)| k)
            .collect()
    }
}

fn col(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Splits a gas network `E = blkdiag(M1, M2, 0)`, `J = [[0, -G, 0], [G^T, 0, N^T], [0, -N, 0]]`,
/// `R = blkdiag(0, D, 0)`, `B = [0; B2; 0]`, `Q = I`.
pub fn gas_reduction(sys: &PhdaeSystem) -> Result<GasReduction> {
    let c = sys.constant_snapshot("gas network reduction")?;
    let (n, m) = (sys.n(), sys.m());
    let scale = 1.0 + c.e.amax().max(c.j.amax()).max(c.r.amax()).max(c.b.amax());
    let zero_row = |mat: &DMatrix<f64>, i: usize| mat.row(i).amax() <= 1e-13 * scale;
    let n3 = (0..n).rev().take_while(|&i| zero_row(&c.e, i)).count();
    let n1 = (0..n).take_while(|&i| zero_row(&c.r, i)).count();
    if n3 == 0 || n1 + n3 >= n {
        return Err(structure("cannot locate the pressure, flux and multiplier blocks"));
    }
    let n2 = n - n1 - n3;
    if n3 > n2 {
        return Err(structure("more multipliers than fluxes"));
    }
    if !negligible(&(&c.q - DMatrix::identity(n, n)), scale)
        || !negligible(&c.k, scale)
        || !negligible(&c.p, scale)
        || !negligible(&c.s, scale)
        || !negligible(&c.n, scale)
    {
        return Err(structure("requires Q = I and K = P = S = N = 0"));
    }
    if !negligible(&(&c.j + c.j.transpose()), scale) {
        return Err(structure("J is not skew-symmetric"));
    }
    let o = [0, n1, n1 + n2];
    let sz = [n1, n2, n3];
    let blk = |mat: &DMatrix<f64>, i: usize, j: usize| sub(mat, o[i], o[j], sz[i], sz[j]);
    let zero_blocks = [
        (&c.e, 0, 1, "E12"),
        (&c.e, 0, 2, "E13"),
        (&c.e, 1, 2, "E23"),
        (&c.j, 0, 0, "J11"),
        (&c.j, 0, 2, "J13"),
        (&c.j, 1, 1, "J22"),
        (&c.j, 2, 2, "J33"),
        (&c.r, 1, 2, "R23"),
        (&c.r, 2, 2, "R33"),
    ];
    for (mat, i, j, name) in zero_blocks {
        if !negligible(&blk(mat, i, j), scale) || !negligible(&blk(mat, j, i), scale) {
            return Err(structure(&format!("block {name} must vanish")));
        }
    }
    if !negligible(&sub(&c.b, 0, 0, n1, m), scale) || !negligible(&sub(&c.b, n1 + n2, 0, n3, m), scale) {
        return Err(structure("inputs may only act on the flux block"));
    }
    let m1 = blk(&c.e, 0, 0);
    let m2 = blk(&c.e, 1, 1);
    let g = -blk(&c.j, 0, 1);
    let nt = -blk(&c.j, 2, 1);
    let d = blk(&c.r, 1, 1);
    let b2 = sub(&c.b, n1, 0, n2, m);

    let mut padded = DMatrix::zeros(n2, n2);
    padded.view_mut((0, 0), (n3, n2)).copy_from(&nt);
    let svd = SquareSvd::new(&padded);
    if svd.rank(RANK_TOL) != n3 {
        return Err(PhdaeError::Singular {
            what: "Sigma (N~ lacks full row rank)".into(),
            sigma_min: svd.singular_values[n3 - 1],
            at: String::new(),
        });
    }
    let k = n2 - n3;
    let vr = svd.v.columns(0, n3).into_owned();
    let vn = svd.v.columns(n3, k).into_owned();
    let w = linalg::block(&[vec![&vn, &vr]]);
    let sigma = DVector::from_iterator(n3, svd.singular_values[..n3].iter().cloned());
    let y = (&nt * &vr) * DMatrix::from_diagonal(&sigma.map(|s| 1.0 / s));

    let mw = w.transpose() * &m2 * &w;
    let dw = w.transpose() * &d * &w;
    let gw = &g * &w;
    let bw = w.transpose() * &b2;
    let m22 = sub(&mw, 0, 0, k, k);
    let d22 = sub(&dw, 0, 0, k, k);
    let g12 = sub(&gw, 0, 0, n1, k);
    let b22 = sub(&bw, 0, 0, k, m);

    let nr = n1 + k;
    let mut j = DMatrix::zeros(nr, nr);
    j.view_mut((0, n1), (n1, k)).copy_from(&(-&g12));
    j.view_mut((n1, 0), (k, n1)).copy_from(&g12.transpose());
    let mut b = DMatrix::zeros(nr, m);
    b.view_mut((n1, 0), (k, m)).copy_from(&b22);
    let ode = PhdaeSystem::constant(
        Coeffs {
            e: linalg::blkdiag(&[&m1, &m22]),
            q: DMatrix::identity(nr, nr),
            j,
            r: linalg::blkdiag(&[&DMatrix::zeros(n1, n1), &d22]),
            k: DMatrix::zeros(nr, nr),
            b,
            p: DMatrix::zeros(nr, m),
            s: DMatrix::zeros(m, m),
            n: DMatrix::zeros(m, m),
        },
        sys.interval(),
    )?;
    let transform = linalg::blkdiag(&[&DMatrix::identity(n1, n1), &w, &y]);
    Ok(GasReduction {
        n1,
        n2,
        n3,
        m,
        m23: sub(&mw, 0, k, k, n3),
        g13: sub(&gw, 0, k, n1, n3),
        d23: sub(&dw, 0, k, k, n3),
        b32: sub(&bw, k, 0, n3, m),
        w,
        sigma,
        y,
        m1,
        m22,
        g12,
        d22,
        b22,
        ode,
        transform,
        original: c,
    })
}
