use nalgebra::{DMatrix, DVector};

use crate::error::{PhdaeError, Result};
use crate::index::{strangeness_analysis, BehaviorPencil, IndexData};
use crate::linalg::{self, SquareSvd, RANK_TOL};
use crate::system::PhdaeSystem;
use crate::transform::congruence_snapshot;

use super::canonical::sub;

/// Result of appending the hidden constraints `A3 x = 0` and splitting off `x3 = 0`.
#[derive(Clone, Debug)]
pub struct Regularized {
    /// Number of hidden constraints, the size of `x3`.
    pub a3: usize,
    /// The full transformed system on `(x1, x2, x3)`; its last `a3` rows of `Q`
    /// vanish outside the `x3` columns.
    pub transformed: PhdaeSystem,
    pub u: DMatrix<f64>,
    /// Original states are `x = v z`.
    pub v: DMatrix<f64>,
    /// Leading square block on `(x1, x2)`, valid on `x3 = 0`.
    pub subsystem: PhdaeSystem,
    /// Every constraint on the original state, explicit rows first.
    pub constraints: DMatrix<f64>,
    /// `A3 V = [0 0 A33]` residual.
    pub selection_residual: f64,
    pub cond_a33: f64,
    /// Hidden constraints of the system with inputs that involve `u`; when
    /// nonzero the subsystem is exact only for inputs that keep them inactive.
    pub input_coupled_hidden: Option<usize>,
}

impl Regularized {
    pub fn subsystem_size(&self) -> usize {
        self.subsystem.n()
    }

    /// Original-coordinate state of a subsystem state with `x3 = 0` appended.
    pub fn lift(&self, xs: &DVector<f64>) -> DVector<f64> {
        self.v.columns(0, self.subsystem_size()) * xs
    }

    /// Subsystem coordinates of an original-coordinate state.
    pub fn restrict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let z = linalg::solve(&self.v, &DMatrix::from_column_slice(x.len(), 1, x.as_slice()), "V")?;
        Ok(z.column(0).rows(0, self.subsystem_size()).into_owned())
    }

    /// `||C x||` over all explicit and hidden state constraints.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.constraints * x).norm()
    }

    /// Orthogonal projection of `x` onto the constraint set.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.constraints.nrows() == 0 {
            return x.clone();
        }
        let cx = DMatrix::from_column_slice(self.constraints.nrows(), 1, (&self.constraints * x).as_slice());
        x - lsq_column(&self.constraints, &cx)
    }
}

fn lsq_column(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    linalg::lstsq(a, b, RANK_TOL).column(0).into_owned()
}

/// Regularizes a constant-coefficient pHDAE using the hidden constraints in
/// `idx` (normally from the free response).
///
/// With `E = U1 diag(E11, 0) V1^T` and `A3 V1 = [A31 A32]`, an orthogonal `V2`
/// maps `A32` to `[0 A33]`; the change of variables then makes `x3 = A33^{-1}
/// A3 x`, and an orthogonal `U2` zeroes the last block row of `Q` outside `x3`.
pub fn regularize_high_index(sys: &PhdaeSystem, idx: &IndexData, tol: f64) -> Result<Regularized> {
    let c = sys.constant_snapshot("regularization")?;
    let n = sys.n();
    if idx.n != n || idx.a3.ncols() != n {
        return Err(PhdaeError::Dimension(format!(
            "index data is for n = {}, system has n = {n}",
            idx.n
        )));
    }
    let constraints = idx.state_constraints();
    let input_coupled_hidden = input_coupling(sys, idx.mu);
    let k = idx.a3.nrows();
    if k == 0 {
        return Ok(Regularized {
            a3: 0,
            transformed: sys.clone(),
            u: DMatrix::identity(n, n),
            v: DMatrix::identity(n, n),
            subsystem: sys.clone(),
            constraints,
            selection_residual: 0.0,
            cond_a33: 1.0,
            input_coupled_hidden,
        });
    }

    let svd = SquareSvd::new(&c.e);
    let r = svd.rank(RANK_TOL);
    let a3v = &idx.a3 * &svd.v;
    let a31 = sub(&a3v, 0, 0, k, r);
    let a32 = sub(&a3v, 0, r, k, n - r);
    let sv = linalg::singular_values(&a32);
    if linalg::rank(&a32, tol) != k {
        return Err(PhdaeError::RankAssumption {
            what: "A32, the hidden constraints restricted to the kernel of E".into(),
            detail: format!("{k} x {} block does not have full row rank", n - r),
            singular_values: sv,
        });
    }
    let null = linalg::right_null(&a32, tol);
    let rows = linalg::row_basis(&a32, tol).transpose();
    if null.ncols() + rows.ncols() != n - r {
        return Err(PhdaeError::RankAssumption {
            what: "A32".into(),
            detail: "null space and row space do not split the kernel of E".into(),
            singular_values: sv,
        });
    }
    let v2 = linalg::block(&[vec![&null, &rows]]);
    let a33 = &a32 * &rows;
    let mut t = DMatrix::identity(n, n);
    t.view_mut((n - k, 0), (k, r)).copy_from(&(-linalg::solve(&a33, &a31, "A33")?));
    let v = &svd.v * linalg::blkdiag(&[&DMatrix::identity(r, r), &v2]) * t;

    let c1 = congruence_snapshot(&c, &svd.u, &v)?;
    let ns = n - k;
    let lead = c1.q.columns(0, ns).into_owned();
    let left = linalg::left_null(&lead, tol);
    if left.ncols() < k {
        return Err(PhdaeError::RankAssumption {
            what: "leading columns of the transformed Q".into(),
            detail: format!("left null space has dimension {} < {k}", left.ncols()),
            singular_values: linalg::singular_values(&lead),
        });
    }
    let y = left.columns(0, k).into_owned();
    let u2 = linalg::block(&[vec![&linalg::orthogonal_complement(&y), &y]]);
    let form = congruence_snapshot(&c1, &u2, &DMatrix::identity(n, n))?;
    let u = &svd.u * u2;

    let mut target = DMatrix::zeros(k, n);
    target.view_mut((0, ns), (k, k)).copy_from(&a33);
    let selection_residual = linalg::fro(&(&idx.a3 * &v - target));

    let m = sys.m();
    let sub_snap = crate::system::Coeffs {
        e: sub(&form.e, 0, 0, ns, ns),
        q: sub(&form.q, 0, 0, ns, ns),
        j: sub(&form.j, 0, 0, ns, ns),
        r: sub(&form.r, 0, 0, ns, ns),
        k: sub(&form.k, 0, 0, ns, ns),
        b: sub(&form.b, 0, 0, ns, m),
        p: sub(&form.p, 0, 0, ns, m),
        s: form.s.clone(),
        n: form.n.clone(),
    };
    Ok(Regularized {
        a3: k,
        transformed: PhdaeSystem::constant(form, sys.interval())?,
        u,
        v,
        subsystem: PhdaeSystem::constant(sub_snap, sys.interval())?,
        constraints,
        selection_residual,
        cond_a33: linalg::cond(&a33),
        input_coupled_hidden,
    })
}

fn input_coupling(sys: &PhdaeSystem, mu: usize) -> Option<usize> {
    if sys.m() == 0 {
        return Some(0);
    }
    let pencil = BehaviorPencil::from_system(sys).ok()?;
    strangeness_analysis(&pencil, mu + 1, RANK_TOL)
        .data
        .map(|d| d.input_coupled_hidden)
}
