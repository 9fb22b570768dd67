//! Matrix-valued polynomials in time, `M(t) = C0 + C1 t + ... + Ck t^k`.
//!
//! Derivatives are exact, so the skew-adjointness identity
//! `d/dt(Q^T E) = Q^T (E K - J Q) + (E K - J Q)^T Q` can be checked without
//! finite-difference noise.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{PhdaeError, Result};
use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub struct MatFun {
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl MatFun {
    /// Builds `sum_j coeffs[j] t^j`. All coefficients must share one shape.
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs.first().ok_or(PhdaeError::EmptyCoefficients)?;
        let shape = first.shape();
        for c in &coeffs[1..] {
            if c.shape() != shape {
                return Err(PhdaeError::ShapeMismatch {
                    context: "matrix function coefficients".into(),
                    expected: shape,
                    found: c.shape(),
                });
            }
        }
        Ok(Self {
            rows: shape.0,
            cols: shape.1,
            coeffs,
        })
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            coeffs: vec![m],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::constant(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Number of stored coefficients minus one.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True when every coefficient beyond the constant term is exactly zero.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.iter().all(|&x| x == 0.0))
    }

    /// Drops trailing coefficients that are exactly zero.
    pub fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().iter().all(|&x| x == 0.0) {
            self.coeffs.pop();
        }
        self
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc *= t;
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> MatFun {
        if self.coeffs.len() == 1 {
            return Self::zeros(self.rows, self.cols);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| c * j as f64)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        }
    }

    pub fn transpose(&self) -> MatFun {
        Self {
            rows: self.cols,
            cols: self.rows,
            coeffs: self.coeffs.iter().map(|c| c.transpose()).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> MatFun {
        Self {
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
        }
    }

    pub fn checked_add(&self, other: &MatFun) -> Result<MatFun> {
        self.check_same(other, "matrix function sum")?;
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|j| match (self.coeffs.get(j), other.coeffs.get(j)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &MatFun) -> Result<MatFun> {
        self.checked_add(&other.scale(-1.0))
    }

    /// Product with coefficient convolution; the degree is the sum of degrees.
    pub fn checked_mul(&self, other: &MatFun) -> Result<MatFun> {
        if self.cols != other.rows {
            return Err(PhdaeError::ShapeMismatch {
                context: "matrix function product".into(),
                expected: (self.cols, other.cols),
                found: other.shape(),
            });
        }
        let len = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![DMatrix::zeros(self.rows, other.cols); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            coeffs,
        })
    }

    /// Left-multiplies by a constant matrix.
    pub fn premul(&self, a: &DMatrix<f64>) -> MatFun {
        assert_eq!(a.ncols(), self.rows, "premul shape mismatch");
        Self {
            rows: a.nrows(),
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// Right-multiplies by a constant matrix.
    pub fn postmul(&self, a: &DMatrix<f64>) -> MatFun {
        assert_eq!(a.nrows(), self.cols, "postmul shape mismatch");
        Self {
            rows: self.rows,
            cols: a.ncols(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// Sub-block `rows x cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatFun {
        Self {
            rows,
            cols,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.view((r0, c0), (rows, cols)).into_owned())
                .collect(),
        }
    }

    fn check_same(&self, other: &MatFun, context: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(PhdaeError::ShapeMismatch {
                context: context.into(),
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    /// Least-squares polynomial fit of degree `degree` to samples `(t_i, M_i)`.
    ///
    /// Columns of the Vandermonde matrix are scaled to unit norm before the
    /// SVD solve. Returns the fit and the largest sample residual (Frobenius).
    pub fn fit(samples: &[(f64, DMatrix<f64>)], degree: usize) -> Result<(MatFun, f64)> {
        let (_, first) = samples.first().ok_or(PhdaeError::EmptyCoefficients)?;
        let (rows, cols) = first.shape();
        let npts = samples.len();
        if npts < degree + 1 {
            return Err(PhdaeError::Invalid(format!(
                "{npts} samples cannot determine a degree-{degree} fit"
            )));
        }
        let mut vander = DMatrix::zeros(npts, degree + 1);
        for (i, (t, _)) in samples.iter().enumerate() {
            let mut p = 1.0;
            for j in 0..=degree {
                vander[(i, j)] = p;
                p *= t;
            }
        }
        let scales: Vec<f64> = (0..=degree)
            .map(|j| vander.column(j).norm().max(f64::MIN_POSITIVE))
            .collect();
        for (j, s) in scales.iter().enumerate() {
            vander.column_mut(j).scale_mut(1.0 / s);
        }
        // one right-hand side column per matrix entry
        let mut rhs = DMatrix::zeros(npts, rows * cols);
        for (i, (_, m)) in samples.iter().enumerate() {
            if m.shape() != (rows, cols) {
                return Err(PhdaeError::ShapeMismatch {
                    context: "fit samples".into(),
                    expected: (rows, cols),
                    found: m.shape(),
                });
            }
            for (k, v) in m.iter().enumerate() {
                rhs[(i, k)] = *v;
            }
        }
        let sol = linalg::lstsq(&vander, &rhs, 1e-15);
        let coeffs = (0..=degree)
            .map(|j| DMatrix::from_iterator(rows, cols, sol.row(j).iter().map(|v| v / scales[j])))
            .collect();
        let f = MatFun::new(coeffs)?;
        let residual = samples
            .iter()
            .map(|(t, m)| (f.eval(*t) - m).norm())
            .fold(0.0, f64::max);
        Ok((f, residual))
    }

    /// Fits `f` on `[t0, tf]` at Chebyshev nodes, raising the degree until the
    /// residual on an independent uniform check grid falls below `tol` or
    /// `max_degree` is reached. Returns the fit and its check-grid residual.
    pub fn fit_fn<F>(f: F, t0: f64, tf: f64, max_degree: usize, tol: f64) -> Result<(MatFun, f64)>
    where
        F: Fn(f64) -> Result<DMatrix<f64>>,
    {
        let check: Vec<(f64, DMatrix<f64>)> = uniform(t0, tf, 33)
            .into_iter()
            .map(|t| f(t).map(|m| (t, m)))
            .collect::<Result<_>>()?;
        let scale = check.iter().map(|(_, m)| m.norm()).fold(0.0, f64::max);
        let mut best: Option<(MatFun, f64)> = None;
        for degree in 0..=max_degree {
            let nodes = chebyshev(t0, tf, 2 * degree + 2);
            let samples: Vec<(f64, DMatrix<f64>)> = nodes
                .into_iter()
                .map(|t| f(t).map(|m| (t, m)))
                .collect::<Result<_>>()?;
            let (fit, _) = Self::fit(&samples, degree)?;
            let resid = check
                .iter()
                .map(|(t, m)| (fit.eval(*t) - m).norm())
                .fold(0.0, f64::max);
            let better = best.as_ref().is_none_or(|(_, r)| resid < *r);
            if better {
                best = Some((fit, resid));
            }
            if resid <= tol * (1.0 + scale) {
                break;
            }
        }
        Ok(best.expect("at least degree zero was tried"))
    }
}

/// `n` uniform points on `[t0, tf]` including both ends.
pub fn uniform(t0: f64, tf: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    (0..n)
        .map(|i| t0 + (tf - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `n` Chebyshev points of the first kind mapped to `[t0, tf]`.
pub fn chebyshev(t0: f64, tf: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (t0 + tf);
    let half = 0.5 * (tf - t0);
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            mid - half * theta.cos()
        })
        .collect()
}

impl Add for &MatFun {
    type Output = MatFun;
    fn add(self, rhs: &MatFun) -> MatFun {
        self.checked_add(rhs).expect("MatFun add")
    }
}

impl Sub for &MatFun {
    type Output = MatFun;
    fn sub(self, rhs: &MatFun) -> MatFun {
        self.checked_sub(rhs).expect("MatFun sub")
    }
}

impl Mul for &MatFun {
    type Output = MatFun;
    fn mul(self, rhs: &MatFun) -> MatFun {
        self.checked_mul(rhs).expect("MatFun mul")
    }
}

impl Neg for &MatFun {
    type Output = MatFun;
    fn neg(self) -> MatFun {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matfun(rng: &mut ChaCha8Rng, r: usize, c: usize, degree: usize) -> MatFun {
        let coeffs = (0..=degree)
            .map(|_| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        MatFun::new(coeffs).unwrap()
    }

    #[test]
    fn eval_constant_and_linear() {
        let c0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = MatFun::constant(c0.clone());
        assert_eq!(m.eval(17.5), c0);

        let tid = MatFun::new(vec![DMatrix::zeros(3, 3), DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(tid.eval(2.0), DMatrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn eval_matches_naive_power_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matfun(&mut rng, 3, 2, 2);
        let t = 0.5;
        let naive = &m.coeffs()[0] + &m.coeffs()[1] * t + &m.coeffs()[2] * (t * t);
        assert!((m.eval(t) - naive).norm() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_and_linear() {
        let m = MatFun::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = m.derivative();
        assert_eq!(d.shape(), (2, 3));
        assert_eq!(d.eval(1.3), DMatrix::zeros(2, 3));

        let tid = MatFun::new(vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let d = tid.derivative();
        assert_eq!(d.degree(), 0);
        assert_eq!(d.eval(9.0), DMatrix::identity(2, 2));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matfun(&mut rng, 3, 3, 3);
        let (t, h) = (0.7, 1e-5);
        let fd = (m.eval(t + h) - m.eval(t - h)) / (2.0 * h);
        let exact = m.derivative().eval(t);
        assert!((fd - exact).amax() < 1e-8);
    }

    #[test]
    fn algebra_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matfun(&mut rng, 3, 4, 2);
        let b = random_matfun(&mut rng, 4, 2, 3);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(&a * &MatFun::identity(4), a);
        let ab = &a * &b;
        assert_eq!(ab.degree(), 5);
        for _ in 0..10 {
            let t = rng.gen_range(-2.0..2.0);
            let pointwise = a.eval(t) * b.eval(t);
            assert!((ab.eval(t) - &pointwise).norm() < 1e-12 * (1.0 + pointwise.norm()));
        }
    }

    #[test]
    fn shape_errors_and_empty_list() {
        assert_eq!(MatFun::new(vec![]), Err(PhdaeError::EmptyCoefficients));
        assert!(MatFun::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)]).is_err());
        let a = MatFun::zeros(2, 3);
        assert!(a.checked_mul(&MatFun::zeros(2, 3)).is_err());
        assert!(a.checked_add(&MatFun::zeros(3, 2)).is_err());
    }

    #[test]
    fn fit_recovers_polynomial_and_approximates_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_matfun(&mut rng, 2, 2, 3);
        let (fit, resid) = MatFun::fit_fn(|t| Ok(m.eval(t)), 0.0, 1.0, 6, 1e-12).unwrap();
        assert!(resid < 1e-10);
        assert!((fit.eval(0.37) - m.eval(0.37)).norm() < 1e-10);

        // 1/(2+t) is not polynomial; degree 12 on [0,1] is accurate to ~1e-10
        let (_, resid) = MatFun::fit_fn(
            |t| Ok(DMatrix::from_element(1, 1, 1.0 / (2.0 + t))),
            0.0,
            1.0,
            12,
            1e-13,
        )
        .unwrap();
        assert!(resid < 1e-9, "residual {resid}");
    }

    proptest::proptest! {
        #[test]
        fn sum_and_product_commute_with_eval(seed in 0u64..1000, t in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matfun(&mut rng, 2, 3, 2);
            let b = random_matfun(&mut rng, 2, 3, 1);
            let c = random_matfun(&mut rng, 3, 2, 2);
            let s = &a + &b;
            proptest::prop_assert!((s.eval(t) - (a.eval(t) + b.eval(t))).norm() < 1e-12 * (1.0 + t.abs().powi(2)) * 10.0);
            let p = &a * &c;
            let pw = a.eval(t) * c.eval(t);
            proptest::prop_assert!((p.eval(t) - &pw).norm() < 1e-11 * (1.0 + pw.norm()));
        }
    }
}
