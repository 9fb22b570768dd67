//! Builders for four model families: RLC circuits, gas networks, a linearized
//! constrained manipulator and a damped acoustic field, plus named presets.

use nalgebra::{DMatrix, DVector};

use crate::error::{PhdaeError, Result};
use crate::linalg::{self, RANK_TOL};
use crate::system::{Coeffs, Interval, PhdaeSystem, Snapshot};

fn require_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    require_sym(m, name)?;
    if m.nrows() > 0 && linalg::min_sym_eig(m) <= RANK_TOL * (1.0 + linalg::norm2(m)) {
        return Err(PhdaeError::Structure(format!("{name} must be positive definite")));
    }
    Ok(())
}

fn require_psd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    require_sym(m, name)?;
    if linalg::min_sym_eig(m) < -1e-12 * (1.0 + linalg::norm2(m)) {
        return Err(PhdaeError::Structure(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

fn require_sym(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-14 * (1.0 + m.amax()) {
        return Err(PhdaeError::Structure(format!("{name} must be symmetric")));
    }
    Ok(())
}

fn require_full_row_rank(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if linalg::rank(m, RANK_TOL) != m.nrows() {
        return Err(PhdaeError::Structure(format!("{name} must have full row rank")));
    }
    Ok(())
}

fn require_rows(m: &DMatrix<f64>, rows: usize, name: &str) -> Result<()> {
    if m.nrows() != rows {
        return Err(PhdaeError::Dimension(format!("{name} has {} rows, expected {rows}", m.nrows())));
    }
    Ok(())
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

/// Incidence matrices (nodes x edges) and element values of an RLC network.
#[derive(Clone, Debug)]
pub struct RlcParams {
    pub gc: DMatrix<f64>,
    pub gr: DMatrix<f64>,
    pub gl: DMatrix<f64>,
    pub gv: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub rr: DMatrix<f64>,
}

/// Modified nodal analysis with state `[V; I_l; I_v]`:
/// `E = blkdiag(Gc C Gc^T, L, 0)`, `Q = I`, no ports, and `J`, `R` the skew
/// and negative symmetric parts of the right-hand matrix.
pub fn rlc(p: &RlcParams) -> Result<PhdaeSystem> {
    let nodes = p.gc.nrows();
    for (m, name) in [(&p.gr, "Gr"), (&p.gl, "Gl"), (&p.gv, "Gv")] {
        require_rows(m, nodes, name)?;
    }
    require_spd(&p.c, "C")?;
    require_spd(&p.l, "L")?;
    require_spd(&p.rr, "Rr")?;
    if linalg::rank(&p.gv, RANK_TOL) != p.gv.ncols() {
        return Err(PhdaeError::Structure("Gv must have full column rank".into()));
    }
    let (nl, nv) = (p.gl.ncols(), p.gv.ncols());
    let n = nodes + nl + nv;
    let cap = &p.gc * &p.c * p.gc.transpose();
    let e = linalg::blkdiag(&[&cap, &p.l, &DMatrix::zeros(nv, nv)]);
    let g = &p.gr * linalg::solve(&p.rr, &p.gr.transpose(), "Rr")?;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nodes, nodes)).copy_from(&(-g));
    a.view_mut((0, nodes), (nodes, nl)).copy_from(&(-&p.gl));
    a.view_mut((0, nodes + nl), (nodes, nv)).copy_from(&(-&p.gv));
    a.view_mut((nodes, 0), (nl, nodes)).copy_from(&p.gl.transpose());
    a.view_mut((nodes + nl, 0), (nv, nodes)).copy_from(&p.gv.transpose());
    let j = (&a - a.transpose()) * 0.5;
    let r = -(&a + a.transpose()) * 0.5;
    PhdaeSystem::constant(Snapshot::unported(e, j, r), Interval::unit())
}

/// Two nodes; capacitors from each node to ground, a resistor between the
/// nodes, an inductor at node 2 and a voltage source at node 1. The source in
/// parallel with a capacitor makes the free response index two.
pub fn rlc_preset() -> RlcParams {
    RlcParams {
        gc: DMatrix::identity(2, 2),
        gr: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        gl: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        gv: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        c: diag(&[1.0, 0.5]),
        l: diag(&[1.5]),
        rr: diag(&[2.0]),
    }
}

/// One capacitor, inductor, resistor and voltage source, all with unit values.
pub fn rlc_single_preset() -> RlcParams {
    RlcParams {
        gc: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        gr: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        gl: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        gv: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        c: diag(&[1.0]),
        l: diag(&[1.0]),
        rr: diag(&[1.0]),
    }
}

/// The preset network with the voltage source removed.
pub fn rlc_sourceless_preset() -> RlcParams {
    RlcParams {
        gv: DMatrix::zeros(2, 0),
        ..rlc_preset()
    }
}

/// Blocks of a discretized gas network with `n1` pressures, `n2` fluxes and
/// `n3` multipliers.
#[derive(Clone, Debug)]
pub struct GasParams {
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    /// `G~`, `n1 x n2`.
    pub g: DMatrix<f64>,
    /// `N~`, `n3 x n2`.
    pub nt: DMatrix<f64>,
    /// `D~`, `n2 x n2`.
    pub d: DMatrix<f64>,
    /// `B~2`, `n2 x m`.
    pub b2: DMatrix<f64>,
}

impl GasParams {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.m1.nrows(), self.m2.nrows(), self.nt.nrows())
    }
}

/// `E = blkdiag(M1, M2, 0)`, `J = [[0, -G, 0], [G^T, 0, N^T], [0, -N, 0]]`,
/// `R = blkdiag(0, D, 0)`, `B = [0; B2; 0]`, `Q = I`, `P = S = N = 0`.
pub fn gas_network(p: &GasParams) -> Result<PhdaeSystem> {
    let (n1, n2, n3) = p.sizes();
    require_spd(&p.m1, "M1")?;
    require_spd(&p.m2, "M2")?;
    require_spd(&p.d, "D")?;
    if p.g.shape() != (n1, n2) || p.nt.ncols() != n2 || p.d.nrows() != n2 {
        return Err(PhdaeError::Dimension("gas network blocks do not conform".into()));
    }
    require_rows(&p.b2, n2, "B2")?;
    require_full_row_rank(&p.nt, "N")?;
    require_full_row_rank(&linalg::block(&[vec![&p.g], vec![&p.nt]]), "[G; N]")?;
    let n = n1 + n2 + n3;
    let m = p.b2.ncols();
    let e = linalg::blkdiag(&[&p.m1, &p.m2, &DMatrix::zeros(n3, n3)]);
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, n1), (n1, n2)).copy_from(&(-&p.g));
    j.view_mut((n1, 0), (n2, n1)).copy_from(&p.g.transpose());
    j.view_mut((n1, n1 + n2), (n2, n3)).copy_from(&p.nt.transpose());
    j.view_mut((n1 + n2, n1), (n3, n2)).copy_from(&(-&p.nt));
    let r = linalg::blkdiag(&[&DMatrix::zeros(n1, n1), &p.d, &DMatrix::zeros(n3, n3)]);
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((n1, 0), (n2, m)).copy_from(&p.b2);
    let c = Coeffs {
        e,
        q: DMatrix::identity(n, n),
        j,
        r,
        k: DMatrix::zeros(n, n),
        b,
        p: DMatrix::zeros(n, m),
        s: DMatrix::zeros(m, m),
        n: DMatrix::zeros(m, m),
    };
    PhdaeSystem::constant(c, Interval::unit())
}

/// Two pressures, four fluxes, two multipliers and one boundary input.
pub fn gas_preset() -> GasParams {
    GasParams {
        m1: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        m2: DMatrix::from_row_slice(
            4,
            4,
            &[2.0, 0.3, 0.0, 0.0, 0.3, 2.0, 0.3, 0.0, 0.0, 0.3, 2.0, 0.3, 0.0, 0.0, 0.3, 2.0],
        ),
        g: DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0]),
        nt: DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 0.0, 1.0]),
        d: diag(&[0.5, 0.4, 0.3, 0.6]),
        b2: DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 0.0, 0.5]),
    }
}

/// Linearized constrained mechanism in first-order form with state
/// `[velocity; position; multiplier]`.
#[derive(Clone, Debug)]
pub struct ManipulatorParams {
    pub m: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub s: DMatrix<f64>,
    /// Constraint Jacobian, `nc x np`.
    pub g: DMatrix<f64>,
    pub b1: DMatrix<f64>,
}

/// `E = blkdiag(M, I, 0)`, `Q = blkdiag(I, S, I)`, `J = [[0, -I, G^T], [I, 0, 0], [-G, 0, 0]]`,
/// `R = blkdiag(D, 0, 0)`, `B = [B1; 0; 0]`.
pub fn manipulator_linearized(p: &ManipulatorParams) -> Result<PhdaeSystem> {
    let np = p.m.nrows();
    let nc = p.g.nrows();
    require_spd(&p.m, "M")?;
    require_spd(&p.s, "S")?;
    require_psd(&p.d, "D")?;
    if p.g.ncols() != np || p.d.nrows() != np || p.s.nrows() != np {
        return Err(PhdaeError::Dimension("manipulator blocks do not conform".into()));
    }
    require_rows(&p.b1, np, "B1")?;
    require_full_row_rank(&p.g, "G")?;
    let n = 2 * np + nc;
    let m = p.b1.ncols();
    let id = DMatrix::<f64>::identity(np, np);
    let e = linalg::blkdiag(&[&p.m, &id, &DMatrix::zeros(nc, nc)]);
    let q = linalg::blkdiag(&[&id, &p.s, &DMatrix::identity(nc, nc)]);
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, np), (np, np)).copy_from(&(-&id));
    j.view_mut((np, 0), (np, np)).copy_from(&id);
    j.view_mut((0, 2 * np), (np, nc)).copy_from(&p.g.transpose());
    j.view_mut((2 * np, 0), (nc, np)).copy_from(&(-&p.g));
    let r = linalg::blkdiag(&[&p.d, &DMatrix::zeros(np + nc, np + nc)]);
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (np, m)).copy_from(&p.b1);
    let c = Coeffs {
        e,
        q,
        j,
        r,
        k: DMatrix::zeros(n, n),
        b,
        p: DMatrix::zeros(n, m),
        s: DMatrix::zeros(m, m),
        n: DMatrix::zeros(m, m),
    };
    PhdaeSystem::constant(c, Interval::unit())
}

/// Three coordinates, two constraints, torque inputs on every coordinate.
pub fn manipulator_preset() -> ManipulatorParams {
    ManipulatorParams {
        m: DMatrix::from_row_slice(3, 3, &[2.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 1.0]),
        d: diag(&[0.3, 0.2, 0.1]),
        s: DMatrix::from_row_slice(3, 3, &[2.0, -0.5, 0.0, -0.5, 2.0, -0.5, 0.0, -0.5, 2.0]),
        g: DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]),
        b1: DMatrix::identity(3, 3),
    }
}

/// Second-order model `M p'' + D p' + K p = B1 u`.
#[derive(Clone, Debug)]
pub struct AcousticParams {
    pub m: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub b1: DMatrix<f64>,
}

/// State `z = [p'; p]`: `E = blkdiag(M, I)`, `J = [[0, -I], [I, 0]]`,
/// `R = blkdiag(D, 0)`, `Q = blkdiag(I, K)`, `B = [B1; 0]`.
pub fn acoustic(p: &AcousticParams) -> Result<PhdaeSystem> {
    let np = p.m.nrows();
    require_psd(&p.m, "M")?;
    require_psd(&p.d, "D")?;
    require_spd(&p.k, "K")?;
    if p.d.nrows() != np || p.k.nrows() != np {
        return Err(PhdaeError::Dimension("acoustic blocks do not conform".into()));
    }
    require_rows(&p.b1, np, "B1")?;
    let n = 2 * np;
    let m = p.b1.ncols();
    let id = DMatrix::<f64>::identity(np, np);
    let e = linalg::blkdiag(&[&p.m, &id]);
    let q = linalg::blkdiag(&[&id, &p.k]);
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, np), (np, np)).copy_from(&(-&id));
    j.view_mut((np, 0), (np, np)).copy_from(&id);
    let r = linalg::blkdiag(&[&p.d, &DMatrix::zeros(np, np)]);
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (np, m)).copy_from(&p.b1);
    let c = Coeffs {
        e,
        q,
        j,
        r,
        k: DMatrix::zeros(n, n),
        b,
        p: DMatrix::zeros(n, m),
        s: DMatrix::zeros(m, m),
        n: DMatrix::zeros(m, m),
    };
    PhdaeSystem::constant(c, Interval::unit())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcousticVariant {
    /// Positive definite mass and damping.
    Regular,
    /// The last degree of freedom is massless and undamped.
    Singular,
    /// Positive definite mass and no damping.
    Lossless,
}

fn acoustic_stiffness() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0])
}

pub fn acoustic_preset(variant: AcousticVariant) -> AcousticParams {
    let k = acoustic_stiffness();
    let b1 = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    match variant {
        AcousticVariant::Regular => AcousticParams {
            m: DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 1.0, 0.1, 0.0, 0.1, 0.8]),
            d: diag(&[0.2, 0.1, 0.1]),
            k,
            b1,
        },
        AcousticVariant::Singular => AcousticParams {
            m: diag(&[1.0, 0.8, 0.0]),
            d: diag(&[0.2, 0.1, 0.0]),
            k,
            b1,
        },
        AcousticVariant::Lossless => AcousticParams {
            m: DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 1.0, 0.1, 0.0, 0.1, 0.8]),
            d: DMatrix::zeros(3, 3),
            k,
            b1,
        },
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "rlc",
    "rlc-single",
    "rlc-sourceless",
    "gas",
    "manipulator",
    "acoustic",
    "acoustic-singular",
    "acoustic-lossless",
];

/// Builds a named preset.
pub fn preset(name: &str) -> Option<PhdaeSystem> {
    let sys = match name {
        "rlc" => rlc(&rlc_preset()),
        "rlc-single" => rlc(&rlc_single_preset()),
        "rlc-sourceless" => rlc(&rlc_sourceless_preset()),
        "gas" => gas_network(&gas_preset()),
        "manipulator" => manipulator_linearized(&manipulator_preset()),
        "acoustic" => acoustic(&acoustic_preset(AcousticVariant::Regular)),
        "acoustic-singular" => acoustic(&acoustic_preset(AcousticVariant::Singular)),
        "acoustic-lossless" => acoustic(&acoustic_preset(AcousticVariant::Lossless)),
        _ => return None,
    };
    Some(sys.expect("presets satisfy their builder invariants"))
}
