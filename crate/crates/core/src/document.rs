//! JSON documents: the system file format and the machine-readable report.
//!
//! Every coefficient is required, zero matrices included, and each one is a
//! list of row-major matrices `[C0, C1, ...]` for `C0 + C1 t + ...`. Floats are
//! written in the shortest form that parses back to the same bits, so
//! serialize-parse-serialize is the identity.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PhdaeError, Result};
use crate::index::{IndexAnalysis, LevelReport};
use crate::matfun::MatFun;
use crate::sim::{EnergyReport, Input};
use crate::system::{Coeffs, Interval, PhdaeSystem, StructureReport};

pub const SCHEMA: u32 = 1;

/// Row-major matrix, one inner list per row.
pub type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntries {
    #[serde(rename = "E")]
    pub e: Vec<Rows>,
    #[serde(rename = "Q")]
    pub q: Vec<Rows>,
    #[serde(rename = "J")]
    pub j: Vec<Rows>,
    #[serde(rename = "R")]
    pub r: Vec<Rows>,
    #[serde(rename = "K")]
    pub k: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "P")]
    pub p: Vec<Rows>,
    #[serde(rename = "S")]
    pub s: Vec<Rows>,
    #[serde(rename = "N")]
    pub n: Vec<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InputSpec {
    /// `u(t) = c0 + c1 t + ...`, each `ci` of length `m`.
    Polynomial { coeffs: Vec<Vec<f64>> },
    /// Piecewise-linear through the samples.
    Samples { times: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub schema: u32,
    pub n: usize,
    pub m: usize,
    pub t0: f64,
    pub tf: f64,
    pub coefficients: CoeffEntries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
}

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &Rows, shape: (usize, usize), what: &str) -> Result<DMatrix<f64>> {
    let bad = |found| PhdaeError::ShapeMismatch {
        context: what.to_string(),
        expected: shape,
        found,
    };
    if rows.len() != shape.0 {
        return Err(bad((rows.len(), rows.first().map_or(0, |r| r.len()))));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != shape.1) {
        return Err(bad((rows.len(), r.len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PhdaeError::Invalid(format!("{what} has a non-finite entry")));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

fn matfun_entry(entry: &[Rows], shape: (usize, usize), name: &str) -> Result<MatFun> {
    if entry.is_empty() {
        return Err(PhdaeError::Invalid(format!("coefficient {name} needs at least one matrix")));
    }
    let mats = entry
        .iter()
        .enumerate()
        .map(|(k, rows)| from_rows(rows, shape, &format!("coefficient {name}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    MatFun::new(mats)
}

fn finite_vec(v: &[f64], len: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(PhdaeError::Dimension(format!("{what} has length {}, expected {len}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(PhdaeError::Invalid(format!("{what} has a non-finite entry")));
    }
    Ok(DVector::from_column_slice(v))
}

impl SystemDocument {
    pub fn from_system(sys: &PhdaeSystem) -> Self {
        let c = sys.coeffs().map(|f| f.coeffs().iter().map(to_rows).collect::<Vec<_>>());
        Self {
            schema: SCHEMA,
            n: sys.n(),
            m: sys.m(),
            t0: sys.interval().t0,
            tf: sys.interval().tf,
            coefficients: CoeffEntries {
                e: c.e,
                q: c.q,
                j: c.j,
                r: c.r,
                k: c.k,
                b: c.b,
                p: c.p,
                s: c.s,
                n: c.n,
            },
            x0: None,
            input: None,
        }
    }

    pub fn with_x0(mut self, x0: &DVector<f64>) -> Self {
        self.x0 = Some(x0.iter().copied().collect());
        self
    }

    pub fn with_input(mut self, input: InputSpec) -> Self {
        self.input = Some(input);
        self
    }

    /// Parses and checks the schema version; shapes are checked by [`Self::system`].
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| PhdaeError::Invalid(format!("system document: {e}")))?;
        if doc.schema != SCHEMA {
            return Err(PhdaeError::Invalid(format!("unsupported schema {} (expected {SCHEMA})", doc.schema)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents contain only finite floats")
    }

    pub fn system(&self) -> Result<PhdaeSystem> {
        let (n, m) = (self.n, self.m);
        let c = &self.coefficients;
        let coeffs = Coeffs {
            e: matfun_entry(&c.e, (n, n), "E")?,
            q: matfun_entry(&c.q, (n, n), "Q")?,
            j: matfun_entry(&c.j, (n, n), "J")?,
            r: matfun_entry(&c.r, (n, n), "R")?,
            k: matfun_entry(&c.k, (n, n), "K")?,
            b: matfun_entry(&c.b, (n, m), "B")?,
            p: matfun_entry(&c.p, (n, m), "P")?,
            s: matfun_entry(&c.s, (m, m), "S")?,
            n: matfun_entry(&c.n, (m, m), "N")?,
        };
        PhdaeSystem::assemble(coeffs, n, m, Interval::new(self.t0, self.tf)?)
    }

    pub fn initial_state(&self) -> Result<Option<DVector<f64>>> {
        self.x0.as_deref().map(|v| finite_vec(v, self.n, "x0")).transpose()
    }

    /// The input signal, `Input::Zero` when none is given.
    pub fn input_signal(&self) -> Result<Input> {
        let input = match &self.input {
            None => Input::Zero(self.m),
            Some(InputSpec::Polynomial { coeffs }) => {
                if coeffs.is_empty() {
                    return Err(PhdaeError::Invalid("polynomial input needs at least one coefficient".into()));
                }
                let cols = coeffs
                    .iter()
                    .map(|c| finite_vec(c, self.m, "input coefficient").map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice())))
                    .collect::<Result<Vec<_>>>()?;
                Input::Polynomial(MatFun::new(cols)?)
            }
            Some(InputSpec::Samples { times, values }) => {
                if times.iter().any(|t| !t.is_finite()) {
                    return Err(PhdaeError::Invalid("input sample times must be finite".into()));
                }
                let values = values
                    .iter()
                    .map(|v| finite_vec(v, self.m, "input sample"))
                    .collect::<Result<Vec<_>>>()?;
                Input::Samples {
                    times: times.clone(),
                    values,
                }
            }
        };
        input.validate()?;
        Ok(input)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub tolerances: BTreeMap<String, f64>,
}

impl Provenance {
    pub fn new(tool: &str) -> Self {
        Self {
            tool: tool.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            tolerances: BTreeMap::new(),
        }
    }

    pub fn tol(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    /// `None` when no level up to `mu_max` satisfied the rank conditions.
    pub mu: Option<usize>,
    pub mu_max: usize,
    pub r: Option<usize>,
    pub a: Option<usize>,
    pub d: Option<usize>,
    pub nu: Option<usize>,
    pub explicit_constraints: Option<usize>,
    /// State-only constraints that appear only after differentiation.
    pub hidden_constraints: Option<usize>,
    /// Hidden constraints that also involve the input.
    pub input_coupled_hidden: Option<usize>,
    pub levels: Vec<LevelReport>,
}

impl IndexSummary {
    pub fn new(analysis: &IndexAnalysis, mu_max: usize) -> Self {
        let d = analysis.data.as_ref();
        Self {
            mu: d.map(|d| d.mu),
            mu_max,
            r: d.map(|d| d.r),
            a: d.map(|d| d.a),
            d: d.map(|d| d.d),
            nu: d.map(|d| d.nu),
            explicit_constraints: d.map(|d| d.explicit.nrows()),
            hidden_constraints: d.map(|d| d.a3.nrows()),
            input_coupled_hidden: d.map(|d| d.input_coupled_hidden),
            levels: analysis.levels.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    /// `index-one` or `regularized`.
    pub kind: String,
    pub blocks: BTreeMap<String, usize>,
    pub residuals: BTreeMap<String, f64>,
    pub condition_numbers: BTreeMap<String, f64>,
    /// Lift maps and constraint matrices, row-major.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub maps: BTreeMap<String, Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub residual: f64,
    pub tol: f64,
    pub consistent: bool,
    pub projected: bool,
}

/// Machine-readable result of a CLI command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: u32,
    pub command: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencySummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn has_null(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => true,
        serde_json::Value::Array(a) => a.iter().any(has_null),
        serde_json::Value::Object(o) => o.values().any(has_null),
        _ => false,
    }
}

impl ReportDocument {
    pub fn new(command: &str, provenance: Provenance) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            provenance,
            structure: None,
            index: None,
            reduction: None,
            consistency: None,
            energy: None,
            error: None,
        }
    }

    /// Serializes, refusing non-finite numbers (JSON would turn them into `null`).
    pub fn to_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| PhdaeError::Invalid(e.to_string()))?;
        // absent analysis results are legitimately null
        if let Some(idx) = value.get_mut("index").and_then(|v| v.as_object_mut()) {
            idx.retain(|_, v| !v.is_null());
        }
        if has_null(&value) {
            return Err(PhdaeError::Invalid("report contains a non-finite number".into()));
        }
        Ok(serde_json::to_string_pretty(&value).expect("value serializes"))
    }
}
