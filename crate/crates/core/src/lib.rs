//! Linear port-Hamiltonian descriptor systems (pHDAEs).
//!
//! A pHDAE is a descriptor system
//!
//! ```text
//! E x' = [(J - R) Q - E K] x + (B - P) u
//! y    = (B + P)^T Q x + (S + N) u
//! ```
//!
//! whose coefficients make the operator `Q^T E d/dt - (Q^T J Q - Q^T E K)`
//! skew-adjoint, with `Q^T E` and the dissipation block `W` positive semidefinite.
//! The crate verifies these conditions, applies structure-preserving changes of
//! variables, runs derivative-array index analysis, reduces index-one systems to
//! implicit port-Hamiltonian ODEs, regularizes higher-index systems, and
//! integrates the results with an energy audit.

pub mod error;
pub mod linalg;
pub mod matfun;
pub mod system;
pub mod transform;
pub mod index;
pub mod models;
pub mod reduce;
pub mod generate;
pub mod sim;
pub mod document;

pub use error::{PhdaeError, Result};
pub use matfun::MatFun;
pub use system::{Coeffs, Interval, PhdaeSystem, Snapshot, StructureReport};
pub use document::{ReportDocument, SystemDocument};
