//! Index-one reduction to an implicit port-Hamiltonian ODE, structure-preserving
//! regularization of higher-index systems, and the gas-network split.

mod canonical;
mod gas;
mod pipeline;
mod regularize;

pub use canonical::{index_one_canonical, reduce_index_one, CanonicalIndexOne, ReducedSystem};
pub use gas::{gas_reduction, GasReduction};
pub use regularize::{regularize_high_index, Regularized};
pub use pipeline::{reduce_to_ode, Reduction};
