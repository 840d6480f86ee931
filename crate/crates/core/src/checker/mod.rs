//! Independent verification of decoded plans and brute-force oracles.
//!
//! - [`verify`]: re-evaluates every constraint family on a [`Solution`](crate::Solution).
//! - [`worst_case`]: realises the worst demand scenario in the budget set.
//! - [`oracle`]: exhaustive MIP enumeration and LP vertex enumeration.

pub mod oracle;
pub mod verify;
pub mod worst_case;

use thiserror::Error;

pub use oracle::{enumerate_mip, lattice_size, lp_vertex_oracle, oracle_objective, oracle_solve, OracleOutcome, OracleStatus, DEFAULT_GUARD};
pub use verify::{check, check_with, CheckOptions, CheckReport, CheckViolation, Rule};
pub use worst_case::{all_worst_cases, cells, worst_case_shortfall, Entity, WorstCase};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("solution does not match the instance: {0}")]
    Dimension(String),
    #[error("{what} too large to enumerate: {size:.3e} > {limit:.3e}")]
    SizeGuard { what: &'static str, size: f64, limit: f64 },
    #[error("oracle needs bounded integer columns (column {0} has an infinite bound)")]
    UnboundedInteger(usize),
    #[error(transparent)]
    Simplex(#[from] crate::simplex::SimplexError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
