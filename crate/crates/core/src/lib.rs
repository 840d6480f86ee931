//! Robust multi-period emergency logistics planning.
//!
//! The crate builds a time-expanded mixed-integer model that routes relief
//! commodities from distribution centres to damaged areas, moves injured
//! people to permanent or temporary hospitals, decides which temporary
//! hospitals to open and how much permanent capacity to lend them, and
//! protects every demand balance against a budgeted set of demand
//! deviations. Four objectives (unserved injuries, unmet commodity demand,
//! cost, idle hospital capacity) are traded off by fuzzy goal programming.
//!
//! Layers, bottom up:
//! - [`lp`]: sparse program representation shared by all solvers.
//! - [`simplex`], [`branch_bound`]: the embedded LP / MIP engine.
//! - [`instance`]: problem data, JSON format, validation.
//! - [`model`]: assembly of the robust MILP and decoding into [`Solution`].
//! - [`fgp`]: ideal/anti-ideal solutions and the weighted master problem.
//! - [`checker`]: independent re-verification and brute-force oracles.
//! - [`analysis`]: weight sweeps, shortfall series, cost-effectiveness.

pub mod analysis;
pub mod branch_bound;
pub mod checker;
pub mod fgp;
pub mod instance;
pub mod lp;
pub mod model;
pub mod par;
pub mod random;
pub mod simplex;
pub mod solution;

pub use instance::Instance;
pub use lp::LinearProgram;
pub use solution::Solution;
