//! Three-sector search-and-matching model of a segmented labor market
//! (formal short-term, formal long-term, informal), with reform
//! counterfactuals, synthetic survey panels and fixed-effects estimation.

pub mod bellman;
pub mod econometrics;
pub mod error;
pub mod flows;
pub mod microsim;
pub mod model;
pub mod policy;

pub use bellman::{solve_equilibrium, EquilibriumSolution, Thresholds, ValueFunctions};
pub use error::{ParamError, SolveError};
pub use model::{Market, ModelParams, ProductivityGrid, ProductivitySpec, RenewalCap, Sector, Threshold, Tightness};
