//! AC optimal power flow by component-based ADMM.
//!
//! The network is read from a MATPOWER case file ([`case`]), every branch
//! becomes a four-variable bound-constrained subproblem ([`branch`]) solved
//! in batches by the TRON solver from `batchopt`, and generators and buses
//! are updated in closed form ([`admm`]).
//!
//! ```
//! use batchopt_acopf::{admm_solve, parse_matpower, AdmmOptions, AdmmStatus, CASE2_TOY};
//!
//! let case = parse_matpower(CASE2_TOY).unwrap();
//! let out = admm_solve(&case, AdmmOptions::default()).unwrap();
//! assert_eq!(out.status, AdmmStatus::Converged);
//! assert!((out.dispatch()[0] - 0.5027).abs() < 1e-3);
//! ```

pub mod admm;
pub mod branch;
pub mod case;

pub use admm::{admm_solve, Admm, AdmmError, AdmmOptions, AdmmOutcome, AdmmState, AdmmStatus};
pub use branch::{BranchParams, BranchSubproblem};
pub use case::{parse_matpower, read_case, CaseError, NetworkCase, CASE2_TOY, CASE3_ZERO, CASE9};
