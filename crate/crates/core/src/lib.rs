//! Batch solver for small bound-constrained nonlinear programs.
//!
//! The crate has three layers:
//!
//! * [`linalg`]: dense kernels for matrices of a few dozen rows, including a
//!   shifted complete Cholesky factorization used as a preconditioner.
//! * [`tron`]: a trust-region Newton method for
//!   `minimize f(x) subject to l <= x <= u`.
//! * [`batch`]: solving many independent problems in parallel, with load
//!   imbalance statistics, and the `hs45` benchmark family.
//!
//! ```
//! use batchopt::batch::make_hs45;
//! use batchopt::tron::{solve, SolveStatus, TronConfig};
//!
//! let p = make_hs45(4).unwrap();
//! let r = solve(&p, &p.default_start(), &TronConfig::default()).unwrap();
//! assert_eq!(r.status, SolveStatus::Converged);
//! assert_eq!(r.x_star, [1.0, 2.0, 3.0, 4.0]);
//! ```

pub mod batch;
pub mod finite_diff;
pub mod linalg;
pub mod tron;

pub use linalg::{DenseMatrix, LinalgError};
pub use tron::{BoundedProblem, SolveReport, SolveStatus, TronConfig, TronError};
