//! Trust-region Newton method for bound-constrained problems.
//!
//! Each outer iteration builds the quadratic model
//! `q(s) = g^T s + 1/2 s^T A s` at the current iterate, then
//!
//! 1. finds a Cauchy step along the projected steepest-descent path,
//! 2. fixes the variables that the Cauchy point pushed onto a bound,
//! 3. minimizes the model over the remaining free variables with a truncated
//!    conjugate gradient method preconditioned by a shifted complete Cholesky
//!    factor of the free-variable Hessian,
//! 4. follows the resulting direction with a projected line search.
//!
//! Steps 2-4 repeat on the enlarged active set until it stops changing. The
//! candidate step is accepted or rejected with the usual ratio of actual to
//! predicted reduction, and the trust-region radius is updated accordingly.

mod bounds;
mod cauchy;
mod cg;
mod problem;
mod search;
mod solver;

pub use bounds::{Bounds, Breakpoints};
pub use cauchy::{cauchy, CauchyStep};
pub use cg::{precond_cg, trqsol, CgOutcome, CgStatus};
pub use problem::{BoundedProblem, FnProblem};
pub use search::{projected_line_search, LineSearchOutcome};
pub use solver::{solve, solve_observed, IterationEvent};

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError};

/// Default largest problem dimension accepted by the solver.
pub const DEFAULT_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TronError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("problem dimension {dim} exceeds capacity {capacity}")]
    Capacity { dim: usize, capacity: usize },
    #[error("problem dimension must be positive")]
    EmptyProblem,
    #[error("starting point has length {found}, problem dimension is {expected}")]
    StartDimension { expected: usize, found: usize },
    #[error("bounds have inconsistent lengths or lower > upper at index {0}")]
    InvalidBounds(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("no intersection with the trust-region boundary along a zero direction")]
    NoIntersection,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Solver constants.
///
/// The trust-region and search constants follow the usual TRON defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TronConfig {
    /// Stop when the projected gradient infinity norm drops to this value.
    pub tol_pg: f64,
    /// Initial radius. `None` uses `max(||g(x0)||_2, 1)`.
    pub delta0: Option<f64>,
    pub delta_max: f64,
    pub max_iter: usize,
    /// Relative residual at which conjugate gradients stop.
    pub cg_tol: f64,
    /// Acceptance threshold on the reduction ratio.
    pub eta0: f64,
    /// Ratio below which the radius may shrink after an accepted step.
    pub eta1: f64,
    /// Ratio above which the radius may grow.
    pub eta2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Sufficient-decrease constant for the Cauchy step and line search.
    pub mu0: f64,
    /// Cauchy steps are limited to `mu1 * delta`.
    pub mu1: f64,
    /// Backtracking factor.
    pub interp: f64,
    /// Extrapolation factor of the Cauchy search.
    pub extrap: f64,
    /// Subspace passes per outer iteration. `None` means the dimension.
    pub max_minor: Option<usize>,
    /// Largest accepted dimension.
    pub capacity: usize,
}

impl Default for TronConfig {
    fn default() -> Self {
        Self {
            tol_pg: 1e-6,
            delta0: None,
            delta_max: 1e10,
            max_iter: 200,
            cg_tol: 0.1,
            eta0: 1e-4,
            eta1: 0.25,
            eta2: 0.75,
            sigma1: 0.25,
            sigma2: 0.5,
            sigma3: 4.0,
            mu0: 1e-2,
            mu1: 1.0,
            interp: 0.5,
            extrap: 2.0,
            max_minor: None,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl TronConfig {
    pub fn validate(&self) -> Result<(), TronError> {
        let bad = |m| Err(TronError::InvalidConfig(m));
        if !(self.tol_pg > 0.0) {
            return bad("tol_pg must be positive");
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0) {
                return bad("delta0 must be positive");
            }
        }
        if !(self.delta_max > 0.0) {
            return bad("delta_max must be positive");
        }
        if !(0.0 < self.sigma1
            && self.sigma1 < self.sigma2
            && self.sigma2 < 1.0
            && self.sigma3 > 1.0)
        {
            return bad("need 0 < sigma1 < sigma2 < 1 < sigma3");
        }
        if !(0.0 < self.eta0 && self.eta0 < self.eta1 && self.eta1 < self.eta2 && self.eta2 < 1.0) {
            return bad("need 0 < eta0 < eta1 < eta2 < 1");
        }
        if !(0.0 < self.mu0 && self.mu0 < 1.0 && self.mu1 > 0.0) {
            return bad("need 0 < mu0 < 1 and mu1 > 0");
        }
        if !(0.0 < self.interp && self.interp < 1.0 && self.extrap > 1.0) {
            return bad("need 0 < interp < 1 < extrap");
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad("cg_tol must lie in (0, 1)");
        }
        if self.capacity == 0 {
            return bad("capacity must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    IterLimit,
    FactorizationFailed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterLimit => "iter_limit",
            SolveStatus::FactorizationFailed => "factorization_failed",
        }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub pg_norm: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub f_evals: usize,
    /// Seconds spent inside the solve.
    pub wall_time: f64,
}

impl SolveReport {
    /// Equality on everything but the timing field.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        self.status == other.status
            && self.iterations == other.iterations
            && self.cg_iterations == other.cg_iterations
            && self.f_evals == other.f_evals
            && self.f_star.to_bits() == other.f_star.to_bits()
            && self.pg_norm.to_bits() == other.pg_norm.to_bits()
            && self.x_star.len() == other.x_star.len()
            && self
                .x_star
                .iter()
                .zip(&other.x_star)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// `q(s) = g^T s + 1/2 s^T A s`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticModel<'a> {
    pub grad: &'a [f64],
    pub hess: &'a DenseMatrix,
}

impl QuadraticModel<'_> {
    pub fn value(&self, s: &[f64]) -> f64 {
        let n = s.len();
        let mut quad = 0.0;
        for j in 0..n {
            if s[j] == 0.0 {
                continue;
            }
            let col = self.hess.col(j);
            let mut t = 0.0;
            for i in 0..n {
                t += col[i] * s[i];
            }
            quad += t * s[j];
        }
        let lin: f64 = self.grad.iter().zip(s).map(|(g, v)| g * v).sum();
        lin + 0.5 * quad
    }

    /// Model gradient `g + A s`.
    pub fn gradient_at(&self, s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.grad);
        crate::linalg::gemv(1.0, self.hess, s, 1.0, out, crate::linalg::Trans::No)
            .expect("model dimensions agree");
    }
}
