use std::time::Instant;

use super::{
    cauchy, precond_cg, projected_line_search, BoundedProblem, Bounds, CgStatus, QuadraticModel,
    SolveReport, SolveStatus, TronConfig, TronError,
};
use crate::linalg::{ccf, nrm2, DenseMatrix, LinalgError};

/// Snapshot handed to [`solve_observed`] after every outer iteration.
#[derive(Debug)]
pub struct IterationEvent<'a> {
    pub iteration: usize,
    /// Current iterate (after the acceptance decision).
    pub x: &'a [f64],
    pub f: f64,
    pub pg_norm: f64,
    pub delta: f64,
    pub accepted: bool,
}

/// Solves one bound-constrained problem starting from `x0`.
///
/// `x0` is projected onto the box before the first evaluation. Problem
/// definition errors are returned as `Err`; numerical outcomes are reported
/// through [`SolveReport::status`].
pub fn solve<P: BoundedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    cfg: &TronConfig,
) -> Result<SolveReport, TronError> {
    solve_observed(problem, x0, cfg, |_| {})
}

fn check_problem<P: BoundedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    cfg: &TronConfig,
) -> Result<(), TronError> {
    cfg.validate()?;
    let n = problem.dim();
    if n == 0 {
        return Err(TronError::EmptyProblem);
    }
    if n > cfg.capacity {
        return Err(TronError::Capacity {
            dim: n,
            capacity: cfg.capacity,
        });
    }
    if x0.len() != n {
        return Err(TronError::StartDimension {
            expected: n,
            found: x0.len(),
        });
    }
    let (l, u) = (problem.lower(), problem.upper());
    if l.len() != n || u.len() != n {
        return Err(TronError::InvalidBounds(l.len().min(u.len())));
    }
    if let Some(i) = (0..n).find(|&i| !(l[i] <= u[i])) {
        return Err(TronError::InvalidBounds(i));
    }
    if x0.iter().any(|v| v.is_nan()) {
        return Err(TronError::NonFinite("starting point"));
    }
    Ok(())
}

/// [`solve`] with a callback invoked after each outer iteration.
pub fn solve_observed<P, O>(
    problem: &P,
    x0: &[f64],
    cfg: &TronConfig,
    mut observe: O,
) -> Result<SolveReport, TronError>
where
    P: BoundedProblem + ?Sized,
    O: FnMut(&IterationEvent<'_>),
{
    let start = Instant::now();
    check_problem(problem, x0, cfg)?;
    let n = problem.dim();
    let bounds = Bounds::new(problem.lower(), problem.upper());

    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut f = problem.eval_f(&x);
    let mut g = vec![0.0; n];
    problem.eval_grad(&x, &mut g);
    let mut f_evals = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(TronError::NonFinite("objective or gradient at the start"));
    }
    let mut pg_norm = bounds.projected_gradient_norm(&x, &g);

    let mut hess = DenseMatrix::zeros(n);
    let mut hess_current = false;
    let mut delta = cfg
        .delta0
        .unwrap_or_else(|| nrm2(&g).max(1.0))
        .min(cfg.delta_max);
    let mut alpha_c = 1.0;
    let mut iterations = 0;
    let mut cg_iterations = 0;
    let mut status = if pg_norm <= cfg.tol_pg {
        SolveStatus::Converged
    } else {
        SolveStatus::IterLimit
    };
    let mut g_trial = vec![0.0; n];
    let mut step = vec![0.0; n];

    while status == SolveStatus::IterLimit && iterations < cfg.max_iter {
        iterations += 1;
        if !hess_current {
            problem.eval_hess(&x, &mut hess);
            if hess.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(TronError::NonFinite("Hessian"));
            }
            hess_current = true;
        }
        let model = QuadraticModel {
            grad: &g,
            hess: &hess,
        };

        let cp = cauchy(bounds, &x, model, delta, alpha_c, cfg)?;
        alpha_c = cp.alpha;
        let sub = match subspace_minimize(bounds, &x, model, cp.point, delta, cfg) {
            Ok(sub) => sub,
            Err(TronError::Linalg(LinalgError::FactorizationFailed { .. })) => {
                status = SolveStatus::FactorizationFailed;
                break;
            }
            Err(e) => return Err(e),
        };
        cg_iterations += sub.cg_iterations;
        let trial = sub.point;
        for i in 0..n {
            step[i] = trial[i] - x[i];
        }
        let snorm = nrm2(&step);
        if iterations == 1 && snorm > 0.0 {
            delta = delta.min(snorm);
        }
        let prered = -model.value(&step);
        let f_trial = problem.eval_f(&trial);
        f_evals += 1;
        let actred = if f_trial.is_finite() {
            f - f_trial
        } else {
            f64::NEG_INFINITY
        };

        // Below this the predicted reduction is lost in the rounding of f.
        let noise = 16.0 * f64::EPSILON * f.abs().max(f_trial.abs());
        let accepted = actred > 0.0 && (actred > cfg.eta0 * prered || prered <= noise);

        if prered > noise {
            let gs: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            let curv = f_trial - f - gs;
            let alpha = if curv > 0.0 {
                (-0.5 * gs / curv).max(cfg.sigma1)
            } else {
                cfg.sigma3
            };
            delta = if actred < cfg.eta0 * prered {
                (alpha.clamp(cfg.sigma1, cfg.sigma2) * snorm).min(cfg.sigma2 * delta)
            } else if actred < cfg.eta1 * prered {
                (cfg.sigma1 * delta).max((alpha * snorm).min(cfg.sigma2 * delta))
            } else if actred < cfg.eta2 * prered {
                (cfg.sigma1 * delta).max((alpha * snorm).min(cfg.sigma3 * delta))
            } else {
                delta.max((alpha * snorm).min(cfg.sigma3 * delta))
            };
        } else if !accepted {
            delta *= cfg.sigma1;
        }
        delta = delta.min(cfg.delta_max);

        if accepted {
            problem.eval_grad(&trial, &mut g_trial);
            if g_trial.iter().any(|v| !v.is_finite()) {
                return Err(TronError::NonFinite("gradient"));
            }
            x = trial;
            f = f_trial;
            std::mem::swap(&mut g, &mut g_trial);
            hess_current = false;
            pg_norm = bounds.projected_gradient_norm(&x, &g);
            if pg_norm <= cfg.tol_pg {
                status = SolveStatus::Converged;
            }
        }
        observe(&IterationEvent {
            iteration: iterations,
            x: &x,
            f,
            pg_norm,
            delta,
            accepted,
        });
        // the radius can no longer move x: f is flat to rounding here
        if delta <= f64::EPSILON * nrm2(&x).max(1.0) {
            break;
        }
    }

    Ok(SolveReport {
        x_star: x,
        f_star: f,
        pg_norm,
        status,
        iterations,
        cg_iterations,
        f_evals,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug)]
struct SubspaceOutcome {
    point: Vec<f64>,
    cg_iterations: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    passes: usize,
}

/// Repeated free-variable minimization of the model starting at the Cauchy
/// point `xc`. Each pass factors the free block of the Hessian, runs
/// conjugate gradients on it and follows the direction with a projected
/// line search. Stops when the free set stops changing, the model stops
/// decreasing, CG hits the trust-region boundary or negative curvature, or
/// after `max_minor` passes.
fn subspace_minimize(
    bounds: Bounds<'_>,
    x: &[f64],
    model: QuadraticModel<'_>,
    xc: Vec<f64>,
    delta: f64,
    cfg: &TronConfig,
) -> Result<SubspaceOutcome, TronError> {
    subspace_minimize_traced(bounds, x, model, xc, delta, cfg, |_, _, _| {})
}

fn subspace_minimize_traced(
    bounds: Bounds<'_>,
    x: &[f64],
    model: QuadraticModel<'_>,
    xc: Vec<f64>,
    delta: f64,
    cfg: &TronConfig,
    mut trace: impl FnMut(&[usize], &[f64], &[f64]),
) -> Result<SubspaceOutcome, TronError> {
    let n = x.len();
    let max_minor = cfg.max_minor.unwrap_or(n);
    let mut point = xc;
    let mut s: Vec<f64> = point.iter().zip(x).map(|(p, xi)| p - xi).collect();
    let mut q_cur = model.value(&s);
    let mut gq = vec![0.0; n];
    model.gradient_at(&s, &mut gq);
    let mut gfnorm0 = None;
    let mut cg_iterations = 0;
    let mut passes = 0;
    let mut w = vec![0.0; n];

    while passes < max_minor {
        let free = bounds.free_set(&point);
        if free.is_empty() {
            break;
        }
        let g_free: Vec<f64> = free.iter().map(|&i| gq[i]).collect();
        let gfnorm = nrm2(&g_free);
        match gfnorm0 {
            None => gfnorm0 = Some(gfnorm),
            Some(g0) if gfnorm <= cfg.cg_tol * g0 => break,
            _ => {}
        }
        if gfnorm == 0.0 {
            break;
        }
        passes += 1;

        let a_free = model.hess.principal_submatrix(&free);
        let chol = ccf(&a_free)?;
        let cg = precond_cg(&a_free, &g_free, &chol.factor, delta, cfg)?;
        cg_iterations += cg.iterations;

        w.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in free.iter().enumerate() {
            w[i] = cg.w[k];
        }
        trace(&free, &point, &w);
        let local = QuadraticModel {
            grad: &gq,
            hess: model.hess,
        };
        let ls = projected_line_search(bounds, &point, &w, local, cfg);

        let s_new: Vec<f64> = ls.point.iter().zip(x).map(|(p, xi)| p - xi).collect();
        let q_new = model.value(&s_new);
        if !(q_new < q_cur) {
            break;
        }
        let free_changed = bounds.free_set(&ls.point) != free;
        point = ls.point;
        s = s_new;
        q_cur = q_new;
        model.gradient_at(&s, &mut gq);

        if matches!(cg.status, CgStatus::Boundary | CgStatus::NegCurve) {
            break;
        }
        if !free_changed && ls.beta == 1.0 {
            break;
        }
    }
    Ok(SubspaceOutcome {
        point,
        cg_iterations,
        passes,
    })
}
