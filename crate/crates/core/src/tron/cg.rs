use super::{TronConfig, TronError};
use crate::linalg::{axpy, dot, gemv, nrm2, trtrs, DenseMatrix, Trans};

/// Why the conjugate gradient iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    /// Relative residual fell below `cg_tol`.
    Converged,
    /// The iterate reached the trust-region boundary.
    Boundary,
    /// A direction with `p^T A p <= 0` was found; the step follows it to the
    /// boundary.
    NegCurve,
    /// As many iterations as unknowns were taken.
    IterCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    /// Step in the original variables, `w = L^{-T} y`.
    pub w: Vec<f64>,
    /// Step in the preconditioned variables; `||y|| <= delta`.
    pub y: Vec<f64>,
    pub status: CgStatus,
    pub iterations: usize,
    /// `||b - A_hat y|| / ||b||`, recomputed from scratch at exit.
    pub rel_residual: f64,
}

/// Nonnegative `sigma` with `||x + sigma w|| = delta`.
///
/// Requires `||x|| <= delta`; a slightly larger `||x||` from rounding is
/// treated as lying on the boundary.
pub fn trqsol(x: &[f64], w: &[f64], delta: f64) -> Result<f64, TronError> {
    let ww = dot(w, w)?;
    if ww == 0.0 {
        return Err(TronError::NoIntersection);
    }
    let xw = dot(x, w)?;
    let xx = dot(x, x)?;
    let rem = (delta * delta - xx).max(0.0);
    let rad = (xw * xw + ww * rem).sqrt();
    let sigma = if xw >= 0.0 {
        let den = xw + rad;
        if den == 0.0 {
            0.0
        } else {
            rem / den
        }
    } else {
        (rad - xw) / ww
    };
    Ok(sigma)
}

/// Applies `A_hat = L^{-1} A L^{-T}` to `p`.
fn apply_preconditioned(
    a: &DenseMatrix,
    l: &DenseMatrix,
    p: &[f64],
    z: &mut [f64],
    out: &mut [f64],
) -> Result<(), TronError> {
    z.copy_from_slice(p);
    trtrs(l, z, Trans::Yes)?;
    gemv(1.0, a, z, 0.0, out, Trans::No)?;
    trtrs(l, out, Trans::No)?;
    Ok(())
}

/// Truncated preconditioned conjugate gradients for
/// `min g^T w + 1/2 w^T A w` subject to `||L^T w|| <= delta`.
///
/// Works on `A_hat y = b_hat` with `b_hat = -L^{-1} g`, `y = L^T w`, and
/// runs at most `n` iterations.
pub fn precond_cg(
    a: &DenseMatrix,
    g: &[f64],
    l: &DenseMatrix,
    delta: f64,
    cfg: &TronConfig,
) -> Result<CgOutcome, TronError> {
    let n = a.n();
    let mut b: Vec<f64> = g.iter().map(|v| -v).collect();
    trtrs(l, &mut b, Trans::No)?;
    let bnorm = nrm2(&b);

    let mut y = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut rr = dot(&r, &r)?;
    let mut status = CgStatus::IterCap;
    let mut iterations = 0;

    if bnorm == 0.0 {
        status = CgStatus::Converged;
    } else {
        while iterations < n {
            iterations += 1;
            apply_preconditioned(a, l, &p, &mut z, &mut q)?;
            let ptq = dot(&p, &q)?;
            if ptq.is_nan() {
                return Err(TronError::NonFinite("conjugate gradient curvature"));
            }
            if ptq <= 0.0 {
                let sigma = trqsol(&y, &p, delta)?;
                axpy(sigma, &p, &mut y)?;
                status = CgStatus::NegCurve;
                break;
            }
            let alpha = rr / ptq;
            trial.copy_from_slice(&y);
            axpy(alpha, &p, &mut trial)?;
            if nrm2(&trial) >= delta {
                let sigma = trqsol(&y, &p, delta)?;
                axpy(sigma, &p, &mut y)?;
                status = CgStatus::Boundary;
                break;
            }
            std::mem::swap(&mut y, &mut trial);
            axpy(-alpha, &q, &mut r)?;
            let rr_new = dot(&r, &r)?;
            if rr_new.sqrt() <= cfg.cg_tol * bnorm {
                status = CgStatus::Converged;
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
    }

    let rel_residual = if bnorm == 0.0 {
        0.0
    } else {
        apply_preconditioned(a, l, &y, &mut z, &mut q)?;
        let res: f64 = b
            .iter()
            .zip(&q)
            .map(|(bi, qi)| (bi - qi) * (bi - qi))
            .sum::<f64>()
            .sqrt();
        res / bnorm
    };

    let mut w = y.clone();
    trtrs(l, &mut w, Trans::Yes)?;
    Ok(CgOutcome {
        w,
        y,
        status,
        iterations,
        rel_residual,
    })
}
