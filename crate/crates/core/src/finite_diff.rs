//! Central finite differences for checking analytic derivatives.

use crate::linalg::DenseMatrix;
use crate::tron::BoundedProblem;

/// Central-difference gradient of `eval_f` with step `h * max(1, |x_i|)`.
pub fn gradient<P: BoundedProblem + ?Sized>(p: &P, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = p.eval_f(&xp);
            xp[i] = x[i] - step;
            let fm = p.eval_f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Central-difference Hessian from `eval_grad`, symmetrized.
pub fn hessian<P: BoundedProblem + ?Sized>(p: &P, x: &[f64], h: f64) -> DenseMatrix {
    let n = x.len();
    let mut out = DenseMatrix::zeros(n);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        p.eval_grad(&xp, &mut gp);
        xp[j] = x[j] - step;
        p.eval_grad(&xp, &mut gm);
        xp[j] = x[j];
        for i in 0..n {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    DenseMatrix::from_fn(n, |i, j| 0.5 * (out[(i, j)] + out[(j, i)]))
}

/// `||a - b||_inf / max(1, ||b||_inf)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
