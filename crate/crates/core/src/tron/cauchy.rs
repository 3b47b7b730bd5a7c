use super::{Bounds, QuadraticModel, TronConfig, TronError};
use crate::linalg::nrm2;

/// Result of the Cauchy search.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyStep {
    /// Accepted step length along `-g`.
    pub alpha: f64,
    /// `P[x - alpha g] - x`.
    pub step: Vec<f64>,
    /// `P[x - alpha g]`, with clipped components exactly on their bounds.
    pub point: Vec<f64>,
}

const MAX_TRIALS: usize = 200;

/// Generalized Cauchy step along the projected steepest-descent path.
///
/// Starting from `alpha0`, the step length is halved (by `cfg.interp`) until
/// `||s|| <= mu1 * delta` and `q(s) <= mu0 * g^T s`. If the first trial is
/// already acceptable the length is instead extrapolated by `cfg.extrap`
/// while the conditions hold and the path still has breakpoints ahead.
pub fn cauchy(
    bounds: Bounds<'_>,
    x: &[f64],
    model: QuadraticModel<'_>,
    delta: f64,
    alpha0: f64,
    cfg: &TronConfig,
) -> Result<CauchyStep, TronError> {
    let n = x.len();
    let g = model.grad;
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let brpt = bounds.breakpoints(x, &neg_g);

    let mut s = vec![0.0; n];
    let acceptable = |s: &[f64]| -> Result<bool, TronError> {
        if nrm2(s) > cfg.mu1 * delta {
            return Ok(false);
        }
        let q = model.value(s);
        let gts: f64 = g.iter().zip(s).map(|(a, b)| a * b).sum();
        if !q.is_finite() || !gts.is_finite() {
            return Err(TronError::NonFinite("Cauchy model value"));
        }
        Ok(q <= cfg.mu0 * gts)
    };

    let mut alpha = if alpha0 > 0.0 && alpha0.is_finite() {
        alpha0
    } else {
        1.0
    };
    bounds.gpstep(x, alpha, &neg_g, &mut s);

    if !acceptable(&s)? {
        for _ in 0..MAX_TRIALS {
            alpha *= cfg.interp;
            bounds.gpstep(x, alpha, &neg_g, &mut s);
            if acceptable(&s)? {
                break;
            }
        }
    } else {
        let mut best = alpha;
        let mut trials = 0;
        while brpt.count > 0 && alpha <= brpt.max && trials < MAX_TRIALS {
            trials += 1;
            alpha *= cfg.extrap;
            bounds.gpstep(x, alpha, &neg_g, &mut s);
            if acceptable(&s)? {
                best = alpha;
            } else {
                break;
            }
        }
        alpha = best;
        bounds.gpstep(x, alpha, &neg_g, &mut s);
    }

    let mut point = vec![0.0; n];
    bounds.projected_point(x, alpha, &neg_g, &mut point);
    Ok(CauchyStep {
        alpha,
        step: s,
        point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    const INF: f64 = f64::INFINITY;

    fn unbounded(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF; n], vec![INF; n])
    }

    #[test]
    fn stationary_point_gives_zero_step() {
        let (l, u) = unbounded(2);
        let h = DenseMatrix::identity(2);
        let g = [0.0, 0.0];
        let model = QuadraticModel { grad: &g, hess: &h };
        let cp = cauchy(
            Bounds::new(&l, &u),
            &[1.0, 2.0],
            model,
            1.0,
            1.0,
            &TronConfig::default(),
        )
        .unwrap();
        assert_eq!(cp.step, [0.0, 0.0]);
        assert_eq!(cp.point, [1.0, 2.0]);
    }

    #[test]
    fn convex_quadratic_gets_descent() {
        // f = x^2 / 2 at x = 1
        let (l, u) = unbounded(1);
        let h = DenseMatrix::identity(1);
        let g = [1.0];
        let model = QuadraticModel { grad: &g, hess: &h };
        let cfg = TronConfig::default();
        let cp = cauchy(Bounds::new(&l, &u), &[1.0], model, 100.0, 1.0, &cfg).unwrap();
        assert!(model.value(&cp.step) < 0.0);
        assert!(cp.alpha > 0.0);
        assert!(model.value(&cp.step) <= cfg.mu0 * g[0] * cp.step[0]);
    }

    #[test]
    fn small_radius_clamps_step() {
        let (l, u) = unbounded(1);
        let h = DenseMatrix::identity(1);
        let g = [1.0];
        let model = QuadraticModel { grad: &g, hess: &h };
        let cp = cauchy(
            Bounds::new(&l, &u),
            &[1.0],
            model,
            0.1,
            1.0,
            &TronConfig::default(),
        )
        .unwrap();
        assert!(nrm2(&cp.step) <= 0.1);
        // halving from 1: 0.5, 0.25, 0.125, 0.0625
        assert_eq!(cp.alpha, 0.0625);
        assert!(model.value(&cp.step) < 0.0);
    }

    #[test]
    fn extrapolates_toward_far_breakpoints() {
        // linear model, bound at 10: extrapolation walks alpha up to the bound
        let l = [-INF];
        let u = [10.0];
        let h = DenseMatrix::zeros(1);
        let g = [-1.0];
        let model = QuadraticModel { grad: &g, hess: &h };
        let cp = cauchy(
            Bounds::new(&l, &u),
            &[0.0],
            model,
            100.0,
            1.0,
            &TronConfig::default(),
        )
        .unwrap();
        assert_eq!(cp.point, [10.0]);
        assert!(cp.alpha >= 10.0);
    }

    #[test]
    fn negative_curvature_rides_to_the_bound() {
        let l = [0.0, 0.0];
        let u = [1.0, 2.0];
        let h = DenseMatrix::from_rows(&[&[0.0, -1.0], &[-1.0, 0.0]]).unwrap();
        let g = [-1.0, -0.5];
        let model = QuadraticModel { grad: &g, hess: &h };
        let cp = cauchy(
            Bounds::new(&l, &u),
            &[0.5, 1.0],
            model,
            1e3,
            1.0,
            &TronConfig::default(),
        )
        .unwrap();
        assert_eq!(cp.point, [1.0, 2.0]);
    }
}
