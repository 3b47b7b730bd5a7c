use super::{Bounds, QuadraticModel, TronConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub beta: f64,
    /// `P[x + beta w]`, or the best trial point when no step passed.
    pub point: Vec<f64>,
    /// Whether the sufficient-decrease test passed.
    pub accepted: bool,
}

const MAX_BACKTRACKS: usize = 40;

/// Backtracking search on the projected path `P[x + beta w]`.
///
/// `model` must be expressed at `x`, so the decrease test is
/// `q(d) <= mu0 * grad^T d` with `d = P[x + beta w] - x`. Starts at
/// `beta = 1` and multiplies by `cfg.interp` on failure. After the last
/// trial the floor `beta` is returned together with the best point seen
/// (possibly `x` itself).
pub fn projected_line_search(
    bounds: Bounds<'_>,
    x: &[f64],
    w: &[f64],
    model: QuadraticModel<'_>,
    cfg: &TronConfig,
) -> LineSearchOutcome {
    let n = x.len();
    if w.iter().all(|&v| v == 0.0) {
        return LineSearchOutcome {
            beta: 1.0,
            point: x.to_vec(),
            accepted: true,
        };
    }
    let mut point = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut best_q = 0.0;
    let mut best = x.to_vec();
    let mut beta = 1.0;
    for trial in 0..MAX_BACKTRACKS {
        if trial > 0 {
            beta *= cfg.interp;
        }
        bounds.projected_point(x, beta, w, &mut point);
        for i in 0..n {
            d[i] = point[i] - x[i];
        }
        let q = model.value(&d);
        let gd: f64 = model.grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        if q <= cfg.mu0 * gd {
            return LineSearchOutcome {
                beta,
                point,
                accepted: true,
            };
        }
        if q < best_q {
            best_q = q;
            best.copy_from_slice(&point);
        }
    }
    LineSearchOutcome {
        beta,
        point: best,
        accepted: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn zero_direction_stays_put() {
        let l = [0.0];
        let u = [1.0];
        let h = DenseMatrix::identity(1);
        let g = [1.0];
        let out = projected_line_search(
            Bounds::new(&l, &u),
            &[0.5],
            &[0.0],
            QuadraticModel { grad: &g, hess: &h },
            &TronConfig::default(),
        );
        assert_eq!((out.beta, out.point.as_slice()), (1.0, &[0.5][..]));
    }

    #[test]
    fn newton_step_accepted_in_full() {
        let l = [-INF; 2];
        let u = [INF; 2];
        let h = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]).unwrap();
        let g = [2.0, -4.0];
        let w = [-1.0, 1.0];
        let out = projected_line_search(
            Bounds::new(&l, &u),
            &[0.0, 0.0],
            &w,
            QuadraticModel { grad: &g, hess: &h },
            &TronConfig::default(),
        );
        assert!(out.accepted);
        assert_eq!(out.beta, 1.0);
        assert_eq!(out.point, [-1.0, 1.0]);
    }

    #[test]
    fn crossing_a_bound_clips_and_still_decreases() {
        // q(d) = -d1 - d2 + (d1^2 + d2^2)/2, minimizer (1, 1); box caps d1 at 0.5
        let l = [0.0, 0.0];
        let u = [0.5, 5.0];
        let h = DenseMatrix::identity(2);
        let g = [-1.0, -1.0];
        let model = QuadraticModel { grad: &g, hess: &h };
        let out = projected_line_search(
            Bounds::new(&l, &u),
            &[0.0, 0.0],
            &[1.0, 1.0],
            model,
            &TronConfig::default(),
        );
        assert!(out.accepted);
        assert_eq!(out.point, [0.5, 1.0]);
        assert!(model.value(&out.point) < 0.0);
        assert!(Bounds::new(&l, &u).contains(&out.point));
    }

    #[test]
    fn ascent_direction_hits_the_floor() {
        let l = [-INF];
        let u = [INF];
        let h = DenseMatrix::identity(1);
        let g = [1.0];
        let out = projected_line_search(
            Bounds::new(&l, &u),
            &[0.0],
            &[1.0],
            QuadraticModel { grad: &g, hess: &h },
            &TronConfig::default(),
        );
        assert!(!out.accepted);
        assert!(out.beta < 1e-10 && out.beta > 0.0);
        assert_eq!(out.point, [0.0]);
    }
}
