use crate::linalg::DenseMatrix;

/// One instance of `minimize f(x) subject to lower <= x <= upper`.
///
/// Bounds may be infinite. Implementations must return finite values for
/// every `x` inside the box, and `eval_hess` must write a symmetric matrix
/// (only its lower triangle is used for factorization, but the full matrix
/// is used in products).
pub trait BoundedProblem {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn eval_f(&self, x: &[f64]) -> f64;
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]);
    fn eval_hess(&self, x: &[f64], hess: &mut DenseMatrix);
}

impl<P: BoundedProblem + ?Sized> BoundedProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn lower(&self) -> &[f64] {
        (**self).lower()
    }
    fn upper(&self) -> &[f64] {
        (**self).upper()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        (**self).eval_f(x)
    }
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) {
        (**self).eval_grad(x, grad)
    }
    fn eval_hess(&self, x: &[f64], hess: &mut DenseMatrix) {
        (**self).eval_hess(x, hess)
    }
}

/// A [`BoundedProblem`] assembled from closures.
///
/// ```
/// use batchopt::tron::{FnProblem, BoundedProblem};
///
/// // f(x) = (x - 3)^2 on [0, 1]
/// let p = FnProblem::new(
///     vec![0.0],
///     vec![1.0],
///     |x| (x[0] - 3.0).powi(2),
///     |x, g| g[0] = 2.0 * (x[0] - 3.0),
///     |_, h| h[(0, 0)] = 2.0,
/// );
/// assert_eq!(p.eval_f(&[1.0]), 4.0);
/// ```
pub struct FnProblem<F, G, H> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    f: F,
    g: G,
    h: H,
}

impl<F, G, H> FnProblem<F, G, H>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
    H: Fn(&[f64], &mut DenseMatrix),
{
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, f: F, g: G, h: H) -> Self {
        Self {
            lower,
            upper,
            f,
            g,
            h,
        }
    }
}

impl<F, G, H> BoundedProblem for FnProblem<F, G, H>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
    H: Fn(&[f64], &mut DenseMatrix),
{
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) {
        (self.g)(x, grad)
    }
    fn eval_hess(&self, x: &[f64], hess: &mut DenseMatrix) {
        (self.h)(x, hess)
    }
}
