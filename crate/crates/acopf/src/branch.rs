//! Line flows of one branch and the branch subproblem solved by TRON.

use std::f64::consts::PI;

use batchopt::{BoundedProblem, DenseMatrix};

use crate::case::{Branch, NetworkCase};

/// Admittance coefficients of the from-side and to-side flow equations
///
/// ```text
/// p_ij = gc_ij w_i - g_ij wR + b_ij wI      q_ij = bc_ij w_i - b_ij wR - g_ij wI
/// p_ji = gc_ji w_j - g_ji wR - b_ji wI      q_ji = bc_ji w_j - b_ji wR + g_ji wI
/// ```
///
/// with `w_i = v_i^2`, `wR = v_i v_j cos(t_i - t_j)`, `wI = v_i v_j sin(t_i - t_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchParams {
    pub g_ij: f64,
    pub b_ij: f64,
    pub g_ji: f64,
    pub b_ji: f64,
    pub g_c_ij: f64,
    pub b_c_ij: f64,
    pub g_c_ji: f64,
    pub b_c_ji: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("branch has zero series impedance")]
pub struct ZeroImpedance;

impl BranchParams {
    /// Standard pi model with series impedance `r + jx`, total charging `b`,
    /// tap ratio `tap` and phase shift `shift` (radians) on the from side.
    pub fn new(r: f64, x: f64, b: f64, tap: f64, shift: f64) -> Result<Self, ZeroImpedance> {
        let z2 = r * r + x * x;
        if !(z2 > 0.0) {
            return Err(ZeroImpedance);
        }
        let (gs, bs) = (r / z2, -x / z2);
        let tap2 = tap * tap;
        let (yff_r, yff_i) = (gs / tap2, (bs + 0.5 * b) / tap2);
        let (ytt_r, ytt_i) = (gs, bs + 0.5 * b);
        let (c, s) = (shift.cos(), shift.sin());
        // Yft = -ys e^{j shift} / tap, Ytf = -ys e^{-j shift} / tap
        let yft_r = -(gs * c - bs * s) / tap;
        let yft_i = -(gs * s + bs * c) / tap;
        let ytf_r = -(gs * c + bs * s) / tap;
        let ytf_i = -(bs * c - gs * s) / tap;
        Ok(Self {
            g_ij: -yft_r,
            b_ij: yft_i,
            g_ji: -ytf_r,
            b_ji: ytf_i,
            g_c_ij: yff_r,
            b_c_ij: -yff_i,
            g_c_ji: ytt_r,
            b_c_ji: -ytt_i,
        })
    }

    pub fn from_branch(br: &Branch) -> Result<Self, ZeroImpedance> {
        Self::new(br.r, br.x, br.b, br.tap, br.shift)
    }

    /// Coefficients of `(w_i, w_j, wR, wI)` in `p_ij, q_ij, p_ji, q_ji`.
    pub fn flow_rows(&self) -> [[f64; 4]; 4] {
        [
            [self.g_c_ij, 0.0, -self.g_ij, self.b_ij],
            [self.b_c_ij, 0.0, -self.b_ij, -self.g_ij],
            [0.0, self.g_c_ji, -self.g_ji, -self.b_ji],
            [0.0, self.b_c_ji, -self.b_ji, self.g_ji],
        ]
    }

    /// `[p_ij, q_ij, p_ji, q_ji]` at `x = (v_i, v_j, t_i, t_j)`.
    pub fn flows(&self, x: &[f64; 4]) -> [f64; 4] {
        let u = Basis::at(x).value;
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(self.flow_rows()) {
            *o = row.iter().zip(&u).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Values, gradients and Hessians of `(w_i, w_j, wR, wI)` in `x`.
struct Basis {
    value: [f64; 4],
    grad: [[f64; 4]; 4],
    hess: [[[f64; 4]; 4]; 4],
}

impl Basis {
    fn at(x: &[f64; 4]) -> Self {
        let [vi, vj, ti, tj] = *x;
        let (s, c) = (ti - tj).sin_cos();
        let mut grad = [[0.0; 4]; 4];
        let mut hess = [[[0.0; 4]; 4]; 4];

        grad[0][0] = 2.0 * vi;
        hess[0][0][0] = 2.0;
        grad[1][1] = 2.0 * vj;
        hess[1][1][1] = 2.0;

        let vv = vi * vj;
        grad[2] = [vj * c, vi * c, -vv * s, vv * s];
        grad[3] = [vj * s, vi * s, vv * c, -vv * c];

        let h = &mut hess[2];
        h[0][1] = c;
        h[0][2] = -vj * s;
        h[0][3] = vj * s;
        h[1][2] = -vi * s;
        h[1][3] = vi * s;
        h[2][2] = -vv * c;
        h[2][3] = vv * c;
        h[3][3] = -vv * c;

        let h = &mut hess[3];
        h[0][1] = s;
        h[0][2] = vj * c;
        h[0][3] = -vj * c;
        h[1][2] = vi * c;
        h[1][3] = -vi * c;
        h[2][2] = -vv * s;
        h[2][3] = vv * s;
        h[3][3] = -vv * s;

        for h in hess.iter_mut().skip(2) {
            for a in 0..4 {
                for b in 0..a {
                    h[a][b] = h[b][a];
                }
            }
        }
        Self {
            value: [vi * vi, vj * vj, vv * c, vv * s],
            grad,
            hess,
        }
    }
}

/// Coupling terms of one subproblem: multiplier, penalty and consensus target
/// per coupled quantity, ordered `p_ij, q_ij, p_ji, q_ji, w_i, w_j, t_i, t_j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchCoupling {
    pub lambda: [f64; 8],
    pub rho: [f64; 8],
    pub target: [f64; 8],
}

/// Branch subproblem in `(v_i, v_j, t_i, t_j)`:
/// the sum over coupled quantities `y` of
/// `lambda (y - target) + rho / 2 (y - target)^2`, over the voltage box and
/// `|t| <= 2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSubproblem {
    pub params: BranchParams,
    pub coupling: BranchCoupling,
    lower: [f64; 4],
    upper: [f64; 4],
}

impl BranchSubproblem {
    pub fn new(
        params: BranchParams,
        coupling: BranchCoupling,
        v_from: (f64, f64),
        v_to: (f64, f64),
    ) -> Self {
        Self {
            params,
            coupling,
            lower: [v_from.0, v_to.0, -2.0 * PI, -2.0 * PI],
            upper: [v_from.1, v_to.1, 2.0 * PI, 2.0 * PI],
        }
    }

    pub fn for_branch(
        case: &NetworkCase,
        k: usize,
        coupling: BranchCoupling,
    ) -> Result<Self, ZeroImpedance> {
        let br = &case.branches[k];
        let (f, t) = (&case.buses[br.from], &case.buses[br.to]);
        Ok(Self::new(
            BranchParams::from_branch(br)?,
            coupling,
            (f.vmin, f.vmax),
            (t.vmin, t.vmax),
        ))
    }

    /// The eight coupled quantities at `x`.
    pub fn coupled_values(&self, x: &[f64; 4]) -> [f64; 8] {
        let fl = self.params.flows(x);
        [
            fl[0],
            fl[1],
            fl[2],
            fl[3],
            x[0] * x[0],
            x[1] * x[1],
            x[2],
            x[3],
        ]
    }

    /// Objective, gradient and Hessian in one pass.
    pub fn evaluate(&self, x: &[f64], want_hess: bool) -> (f64, [f64; 4], [[f64; 4]; 4]) {
        let x: &[f64; 4] = x
            .try_into()
            .expect("branch subproblems have four variables");
        let basis = Basis::at(x);
        let rows = self.params.flow_rows();
        let cp = &self.coupling;
        let mut f = 0.0;
        let mut g = [0.0; 4];
        let mut h = [[0.0; 4]; 4];

        let mut add = |k: usize, value: f64, grad: &[f64; 4], hess: Option<&[[f64; 4]; 4]>| {
            let gap = value - cp.target[k];
            f += cp.lambda[k] * gap + 0.5 * cp.rho[k] * gap * gap;
            let slope = cp.lambda[k] + cp.rho[k] * gap;
            for a in 0..4 {
                g[a] += slope * grad[a];
            }
            if want_hess {
                for a in 0..4 {
                    for b in a..4 {
                        let mut v = cp.rho[k] * grad[a] * grad[b];
                        if let Some(hh) = hess {
                            v += slope * hh[a][b];
                        }
                        h[a][b] += v;
                    }
                }
            }
        };

        for (k, row) in rows.iter().enumerate() {
            let mut value = 0.0;
            let mut grad = [0.0; 4];
            let mut hess = [[0.0; 4]; 4];
            for (m, &coef) in row.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                value += coef * basis.value[m];
                for a in 0..4 {
                    grad[a] += coef * basis.grad[m][a];
                    for b in 0..4 {
                        hess[a][b] += coef * basis.hess[m][a][b];
                    }
                }
            }
            add(k, value, &grad, Some(&hess));
        }
        add(4, basis.value[0], &basis.grad[0], Some(&basis.hess[0]));
        add(5, basis.value[1], &basis.grad[1], Some(&basis.hess[1]));
        add(6, x[2], &[0.0, 0.0, 1.0, 0.0], None);
        add(7, x[3], &[0.0, 0.0, 0.0, 1.0], None);
        for a in 0..4 {
            for b in 0..a {
                h[a][b] = h[b][a];
            }
        }
        (f, g, h)
    }
}

impl BoundedProblem for BranchSubproblem {
    fn dim(&self) -> usize {
        4
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        self.evaluate(x, false).0
    }
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(&self.evaluate(x, false).1);
    }
    fn eval_hess(&self, x: &[f64], hess: &mut DenseMatrix) {
        let h = self.evaluate(x, true).2;
        for a in 0..4 {
            for b in 0..4 {
                hess.as_mut_slice()[b * 4 + a] = h[a][b];
            }
        }
    }
}
