//! Box projection helpers.
//!
//! Infinite bounds are plain `f64::INFINITY` / `f64::NEG_INFINITY`; they never
//! clip and never produce a breakpoint.

/// The feasible box `[lower, upper]`.
#[derive(Debug, Clone, Copy)]
pub struct Bounds<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

/// Breakpoints of the projected path `P[x + t w]`, `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoints {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl<'a> Bounds<'a> {
    pub fn new(lower: &'a [f64], upper: &'a [f64]) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    fn clip(&self, i: usize, v: f64) -> f64 {
        if v < self.lower[i] {
            self.lower[i]
        } else if v > self.upper[i] {
            self.upper[i]
        } else {
            v
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| self.lower[i] <= v && v <= self.upper[i])
    }

    /// Projects `x` onto the box in place. Clipped entries are set exactly
    /// to the bound.
    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.clip(i, *v);
        }
    }

    /// Writes `P[x + alpha w]` into `out`.
    pub fn projected_point(&self, x: &[f64], alpha: f64, w: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.clip(i, x[i] + alpha * w[i]);
        }
    }

    /// Projected step `s = P[x + alpha w] - x`.
    pub fn gpstep(&self, x: &[f64], alpha: f64, w: &[f64], s: &mut [f64]) {
        for i in 0..x.len() {
            s[i] = self.clip(i, x[i] + alpha * w[i]) - x[i];
        }
    }

    /// Breakpoints `(u_i - x_i)/w_i` for `w_i > 0` and `(l_i - x_i)/w_i` for
    /// `w_i < 0`, skipping infinite bounds. All zero when there are none.
    pub fn breakpoints(&self, x: &[f64], w: &[f64]) -> Breakpoints {
        let mut count = 0;
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for i in 0..x.len() {
            let b = if w[i] > 0.0 && self.upper[i].is_finite() {
                (self.upper[i] - x[i]) / w[i]
            } else if w[i] < 0.0 && self.lower[i].is_finite() {
                (self.lower[i] - x[i]) / w[i]
            } else {
                continue;
            };
            count += 1;
            min = min.min(b);
            max = max.max(b);
        }
        if count == 0 {
            min = 0.0;
        }
        Breakpoints { count, min, max }
    }

    /// Indices strictly inside their bounds, in increasing order.
    pub fn free_set(&self, x: &[f64]) -> Vec<usize> {
        (0..x.len())
            .filter(|&i| self.lower[i] < x[i] && x[i] < self.upper[i])
            .collect()
    }

    /// Infinity norm of the projected gradient at `x`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut norm = 0.0f64;
        for i in 0..x.len() {
            let gi = if x[i] <= self.lower[i] && x[i] >= self.upper[i] {
                0.0
            } else if x[i] <= self.lower[i] {
                g[i].min(0.0)
            } else if x[i] >= self.upper[i] {
                g[i].max(0.0)
            } else {
                g[i]
            };
            norm = norm.max(gi.abs());
        }
        norm
    }
}
