//! Parallel batch solves and load-imbalance statistics.
//!
//! [`solve_batch`] splits the input into `workers` contiguous partitions of
//! (almost) equal size, in input order, and solves each partition on its own
//! thread. Every problem is solved exactly as [`tron::solve`] would solve it
//! alone, so the reports do not depend on the number of workers.
//!
//! [`imbalance`] turns per-partition times into the percent imbalance
//! `nu_k = (t_max,k / t_mean,k - 1) * 100` and its max/min/mean over
//! iterations.

use std::time::Instant;

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::tron::{self, BoundedProblem, SolveReport, TronConfig, TronError, DEFAULT_CAPACITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatchError {
    #[error("{problems} problems but {starts} starting points")]
    LengthMismatch { problems: usize, starts: usize },
    #[error("at least one worker is required")]
    NoWorkers,
    #[error("problem {index}: {source}")]
    Problem { index: usize, source: TronError },
    #[error("imbalance needs at least two partitions, got {0}")]
    TooFewPartitions(usize),
    #[error("imbalance needs at least one iteration")]
    NoIterations,
    #[error("iteration {iteration} has {found} partitions, expected {expected}")]
    RaggedTimes {
        iteration: usize,
        expected: usize,
        found: usize,
    },
    #[error("partition times must be positive (iteration {iteration}, partition {partition})")]
    NonPositiveTime { iteration: usize, partition: usize },
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// One report per input problem, in input order.
    pub reports: Vec<SolveReport>,
    /// Seconds per problem, measured inside the worker.
    pub per_problem_time: Vec<f64>,
    /// Seconds spent by each partition.
    pub partition_times: Vec<f64>,
    pub batch_wall_time: f64,
}

/// Start/end indices of `workers` contiguous partitions of `len` items.
/// Sizes differ by at most one; the larger ones come first.
pub fn partition_bounds(len: usize, workers: usize) -> Vec<(usize, usize)> {
    let workers = workers.max(1);
    let base = len / workers;
    let extra = len % workers;
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for k in 0..workers {
        let size = base + usize::from(k < extra);
        out.push((start, start + size));
        start += size;
    }
    out
}

type Slot = Option<Result<(SolveReport, f64), TronError>>;

fn run_partition<P: BoundedProblem>(
    problems: &[P],
    x0s: &[Vec<f64>],
    cfg: &TronConfig,
    slots: &mut [Slot],
) -> f64 {
    let start = Instant::now();
    for ((p, x0), slot) in problems.iter().zip(x0s).zip(slots.iter_mut()) {
        let t = Instant::now();
        let r = tron::solve(p, x0, cfg);
        *slot = Some(r.map(|rep| (rep, t.elapsed().as_secs_f64())));
    }
    start.elapsed().as_secs_f64()
}

/// Solves every problem from its starting point using `workers` threads.
pub fn solve_batch<P: BoundedProblem + Sync>(
    problems: &[P],
    x0s: &[Vec<f64>],
    cfg: &TronConfig,
    workers: usize,
) -> Result<BatchResult, BatchError> {
    if problems.len() != x0s.len() {
        return Err(BatchError::LengthMismatch {
            problems: problems.len(),
            starts: x0s.len(),
        });
    }
    if workers == 0 {
        return Err(BatchError::NoWorkers);
    }
    let start = Instant::now();
    let n = problems.len();
    let mut slots: Vec<Slot> = (0..n).map(|_| None).collect();
    let parts = partition_bounds(n, workers);

    let partition_times = if workers == 1 {
        vec![run_partition(problems, x0s, cfg, &mut slots)]
    } else {
        std::thread::scope(|scope| {
            let mut rest = slots.as_mut_slice();
            let mut handles = Vec::with_capacity(parts.len());
            for &(lo, hi) in &parts {
                let (mine, tail) = rest.split_at_mut(hi - lo);
                rest = tail;
                let (ps, xs) = (&problems[lo..hi], &x0s[lo..hi]);
                handles.push(scope.spawn(move || run_partition(ps, xs, cfg, mine)));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("batch worker panicked"))
                .collect()
        })
    };

    let mut reports = Vec::with_capacity(n);
    let mut per_problem_time = Vec::with_capacity(n);
    for (index, slot) in slots.into_iter().enumerate() {
        match slot.expect("every slot is filled") {
            Ok((rep, t)) => {
                reports.push(rep);
                per_problem_time.push(t);
            }
            Err(source) => return Err(BatchError::Problem { index, source }),
        }
    }
    Ok(BatchResult {
        reports,
        per_problem_time,
        partition_times,
        batch_wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Percent load imbalance per iteration and its aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceStats {
    pub nu_per_iter: Vec<f64>,
    pub nu_max: f64,
    pub nu_min: f64,
    pub nu_mean: f64,
}

/// `times[k][p]` is the time partition `p` spent in iteration `k`.
pub fn imbalance(times: &[Vec<f64>]) -> Result<ImbalanceStats, BatchError> {
    let first = times.first().ok_or(BatchError::NoIterations)?;
    let parts = first.len();
    if parts < 2 {
        return Err(BatchError::TooFewPartitions(parts));
    }
    let mut nu_per_iter = Vec::with_capacity(times.len());
    for (iteration, row) in times.iter().enumerate() {
        if row.len() != parts {
            return Err(BatchError::RaggedTimes {
                iteration,
                expected: parts,
                found: row.len(),
            });
        }
        if let Some(partition) = row.iter().position(|&t| !(t > 0.0)) {
            return Err(BatchError::NonPositiveTime {
                iteration,
                partition,
            });
        }
        let max = row.iter().cloned().fold(f64::MIN, f64::max);
        let min = row.iter().cloned().fold(f64::MAX, f64::min);
        let nu = if max == min {
            0.0
        } else {
            let mean = row.iter().sum::<f64>() / parts as f64;
            ((max / mean - 1.0) * 100.0).max(0.0)
        };
        nu_per_iter.push(nu);
    }
    let nu_max = nu_per_iter.iter().cloned().fold(f64::MIN, f64::max);
    let nu_min = nu_per_iter.iter().cloned().fold(f64::MAX, f64::min);
    let nu_mean = nu_per_iter.iter().sum::<f64>() / nu_per_iter.len() as f64;
    Ok(ImbalanceStats {
        nu_per_iter,
        nu_max,
        nu_min,
        nu_mean,
    })
}

/// `f(x) = 120 - prod x_i` with `0 <= x_i <= i`; the minimizer is
/// `x_i = i`.
#[derive(Debug, Clone)]
pub struct Hs45 {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("hs45 dimension {0} outside 1..={DEFAULT_CAPACITY}")]
pub struct Hs45DimError(pub usize);

pub fn make_hs45(n: usize) -> Result<Hs45, Hs45DimError> {
    if n == 0 || n > DEFAULT_CAPACITY {
        return Err(Hs45DimError(n));
    }
    Ok(Hs45 {
        lower: vec![0.0; n],
        upper: (1..=n).map(|i| i as f64).collect(),
    })
}

impl Hs45 {
    /// Midpoint of the box, `x_i = i / 2`.
    pub fn default_start(&self) -> Vec<f64> {
        self.upper.iter().map(|u| 0.5 * u).collect()
    }

    /// `120 - n!`, computed the same way the objective is.
    pub fn optimal_value(&self) -> f64 {
        self.eval_f(&self.upper)
    }
}

impl BoundedProblem for Hs45 {
    fn dim(&self) -> usize {
        self.upper.len()
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        120.0 - x.iter().product::<f64>()
    }
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) {
        // prefix/suffix products avoid dividing by zero coordinates
        let n = x.len();
        let mut prefix = 1.0;
        for i in 0..n {
            grad[i] = prefix;
            prefix *= x[i];
        }
        let mut suffix = 1.0;
        for i in (0..n).rev() {
            grad[i] = -grad[i] * suffix;
            suffix *= x[i];
        }
    }
    fn eval_hess(&self, x: &[f64], hess: &mut DenseMatrix) {
        let n = x.len();
        for j in 0..n {
            hess[(j, j)] = 0.0;
            for i in j + 1..n {
                let p: f64 = (0..n).filter(|&k| k != i && k != j).map(|k| x[k]).product();
                hess[(i, j)] = -p;
                hess[(j, i)] = -p;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tron::SolveStatus;

    #[test]
    fn hs45_values() {
        let p = make_hs45(2).unwrap();
        assert_eq!(p.eval_f(&[1.0, 2.0]), 118.0);
        let mut g = [0.0; 2];
        p.eval_grad(&[1.0, 2.0], &mut g);
        assert_eq!(g, [-2.0, -1.0]);

        let p = make_hs45(1).unwrap();
        assert_eq!(p.eval_f(&[1.0]), 119.0);
        assert_eq!(p.upper(), [1.0]);

        assert_eq!(make_hs45(0).unwrap_err(), Hs45DimError(0));
        assert_eq!(make_hs45(65).unwrap_err(), Hs45DimError(65));
    }

    #[test]
    fn hs45_gradient_at_zero_coordinate() {
        let p = make_hs45(3).unwrap();
        let mut g = [0.0; 3];
        p.eval_grad(&[0.0, 2.0, 3.0], &mut g);
        assert_eq!(g, [-6.0, 0.0, 0.0]);
    }

    #[test]
    fn hs45_three_solved() {
        let p = make_hs45(3).unwrap();
        let r = tron::solve(&p, &[0.5, 0.5, 0.5], &TronConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.x_star, [1.0, 2.0, 3.0]);
        assert_eq!(r.f_star, 114.0);
    }

    #[test]
    fn partitions_are_even_and_ordered() {
        assert_eq!(
            partition_bounds(10, 4),
            vec![(0, 3), (3, 6), (6, 8), (8, 10)]
        );
        assert_eq!(partition_bounds(2, 4), vec![(0, 1), (1, 2), (2, 2), (2, 2)]);
        assert_eq!(partition_bounds(0, 1), vec![(0, 0)]);
    }

    #[test]
    fn empty_batch() {
        let ps: Vec<Hs45> = Vec::new();
        let r = solve_batch(&ps, &[], &TronConfig::default(), 3).unwrap();
        assert!(r.reports.is_empty());
        assert_eq!(r.partition_times.len(), 3);
    }

    #[test]
    fn batch_errors() {
        let ps = vec![make_hs45(2).unwrap()];
        assert_eq!(
            solve_batch(&ps, &[], &TronConfig::default(), 1).unwrap_err(),
            BatchError::LengthMismatch {
                problems: 1,
                starts: 0
            }
        );
        assert_eq!(
            solve_batch(&ps, &[vec![1.0, 1.0]], &TronConfig::default(), 0).unwrap_err(),
            BatchError::NoWorkers
        );
        assert!(matches!(
            solve_batch(&ps, &[vec![1.0]], &TronConfig::default(), 1),
            Err(BatchError::Problem { index: 0, .. })
        ));
    }

    #[test]
    fn imbalance_examples() {
        let s = imbalance(&[vec![1.0, 1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(s.nu_per_iter, [0.0]);
        let s = imbalance(&[vec![2.0, 1.0, 1.0, 1.0]]).unwrap();
        assert!((s.nu_per_iter[0] - 60.0).abs() < 1e-12);
        let s = imbalance(&[vec![2.0, 1.0, 1.0, 1.0], vec![3.0, 3.0, 3.0, 3.0]]).unwrap();
        assert!((s.nu_max - 60.0).abs() < 1e-12);
        assert_eq!(s.nu_min, 0.0);
        assert!((s.nu_mean - 30.0).abs() < 1e-12);
    }

    #[test]
    fn imbalance_errors() {
        assert_eq!(imbalance(&[]), Err(BatchError::NoIterations));
        assert_eq!(
            imbalance(&[vec![1.0]]),
            Err(BatchError::TooFewPartitions(1))
        );
        assert_eq!(
            imbalance(&[vec![1.0, 0.0]]),
            Err(BatchError::NonPositiveTime {
                iteration: 0,
                partition: 1
            })
        );
        assert!(matches!(
            imbalance(&[vec![1.0, 1.0], vec![1.0]]),
            Err(BatchError::RaggedTimes { .. })
        ));
    }
}
