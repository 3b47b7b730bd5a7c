//! Component-based ADMM.
//!
//! Every generator and every branch keeps its own copy of the quantities it
//! shares with a bus: generator output `(p, q)`, the four line flows, and the
//! squared voltage and angle at both ends of a branch. Buses hold the
//! consensus values. One iteration runs
//!
//! 1. generator updates (closed form) and branch updates (one small TRON
//!    solve per branch, batched across threads),
//! 2. bus updates (closed form),
//! 3. multiplier updates `lambda += rho (copy - consensus)`.

use std::time::Instant;

use batchopt::batch::{imbalance, solve_batch, BatchError, ImbalanceStats};
use batchopt::{SolveReport, SolveStatus, TronConfig};
use thiserror::Error;

use crate::branch::{BranchCoupling, BranchParams, BranchSubproblem};
use crate::case::{GenCost, Generator, NetworkCase};

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("invalid options: {0}")]
    InvalidOptions(&'static str),
    #[error("network has no buses")]
    EmptyNetwork,
    #[error("bus {0} has no adjacent branch")]
    DegenerateBus(i64),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error(transparent)]
    Batch(#[from] BatchError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOptions {
    /// Penalty on power couplings; voltage couplings use `4 * rho0`.
    pub rho0: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub workers: usize,
    /// Generator costs are multiplied by this inside the updates; reported
    /// objectives are unscaled.
    pub cost_scale: f64,
    pub tron: TronConfig,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            max_iter: 5000,
            tol_primal: 1e-4,
            tol_dual: 1e-3,
            workers: 1,
            cost_scale: 1e-3,
            tron: TronConfig::default(),
        }
    }
}

impl AdmmOptions {
    fn validate(&self) -> Result<(), AdmmError> {
        let bad = |m| Err(AdmmError::InvalidOptions(m));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0 must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.workers == 0 {
            return bad("at least one worker is required");
        }
        if !(self.cost_scale > 0.0 && self.cost_scale.is_finite()) {
            return bad("cost_scale must be positive");
        }
        Ok(())
    }
}

/// One shared quantity: the component's copy, the bus consensus value and
/// the multiplier tying them together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub copy: f64,
    pub consensus: f64,
    pub prev_consensus: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl Coupling {
    pub fn new(copy: f64, consensus: f64, rho: f64) -> Self {
        Self {
            copy,
            consensus,
            prev_consensus: consensus,
            lambda: 0.0,
            rho,
        }
    }

    pub fn gap(&self) -> f64 {
        self.copy - self.consensus
    }

    /// `consensus + lambda / rho` would be the copy value if the bus were free.
    fn shifted_copy(&self) -> f64 {
        self.copy + self.lambda / self.rho
    }

    fn set_consensus(&mut self, value: f64) {
        self.prev_consensus = self.consensus;
        self.consensus = value;
    }
}

/// Flow indices within [`AdmmState::flows`].
pub const P_IJ: usize = 0;
pub const Q_IJ: usize = 1;
pub const P_JI: usize = 2;
pub const Q_JI: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub gen_p: Vec<Coupling>,
    pub gen_q: Vec<Coupling>,
    /// `[p_ij, q_ij, p_ji, q_ji]` per branch.
    pub flows: Vec<[Coupling; 4]>,
    /// Squared voltage at the from and to end of each branch.
    pub w: Vec<[Coupling; 2]>,
    pub theta: Vec<[Coupling; 2]>,
    /// Last branch solution `(v_i, v_j, t_i, t_j)`, used as warm start.
    pub branch_x: Vec<[f64; 4]>,
    pub iteration: usize,
}

impl AdmmState {
    pub fn couplings(&self) -> impl Iterator<Item = &Coupling> {
        self.gen_p
            .iter()
            .chain(&self.gen_q)
            .chain(self.flows.iter().flatten())
            .chain(self.w.iter().flatten())
            .chain(self.theta.iter().flatten())
    }

    fn couplings_mut(&mut self) -> impl Iterator<Item = &mut Coupling> {
        self.gen_p
            .iter_mut()
            .chain(self.gen_q.iter_mut())
            .chain(self.flows.iter_mut().flatten())
            .chain(self.w.iter_mut().flatten())
            .chain(self.theta.iter_mut().flatten())
    }
}

/// `lambda += rho (copy - consensus)` for every coupling.
pub fn multiplier_update(state: &mut AdmmState) {
    for c in state.couplings_mut() {
        c.lambda += c.rho * (c.copy - c.consensus);
    }
}

/// `(primal, dual)`: the largest `|copy - consensus|` and the largest
/// `|rho (consensus - previous consensus)|` over all couplings.
pub fn residuals(state: &AdmmState) -> (f64, f64) {
    state.couplings().fold((0.0f64, 0.0f64), |(p, d), c| {
        (
            p.max(c.gap().abs()),
            d.max((c.rho * (c.consensus - c.prev_consensus)).abs()),
        )
    })
}

/// Minimizer of `cost(p) + lambda_p (p - p~) + rho_p / 2 (p - p~)^2` and of the
/// matching proximal term in `q`, each over the generator's box.
#[allow(clippy::too_many_arguments)]
pub fn generator_update(
    gen: &Generator,
    cost: &GenCost,
    lambda_p: f64,
    rho_p: f64,
    p_tilde: f64,
    lambda_q: f64,
    rho_q: f64,
    q_tilde: f64,
) -> (f64, f64) {
    let p = (rho_p * p_tilde - lambda_p - cost.c1) / (2.0 * cost.c2 + rho_p);
    let q = (rho_q * q_tilde - lambda_q) / rho_q;
    (p.clamp(gen.pmin, gen.pmax), q.clamp(gen.qmin, gen.qmax))
}

/// A consensus variable entering the bus balance rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceTerm {
    /// Unconstrained target `copy + lambda / rho`.
    pub target: f64,
    /// Weight of `(x - target)^2 / 2`.
    pub weight: f64,
    /// Coefficients in the active and reactive balance rows.
    pub a_p: f64,
    pub a_q: f64,
}

/// Minimizes `sum weight/2 (x - target)^2` subject to
/// `sum a_p x = rhs[0]` and `sum a_q x = rhs[1]`.
///
/// Returns `None` when the two rows are linearly dependent or empty.
pub fn balance_projection(terms: &[BalanceTerm], rhs: [f64; 2]) -> Option<Vec<f64>> {
    let (mut m11, mut m12, mut m22) = (0.0, 0.0, 0.0);
    let (mut r1, mut r2) = (-rhs[0], -rhs[1]);
    for t in terms {
        m11 += t.a_p * t.a_p / t.weight;
        m12 += t.a_p * t.a_q / t.weight;
        m22 += t.a_q * t.a_q / t.weight;
        r1 += t.a_p * t.target;
        r2 += t.a_q * t.target;
    }
    let det = m11 * m22 - m12 * m12;
    if !(det > 0.0) || !(det > 1e-14 * m11 * m22) {
        return None;
    }
    let mu_p = (m22 * r1 - m12 * r2) / det;
    let mu_q = (m11 * r2 - m12 * r1) / det;
    Some(
        terms
            .iter()
            .map(|t| t.target - (t.a_p * mu_p + t.a_q * mu_q) / t.weight)
            .collect(),
    )
}

/// Per-iteration log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    /// Generation cost in $/h.
    pub objective: f64,
    /// Seconds spent by each branch-batch partition.
    pub partition_times: Vec<f64>,
    /// Largest projected-gradient norm among this iteration's branch solves.
    pub max_branch_pg: f64,
    /// Branch solves that did not report `Converged`.
    pub branch_unconverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmStatus {
    Converged,
    IterLimit,
    /// A residual became NaN or infinite.
    Diverged,
}

impl AdmmStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AdmmStatus::Converged => "converged",
            AdmmStatus::IterLimit => "iter_limit",
            AdmmStatus::Diverged => "diverged",
        }
    }
}

/// Apparent power beyond a branch rating at the final iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineOverload {
    pub branch: usize,
    pub flow: f64,
    pub rating: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub status: AdmmStatus,
    pub state: AdmmState,
    pub history: Vec<IterationRecord>,
    /// Branch reports of the last iteration.
    pub reports: Vec<SolveReport>,
    pub objective: f64,
    pub primal: f64,
    pub dual: f64,
    /// Present when the branch batch ran on two or more partitions.
    pub imbalance: Option<ImbalanceStats>,
    pub overloads: Vec<LineOverload>,
    pub wall_time: f64,
}

impl AdmmOutcome {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// Real power output per generator in per unit.
    pub fn dispatch(&self) -> Vec<f64> {
        self.state.gen_p.iter().map(|c| c.copy).collect()
    }
}

/// ADMM driver bound to one network.
#[derive(Debug, Clone)]
pub struct Admm<'a> {
    case: &'a NetworkCase,
    opts: AdmmOptions,
    params: Vec<BranchParams>,
    scaled_costs: Vec<GenCost>,
    bus_gens: Vec<Vec<usize>>,
    /// `(branch, end)` pairs; end 0 is the from side.
    bus_ends: Vec<Vec<(usize, usize)>>,
}

impl<'a> Admm<'a> {
    pub fn new(case: &'a NetworkCase, opts: AdmmOptions) -> Result<Self, AdmmError> {
        opts.validate()?;
        if case.buses.is_empty() {
            return Err(AdmmError::EmptyNetwork);
        }
        let params = case
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| BranchParams::from_branch(br).map_err(|_| AdmmError::ZeroImpedance(k)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut bus_gens = vec![Vec::new(); case.buses.len()];
        for (g, gen) in case.generators.iter().enumerate() {
            bus_gens[gen.bus].push(g);
        }
        let mut bus_ends = vec![Vec::new(); case.buses.len()];
        for (k, br) in case.branches.iter().enumerate() {
            bus_ends[br.from].push((k, 0));
            bus_ends[br.to].push((k, 1));
        }
        if let Some(i) = bus_ends.iter().position(|e| e.is_empty()) {
            return Err(AdmmError::DegenerateBus(case.buses[i].id));
        }
        let s = opts.cost_scale;
        let scaled_costs = case
            .generators
            .iter()
            .map(|g| GenCost {
                c2: s * g.cost.c2,
                c1: s * g.cost.c1,
                c0: s * g.cost.c0,
            })
            .collect();
        Ok(Self {
            case,
            opts,
            params,
            scaled_costs,
            bus_gens,
            bus_ends,
        })
    }

    pub fn options(&self) -> &AdmmOptions {
        &self.opts
    }

    fn rho_power(&self) -> f64 {
        self.opts.rho0
    }

    fn rho_voltage(&self) -> f64 {
        4.0 * self.opts.rho0
    }

    /// Generators at the middle of their boxes, branches at flat start.
    pub fn initial_state(&self) -> AdmmState {
        let (rp, rv) = (self.rho_power(), self.rho_voltage());
        let mid = |a: f64, b: f64| 0.5 * (a + b);
        let gen_p = self
            .case
            .generators
            .iter()
            .map(|g| {
                let v = mid(g.pmin, g.pmax);
                Coupling::new(v, v, rp)
            })
            .collect();
        let gen_q = self
            .case
            .generators
            .iter()
            .map(|g| {
                let v = mid(g.qmin, g.qmax);
                Coupling::new(v, v, rp)
            })
            .collect();
        let mut flows = Vec::new();
        let mut w = Vec::new();
        let mut theta = Vec::new();
        let mut branch_x = Vec::new();
        for (k, br) in self.case.branches.iter().enumerate() {
            let (f, t) = (&self.case.buses[br.from], &self.case.buses[br.to]);
            let x = [
                1.0f64.clamp(f.vmin, f.vmax),
                1.0f64.clamp(t.vmin, t.vmax),
                0.0,
                0.0,
            ];
            let fl = self.params[k].flows(&x);
            flows.push(fl.map(|v| Coupling::new(v, v, rp)));
            w.push([
                Coupling::new(x[0] * x[0], 1.0, rv),
                Coupling::new(x[1] * x[1], 1.0, rv),
            ]);
            theta.push([Coupling::new(0.0, 0.0, rv), Coupling::new(0.0, 0.0, rv)]);
            branch_x.push(x);
        }
        AdmmState {
            gen_p,
            gen_q,
            flows,
            w,
            theta,
            branch_x,
            iteration: 0,
        }
    }

    pub fn generator_stage(&self, state: &mut AdmmState) {
        for (g, gen) in self.case.generators.iter().enumerate() {
            let (cp, cq) = (state.gen_p[g], state.gen_q[g]);
            let (p, q) = generator_update(
                gen,
                &self.scaled_costs[g],
                cp.lambda,
                cp.rho,
                cp.consensus,
                cq.lambda,
                cq.rho,
                cq.consensus,
            );
            state.gen_p[g].copy = p;
            state.gen_q[g].copy = q;
        }
    }

    /// Branch subproblems for the current consensus values and multipliers.
    pub fn branch_subproblems(&self, state: &AdmmState) -> Vec<BranchSubproblem> {
        (0..self.case.branches.len())
            .map(|k| {
                let cs: [&Coupling; 8] = [
                    &state.flows[k][0],
                    &state.flows[k][1],
                    &state.flows[k][2],
                    &state.flows[k][3],
                    &state.w[k][0],
                    &state.w[k][1],
                    &state.theta[k][0],
                    &state.theta[k][1],
                ];
                let coupling = BranchCoupling {
                    lambda: cs.map(|c| c.lambda),
                    rho: cs.map(|c| c.rho),
                    target: cs.map(|c| c.consensus),
                };
                let br = &self.case.branches[k];
                let (f, t) = (&self.case.buses[br.from], &self.case.buses[br.to]);
                BranchSubproblem::new(self.params[k], coupling, (f.vmin, f.vmax), (t.vmin, t.vmax))
            })
            .collect()
    }

    /// Solves every branch subproblem from its warm start and stores the new
    /// copies. Returns the batch reports and per-partition times.
    pub fn branch_stage(
        &self,
        state: &mut AdmmState,
    ) -> Result<(Vec<SolveReport>, Vec<f64>), AdmmError> {
        let subs = self.branch_subproblems(state);
        let starts: Vec<Vec<f64>> = state.branch_x.iter().map(|x| x.to_vec()).collect();
        let batch = solve_batch(&subs, &starts, &self.opts.tron, self.opts.workers)?;
        for (k, (sub, rep)) in subs.iter().zip(&batch.reports).enumerate() {
            let x: [f64; 4] = rep.x_star.as_slice().try_into().expect("four variables");
            let vals = sub.coupled_values(&x);
            for (c, v) in state.flows[k].iter_mut().zip(&vals[..4]) {
                c.copy = *v;
            }
            state.w[k][0].copy = vals[4];
            state.w[k][1].copy = vals[5];
            state.theta[k][0].copy = vals[6];
            state.theta[k][1].copy = vals[7];
            state.branch_x[k] = x;
        }
        Ok((batch.reports, batch.partition_times))
    }

    /// Closed-form bus updates of all consensus values.
    pub fn bus_stage(&self, state: &mut AdmmState) {
        for (i, bus) in self.case.buses.iter().enumerate() {
            let gens = &self.bus_gens[i];
            let ends = &self.bus_ends[i];

            let (mut th_num, mut th_den) = (0.0, 0.0);
            let (mut w_num, mut w_den) = (0.0, 0.0);
            for &(k, e) in ends {
                let c = &state.theta[k][e];
                th_num += c.rho * c.shifted_copy();
                th_den += c.rho;
                let c = &state.w[k][e];
                w_num += c.rho * c.shifted_copy();
                w_den += c.rho;
            }
            let theta = th_num / th_den;

            let mut terms = Vec::with_capacity(2 * gens.len() + 2 * ends.len() + 1);
            for &g in gens {
                for (c, (a_p, a_q)) in
                    [(&state.gen_p[g], (1.0, 0.0)), (&state.gen_q[g], (0.0, 1.0))]
                {
                    terms.push(BalanceTerm {
                        target: c.shifted_copy(),
                        weight: c.rho,
                        a_p,
                        a_q,
                    });
                }
            }
            for &(k, e) in ends {
                let (ip, iq) = if e == 0 { (P_IJ, Q_IJ) } else { (P_JI, Q_JI) };
                for (c, (a_p, a_q)) in [
                    (&state.flows[k][ip], (-1.0, 0.0)),
                    (&state.flows[k][iq], (0.0, -1.0)),
                ] {
                    terms.push(BalanceTerm {
                        target: c.shifted_copy(),
                        weight: c.rho,
                        a_p,
                        a_q,
                    });
                }
            }
            terms.push(BalanceTerm {
                target: w_num / w_den,
                weight: w_den,
                a_p: -bus.gs,
                a_q: bus.bs,
            });
            let x = balance_projection(&terms, [bus.pd, bus.qd])
                .expect("every bus row contains at least one flow");

            let mut it = x.into_iter();
            for &g in gens {
                state.gen_p[g].set_consensus(it.next().unwrap());
                state.gen_q[g].set_consensus(it.next().unwrap());
            }
            for &(k, e) in ends {
                let (ip, iq) = if e == 0 { (P_IJ, Q_IJ) } else { (P_JI, Q_JI) };
                state.flows[k][ip].set_consensus(it.next().unwrap());
                state.flows[k][iq].set_consensus(it.next().unwrap());
            }
            let w = it.next().unwrap();
            for &(k, e) in ends {
                state.w[k][e].set_consensus(w);
                state.theta[k][e].set_consensus(theta);
            }
        }
    }

    /// Largest violation of the bus balance rows at the consensus values.
    pub fn balance_violation(&self, state: &AdmmState) -> f64 {
        let mut worst = 0.0f64;
        for (i, bus) in self.case.buses.iter().enumerate() {
            let mut p = -bus.pd;
            let mut q = -bus.qd;
            for &g in &self.bus_gens[i] {
                p += state.gen_p[g].consensus;
                q += state.gen_q[g].consensus;
            }
            let mut w = None;
            for &(k, e) in &self.bus_ends[i] {
                let (ip, iq) = if e == 0 { (P_IJ, Q_IJ) } else { (P_JI, Q_JI) };
                p -= state.flows[k][ip].consensus;
                q -= state.flows[k][iq].consensus;
                w = Some(state.w[k][e].consensus);
            }
            let w = w.unwrap_or(0.0);
            p -= bus.gs * w;
            q += bus.bs * w;
            worst = worst.max(p.abs()).max(q.abs());
        }
        worst
    }

    /// Generation cost in $/h at the generator copies.
    pub fn objective(&self, state: &AdmmState) -> f64 {
        self.case
            .generators
            .iter()
            .zip(&state.gen_p)
            .map(|(g, c)| g.cost.eval(c.copy))
            .sum()
    }

    /// One full iteration.
    pub fn step(
        &self,
        state: &mut AdmmState,
    ) -> Result<(IterationRecord, Vec<SolveReport>), AdmmError> {
        self.generator_stage(state);
        let (reports, partition_times) = self.branch_stage(state)?;
        self.bus_stage(state);
        multiplier_update(state);
        state.iteration += 1;
        let (primal, dual) = residuals(state);
        let record = IterationRecord {
            iter: state.iteration,
            primal,
            dual,
            objective: self.objective(state),
            partition_times,
            max_branch_pg: reports.iter().map(|r| r.pg_norm).fold(0.0, f64::max),
            branch_unconverged: reports
                .iter()
                .filter(|r| r.status != SolveStatus::Converged)
                .count(),
        };
        Ok((record, reports))
    }

    fn overloads(&self, state: &AdmmState) -> Vec<LineOverload> {
        let mut out = Vec::new();
        for (k, br) in self.case.branches.iter().enumerate() {
            if br.rate_a <= 0.0 {
                continue;
            }
            let fl = &state.flows[k];
            let s_from = fl[P_IJ].copy.hypot(fl[Q_IJ].copy);
            let s_to = fl[P_JI].copy.hypot(fl[Q_JI].copy);
            let s = s_from.max(s_to);
            if s > br.rate_a {
                out.push(LineOverload {
                    branch: k,
                    flow: s,
                    rating: br.rate_a,
                });
            }
        }
        out
    }

    /// Iterates until both residuals are within tolerance or `max_iter`.
    pub fn run(&self) -> Result<AdmmOutcome, AdmmError> {
        let start = Instant::now();
        let mut state = self.initial_state();
        let mut history = Vec::new();
        let mut reports = Vec::new();
        let mut status = AdmmStatus::IterLimit;
        for _ in 0..self.opts.max_iter {
            let (record, reps) = self.step(&mut state)?;
            reports = reps;
            let (primal, dual) = (record.primal, record.dual);
            history.push(record);
            if !(primal.is_finite() && dual.is_finite()) {
                status = AdmmStatus::Diverged;
                break;
            }
            if primal <= self.opts.tol_primal && dual <= self.opts.tol_dual {
                status = AdmmStatus::Converged;
                break;
            }
        }
        let last = history.last().expect("max_iter is positive");
        let (objective, primal, dual) = (last.objective, last.primal, last.dual);
        let times: Vec<Vec<f64>> = history.iter().map(|r| r.partition_times.clone()).collect();
        let imbalance = if self.opts.workers >= 2 {
            imbalance(&times).ok()
        } else {
            None
        };
        Ok(AdmmOutcome {
            status,
            overloads: self.overloads(&state),
            state,
            history,
            reports,
            objective,
            primal,
            dual,
            imbalance,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

pub fn admm_solve(case: &NetworkCase, opts: AdmmOptions) -> Result<AdmmOutcome, AdmmError> {
    Admm::new(case, opts)?.run()
}
