use batchopt::SolveStatus;
use batchopt_acopf::admm::{
    balance_projection, generator_update, multiplier_update, residuals, BalanceTerm, Coupling,
};
use batchopt_acopf::case::{GenCost, Generator};
use batchopt_acopf::{
    admm_solve, parse_matpower, Admm, AdmmOptions, AdmmState, AdmmStatus, CASE2_TOY, CASE3_ZERO,
    CASE9,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > 1e-12 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Full KKT system of the equality-constrained projection.
fn kkt_oracle(terms: &[BalanceTerm], rhs: [f64; 2]) -> Vec<f64> {
    let n = terms.len();
    let mut a = vec![vec![0.0; n + 2]; n + 2];
    let mut b = vec![0.0; n + 2];
    for (i, t) in terms.iter().enumerate() {
        a[i][i] = t.weight;
        a[i][n] = t.a_p;
        a[i][n + 1] = t.a_q;
        a[n][i] = t.a_p;
        a[n + 1][i] = t.a_q;
        b[i] = t.weight * t.target;
    }
    b[n] = rhs[0];
    b[n + 1] = rhs[1];
    solve_dense(a, b)[..n].to_vec()
}

fn generator(pmin: f64, pmax: f64, qmin: f64, qmax: f64) -> Generator {
    Generator {
        bus: 0,
        pmin,
        pmax,
        qmin,
        qmax,
        cost: GenCost {
            c2: 0.0,
            c1: 0.0,
            c0: 0.0,
        },
    }
}

#[test]
fn generator_matches_golden_section() {
    let g = generator(0.0, 10.0, -1.0, 1.0);
    let cost = GenCost {
        c2: 0.5,
        c1: 0.0,
        c0: 0.0,
    };
    let (p, _) = generator_update(&g, &cost, 0.0, 2.0, 1.0, 0.0, 2.0, 0.0);
    let want = golden_section(|p| 0.5 * p * p + (p - 1.0) * (p - 1.0), 0.0, 10.0);
    assert!((p - want).abs() < 1e-8);
    assert!((p - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn two_flows_into_empty_bus() {
    // two line flows leaving the bus, values 1.0 and 0.5, must sum to zero
    let terms = [
        BalanceTerm {
            target: 1.0,
            weight: 1.0,
            a_p: -1.0,
            a_q: 0.0,
        },
        BalanceTerm {
            target: 0.5,
            weight: 1.0,
            a_p: -1.0,
            a_q: 0.0,
        },
        BalanceTerm {
            target: 0.0,
            weight: 1.0,
            a_p: 0.0,
            a_q: -1.0,
        },
    ];
    let x = balance_projection(&terms, [0.0, 0.0]).unwrap();
    let want = kkt_oracle(&terms, [0.0, 0.0]);
    for (a, b) in x.iter().zip(&want) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!((x[0] - 0.25).abs() < 1e-15 && (x[1] + 0.25).abs() < 1e-15);
    assert!((x[0] + x[1]).abs() < 1e-15);
}

#[test]
fn angle_consensus_is_weighted_average() {
    let case = parse_matpower(CASE3_ZERO).unwrap();
    let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
    let mut s = admm.initial_state();
    // bus 1 is the from end of branch 0 and the to end of branch 2
    s.theta[0][0].copy = 0.1;
    s.theta[2][1].copy = 0.3;
    admm.bus_stage(&mut s);
    assert!((s.theta[0][0].consensus - 0.2).abs() < 1e-15);
    assert_eq!(s.theta[0][0].consensus, s.theta[2][1].consensus);
}

#[test]
fn matched_copies_are_a_fixed_point() {
    let case = parse_matpower(CASE2_TOY).unwrap();
    let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
    let mut s = admm.initial_state();
    // a point where the balance rows already hold
    s.gen_p[0] = Coupling::new(0.5, 0.5, 10.0);
    s.gen_q[0] = Coupling::new(0.2, 0.2, 10.0);
    for (k, v) in [0.5, 0.2, -0.5, -0.2].into_iter().enumerate() {
        s.flows[0][k] = Coupling::new(v, v, 10.0);
    }
    let before = s.clone();
    admm.bus_stage(&mut s);
    for (a, b) in s.couplings().zip(before.couplings()) {
        assert!((a.consensus - b.copy).abs() < 1e-15);
    }
    assert!(admm.balance_violation(&s) < 1e-15);
}

fn perturbed_state(admm: &Admm<'_>, seed: u64) -> AdmmState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = admm.initial_state();
    for c in s
        .gen_p
        .iter_mut()
        .chain(&mut s.gen_q)
        .chain(s.flows.iter_mut().flatten())
        .chain(s.w.iter_mut().flatten())
        .chain(s.theta.iter_mut().flatten())
    {
        c.copy += rng.gen_range(-0.5..0.5);
        c.lambda = rng.gen_range(-3.0..3.0);
    }
    s
}

#[test]
fn bus_stage_is_exact_on_every_case() {
    for text in [CASE9, CASE2_TOY, CASE3_ZERO] {
        let case = parse_matpower(text).unwrap();
        let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
        for seed in 0..50 {
            let mut s = perturbed_state(&admm, seed);
            admm.bus_stage(&mut s);
            assert!(admm.balance_violation(&s) <= 1e-10);
        }
    }
}

#[test]
fn shunts_enter_both_rows() {
    let text = CASE9.replace("\t5\t1\t90\t30\t0\t0\t", "\t5\t1\t90\t30\t5\t19\t");
    assert_ne!(text, CASE9);
    let case = parse_matpower(&text).unwrap();
    assert_eq!((case.buses[4].gs, case.buses[4].bs), (0.05, 0.19));
    let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
    for seed in 0..20 {
        let mut s = perturbed_state(&admm, seed);
        admm.bus_stage(&mut s);
        assert!(admm.balance_violation(&s) <= 1e-10);
    }
}

#[test]
fn iteration_is_schedule_independent() {
    let case = parse_matpower(CASE9).unwrap();
    let base = Admm::new(&case, AdmmOptions::default()).unwrap();
    let mut s = base.initial_state();
    for _ in 0..25 {
        base.step(&mut s).unwrap();
    }
    let mut outs = Vec::new();
    for workers in [1, 2, 3, 4] {
        let admm = Admm::new(
            &case,
            AdmmOptions {
                workers,
                ..AdmmOptions::default()
            },
        )
        .unwrap();
        let mut t = s.clone();
        let (rec, _) = admm.step(&mut t).unwrap();
        assert_eq!(rec.partition_times.len(), workers);
        outs.push((t, rec.primal, rec.dual, rec.objective));
    }
    for o in &outs[1..] {
        assert_eq!(o.0, outs[0].0);
        assert_eq!((o.1, o.2, o.3), (outs[0].1, outs[0].2, outs[0].3));
    }
}

#[test]
fn branch_solves_reach_small_gradients() {
    let case = parse_matpower(CASE9).unwrap();
    let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
    let mut s = admm.initial_state();
    for _ in 0..300 {
        let (_, reports) = admm.step(&mut s).unwrap();
        for r in &reports {
            assert_ne!(r.status, SolveStatus::FactorizationFailed);
            assert!(r.pg_norm < 1e-4, "pg {}", r.pg_norm);
        }
    }
}

#[test]
fn zero_demand_network() {
    let case = parse_matpower(CASE3_ZERO).unwrap();
    let out = admm_solve(&case, AdmmOptions::default()).unwrap();
    assert_eq!(out.status, AdmmStatus::Converged);
    for c in out.state.flows.iter().flatten() {
        assert!(c.copy.abs() < 1e-8);
    }
    assert!(out.objective.abs() < 1e-12);
}

#[test]
fn single_iteration_is_reported() {
    let case = parse_matpower(CASE9).unwrap();
    let out = admm_solve(
        &case,
        AdmmOptions {
            max_iter: 1,
            ..AdmmOptions::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, AdmmStatus::IterLimit);
    assert_eq!(out.iterations(), 1);
}

proptest! {
    #[test]
    fn generator_update_is_the_box_minimizer(
        c2 in 0.0..5.0f64, c1 in -5.0..5.0f64,
        lp in -5.0..5.0f64, lq in -5.0..5.0f64,
        rho in 0.5..50.0f64, pt in -3.0..3.0f64, qt in -3.0..3.0f64,
    ) {
        let g = generator(-1.0, 2.0, -0.5, 1.5);
        let cost = GenCost { c2, c1, c0: 0.0 };
        let (p, q) = generator_update(&g, &cost, lp, rho, pt, lq, rho, qt);
        let fp = |p: f64| c2 * p * p + c1 * p + lp * (p - pt) + 0.5 * rho * (p - pt) * (p - pt);
        let fq = |q: f64| lq * (q - qt) + 0.5 * rho * (q - qt) * (q - qt);
        prop_assert!((p - golden_section(fp, -1.0, 2.0)).abs() < 1e-6);
        prop_assert!((q - golden_section(fq, -0.5, 1.5)).abs() < 1e-6);
    }

    #[test]
    fn projection_matches_kkt_oracle(
        raw in prop::collection::vec((-2.0..2.0f64, 0.5..40.0f64, 0usize..3), 2..10),
        shunt in (-0.5..0.5f64, -0.5..0.5f64),
        rhs in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let mut terms: Vec<BalanceTerm> = raw
            .iter()
            .map(|&(target, weight, kind)| {
                let (a_p, a_q) = match kind {
                    0 => (1.0, 0.0),
                    1 => (-1.0, 0.0),
                    _ => (0.0, -1.0),
                };
                BalanceTerm { target, weight, a_p, a_q }
            })
            .collect();
        // both rows need a flow
        terms.push(BalanceTerm { target: 0.3, weight: 10.0, a_p: -1.0, a_q: 0.0 });
        terms.push(BalanceTerm { target: -0.1, weight: 10.0, a_p: 0.0, a_q: -1.0 });
        terms.push(BalanceTerm { target: 1.0, weight: 80.0, a_p: -shunt.0, a_q: shunt.1 });
        let rhs = [rhs.0, rhs.1];
        let x = balance_projection(&terms, rhs).unwrap();
        let want = kkt_oracle(&terms, rhs);
        for (a, b) in x.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let row_p: f64 = terms.iter().zip(&x).map(|(t, v)| t.a_p * v).sum();
        let row_q: f64 = terms.iter().zip(&x).map(|(t, v)| t.a_q * v).sum();
        prop_assert!((row_p - rhs[0]).abs() < 1e-10 && (row_q - rhs[1]).abs() < 1e-10);
    }

    #[test]
    fn multiplier_update_is_exact(seed in 0u64..1000) {
        let case = parse_matpower(CASE9).unwrap();
        let admm = Admm::new(&case, AdmmOptions::default()).unwrap();
        let s0 = perturbed_state(&admm, seed);
        let mut s = s0.clone();
        multiplier_update(&mut s);
        for (a, b) in s.couplings().zip(s0.couplings()) {
            prop_assert_eq!(a.lambda, b.lambda + b.rho * (b.copy - b.consensus));
            prop_assert_eq!((a.copy, a.consensus), (b.copy, b.consensus));
        }
        let (primal, dual) = residuals(&s0);
        let want = s0.couplings().map(|c| (c.copy - c.consensus).abs()).fold(0.0, f64::max);
        prop_assert_eq!(primal, want);
        prop_assert_eq!(dual, 0.0);
    }
}
