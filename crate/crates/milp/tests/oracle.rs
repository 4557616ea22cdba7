//! Cross-checks of the simplex and branch-and-bound against enumeration
//! oracles that share no code with the solver.

use gridsched_milp::{
    brute_force_milp, dual_objective, solve_lp, solve_lp_with, solve_milp, solve_milp_with, LinearProgram,
    LpOptions, MilpOptions, MixedIntegerProgram, PivotRule, Relation, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum over all basic feasible solutions of a box-bounded LP.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Hyperplanes: every row, then every finite bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        planes.push((a, row.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        for v in [lo, hi] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, v));
        }
    }
    let mut best: Option<f64> = None;
    for_each_combination(planes.len(), n, &mut |pick: &[usize]| {
        let a = pick.iter().map(|&p| planes[p].0.clone()).collect();
        let b = pick.iter().map(|&p| planes[p].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.max_violation(&x) <= 1e-7 {
                let obj = lp.objective_value(&x);
                if best.is_none_or(|v| obj < v) {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

fn random_feasible_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for j in 0..n {
        let lo = f64::from(rng.random_range(-3..=0));
        let hi = lo + f64::from(rng.random_range(1..=6));
        lp.add_var(format!("x{j}"), lo, hi, f64::from(rng.random_range(-5..=5)));
        x0.push(lo + (hi - lo) * rng.random::<f64>());
    }
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.random_bool(0.7).then(|| (j, f64::from(rng.random_range(-4..=4)))))
            .collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (rel, rhs) = match rng.random_range(0..5) {
            0 => (Relation::Eq, act),
            1 | 2 => (Relation::Le, act + f64::from(rng.random_range(0..3))),
            _ => (Relation::Ge, act - f64::from(rng.random_range(0..3))),
        };
        lp.add_constraint(coeffs, rel, rhs);
    }
    lp
}

fn random_milp(rng: &mut ChaCha8Rng) -> MixedIntegerProgram {
    let k = rng.random_range(1..=10);
    let c = rng.random_range(0..=4);
    let mut mip = MixedIntegerProgram::new(LinearProgram::new());
    let mut x0 = Vec::new();
    for j in 0..k {
        mip.add_binary(format!("b{j}"), f64::from(rng.random_range(-6..=6)));
        x0.push(f64::from(rng.random_range(0..=1)));
    }
    for j in 0..c {
        let hi = f64::from(rng.random_range(1..=5));
        mip.lp.add_var(format!("y{j}"), 0.0, hi, f64::from(rng.random_range(-3..=3)));
        x0.push(hi * rng.random::<f64>());
    }
    let n = k + c;
    for _ in 0..rng.random_range(1..=6) {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.random_bool(0.6).then(|| (j, f64::from(rng.random_range(-5..=5)))))
            .collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        if rng.random_bool(0.5) {
            mip.lp.add_constraint(coeffs, Relation::Le, act + f64::from(rng.random_range(0..3)));
        } else {
            mip.lp.add_constraint(coeffs, Relation::Ge, act - f64::from(rng.random_range(0..3)));
        }
    }
    mip
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let lp = random_feasible_lp(&mut rng, 8, 8);
        let oracle = vertex_enumeration(&lp).expect("generator guarantees feasibility");
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            let sol = solve_lp_with(&lp, &LpOptions { pivot_rule: rule, iteration_cap: None }).unwrap();
            assert_eq!(sol.status, Status::Optimal, "case {case}");
            assert!((sol.objective - oracle).abs() <= 1e-7, "case {case} {rule:?}: {} vs {oracle}", sol.objective);
            assert!(lp.max_violation(&sol.values) <= 1e-7, "case {case}");
        }
    }
}

#[test]
fn optimal_lps_carry_a_certified_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let lp = random_feasible_lp(&mut rng, 8, 8);
        let sol = solve_lp(&lp).unwrap();
        let dual = dual_objective(&lp, &sol.duals, 1e-7).unwrap_or_else(|| panic!("case {case}: dual infeasible"));
        assert!((dual - sol.objective).abs() <= 1e-6, "case {case}: dual {dual} primal {}", sol.objective);
    }
}

#[test]
fn random_milps_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut optimal = 0;
    for case in 0..30 {
        let mip = random_milp(&mut rng);
        let exact = brute_force_milp(&mip).unwrap();
        let (bb, stats) = solve_milp_with(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(bb.status, exact.status, "case {case}");
        if exact.status == Status::Optimal {
            optimal += 1;
            let tol = 1e-6 * exact.objective.abs().max(1.0);
            assert!((bb.objective - exact.objective).abs() <= tol, "case {case}");
            for &j in &mip.binary_vars {
                assert!(bb.values[j] == 0.0 || bb.values[j] == 1.0);
            }
            assert!(mip.lp.max_violation(&bb.values) <= 1e-7);
            assert!(stats.incumbents.windows(2).all(|w| w[1] <= w[0]), "case {case}: incumbent increased");
        }
    }
    assert!(optimal >= 25);
}

#[test]
fn empty_binary_set_reduces_to_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let lp = random_feasible_lp(&mut rng, 6, 6);
        let a = solve_lp(&lp).unwrap();
        let b = solve_milp(&MixedIntegerProgram::new(lp), 1e-6).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective, b.objective);
    }
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let mip = random_milp(&mut rng);
        let (a, sa) = solve_milp_with(&mip, &MilpOptions::default()).unwrap();
        let (b, sb) = solve_milp_with(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_values_satisfy_every_row(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lp = random_feasible_lp(&mut rng, 10, 10);
            let sol = solve_lp(&lp).unwrap();
            prop_assert_eq!(sol.status, Status::Optimal);
            prop_assert!(lp.max_violation(&sol.values) <= 1e-7);
        }
    }
}
