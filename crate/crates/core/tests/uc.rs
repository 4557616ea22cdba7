//! Unit commitment against hand-computed optima and the brute-force oracle.

mod common;

use common::*;
use gridsched::grid::{bundled_case, Topology, WindGenerator};
use gridsched::stochastic::{sample_day_ahead, DayAheadForecast, ProcessParams, SeasonalFactor};
use gridsched::uc::{solve_uc, uc_cost, verify_uc, InitialStatus, UcModel};
use gridsched_milp::{brute_force_milp, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_forecast(seed: u64, hours: usize) -> DayAheadForecast {
    let case = bundled_case("toy5").unwrap();
    let p = ProcessParams::defaults_for(&case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = SeasonalFactor { wind_level: rng.random_range(0.2..1.0), load_level: rng.random_range(0.5..1.0) };
    sample_day_ahead(&case, 1 + (seed as usize % 365), j, &p, &mut rng).truncated(hours)
}

#[test]
fn single_unit_flat_load_is_hand_computable() {
    let c = case(vec![bus(1, 50.0)], vec![], vec![gen(1, 1, 0.0, 100.0, 10.0, 250.0)], vec![]);
    let f = DayAheadForecast { wind: vec![], load: vec![vec![50.0; 24]] };
    let sol = solve_uc(&c, &Topology::all_in_service(0), &f, &[InitialStatus::Off(5)]).unwrap();
    assert!((sol.cost - (24.0 * 50.0 * 10.0 + 250.0)).abs() < 1e-6, "{}", sol.cost);
    assert!(sol.commitment[0].iter().all(|&a| a));
    assert_eq!(sol.total_shed_mw(), 0.0);
}

#[test]
fn zero_load_commits_nothing() {
    let case = bundled_case("toy5").unwrap();
    let f = DayAheadForecast { wind: vec![vec![0.0; 24]], load: vec![vec![0.0; 24]; 5] };
    let sol = solve_uc(&case, &Topology::all_in_service(6), &f, &[InitialStatus::LONG_ON; 2]).unwrap();
    assert_eq!(sol.cost, 0.0);
    assert!(sol.commitment.iter().flatten().all(|&a| !a));
}

#[test]
fn surplus_wind_is_curtailed_without_commitment() {
    let c = case(
        vec![bus(1, 0.0), bus(2, 40.0)],
        vec![line(1, 1, 2, 0.1, 500.0)],
        vec![gen(1, 1, 10.0, 100.0, 20.0, 50.0)],
        vec![WindGenerator { id: 1, bus: 1, capacity_mw: 100.0 }],
    );
    let f = DayAheadForecast { wind: vec![vec![60.0; 4]], load: vec![vec![0.0; 4], vec![40.0; 4]] };
    let sol = solve_uc(&c, &Topology::all_in_service(1), &f, &[InitialStatus::LONG_ON]).unwrap();
    assert!(sol.commitment[0].iter().all(|&a| !a));
    assert_eq!(sol.total_shed_mw(), 0.0);
    for t in 0..4 {
        assert!((sol.wind_curtail_mw[0][t] - 20.0).abs() < 1e-9);
    }
    assert!((sol.cost - 4.0 * 20.0 * 100.0).abs() < 1e-6);
}

#[test]
fn six_hour_toy_matches_brute_force() {
    let case = bundled_case("toy5").unwrap();
    let topo = Topology::all_in_service(6);
    for seed in 0..6 {
        let f = toy_forecast(seed, 6);
        let init = [InitialStatus::Off(3), InitialStatus::LONG_ON];
        let model = UcModel::build(&case, &topo, &f, &init).unwrap();
        assert_eq!(model.mip.binary_vars.len(), 12);
        let exact = brute_force_milp(&model.mip).unwrap();
        assert_eq!(exact.status, Status::Optimal);
        let sol = solve_uc(&case, &topo, &f, &init).unwrap();
        let rel = (sol.cost - exact.objective).abs() / exact.objective.abs().max(1.0);
        assert!(rel <= 1e-6, "seed {seed}: {} vs {}", sol.cost, exact.objective);
        let bad = verify_uc(&case, &topo, &f, &sol, 1e-6);
        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
        let recomputed = uc_cost(&case, &sol);
        assert!((recomputed - sol.cost).abs() <= 1e-6 * sol.cost.abs().max(1.0), "seed {seed}");
    }
}

#[test]
fn day_long_solutions_pass_the_independent_check() {
    let case = bundled_case("toy5").unwrap();
    for (seed, out) in [(1u64, vec![]), (2, vec![3]), (3, vec![0, 5]), (4, vec![2])] {
        let topo = Topology::with_out(6, &out);
        let f = toy_forecast(seed, 24);
        for init in [[InitialStatus::LONG_ON; 2], [InitialStatus::Off(1), InitialStatus::On(1)]] {
            let sol = solve_uc(&case, &topo, &f, &init).unwrap();
            let bad = verify_uc(&case, &topo, &f, &sol, 1e-6);
            assert!(bad.is_empty(), "seed {seed}: {bad:?}");
            assert!((uc_cost(&case, &sol) - sol.cost).abs() <= 1e-6 * sol.cost.abs().max(1.0));
        }
    }
}

#[test]
fn minimum_times_bind_from_the_initial_status() {
    // An expensive unit with a 3h minimum up time, on for one hour, next to
    // a cheap unit that could carry the whole load.
    let mut dear = gen(1, 1, 10.0, 100.0, 50.0, 0.0);
    dear.min_up_h = 3;
    let cheap = gen(2, 1, 0.0, 100.0, 10.0, 0.0);
    let c = case(vec![bus(1, 50.0)], vec![], vec![dear, cheap], vec![]);
    let f = DayAheadForecast { wind: vec![], load: vec![vec![50.0; 6]] };
    let topo = Topology::all_in_service(0);
    let init = [InitialStatus::On(1), InitialStatus::LONG_ON];
    let sol = solve_uc(&c, &topo, &f, &init).unwrap();
    assert_eq!(sol.commitment[0], vec![true, true, false, false, false, false]);
    // Two hours at minimum output, the rest from the cheap unit.
    let expected = 2.0 * 10.0 * 50.0 + (2.0 * 40.0 + 4.0 * 50.0) * 10.0;
    assert!((sol.cost - expected).abs() < 1e-6, "{}", sol.cost);
    assert!(verify_uc(&c, &topo, &f, &sol, 1e-6).is_empty());

    // The cheap unit, off for one hour with a 3h minimum down time, cannot
    // return before hour 2.
    let mut dear = gen(1, 1, 0.0, 100.0, 50.0, 0.0);
    dear.min_down_h = 1;
    let mut cheap = gen(2, 1, 0.0, 100.0, 10.0, 0.0);
    cheap.min_down_h = 3;
    let c = case(vec![bus(1, 50.0)], vec![], vec![dear, cheap], vec![]);
    let init = [InitialStatus::LONG_ON, InitialStatus::Off(1)];
    let sol = solve_uc(&c, &topo, &f, &init).unwrap();
    assert_eq!(sol.commitment[1], vec![false, false, true, true, true, true]);
    let expected = 2.0 * 50.0 * 50.0 + 4.0 * 50.0 * 10.0;
    assert!((sol.cost - expected).abs() < 1e-6, "{}", sol.cost);
    assert!(verify_uc(&c, &topo, &f, &sol, 1e-6).is_empty());
}

#[test]
fn removing_a_line_never_lowers_cost() {
    let case = bundled_case("toy5").unwrap();
    let init = [InitialStatus::LONG_ON; 2];
    for seed in 0..4 {
        let f = toy_forecast(100 + seed, 24);
        let base = solve_uc(&case, &Topology::all_in_service(6), &f, &init).unwrap().cost;
        for l in 0..6 {
            let cut = solve_uc(&case, &Topology::with_out(6, &[l]), &f, &init).unwrap().cost;
            assert!(cut >= base - 1e-6 * base.abs(), "seed {seed} line {l}: {cut} < {base}");
        }
    }
}

#[test]
fn raising_voll_never_increases_shedding() {
    let mut case = bundled_case("toy5").unwrap();
    let topo = Topology::with_out(6, &[0, 1]);
    let f = toy_forecast(7, 12);
    let mut last = f64::INFINITY;
    for voll in [1e3, 1e4, 1e5] {
        case.prices.voll = voll;
        let shed = solve_uc(&case, &topo, &f, &[InitialStatus::LONG_ON; 2]).unwrap().total_shed_mw();
        assert!(shed <= last + 1e-6, "voll {voll}: {shed} > {last}");
        last = shed;
    }
}
