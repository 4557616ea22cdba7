//! Cross-entropy mechanics with synthetic assessment functions.

mod common;

use common::mc::chi_square_p;
use gridsched::ce::{
    elite_indices, entropy, enumerate_schedules, optimize, penalized_cost, sample_row, sample_schedule,
    update_distribution, BarrierParams, CeDistribution, CeParams, OutageRequirement, OutageSchedule,
};
use gridsched::reliability::{AggregateMetrics, ChanceThresholds, ScenarioMetrics, ScheduleMetrics};
use gridsched::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn req(line_id: u32, count: usize, months: &[u8]) -> OutageRequirement {
    OutageRequirement { line_id, count, allowed_months: months.to_vec() }
}

fn all_months() -> Vec<u8> {
    (1..=12).collect()
}

fn metrics(cost: f64, p_r: f64, p_ls: f64) -> ScheduleMetrics {
    ScheduleMetrics {
        per_scenario: vec![ScenarioMetrics { mean_reliability: 0.9, mean_shed_mw: 0.0, mean_shed_frac: 0.0, total_cost: cost }],
        aggregate: AggregateMetrics { expected_cost: cost, p_reliability_ok: p_r, p_shed_ok: p_ls },
    }
}

#[test]
fn one_hot_row_is_deterministic() {
    let mut d = CeDistribution { p: vec![[0.0; 12]] };
    d.p[0][6] = 1.0;
    let r = req(1, 1, &all_months());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert_eq!(sample_row(&d, 0, &r, &mut rng).unwrap(), vec![7]);
    }
}

#[test]
fn uniform_pairs_are_uniform() {
    let d = CeDistribution::uniform(1);
    let r = req(1, 2, &all_months());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for _ in 0..66_000 {
        *counts.entry(sample_row(&d, 0, &r, &mut rng).unwrap()).or_default() += 1;
    }
    assert_eq!(counts.len(), 66);
    let p = chi_square_p(&counts.values().copied().collect::<Vec<_>>());
    assert!(p > 0.001, "p = {p}");
    // Each pair within 3σ of 1000.
    let sd = (66_000.0_f64 * (1.0 / 66.0) * (65.0 / 66.0)).sqrt();
    assert!(counts.values().all(|&c| (c as f64 - 1000.0).abs() <= 3.0 * sd + 1.0));
}

#[test]
fn sampled_schedules_are_always_feasible() {
    let reqs = vec![req(1, 2, &all_months()), req(2, 1, &[1, 2, 3, 4]), req(3, 2, &[5, 6, 7, 8]), req(4, 1, &[12])];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut d = CeDistribution::uniform(reqs.len());
    for i in 0..10_000 {
        if i % 100 == 0 {
            // Random distributions, including zero entries.
            use rand::Rng;
            for row in &mut d.p {
                for v in row.iter_mut() {
                    *v = if rng.random_bool(0.2) { 0.0 } else { rng.random() };
                }
            }
        }
        let s = sample_schedule(&d, &reqs, &mut rng);
        assert!(s.is_feasible(&reqs), "{s:?}");
        assert!(s.assignment[1][4..].iter().all(|&v| !v));
    }
}

#[test]
fn zero_weight_row_is_degenerate() {
    let d = CeDistribution { p: vec![[0.0; 12]] };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(matches!(sample_row(&d, 0, &req(1, 1, &[1, 2]), &mut rng), Err(Error::DegenerateDistribution { row: 0 })));
    // The schedule sampler falls back to a uniform draw.
    assert!(sample_schedule(&d, &[req(1, 1, &[1, 2])], &mut rng).is_feasible(&[req(1, 1, &[1, 2])]));
}

#[test]
fn elite_update_is_the_elite_mean() {
    let s = |a: u8, b: u8| OutageSchedule::from_combos(&[vec![a], vec![b]]);
    let samples = vec![s(1, 5), s(2, 5), s(3, 6), s(4, 7)];
    let costs = [3.0, 1.0, 2.0, 9.0];
    // ρ = 0.5 of 4 → elite {1, 2}.
    assert_eq!(elite_indices(&costs, 0.5), vec![1, 2]);
    let d = update_distribution(&CeDistribution::uniform(2), &samples, &costs, 0.5, 1.0);
    let mut expected = vec![[0.0; 12]; 2];
    for i in [1, 2] {
        for (row, srow) in expected.iter_mut().zip(&samples[i].assignment) {
            for m in 0..12 {
                row[m] += f64::from(u8::from(srow[m])) / 2.0;
            }
        }
    }
    assert_eq!(d.p, expected);
    assert_eq!(d.p[0][1], 0.5);
    assert_eq!(d.p[0][2], 0.5);
    // Unanimous elite → that schedule's 0/1 matrix.
    let d = update_distribution(&d, &[s(3, 3), s(3, 3), s(9, 9)], &[1.0, 1.0, 0.5], 0.6, 1.0);
    assert!(d.p[0][2] == 0.5 && d.p[0][8] == 0.5);
    let d = update_distribution(&d, &[s(3, 3), s(3, 3), s(9, 9)], &[1.0, 1.0, 5.0], 0.6, 1.0);
    assert_eq!(d.p, s(3, 3).assignment.iter().map(|r| r.map(|v| f64::from(u8::from(v)))).collect::<Vec<_>>());
}

#[test]
fn barrier_penalizes_shortfalls_only() {
    let thr = ChanceThresholds::default();
    let b = BarrierParams::scaled(1000.0);
    assert_eq!(penalized_cost(&metrics(1234.0, 1.0, 0.95), &thr, &b), 1234.0);
    let pen = penalized_cost(&metrics(1234.0, 0.90, 1.0), &thr, &b) - 1234.0;
    assert!((pen - b.barrier(0.05)).abs() < 1e-9 && pen > 0.0);
    for x in [1e-3, 0.05, 0.3] {
        assert!(b.barrier(2.0 * x) > 2.0 * b.barrier(x));
    }
}

/// Cost = squared distance of each row's months from a target month.
fn synthetic(target: &[u8]) -> impl Fn(&OutageSchedule) -> gridsched::Result<ScheduleMetrics> + Sync + '_ {
    move |s: &OutageSchedule| {
        let mut cost = 0.0;
        for (row, &t) in s.assignment.iter().zip(target) {
            for m in 0..12 {
                if row[m] {
                    cost += (m as f64 + 1.0 - f64::from(t)).powi(2);
                }
            }
        }
        Ok(metrics(cost, 1.0, 1.0))
    }
}

#[test]
fn converges_to_the_synthetic_optimum() {
    let reqs = vec![req(1, 1, &all_months()), req(2, 2, &all_months()), req(3, 1, &[2, 3, 4, 5])];
    let target = [7, 3, 5];
    let params = CeParams { n_samples: 75, max_iters: 40, ..CeParams::default() };
    let run = |seed| {
        optimize(&reqs, &ChanceThresholds::default(), &BarrierParams::scaled(1.0), &params, synthetic(&target), &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    };
    let r = run(9);
    assert!(r.converged && r.trace.len() <= 40);
    // Row 2 needs two months: 3 and one neighbour.
    assert_eq!(r.schedule.assignment[0], OutageSchedule::from_combos(&[vec![7]]).assignment[0]);
    assert!(r.schedule.assignment[1][2]);
    assert!(r.schedule.assignment[2][4]);
    let last = r.p_history.last().unwrap();
    assert!(last.p.iter().flatten().all(|&p| p.min(1.0 - p) <= 0.01));
    assert!(entropy(last) < params.eps_for(3));
    let h: Vec<f64> = r.trace.iter().map(|t| t.entropy).collect();
    assert!(h.last().unwrap() < h.first().unwrap());
    // Bit-identical replay.
    assert_eq!(r, run(9));
    assert_eq!(r.trace_csv().lines().count(), r.trace.len() + 1);
    assert!(r.trace_csv().starts_with("iteration,elite_size,penalized_q1,penalized_median,penalized_q3,cost_q1"));
}

#[test]
fn infinite_epsilon_stops_after_one_iteration() {
    let reqs = vec![req(1, 1, &all_months())];
    let params = CeParams { eps_entropy: Some(f64::INFINITY), ..CeParams::default() };
    let r = optimize(&reqs, &ChanceThresholds::default(), &BarrierParams::scaled(1.0), &params, synthetic(&[4]), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.p_history.len(), 2);
    assert!(r.schedule.is_feasible(&reqs));
}

#[test]
fn exhausted_iterations_carry_the_best_sample() {
    let reqs = vec![req(1, 2, &all_months()), req(2, 2, &all_months())];
    let params = CeParams { max_iters: 2, eps_entropy: Some(0.0), ..CeParams::default() };
    let err = optimize(&reqs, &ChanceThresholds::default(), &BarrierParams::scaled(1.0), &params, synthetic(&[1, 12]), &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
    match err {
        Error::MaxIterations { iters: 2, best } => {
            assert_eq!(best.trace.len(), 2);
            assert!(best.best_sample.schedule.is_feasible(&reqs));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn schedule_csv_round_trips() {
    let reqs = vec![req(11, 1, &[1, 2, 3]), req(4, 2, &all_months())];
    for s in enumerate_schedules(&reqs).into_iter().step_by(17) {
        assert_eq!(OutageSchedule::from_csv(&s.to_csv(&reqs), &reqs).unwrap(), s);
    }
    let bad = "line_id,m1,m2,m3,m4,m5,m6,m7,m8,m9,m10,m11,m12\n11,0,0,0,1,0,0,0,0,0,0,0,0\n4,1,1,0,0,0,0,0,0,0,0,0,0\n";
    assert!(OutageSchedule::from_csv(bad, &reqs).is_err());
}
