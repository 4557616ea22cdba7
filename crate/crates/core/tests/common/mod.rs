#![allow(dead_code)]

use gridsched::grid::{
    Bus, CostSegment, DispatchableGenerator, GridCase, Line, Prices, StartupStep, WindGenerator,
};

pub fn bus(id: u32, load: f64) -> Bus {
    Bus { id, peak_load_mw: load, load_profile_id: "rts".into() }
}

pub fn line(id: u32, from: u32, to: u32, x: f64, limit: f64) -> Line {
    Line { id, from_bus: from, to_bus: to, reactance_pu: x, flow_limit_mw: limit }
}

pub fn gen(id: u32, bus: u32, pmin: f64, pmax: f64, price: f64, startup: f64) -> DispatchableGenerator {
    DispatchableGenerator {
        id,
        bus,
        p_min_mw: pmin,
        p_max_mw: pmax,
        ramp_up_mw_per_h: pmax,
        ramp_down_mw_per_h: pmax,
        min_up_h: 1,
        min_down_h: 1,
        cost_curve: vec![CostSegment { up_to_mw: pmax, price }],
        startup_cost_fn: vec![StartupStep { min_hours_off: 1, cost: startup }],
    }
}

pub fn case(buses: Vec<Bus>, lines: Vec<Line>, gens: Vec<DispatchableGenerator>, wind: Vec<WindGenerator>) -> GridCase {
    let c = GridCase {
        name: "test".into(),
        reference_buses: vec![buses[0].id],
        buses,
        lines,
        dispatchable_generators: gens,
        wind_generators: wind,
        prices: Prices { voll: 1000.0, wind_curtail_price: 100.0 },
    };
    c.validate().unwrap();
    c
}

/// Monte-Carlo checks of the stochastic processes shared by the
/// statistical tests and the acceptance run.
pub mod mc {
    use gridsched::grid::GridCase;
    use gridsched::stochastic::{sample_day_ahead, sample_training_topology, simulate_day, ProcessParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Largest |sample mean − profile product| of each series' daily energy,
    /// in standard errors, over `draws` forecasts for January.
    pub fn forecast_mean_z(case: &GridCase, draws: usize, seed: u64) -> f64 {
        let p = ProcessParams::defaults_for(case);
        let j = p.monthly_profile(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = case.n_wind() + case.n_buses();
        let mut sum = vec![0.0; rows];
        let mut sq = vec![0.0; rows];
        for _ in 0..draws {
            let f = sample_day_ahead(case, 15, j, &p, &mut rng);
            for (r, row) in f.wind.iter().chain(&f.load).enumerate() {
                let e: f64 = row.iter().sum();
                sum[r] += e;
                sq[r] += e * e;
            }
        }
        let expected: Vec<f64> = p
            .daily_wind_profile_mw
            .iter()
            .map(|r| r.iter().sum::<f64>() * p.monthly_wind_profile[0])
            .chain(p.daily_load_profile_mw.iter().map(|r| r.iter().sum::<f64>() * p.monthly_load_profile[0]))
            .collect();
        let n = draws as f64;
        (0..rows)
            .filter(|&r| expected[r] > 0.0)
            .map(|r| {
                let mean = sum[r] / n;
                let var = (sq[r] / n - mean * mean) * n / (n - 1.0);
                (mean - expected[r]).abs() / (var / n).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Least-squares slope (through the origin) of Var(δ_h) against h for
    /// the first load bus, divided by the per-step noise variance.
    pub fn walk_variance_slope_ratio(case: &GridCase, draws: usize, seed: u64) -> f64 {
        let p = ProcessParams::defaults_for(case);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bus = case.buses.iter().position(|b| b.peak_load_mw > 0.0).unwrap();
        let f = sample_day_ahead(case, 15, p.monthly_profile(1), &p, &mut rng);
        let sd = p.load_walk_noise_frac * f.load[bus][0];
        let mut sum = [0.0; 24];
        let mut sq = [0.0; 24];
        for _ in 0..draws {
            for (h, s) in simulate_day(case, &f, 24, &p, &mut rng).iter().enumerate() {
                sum[h] += s.load_delta[bus];
                sq[h] += s.load_delta[bus] * s.load_delta[bus];
            }
        }
        let n = draws as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for h in 1..24 {
            let var = sq[h] / n - (sum[h] / n).powi(2);
            num += h as f64 * var;
            den += (h * h) as f64;
        }
        num / den / (sd * sd)
    }

    /// Chi-square p-value of the outage patterns of `k` candidate lines.
    pub fn topology_uniformity_p(n_lines: usize, k: usize, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lines: Vec<usize> = (0..k).collect();
        let mut counts = vec![0usize; 1 << k];
        for _ in 0..draws {
            let t = sample_training_topology(n_lines, &lines, &mut rng);
            let key = lines.iter().enumerate().filter(|(_, &l)| !t.line_status[l]).map(|(i, _)| 1 << i).sum::<usize>();
            counts[key] += 1;
        }
        chi_square_p(&counts)
    }

    /// p-value of a uniformity chi-square test over `counts`.
    pub fn chi_square_p(counts: &[usize]) -> f64 {
        let total: usize = counts.iter().sum();
        let e = total as f64 / counts.len() as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
    }
}
