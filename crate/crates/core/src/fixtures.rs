//! Toy fixtures and their committed oracle files.
//!
//! A fixture is an experiment config plus generators for small problems
//! whose answers are recomputed from scratch by exhaustive methods:
//! brute-force MILP enumeration and full assessment of every feasible
//! schedule. [`regenerate_oracles`] rebuilds the files and compares them
//! byte for byte with the committed copies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gridsched_milp::{brute_force_milp, LinearProgram, MixedIntegerProgram, Relation, Status};
use rand::Rng;
use rayon::prelude::*;

use crate::ce::enumerate_schedules;
use crate::error::{read_to_string, write_file, Error, Result};
use crate::grid::{bundled_case, GridCase, Topology};
use crate::harness::{Experiment, ExperimentConfig};
use crate::seed::SeedTree;
use crate::stochastic::{day_of_year, sample_day_ahead, seasonal_step, DayAheadForecast, ProcessParams};
use crate::uc::{build_uc, InitialStatus};

pub const TOY5_CONFIG: &str = include_str!("../../../configs/toy5.toml");
/// Seed of every fixture generator; changing it invalidates the oracles.
pub const FIXTURE_SEED: u64 = 20_170_601;
pub const N_RANDOM_MILPS: usize = 30;
pub const N_TOY_UCS: usize = 20;
pub const TOY_UC_HOURS: usize = 6;

pub fn toy5_config() -> ExperimentConfig {
    ExperimentConfig::parse(TOY5_CONFIG, "toy5.toml").expect("bundled fixture config is valid")
}

/// The toy experiment; `base` anchors relative paths (none by default).
pub fn toy5_experiment() -> Result<Experiment> {
    Experiment::new(toy5_config(), Path::new("."))
}

/// Random MILP with 1–10 binaries and up to 4 bounded continuous columns;
/// the rows are built around a random point, so most instances are feasible.
pub fn random_milp(rng: &mut impl Rng) -> MixedIntegerProgram {
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
        let coeffs: Vec<(usize, f64)> =
            (0..n).filter_map(|j| rng.random_bool(0.6).then(|| (j, f64::from(rng.random_range(-5..=5))))).collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        if rng.random_bool(0.5) {
            mip.lp.add_constraint(coeffs, Relation::Le, act + f64::from(rng.random_range(0..3)));
        } else {
            mip.lp.add_constraint(coeffs, Relation::Ge, act - f64::from(rng.random_range(0..3)));
        }
    }
    mip
}

pub fn random_milp_instance(i: usize) -> MixedIntegerProgram {
    random_milp(&mut SeedTree::new(FIXTURE_SEED).child("milp").index(i as u64).rng())
}

/// One toy UC day: a random month, at most one line out, and the first
/// `hours` hours of a sampled forecast.
pub fn toy_uc_day(case: &GridCase, process: &ProcessParams, i: usize, hours: usize) -> (Topology, DayAheadForecast) {
    let mut rng = SeedTree::new(FIXTURE_SEED).child("uc").index(i as u64).rng();
    let month: u8 = rng.random_range(1..=12);
    let j = seasonal_step(process.monthly_profile(month), month, process, &mut rng);
    let doy = day_of_year(month, rng.random_range(1..=28));
    let out: Vec<usize> = if rng.random_bool(0.5) { vec![rng.random_range(0..case.n_lines())] } else { vec![] };
    let f = sample_day_ahead(case, doy, j, process, &mut rng).truncated(hours);
    (Topology::with_out(case.n_lines(), &out), f)
}

pub fn toy_uc_instance(i: usize) -> Result<MixedIntegerProgram> {
    let case = bundled_case("toy5")?;
    let process = ProcessParams::defaults_for(&case);
    let (topo, f) = toy_uc_day(&case, &process, i, TOY_UC_HOURS);
    build_uc(&case, &topo, &f, &vec![InitialStatus::LONG_ON; case.n_gens()])
}

fn fmt_status(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
    }
}

/// Brute-force answers of the random MILPs and the 6-hour toy UCs.
pub fn milp_oracle_csv() -> Result<String> {
    let mut jobs: Vec<(&str, usize)> = (0..N_RANDOM_MILPS).map(|i| ("random", i)).collect();
    jobs.extend((0..N_TOY_UCS).map(|i| ("toy_uc", i)));
    let rows = jobs
        .par_iter()
        .map(|&(kind, i)| {
            let mip = if kind == "random" { random_milp_instance(i) } else { toy_uc_instance(i)? };
            let sol = brute_force_milp(&mip)?;
            let obj = if sol.status == Status::Optimal { format!("{:.6}", sol.objective) } else { String::new() };
            Ok(format!("{kind},{i},{},{obj}\n", fmt_status(sol.status)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(String::from("kind,index,status,objective\n") + &rows.concat())
}

/// Every feasible schedule of the toy experiment, assessed on the
/// optimizer's seed, with its penalized cost.
pub fn enumeration_csv(exp: &Experiment) -> Result<String> {
    let barrier = exp.barrier()?;
    let mut s = String::from("schedule,months,expected_cost,p_reliability_ok,p_shed_ok,mean_reliability,mean_shed_frac,penalized\n");
    for (k, sched) in enumerate_schedules(exp.reqs()).iter().enumerate() {
        let r = exp.assess(sched, exp.assessment_seed())?;
        let m = &r.metrics;
        let months: Vec<String> = sched
            .assignment
            .iter()
            .zip(exp.reqs())
            .map(|(row, req)| {
                let ms: Vec<String> = (1..=12).filter(|&m| row[m - 1]).map(|m| m.to_string()).collect();
                format!("{}:{}", req.line_id, ms.join("+"))
            })
            .collect();
        let _ = writeln!(
            s,
            "{k},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            months.join(" "),
            m.aggregate.expected_cost,
            m.aggregate.p_reliability_ok,
            m.aggregate.p_shed_ok,
            m.mean_reliability(),
            m.mean_shed_frac(),
            exp.penalized(&r, &barrier)
        );
    }
    Ok(s)
}

pub const FIXTURE_FILES: [&str; 2] = ["milp_oracle.csv", "enumeration.csv"];

/// Line-by-line differences, capped at 20 entries.
fn diff_lines(expected: &str, found: &str) -> Vec<String> {
    let a: Vec<&str> = expected.lines().collect();
    let b: Vec<&str> = found.lines().collect();
    let mut out = Vec::new();
    for i in 0..a.len().max(b.len()) {
        let (x, y) = (a.get(i).copied().unwrap_or("<missing>"), b.get(i).copied().unwrap_or("<missing>"));
        if x != y {
            out.push(format!("line {}: committed `{x}`, regenerated `{y}`", i + 1));
        }
        if out.len() == 20 {
            break;
        }
    }
    out
}

/// Freshly computed contents of every oracle file of `fixture`.
pub fn oracle_contents(fixture: &str) -> Result<Vec<(&'static str, String)>> {
    if fixture != "toy5" {
        return Err(Error::validation("fixture", format!("unknown fixture {fixture}")));
    }
    let exp = toy5_experiment()?;
    Ok(vec![(FIXTURE_FILES[0], milp_oracle_csv()?), (FIXTURE_FILES[1], enumeration_csv(&exp)?)])
}

/// Compares `files` with the copies in `dir`; the first mismatch is an
/// [`Error::OracleDrift`] listing the differing lines.
pub fn check_oracles(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    for (name, contents) in files {
        let path = dir.join(name);
        let committed = read_to_string(&path)?;
        if &committed != contents {
            return Err(Error::OracleDrift { file: path.display().to_string(), diffs: diff_lines(&committed, contents) });
        }
    }
    Ok(())
}

/// Recomputes the oracle files of `fixture` (currently only "toy5") and
/// checks them against the copies in `dir`, or replaces them with `write`.
pub fn regenerate_oracles(fixture: &str, dir: &Path, write: bool) -> Result<Vec<PathBuf>> {
    let files = oracle_contents(fixture)?;
    if write {
        for (name, contents) in &files {
            write_file(&dir.join(name), contents)?;
        }
    } else {
        check_oracles(dir, &files)?;
    }
    Ok(files.iter().map(|(name, _)| dir.join(name)).collect())
}

/// Checks the committed files without recomputing anything expensive:
/// the enumeration table must list every feasible toy schedule.
pub fn check_enumeration_shape(dir: &Path) -> Result<usize> {
    let text = read_to_string(&dir.join("enumeration.csv"))?;
    let rows = text.lines().count().saturating_sub(1);
    let expected = enumerate_schedules(&toy5_config().outage_requirements).len();
    if rows != expected {
        return Err(Error::OracleDrift {
            file: "enumeration.csv".into(),
            diffs: vec![format!("{rows} rows for {expected} feasible schedules")],
        });
    }
    Ok(rows)
}
