use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gridsched::ce::OutageSchedule;
use gridsched::fixtures::regenerate_oracles;
use gridsched::harness::{build_proxy, run_compare, run_optimize, Experiment, ExperimentConfig, Mode};
use gridsched::proxy::{evaluate_proxy, ProxyDataset};

#[derive(Parser)]
#[command(name = "gridsched", version, about = "Transmission maintenance outage scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess one outage schedule.
    Assess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Search for the cheapest schedule meeting the reliability targets.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve the exact day-ahead problem on sampled queries and store them.
    ProxyBuild {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare proxy and exact day-ahead decisions month by month.
    ProxyEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Assess a schedule next to random feasible schedules on the same seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_random: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute a fixture's oracle files and check them against `dir`.
    RegenerateOracles {
        #[arg(long, default_value = "toy5")]
        fixture: String,
        #[arg(long)]
        dir: PathBuf,
        /// Overwrite the files instead of checking them.
        #[arg(long)]
        write: bool,
    },
}

fn open(config: &Path, workers: Option<usize>, mode: Option<Mode>) -> Result<Experiment> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text, &config.display().to_string())?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    Ok(Experiment::new(cfg, config.parent().unwrap_or(Path::new(".")))?)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_schedule(exp: &Experiment, path: &Path) -> Result<OutageSchedule> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(OutageSchedule::from_csv(&text, exp.reqs())?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Assess { config, schedule, out, workers } => {
            let exp = open(&config, workers, None)?;
            let s = read_schedule(&exp, &schedule)?;
            let r = exp.assess(&s, exp.assessment_seed())?;
            let json = serde_json::to_string_pretty(&r)? + "\n";
            match out {
                Some(dir) => {
                    write(&dir.join("assessment.json"), &json)?;
                    write(&dir.join("months.csv"), r.months_csv())?;
                }
                None => print!("{json}"),
            }
            log::info!("assessed in {:.1}s", r.wall_seconds);
        }
        Command::Optimize { config, out, workers } => {
            let exp = open(&config, workers, None)?;
            let r = run_optimize(&exp, &out)?;
            log::info!("converged after {} iterations: {}", r.trace.len(), out.join("best_schedule.csv").display());
        }
        Command::ProxyBuild { config, out, workers } => {
            let exp = open(&config, workers, Some(Mode::Exact))?;
            let ds = build_proxy(&exp)?;
            ds.write(&out)?;
            log::info!("{} records in {} buckets", ds.records.len(), ds.bucket_sizes().len());
        }
        Command::ProxyEval { config, dataset, n_test, out, workers } => {
            let exp = open(&config, workers, Some(Mode::Exact))?;
            let ds = Arc::new(ProxyDataset::read(&dataset, &exp.case)?);
            let n = n_test.unwrap_or(exp.config.proxy.n_test);
            let seed = exp.root_seed().child("proxy-eval");
            let report = exp.install(|| evaluate_proxy(&exp.case, &ds, &exp.process, n, seed))?;
            write(&out.join("proxy_report.csv"), report.to_csv())?;
            log::info!("day-ahead cost band {:.4}", report.band("day_ahead_cost"));
        }
        Command::Compare { config, schedule, n_random, out, workers } => {
            let exp = open(&config, workers, None)?;
            let s = read_schedule(&exp, &schedule)?;
            let rows = run_compare(&exp, &s, n_random, &out)?;
            log::info!("{} assessments written to {}", rows.len(), out.join("compare.csv").display());
        }
        Command::RegenerateOracles { fixture, dir, write } => {
            let paths = regenerate_oracles(&fixture, &dir, write)?;
            for p in paths {
                println!("{} {}", if write { "wrote" } else { "ok" }, p.display());
            }
        }
    }
    Ok(())
}
