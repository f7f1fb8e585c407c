use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use railalloc::config::ExperimentConfig;
use railalloc::experiment::{run_method, scenario_for, SweepRow};
use railalloc::output::{emit_csv, write_certify_csv, write_trace_csv};
use railalloc::scenario_io::save_scenario;
use railalloc::{
    run_bandwidth_sweep, run_beta_sweep, run_certification, run_solver_comparison, Error, Result,
    StdClock,
};
use railalloc_core::CapacityModel;

#[derive(Parser)]
#[command(
    name = "railalloc",
    version,
    about = "Bandwidth allocation for mmWave rail networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenario seeds (overrides the config).
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity versus total bandwidth.
    SweepBandwidth(Common),
    /// Capacity versus self-interference level.
    SweepBeta(Common),
    /// SQP against the other solvers on fresh scenarios.
    CompareSolvers {
        #[command(flatten)]
        common: Common,
        /// Number of groups (overrides the config).
        #[arg(long)]
        groups: Option<usize>,
    },
    /// Cross-check SQP against the dual and lattice oracles.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        devices: usize,
        /// Number of random instances (overrides the config).
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Solve one scenario with every configured method.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Index into the derived seed list.
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
        /// Write the SQP iteration trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write the generated scenario to a text file.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = common.seeds {
        cfg.sweep.seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn seed_at(cfg: &ExperimentConfig, index: usize) -> u64 {
    railalloc_core::geometry::derive_seed(cfg.sweep.master_seed, index as u64)
}

fn solve_one(
    cfg: &ExperimentConfig,
    seed_index: usize,
    out: &Path,
    trace: Option<&Path>,
) -> Result<()> {
    let clock = StdClock::new();
    let seed = seed_at(cfg, seed_index);
    let scenario = scenario_for(cfg, seed)?;
    let params = cfg.radio_params()?;
    let w = cfg.sweep.bandwidth_mhz;
    let model = CapacityModel::new(&scenario, w * 1e6, &params)?;
    let mut rows = Vec::new();
    for &m in &cfg.sweep.methods {
        let (res, report) = run_method(cfg, m, &scenario, &model, &clock)?;
        if let (Some(path), Some(report)) = (trace, &report) {
            write_trace_csv(report, path)?;
        }
        println!(
            "{:>5} {:.6e} bit/s  alpha_0 = {:.6}",
            m.name(),
            res.objective,
            res.alpha[0]
        );
        rows.push(SweepRow {
            sweep_var: "bandwidth_mhz".into(),
            value: w,
            method: m,
            capacity_bps: res.objective,
            iterations: res.iterations,
            wall_time_s: res.wall_time,
            seed,
            alpha: res.alpha,
        });
    }
    emit_csv(&rows, out)
}

fn run(cli: Cli) -> Result<()> {
    let clock = StdClock::new();
    match cli.command {
        Command::SweepBandwidth(c) => {
            let cfg = load(&c)?;
            emit_csv(&run_bandwidth_sweep(&cfg, &clock)?, &c.out)
        }
        Command::SweepBeta(c) => {
            let cfg = load(&c)?;
            emit_csv(&run_beta_sweep(&cfg, &clock)?, &c.out)
        }
        Command::CompareSolvers { common, groups } => {
            let mut cfg = load(&common)?;
            if let Some(g) = groups {
                cfg.sweep.groups = g;
                cfg.validate()?;
            }
            emit_csv(&run_solver_comparison(&cfg, &clock)?, &common.out)
        }
        Command::Certify {
            common,
            devices,
            instances,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = instances {
                cfg.sweep.certify_instances = n;
            }
            cfg.sweep.certify_devices = devices;
            cfg.validate()?;
            let rows = run_certification(&cfg, devices, 1e-6, &clock)?;
            write_certify_csv(&rows, &common.out)?;
            let failed = rows.iter().filter(|r| !r.passed).count();
            println!("{} instances, {} failed", rows.len(), failed);
            if failed > 0 {
                return Err(Error::NotCertified(format!(
                    "{failed} of {} instances disagree with the oracles",
                    rows.len()
                )));
            }
            Ok(())
        }
        Command::Solve {
            common,
            seed_index,
            trace,
        } => {
            let cfg = load(&common)?;
            solve_one(&cfg, seed_index, &common.out, trace.as_deref())
        }
        Command::Scenario { common, seed_index } => {
            let cfg = load(&common)?;
            let scenario = scenario_for(&cfg, seed_at(&cfg, seed_index))?;
            save_scenario(&scenario, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
