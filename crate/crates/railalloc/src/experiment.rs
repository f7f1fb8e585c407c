//! Sweeps over bandwidth and self-interference level, the solver comparison
//! and the oracle certification run.

use railalloc_core::allocators::{
    dual_oracle, evaluate_fixed, grid_oracle, ip_barrier, pd, pnou, sqp_allocate, AllocatorResult,
    Method,
};
use railalloc_core::certify::{certify_model, random_instance, Certificate};
use railalloc_core::geometry::derive_seed;
use railalloc_core::{CapacityModel, Clock, RadioParams, Scenario, SolverReport};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Offset separating comparison-group seeds from sweep seeds.
const GROUP_SEED_BASE: u64 = 1 << 32;
const CERTIFY_SEED_BASE: u64 = 1 << 33;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: f64,
    pub method: Method,
    pub capacity_bps: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub seed: u64,
    pub alpha: Vec<f64>,
}

pub fn scenario_for(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario> {
    let l = &cfg.layout;
    Ok(Scenario::generate(
        l.area_side,
        l.relays,
        l.users,
        l.bs_offset,
        l.rail_offset,
        seed,
    )?)
}

/// Runs one allocator. SQP results that fail certification are an error.
pub fn run_method<C: Clock + ?Sized>(
    cfg: &ExperimentConfig,
    method: Method,
    scenario: &Scenario,
    model: &CapacityModel,
    clock: &C,
) -> Result<(AllocatorResult, Option<SolverReport>)> {
    let s = &cfg.solver;
    let res = match method {
        Method::Sqp => {
            let (res, report) = match sqp_allocate(model, &s.sqp, clock) {
                Ok(ok) => ok,
                Err(railalloc_core::Error::MaxIterations(rep)) => {
                    return Err(Error::NotCertified(format!(
                        "seed {}: iteration cap {} reached, KKT residual {:.3e}",
                        scenario.seed,
                        rep.iterations,
                        rep.kkt.residuals.max()
                    )))
                }
                Err(e) => return Err(e.into()),
            };
            if !report.certified {
                return Err(Error::NotCertified(format!(
                    "seed {}: KKT residual {:.3e} above {:.1e}",
                    scenario.seed,
                    report.kkt.residuals.max(),
                    s.sqp.sigma_kkt
                )));
            }
            return Ok((res, Some(report)));
        }
        Method::Pnou => evaluate_fixed(model, pnou(scenario)?, Method::Pnou)?,
        Method::Pd => evaluate_fixed(model, pd(scenario)?, Method::Pd)?,
        Method::Ip => ip_barrier(model, &s.barrier(), clock)?,
        Method::Dual => dual_oracle(model, s.sqp.alpha_floor, s.dual_tol, clock)?,
        Method::Grid => grid_oracle(model, s.grid_step, clock)?,
    };
    Ok((res, None))
}

fn row(var: &str, value: f64, seed: u64, res: AllocatorResult) -> SweepRow {
    SweepRow {
        sweep_var: var.to_string(),
        value,
        method: res.method,
        capacity_bps: res.objective,
        iterations: res.iterations,
        wall_time_s: res.wall_time,
        seed,
        alpha: res.alpha,
    }
}

/// One row per (W, method, seed) at the configured beta. The scenario of a
/// seed is shared by all W values.
pub fn run_bandwidth_sweep<C: Clock + ?Sized>(
    cfg: &ExperimentConfig,
    clock: &C,
) -> Result<Vec<SweepRow>> {
    let params = cfg.radio_params()?;
    let mut rows = Vec::new();
    for seed in cfg.seed_list() {
        let scenario = scenario_for(cfg, seed)?;
        for &w in &cfg.sweep.bandwidths_mhz {
            let model = CapacityModel::new(&scenario, w * 1e6, &params)?;
            for &m in &cfg.sweep.methods {
                let (res, _) = run_method(cfg, m, &scenario, &model, clock)?;
                rows.push(row("bandwidth_mhz", w, seed, res));
            }
        }
    }
    Ok(rows)
}

/// One row per (beta, method, seed) at the fixed bandwidth.
pub fn run_beta_sweep<C: Clock + ?Sized>(
    cfg: &ExperimentConfig,
    clock: &C,
) -> Result<Vec<SweepRow>> {
    let base = cfg.radio_params()?;
    let w = cfg.sweep.bandwidth_mhz * 1e6;
    let mut rows = Vec::new();
    for seed in cfg.seed_list() {
        let scenario = scenario_for(cfg, seed)?;
        for &beta in &cfg.sweep.betas {
            let model = CapacityModel::new(&scenario, w, &base.with_beta(beta))?;
            for &m in &cfg.sweep.methods {
                let (res, _) = run_method(cfg, m, &scenario, &model, clock)?;
                rows.push(row("beta", beta, seed, res));
            }
        }
    }
    Ok(rows)
}

pub fn group_seed(cfg: &ExperimentConfig, group: usize) -> u64 {
    derive_seed(cfg.sweep.master_seed, GROUP_SEED_BASE + group as u64)
}

/// Each group draws a fresh scenario. Groups are numbered from 1; the row
/// numbered `groups + 1` holds per-method averages and the master seed.
pub fn run_solver_comparison<C: Clock + ?Sized>(
    cfg: &ExperimentConfig,
    clock: &C,
) -> Result<Vec<SweepRow>> {
    let params = cfg.radio_params()?;
    let w = cfg.sweep.bandwidth_mhz * 1e6;
    let methods = &cfg.sweep.compare_methods;
    let groups = cfg.sweep.groups;
    let mut rows = Vec::new();
    for g in 0..groups {
        let seed = group_seed(cfg, g);
        let scenario = scenario_for(cfg, seed)?;
        let model = CapacityModel::new(&scenario, w, &params)?;
        for &m in methods {
            let (res, _) = run_method(cfg, m, &scenario, &model, clock)?;
            rows.push(row("group", (g + 1) as f64, seed, res));
        }
    }
    for &m in methods {
        let of: Vec<&SweepRow> = rows.iter().filter(|r| r.method == m).collect();
        let k = of.len() as f64;
        let dim = of[0].alpha.len();
        let alpha = (0..dim)
            .map(|i| of.iter().map(|r| r.alpha[i]).sum::<f64>() / k)
            .collect();
        let avg = SweepRow {
            sweep_var: "group".to_string(),
            value: (groups + 1) as f64,
            method: m,
            capacity_bps: of.iter().map(|r| r.capacity_bps).sum::<f64>() / k,
            iterations: (of.iter().map(|r| r.iterations).sum::<usize>() as f64 / k).round()
                as usize,
            wall_time_s: of.iter().map(|r| r.wall_time_s).sum::<f64>() / k,
            seed: cfg.sweep.master_seed,
            alpha,
        };
        rows.push(avg);
    }
    Ok(rows)
}

/// Objective of each comparison row relative to the SQP row of the same
/// group, `(f - f_sqp) / f_sqp`.
pub fn relative_to_sqp(rows: &[SweepRow]) -> Vec<(f64, Method, f64)> {
    rows.iter()
        .filter_map(|r| {
            let base = rows
                .iter()
                .find(|b| b.method == Method::Sqp && b.value == r.value)?;
            Some((
                r.value,
                r.method,
                (r.capacity_bps - base.capacity_bps) / base.capacity_bps,
            ))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CertifyRow {
    pub instance: usize,
    pub seed: u64,
    pub certificate: Certificate,
    pub passed: bool,
}

/// Random small instances solved by SQP and both oracles.
pub fn run_certification<C: Clock + ?Sized>(
    cfg: &ExperimentConfig,
    devices: usize,
    rel_tol: f64,
    clock: &C,
) -> Result<Vec<CertifyRow>> {
    let mut out = Vec::with_capacity(cfg.sweep.certify_instances);
    for k in 0..cfg.sweep.certify_instances {
        let seed = derive_seed(cfg.sweep.master_seed, CERTIFY_SEED_BASE + k as u64);
        let inst = random_instance(devices, seed)?;
        let model = inst.model()?;
        let certificate = match certify_model(&model, &cfg.solver.sqp, cfg.solver.grid_step, clock)
        {
            Ok(c) => c,
            Err(railalloc_core::Error::MaxIterations(rep)) => {
                return Err(Error::NotCertified(format!(
                    "instance {k}: iteration cap {} reached",
                    rep.iterations
                )))
            }
            Err(e) => return Err(e.into()),
        };
        let passed = certificate.passes(rel_tol);
        out.push(CertifyRow {
            instance: k,
            seed,
            certificate,
            passed,
        });
    }
    Ok(out)
}

/// Capacity of `alpha` recomputed from scratch for a scenario seed.
pub fn recompute_capacity(
    cfg: &ExperimentConfig,
    seed: u64,
    w_mhz: f64,
    params: &RadioParams,
    alpha: &[f64],
) -> Result<f64> {
    let scenario = scenario_for(cfg, seed)?;
    let model = CapacityModel::new(&scenario, w_mhz * 1e6, params)?;
    Ok(model.capacity(alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use railalloc_core::NoClock;

    fn small() -> ExperimentConfig {
        "[layout]\nusers = 40\n[sweep]\nbandwidths_mhz = 1000, 1500\nbetas = 1e-9, 1e-3\nseeds = 2\ngroups = 2"
            .parse()
            .unwrap()
    }

    #[test]
    fn sweep_cardinalities() {
        let cfg = small();
        let rows = run_bandwidth_sweep(&cfg, &NoClock).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let rows = run_beta_sweep(&cfg, &NoClock).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let rows = run_solver_comparison(&cfg, &NoClock).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        assert_eq!(rows.iter().filter(|r| r.value == 3.0).count(), 2);
    }

    #[test]
    fn greedy_alpha_is_bandwidth_independent() {
        let cfg = small();
        let rows = run_bandwidth_sweep(&cfg, &NoClock).unwrap();
        for m in [Method::Pnou, Method::Pd] {
            for seed in cfg.seed_list() {
                let alphas: Vec<&Vec<f64>> = rows
                    .iter()
                    .filter(|r| r.method == m && r.seed == seed)
                    .map(|r| &r.alpha)
                    .collect();
                assert!(alphas.windows(2).all(|p| p[0] == p[1]));
            }
        }
    }

    #[test]
    fn capacities_are_recomputable() {
        let cfg = small();
        let params = cfg.radio_params().unwrap();
        for r in run_bandwidth_sweep(&cfg, &NoClock).unwrap() {
            let c = recompute_capacity(&cfg, r.seed, r.value, &params, &r.alpha).unwrap();
            assert!((c - r.capacity_bps).abs() <= 1e-9 * c);
        }
    }

    #[test]
    fn relative_objectives_against_sqp() {
        let cfg = small();
        let rows = run_solver_comparison(&cfg, &NoClock).unwrap();
        let rel = relative_to_sqp(&rows);
        assert_eq!(rel.len(), rows.len());
        for (_, m, r) in rel {
            if m == Method::Sqp {
                assert_eq!(r, 0.0);
            } else {
                assert!(r.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn certification_passes() {
        let mut cfg = small();
        cfg.sweep.certify_instances = 3;
        let rows = run_certification(&cfg, 3, 1e-6, &NoClock).unwrap();
        assert!(rows.iter().all(|r| r.passed));
    }
}
