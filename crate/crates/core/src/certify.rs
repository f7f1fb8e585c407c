//! Cross-checks of the SQP solution against the dual and lattice oracles on
//! small random instances.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocators::{dual_oracle, grid_oracle, sqp_allocate, AllocatorResult};
use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::radio::{CapacityModel, RadioParams};
use crate::sqp::{SolverConfig, SolverReport};

/// A random small instance: geometry, radio constants and total bandwidth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: Scenario,
    pub params: RadioParams,
    pub w_total: f64,
}

impl Instance {
    pub fn model(&self) -> Result<CapacityModel> {
        CapacityModel::new(&self.scenario, self.w_total, &self.params)
    }
}

/// Draws an instance with `devices` devices (one base station plus relays).
/// Area side, user count, bandwidth and `beta` (log-uniform over
/// `[1e-14, 1e-6]`) are all randomised from `seed`.
pub fn random_instance(devices: usize, seed: u64) -> Result<Instance> {
    if devices < 2 {
        return Err(Error::InvalidArgument("need at least two devices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = 100.0 + 900.0 * rng.random::<f64>();
    let users = 3 + (rng.random::<f64>() * 58.0) as usize;
    let offset = 0.1 * area;
    let user_seed = rng.random::<u64>();
    let scenario = Scenario::generate(area, devices - 1, users, offset, offset, user_seed)?;
    let log_beta = -14.0 + 8.0 * rng.random::<f64>();
    let params = RadioParams::table_one().with_beta(libm::pow(10.0, log_beta));
    let w_total = 0.5e9 + 1.5e9 * rng.random::<f64>();
    Ok(Instance {
        scenario,
        params,
        w_total,
    })
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub sqp: AllocatorResult,
    pub report: SolverReport,
    pub dual: AllocatorResult,
    pub grid: AllocatorResult,
    /// `|f_sqp - f_dual| / f_dual`.
    pub sqp_dual_rel: f64,
    /// `f_dual - f_grid`, bit/s.
    pub dual_grid_gap: f64,
    /// Empirical Lipschitz constant (l1 gradient norm) times the grid step.
    pub lipschitz_bound: f64,
}

impl Certificate {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.report.certified
            && self.sqp_dual_rel <= rel_tol
            && self.dual_grid_gap <= self.lipschitz_bound
            && self.dual_grid_gap >= -1e-9 * self.dual.objective.abs()
    }
}

/// Largest l1 gradient norm over the given points, with coordinates lifted to
/// at least `lift` so the interference-free term stays finite.
pub fn empirical_lipschitz(model: &CapacityModel, points: &[&[f64]], lift: f64) -> Result<f64> {
    let mut l = 0.0f64;
    for p in points {
        let z: Vec<f64> = p.iter().map(|v| v.max(lift)).collect();
        let g = model.gradient(&z)?;
        l = l.max(g.iter().map(|v| v.abs()).sum());
    }
    Ok(l)
}

/// Solves one instance three ways and records the agreement.
pub fn certify_model<C: Clock + ?Sized>(
    model: &CapacityModel,
    config: &SolverConfig,
    grid_step: f64,
    clock: &C,
) -> Result<Certificate> {
    let (sqp, report) = sqp_allocate(model, config, clock)?;
    let dual = dual_oracle(model, config.alpha_floor, 1e-13, clock)?;
    let grid = grid_oracle(model, grid_step, clock)?;
    let mid: Vec<f64> = dual
        .alpha
        .iter()
        .zip(&grid.alpha)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let l = empirical_lipschitz(model, &[&dual.alpha, &grid.alpha, &mid], grid_step)?;
    Ok(Certificate {
        sqp_dual_rel: (sqp.objective - dual.objective).abs() / dual.objective.abs().max(1.0),
        dual_grid_gap: dual.objective - grid.objective,
        lipschitz_bound: l * grid_step,
        sqp,
        report,
        dual,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NoClock;

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(3, 5).unwrap();
        let b = random_instance(3, 5).unwrap();
        assert_eq!(a.scenario, b.scenario);
        assert_eq!(a.params, b.params);
        assert!(a.params.beta >= 1e-14 && a.params.beta <= 1e-6);
        assert_eq!(a.scenario.device_count(), 3);
        assert!(random_instance(1, 5).is_err());
    }

    #[test]
    fn certificate_on_a_few_instances() {
        for seed in 0..5 {
            let inst = random_instance(3, seed).unwrap();
            let m = inst.model().unwrap();
            let c = certify_model(&m, &SolverConfig::default(), 1e-3, &NoClock).unwrap();
            assert!(c.passes(1e-6), "{seed} {c:?}");
        }
    }
}
