//! Bandwidth allocators: two greedy rules, the SQP solver, a log-barrier
//! interior-point baseline, and two optimality oracles (dual bisection and an
//! exhaustive lattice search).

use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::linalg::{dot, norm_inf, Matrix};
use crate::problem::{Objective, Separable};
use crate::radio::CapacityModel;
use crate::sqp::{solve_sqp, SolverConfig, SolverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Sqp,
    Pnou,
    Pd,
    Ip,
    Dual,
    Grid,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sqp => "SQP",
            Method::Pnou => "PNOU",
            Method::Pd => "PD",
            Method::Ip => "IP",
            Method::Dual => "DUAL",
            Method::Grid => "GRID",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_uppercase().as_str() {
            "SQP" => Some(Method::Sqp),
            "PNOU" => Some(Method::Pnou),
            "PD" => Some(Method::Pd),
            "IP" => Some(Method::Ip),
            "DUAL" => Some(Method::Dual),
            "GRID" => Some(Method::Grid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocatorResult {
    /// Device-indexed shares.
    pub alpha: Vec<f64>,
    /// Capacity in bit/s, recomputed from `alpha`.
    pub objective: f64,
    pub method: Method,
    pub wall_time: f64,
    pub iterations: usize,
    /// Equality multiplier in bit/s per unit share, when the method has one.
    pub multiplier: Option<f64>,
}

impl AllocatorResult {
    fn from_alpha(
        model: &CapacityModel,
        alpha: Vec<f64>,
        method: Method,
        wall_time: f64,
        iterations: usize,
        multiplier: Option<f64>,
    ) -> Result<Self> {
        let objective = model.capacity(&alpha)?;
        Ok(AllocatorResult {
            alpha,
            objective,
            method,
            wall_time,
            iterations,
            multiplier,
        })
    }
}

/// Share proportional to the associated-user count.
pub fn pnou(scenario: &Scenario) -> Result<Vec<f64>> {
    let m = scenario.users.len();
    if m == 0 {
        return Err(Error::InvalidArgument("no users"));
    }
    Ok(scenario
        .user_counts()
        .iter()
        .map(|&c| c as f64 / m as f64)
        .collect())
}

/// Share proportional to the inverse mean serving distance; devices without
/// users get nothing.
pub fn pd(scenario: &Scenario) -> Result<Vec<f64>> {
    let means = scenario.mean_distances();
    let mut weights = Vec::with_capacity(means.len());
    for (s, d) in means.iter().enumerate() {
        weights.push(match d {
            Some(d) if *d <= 0.0 => return Err(Error::ZeroDistance { device: s }),
            Some(d) => 1.0 / d,
            None => 0.0,
        });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("no users"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Evaluates a fixed greedy allocation on `model`.
pub fn evaluate_fixed(
    model: &CapacityModel,
    alpha: Vec<f64>,
    method: Method,
) -> Result<AllocatorResult> {
    AllocatorResult::from_alpha(model, alpha, method, 0.0, 0, None)
}

fn expand_start(model: &CapacityModel, active: &[usize], config: &SolverConfig) -> SolverConfig {
    let mut cfg = config.clone();
    if let Some(start) = &config.start {
        if start.len() == model.device_count() {
            cfg.start = Some(active.iter().map(|&s| start[s]).collect());
        }
    }
    cfg
}

/// SQP over the devices that have users; empty devices get zero share.
pub fn sqp_allocate<C: Clock + ?Sized>(
    model: &CapacityModel,
    config: &SolverConfig,
    clock: &C,
) -> Result<(AllocatorResult, SolverReport)> {
    let t0 = clock.now();
    let reduced = model.reduced();
    if reduced.dim() == 0 {
        return Err(Error::InvalidArgument("no users"));
    }
    let cfg = expand_start(model, &reduced.active, config);
    let report = solve_sqp(&reduced, &cfg, clock)?;
    let alpha = reduced.expand(&report.alpha);
    let marginal = report.kkt.mu / report.scale;
    let res = AllocatorResult::from_alpha(
        model,
        alpha,
        Method::Sqp,
        clock.now() - t0,
        report.iterations,
        Some(marginal),
    )?;
    Ok((res, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Stop once the duality-gap bound `2 n tau` (bit/s) is at most this.
    pub tol: f64,
    /// Initial barrier weight in units of the scaled objective.
    pub tau0: f64,
    /// Geometric decrease per outer step.
    pub factor: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            tol: 1.0,
            tau0: 1.0,
            factor: 0.1,
            max_newton: 2000,
        }
    }
}

/// Log-barrier outcome in the reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    pub newton_steps: usize,
    pub final_tau: f64,
}

/// Maximises `f(x) + tau sum_i [ln x_i + ln(1 - x_i)]` on the simplex for a
/// decreasing sequence of `tau`, eliminating `x_0 = 1 - sum_{i>0} x_i`.
pub fn barrier_maximize<O: Separable + ?Sized>(
    objective: &O,
    opts: &BarrierOptions,
) -> Result<BarrierSolution> {
    let n = objective.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty problem"));
    }
    if n == 1 {
        return Ok(BarrierSolution {
            x: vec![1.0],
            newton_steps: 0,
            final_tau: 0.0,
        });
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut g = vec![0.0; n];
    objective.gradient(&x, &mut g)?;
    let scale = 1.0 / norm_inf(&g).max(1.0);
    let terms = 2 * n;
    let target = opts.tol * scale;

    let barrier = |x: &[f64], tau: f64| -> Option<f64> {
        let mut b = 0.0;
        for &xi in x {
            if !(xi > 0.0 && xi < 1.0) {
                return None;
            }
            b += libm::log(xi) + libm::log(1.0 - xi);
        }
        Some(tau * b)
    };
    let phi = |x: &[f64], tau: f64| -> Result<Option<f64>> {
        match barrier(x, tau) {
            Some(b) => Ok(Some(scale * objective.value(x)? + b)),
            None => Ok(None),
        }
    };

    let mut tau = opts.tau0;
    let mut steps = 0usize;
    loop {
        // centring by damped Newton in y = x[1..]
        loop {
            if steps >= opts.max_newton {
                return Err(Error::BarrierMaxIterations);
            }
            let mut d = vec![0.0; n];
            let mut gx = vec![0.0; n];
            for i in 0..n {
                let xi = x[i];
                gx[i] = scale * objective.marginal(i, xi)? + tau * (1.0 / xi - 1.0 / (1.0 - xi));
                d[i] = scale * objective.curvature(i, xi)?
                    - tau * (1.0 / (xi * xi) + 1.0 / ((1.0 - xi) * (1.0 - xi)));
            }
            let m = n - 1;
            let grad: Vec<f64> = (1..n).map(|j| gx[j] - gx[0]).collect();
            // negative Hessian: -diag(d_j) - d_0 11'
            let mut neg_h = Matrix::zeros(m, m);
            for a in 0..m {
                for b in 0..m {
                    neg_h[(a, b)] = -d[0];
                }
                neg_h[(a, a)] -= d[a + 1];
            }
            let dy = neg_h.solve(&grad).ok_or(Error::NotPositiveDefinite)?;
            let decrement = dot(&grad, &dy);
            steps += 1;
            if decrement / 2.0 <= 1e-13 {
                break;
            }
            let f0 = phi(&x, tau)?.expect("iterate is interior");
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-20 {
                let mut trial = x.clone();
                for j in 0..m {
                    trial[j + 1] += t * dy[j];
                }
                trial[0] = 1.0 - trial[1..].iter().sum::<f64>();
                if let Some(f1) = phi(&trial, tau)? {
                    if f1 >= f0 + 0.25 * t * decrement {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if terms as f64 * tau <= target {
            break;
        }
        tau *= opts.factor;
    }
    Ok(BarrierSolution {
        x,
        newton_steps: steps,
        final_tau: tau,
    })
}

/// Interior-point baseline over the devices that have users.
pub fn ip_barrier<C: Clock + ?Sized>(
    model: &CapacityModel,
    opts: &BarrierOptions,
    clock: &C,
) -> Result<AllocatorResult> {
    let t0 = clock.now();
    let reduced = model.reduced();
    let sol = barrier_maximize(&reduced, opts)?;
    let alpha = reduced.expand(&sol.x);
    AllocatorResult::from_alpha(
        model,
        alpha,
        Method::Ip,
        clock.now() - t0,
        sol.newton_steps,
        None,
    )
}

/// Dual-bisection outcome in the reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub x: Vec<f64>,
    /// Common marginal value at the optimum.
    pub mu: f64,
    pub bisections: usize,
}

/// Share of one coordinate at marginal value `mu`, in `[floor, 1]`.
fn share_at<O: Separable + ?Sized>(objective: &O, i: usize, mu: f64, floor: f64) -> Result<f64> {
    if objective.marginal(i, floor)? <= mu {
        return Ok(floor);
    }
    if objective.marginal(i, 1.0)? >= mu {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (floor, 1.0);
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        let m = objective.marginal(i, a)? - mu;
        if m.abs() <= 1e-15 * mu.abs() {
            return Ok(a);
        }
        if m > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        // Newton, falling back to bisection outside the bracket
        let c = objective.curvature(i, a)?;
        let newton = a - m / c;
        a = if c < 0.0 && newton > lo && newton < hi {
            newton
        } else if hi / lo > 16.0 {
            libm::sqrt(lo * hi)
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(a)
}

/// Bisection on the simplex multiplier of a separable concave objective.
pub fn dual_bisection<O: Separable + ?Sized>(
    objective: &O,
    floor: f64,
    tol: f64,
) -> Result<DualSolution> {
    let n = objective.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty problem"));
    }
    if n == 1 {
        return Ok(DualSolution {
            x: vec![1.0],
            mu: objective.marginal(0, 1.0)?,
            bisections: 0,
        });
    }
    let total = |mu: f64| -> Result<(Vec<f64>, f64)> {
        let x = (0..n)
            .map(|i| share_at(objective, i, mu, floor))
            .collect::<Result<Vec<f64>>>()?;
        let s = x.iter().sum();
        Ok((x, s))
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        lo = lo.min(objective.marginal(i, 1.0)?);
        hi = hi.max(objective.marginal(i, floor)?);
    }
    let (_, s_lo) = total(lo)?;
    let (_, s_hi) = total(hi)?;
    if !(s_lo >= 1.0 && s_hi <= 1.0) || !(lo > 0.0) {
        return Err(Error::BracketFailure);
    }
    let mut best = total(0.5 * (lo + hi))?;
    let mut mu = 0.5 * (lo + hi);
    let mut bisections = 0;
    while bisections < 400 {
        mu = if hi / lo > 4.0 {
            libm::sqrt(lo * hi)
        } else {
            0.5 * (lo + hi)
        };
        best = total(mu)?;
        bisections += 1;
        if (best.1 - 1.0).abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if best.1 > 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let mut x = best.0;
    // put the residual on the largest coordinate so the simplex holds exactly
    let resid = 1.0 - x.iter().sum::<f64>();
    let k = (0..n).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    x[k] = (x[k] + resid).clamp(floor, 1.0);
    Ok(DualSolution { x, mu, bisections })
}

/// Dual-bisection oracle over the devices that have users.
pub fn dual_oracle<C: Clock + ?Sized>(
    model: &CapacityModel,
    floor: f64,
    tol: f64,
    clock: &C,
) -> Result<AllocatorResult> {
    let t0 = clock.now();
    let reduced = model.reduced();
    let sol = dual_bisection(&reduced, floor, tol)?;
    let alpha = reduced.expand(&sol.x);
    AllocatorResult::from_alpha(
        model,
        alpha,
        Method::Dual,
        clock.now() - t0,
        sol.bisections,
        Some(sol.mu),
    )
}

/// Exhaustive search over the simplex lattice with spacing `step` for at most
/// four devices. Ties keep the lexicographically smallest lattice point.
pub fn grid_oracle<C: Clock + ?Sized>(
    model: &CapacityModel,
    step: f64,
    clock: &C,
) -> Result<AllocatorResult> {
    let t0 = clock.now();
    let d = model.device_count();
    if d > 4 {
        return Err(Error::TooLargeInstance { devices: d });
    }
    if !(1e-3..=1.0).contains(&step) {
        return Err(Error::InvalidArgument("grid step must be in [1e-3, 1]"));
    }
    let n = libm::round(1.0 / step) as usize;
    if (n as f64 * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("grid step must divide 1"));
    }
    let table: Vec<Vec<f64>> = (0..d)
        .map(|s| {
            (0..=n)
                .map(|k| model.device_term(s, k as f64 / n as f64))
                .collect()
        })
        .collect();
    let mut best_val = f64::NEG_INFINITY;
    let mut best = vec![0usize; d];
    let mut cur = vec![0usize; d];
    let mut count = 0usize;
    search(
        &table,
        n,
        0,
        0.0,
        &mut cur,
        &mut best,
        &mut best_val,
        &mut count,
    );
    let alpha: Vec<f64> = best.iter().map(|&k| k as f64 / n as f64).collect();
    AllocatorResult::from_alpha(model, alpha, Method::Grid, clock.now() - t0, count, None)
}

#[allow(clippy::too_many_arguments)]
fn search(
    table: &[Vec<f64>],
    remaining: usize,
    depth: usize,
    acc: f64,
    cur: &mut [usize],
    best: &mut [usize],
    best_val: &mut f64,
    count: &mut usize,
) {
    let d = table.len();
    if depth == d - 1 {
        cur[depth] = remaining;
        let v = acc + table[depth][remaining];
        *count += 1;
        if v > *best_val {
            *best_val = v;
            best.copy_from_slice(cur);
        }
        return;
    }
    for k in 0..=remaining {
        cur[depth] = k;
        search(
            table,
            remaining - k,
            depth + 1,
            acc + table[depth][k],
            cur,
            best,
            best_val,
            count,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NoClock;
    use crate::geometry::Point2D;
    use crate::radio::RadioParams;

    fn symmetric_pair() -> CapacityModel {
        let sc = Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 60.0),
            mr_positions: vec![Point2D::new(50.0, 40.0)],
            users: vec![Point2D::new(50.0, 70.0), Point2D::new(50.0, 30.0)],
            association: vec![0, 1],
            seed: 0,
        };
        CapacityModel::new(&sc, 1e9, &RadioParams::table_one().with_beta(0.0)).unwrap()
    }

    fn toy_scenario(association: Vec<usize>, users: Vec<Point2D>) -> Scenario {
        Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 60.0),
            mr_positions: vec![Point2D::new(20.0, 40.0), Point2D::new(80.0, 40.0)],
            users,
            association,
            seed: 0,
        }
    }

    #[test]
    fn pnou_rules() {
        let u = Point2D::new(1.0, 1.0);
        let sc = Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 60.0),
            mr_positions: vec![Point2D::new(20.0, 40.0)],
            users: vec![u; 4],
            association: vec![0, 0, 1, 0],
            seed: 0,
        };
        assert_eq!(pnou(&sc).unwrap(), vec![0.75, 0.25]);
        let sc = toy_scenario(vec![0, 0], vec![u, u]);
        assert_eq!(pnou(&sc).unwrap(), vec![1.0, 0.0, 0.0]);
        let sc = toy_scenario(vec![0, 1, 2], vec![u, u, u]);
        for a in pnou(&sc).unwrap() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pd_rules() {
        // mean distances 100 and 50
        let sc = Scenario {
            area_side: 500.0,
            bs_position: Point2D::new(0.0, 0.0),
            mr_positions: vec![Point2D::new(400.0, 0.0)],
            users: vec![Point2D::new(0.0, 100.0), Point2D::new(400.0, 50.0)],
            association: vec![0, 1],
            seed: 0,
        };
        let a = pd(&sc).unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-15 && (a[1] - 2.0 / 3.0).abs() < 1e-15);
        let sc = toy_scenario(
            vec![0, 1],
            vec![Point2D::new(50.0, 70.0), Point2D::new(20.0, 50.0)],
        );
        let a = pd(&sc).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15 && (a[1] - 0.5).abs() < 1e-15);
        assert_eq!(a[2], 0.0);
        let sc = toy_scenario(vec![0], vec![Point2D::new(50.0, 60.0)]);
        assert!(matches!(pd(&sc), Err(Error::ZeroDistance { device: 0 })));
    }

    #[test]
    fn symmetric_pair_all_methods() {
        let m = symmetric_pair();
        let (sqp, _) = sqp_allocate(&m, &SolverConfig::default(), &NoClock).unwrap();
        let ip = ip_barrier(&m, &BarrierOptions::default(), &NoClock).unwrap();
        let dual = dual_oracle(&m, 1e-12, 1e-13, &NoClock).unwrap();
        let grid = grid_oracle(&m, 1e-3, &NoClock).unwrap();
        for r in [&sqp, &ip, &dual] {
            assert!((r.alpha[0] - 0.5).abs() <= 1e-6, "{:?}", r);
        }
        assert_eq!(grid.alpha, vec![0.5, 0.5]);
    }

    #[test]
    fn single_device_takes_everything() {
        let sc = toy_scenario(
            vec![0, 0],
            vec![Point2D::new(1.0, 1.0), Point2D::new(2.0, 2.0)],
        );
        let m = CapacityModel::new(&sc, 1e9, &RadioParams::table_one()).unwrap();
        let dual = dual_oracle(&m, 1e-12, 1e-13, &NoClock).unwrap();
        assert_eq!(dual.alpha, vec![1.0, 0.0, 0.0]);
        let (sqp, _) = sqp_allocate(&m, &SolverConfig::default(), &NoClock).unwrap();
        assert_eq!(sqp.alpha, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn grid_vertices_and_limits() {
        let m = symmetric_pair();
        let g = grid_oracle(&m, 1.0, &NoClock).unwrap();
        assert_eq!(g.iterations, 2);
        assert!(g.alpha == vec![1.0, 0.0] || g.alpha == vec![0.0, 1.0]);
        assert!(grid_oracle(&m, 1e-4, &NoClock).is_err());
        let sc = Scenario::generate(500.0, 4, 20, 50.0, 50.0, 1).unwrap();
        let big = CapacityModel::new(&sc, 1e9, &RadioParams::table_one()).unwrap();
        assert!(matches!(
            grid_oracle(&big, 0.1, &NoClock),
            Err(Error::TooLargeInstance { devices: 5 })
        ));
    }

    #[test]
    fn barrier_dominated_limit_is_uniform() {
        let sc = Scenario::generate(500.0, 3, 40, 50.0, 50.0, 12).unwrap();
        let m = CapacityModel::new(&sc, 1e9, &RadioParams::table_one()).unwrap();
        let r = m.reduced();
        let opts = BarrierOptions {
            tol: f64::INFINITY,
            tau0: 1e9,
            ..BarrierOptions::default()
        };
        let sol = barrier_maximize(&r, &opts).unwrap();
        let u = 1.0 / r.dim() as f64;
        for x in sol.x {
            assert!((x - u).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn dual_kkt_and_interior_solution() {
        // close relay users and tiny beta give an interior optimum
        let users = vec![
            Point2D::new(50.0, 90.0),
            Point2D::new(21.0, 41.0),
            Point2D::new(79.0, 38.0),
        ];
        let sc = toy_scenario(vec![0, 1, 2], users);
        let p = RadioParams::table_one().with_beta(1e-14);
        let m = CapacityModel::new(&sc, 1e9, &p).unwrap();
        let dual = dual_oracle(&m, 1e-12, 1e-13, &NoClock).unwrap();
        assert!(dual.alpha.iter().all(|&a| a > 1e-3), "{:?}", dual.alpha);
        let mu = dual.multiplier.unwrap();
        for (s, &a) in dual.alpha.iter().enumerate() {
            let g = m.device_marginal(s, a).unwrap();
            assert!((g - mu).abs() <= 1e-8 * mu, "{g} {mu}");
        }
        let (sqp, rep) = sqp_allocate(&m, &SolverConfig::default(), &NoClock).unwrap();
        assert!(rep.certified, "{:?}", rep.kkt.residuals);
        assert!((sqp.objective - dual.objective).abs() <= 1e-9 * dual.objective);
        let ip = ip_barrier(&m, &BarrierOptions::default(), &NoClock).unwrap();
        assert!((ip.objective - dual.objective).abs() <= 10.0);
    }
}
