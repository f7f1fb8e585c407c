//! Sequential quadratic programming over the unit simplex with box bounds.
//!
//! The maximisation objective `f` is turned into `F = -scale * f` and each
//! iteration solves the quadratic model
//!
//! ```text
//!     min  1/2 S'H S + grad F(x)'S
//!     s.t. S_i <= 1 - x_i,  -S_i <= x_i - floor,  sum S = 1 - sum x
//! ```
//!
//! followed by a bisection search on an L1 merit function along `S` and a
//! damped BFGS correction of `H` from the change in the Lagrangian gradient.
//! Bounds are written as two inequalities per coordinate, `g_{2i} = x_i - 1`
//! and `g_{2i+1} = -x_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, Matrix};
use crate::problem::Objective;
use crate::qp::{solve_qp_with, QpOptions, QpSubproblem};

/// Minimisation view of a simplex-constrained maximisation problem.
#[derive(Debug, Clone)]
pub struct NlpProblem<O> {
    pub objective: O,
    /// Positive factor applied to `-f`; chosen so gradients are O(1).
    pub scale: f64,
}

impl<O: Objective> NlpProblem<O> {
    pub fn new(objective: O) -> Self {
        NlpProblem {
            objective,
            scale: 1.0,
        }
    }

    pub fn with_scale(objective: O, scale: f64) -> Self {
        NlpProblem { objective, scale }
    }

    /// Scale `1 / max(1, |grad f(x)|_inf)`, the one the solver uses at its
    /// start point.
    pub fn scaled_at(objective: O, x: &[f64]) -> Result<Self> {
        let mut g = vec![0.0; x.len()];
        objective.gradient(x, &mut g)?;
        let scale = 1.0 / norm_inf(&g).max(1.0);
        Ok(NlpProblem { objective, scale })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn inequality_count(&self) -> usize {
        2 * self.dim()
    }

    /// Minimised objective `-scale f(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.scale * self.objective.value(x)?)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.objective.gradient(x, &mut g)?;
        g.iter_mut().for_each(|v| *v *= -self.scale);
        Ok(g)
    }

    /// `g_j(x)` for all `2n` bound constraints.
    pub fn inequalities(&self, x: &[f64]) -> Vec<f64> {
        x.iter().flat_map(|&xi| [xi - 1.0, -xi]).collect()
    }

    pub fn equality(&self, x: &[f64]) -> f64 {
        x.iter().sum::<f64>() - 1.0
    }

    /// Rows are the gradients of `g_j`.
    pub fn inequality_jacobian(&self) -> Matrix {
        let n = self.dim();
        let mut a = Matrix::zeros(2 * n, n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
        }
        a
    }

    /// `grad F + mu grad h + sum_j gamma_j grad g_j`.
    pub fn lagrangian_gradient(&self, x: &[f64], mu: f64, gamma: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.gradient(x)?;
        for (i, gi) in g.iter_mut().enumerate() {
            *gi += mu + gamma[2 * i] - gamma[2 * i + 1];
        }
        Ok(g)
    }
}

/// Residuals of the first-order optimality system, in the scaled units of the
/// minimised objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
            .max(self.dual_feasibility)
    }

    pub fn certified(&self, tol: f64) -> bool {
        let m = self.max();
        m.is_finite() && m <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub alpha: Vec<f64>,
    pub mu: f64,
    pub gamma: Vec<f64>,
    pub residuals: KktResiduals,
}

impl KktPoint {
    pub fn evaluate<O: Objective>(
        problem: &NlpProblem<O>,
        alpha: Vec<f64>,
        mu: f64,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let residuals = kkt_residuals(problem, &alpha, mu, &gamma)?;
        Ok(KktPoint {
            alpha,
            mu,
            gamma,
            residuals,
        })
    }

    /// Reconstructs the bound multipliers from an equality multiplier given
    /// in the units of the *maximised* objective (a common marginal value).
    pub fn from_marginal_value<O: Objective>(
        problem: &NlpProblem<O>,
        alpha: Vec<f64>,
        marginal: f64,
    ) -> Result<Self> {
        let g = problem.gradient(&alpha)?;
        let mu = problem.scale * marginal;
        let mut gamma = vec![0.0; 2 * alpha.len()];
        for (i, gi) in g.iter().enumerate() {
            // stationarity: gi + mu + gamma_up - gamma_lo = 0
            let r = gi + mu;
            if r > 0.0 {
                gamma[2 * i + 1] = r;
            } else {
                gamma[2 * i] = -r;
            }
        }
        Self::evaluate(problem, alpha, mu, gamma)
    }
}

/// Evaluates the stationarity, complementarity, feasibility and dual-sign
/// conditions at `(alpha, mu, gamma)`.
pub fn kkt_residuals<O: Objective>(
    problem: &NlpProblem<O>,
    alpha: &[f64],
    mu: f64,
    gamma: &[f64],
) -> Result<KktResiduals> {
    if alpha.len() != problem.dim() || gamma.len() != problem.inequality_count() {
        return Err(Error::DimensionMismatch);
    }
    let grad = problem.lagrangian_gradient(alpha, mu, gamma)?;
    let g = problem.inequalities(alpha);
    Ok(KktResiduals {
        stationarity: norm_inf(&grad),
        primal_eq: problem.equality(alpha).abs(),
        primal_ineq: g.iter().fold(0.0f64, |m, &v| m.max(v)),
        complementarity: g
            .iter()
            .zip(gamma)
            .fold(0.0f64, |m, (gj, lj)| m.max((gj * lj).abs())),
        dual_feasibility: gamma.iter().fold(0.0f64, |m, &l| m.max(-l)),
    })
}

/// Result of [`bfgs_update`].
#[derive(Debug, Clone)]
pub struct BfgsUpdate {
    pub hessian: Matrix,
    /// True when Powell damping replaced `q`.
    pub damped: bool,
}

/// Rank-two BFGS correction `H + qq'/(q'S) - HSS'H/(S'HS)` with Powell
/// damping whenever `q'S < 0.2 S'HS`.
pub fn bfgs_update(h: &Matrix, s: &[f64], q: &[f64]) -> Result<BfgsUpdate> {
    let n = s.len();
    if h.rows() != n || h.cols() != n || q.len() != n {
        return Err(Error::DimensionMismatch);
    }
    if norm2(s) <= 1e-14 {
        return Err(Error::DegenerateStep);
    }
    let hs = h.mul_vec(s);
    let shs = dot(s, &hs);
    if !(shs > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let qs = dot(q, s);
    let (q, damped) = if qs < 0.2 * shs {
        let theta = 0.8 * shs / (shs - qs);
        let q: Vec<f64> = q
            .iter()
            .zip(&hs)
            .map(|(qi, hsi)| theta * qi + (1.0 - theta) * hsi)
            .collect();
        (q, true)
    } else {
        (q.to_vec(), false)
    };
    let qs = dot(&q, s);
    let mut out = h.clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] += q[i] * q[j] / qs - hs[i] * hs[j] / shs;
        }
    }
    // keep exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(BfgsUpdate {
        hessian: out,
        damped,
    })
}

/// L1 exact-penalty merit `F(x) + rho |h(x)| + rho sum max(0, g_j(x))`.
pub fn merit_value<O: Objective>(problem: &NlpProblem<O>, rho: f64, x: &[f64]) -> Result<f64> {
    let viol: f64 = problem
        .inequalities(x)
        .iter()
        .map(|g| g.max(0.0))
        .sum::<f64>()
        + problem.equality(x).abs();
    Ok(problem.value(x)? + rho * viol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub t: f64,
    pub merit: f64,
    pub evals: usize,
}

fn clamp_point(x: &[f64], dir: &[f64], t: f64, floor: f64) -> Vec<f64> {
    x.iter()
        .zip(dir)
        .map(|(xi, di)| (xi + t * di).clamp(floor, 1.0))
        .collect()
}

/// Bisection on the slope sign of the merit function along `x + t dir`,
/// `t in (0, 1]`, to resolution `eps2`. Points are clamped to `[floor, 1]`.
/// The slope uses the analytic objective gradient and the one-sided
/// derivative of the penalty.
pub fn merit_line_search<O: Objective>(
    problem: &NlpProblem<O>,
    rho: f64,
    floor: f64,
    x: &[f64],
    dir: &[f64],
    eps2: f64,
) -> Result<LineSearch> {
    if norm_inf(dir) == 0.0 {
        return Err(Error::NoDecrease);
    }
    let evals = core::cell::Cell::new(0usize);
    let sum_dir: f64 = dir.iter().sum();
    let slope = |t: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        let xt = clamp_point(x, dir, t, floor);
        let g = problem.gradient(&xt)?;
        let mut s = 0.0;
        for i in 0..xt.len() {
            let d = dir[i];
            s += g[i] * d;
            let up = xt[i] - 1.0;
            if up > 0.0 || (up == 0.0 && d > 0.0) {
                s += rho * d;
            }
            let lo = -xt[i];
            if lo > 0.0 || (lo == 0.0 && d < 0.0) {
                s -= rho * d;
            }
        }
        let h = problem.equality(&xt);
        s += rho
            * if h > 0.0 {
                sum_dir
            } else if h < 0.0 {
                -sum_dir
            } else {
                sum_dir.abs()
            };
        Ok(s)
    };
    let t = if slope(1.0)? <= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > eps2 {
            let mid = 0.5 * (lo + hi);
            if slope(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let phi0 = merit_value(problem, rho, x)?;
    let merit = merit_value(problem, rho, &clamp_point(x, dir, t, floor))?;
    evals.set(evals.get() + 2);
    if !(merit <= phi0) {
        return Err(Error::NoDecrease);
    }
    Ok(LineSearch {
        t,
        merit,
        evals: evals.get(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Convergence accuracy on step norm and objective change.
    pub sigma: f64,
    /// KKT certification threshold.
    pub sigma_kkt: f64,
    /// QP subproblem tolerance.
    pub eps1: f64,
    /// Line-search resolution.
    pub eps2: f64,
    pub max_iters: usize,
    pub alpha_floor: f64,
    /// Initial point; uniform when `None`.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sigma: 1e-9,
            sigma_kkt: 1e-6,
            eps1: 1e-9,
            eps2: 1e-6,
            max_iters: 100,
            alpha_floor: 1e-12,
            start: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.sigma) && pos(self.sigma_kkt) && pos(self.eps1) && pos(self.eps2)) {
            return Err(Error::InvalidArgument("solver tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1"));
        }
        if !(self.alpha_floor >= 0.0 && self.alpha_floor < 1e-3) {
            return Err(Error::InvalidArgument("alpha_floor must be in [0, 1e-3)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Maximised objective at the iterate.
    pub objective: f64,
    pub step_norm: f64,
    pub kkt_residual: f64,
    pub linesearch_evals: usize,
    pub merit: f64,
    pub elapsed_s: f64,
}

/// Mutable iteration state of one solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub hessian: Matrix,
    pub step: Vec<f64>,
    pub q: Vec<f64>,
    pub iteration: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub alpha: Vec<f64>,
    /// Maximised objective at `alpha`.
    pub objective: f64,
    pub kkt: KktPoint,
    pub certified: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub wall_time: f64,
    pub scale: f64,
    pub hessian: Matrix,
}

/// Runs SQP on `objective` (maximised over the simplex). The objective is
/// rescaled internally by `1 / max(1, |grad f(x0)|_inf)`.
pub fn solve_sqp<O: Objective, C: Clock + ?Sized>(
    objective: O,
    config: &SolverConfig,
    clock: &C,
) -> Result<SolverReport> {
    config.validate()?;
    let t_start = clock.now();
    let n = objective.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty problem"));
    }
    let floor = config.alpha_floor;
    let mut x = match &config.start {
        Some(s) if s.len() != n => return Err(Error::DimensionMismatch),
        Some(s) => project_to_simplex(s, floor),
        None => vec![1.0 / n as f64; n],
    };

    let problem = NlpProblem::scaled_at(objective, &x)?;
    let scale = problem.scale;

    let a = problem.inequality_jacobian();
    let a_eq = Matrix::from_rows(&[&vec![1.0; n]]);
    let qp_opts = QpOptions {
        tol: config.eps1,
        max_iter: 50 * (n + 1),
    };

    let grad = problem.gradient(&x)?;
    let mut state = SolverState {
        hessian: Matrix::identity(n).scaled(norm_inf(&grad).max(1.0)),
        x: x.clone(),
        step: vec![0.0; n],
        q: vec![0.0; n],
        iteration: 0,
        trace: Vec::new(),
    };
    let mut grad = grad;
    let mut fval = problem.value(&x)?;
    let mut rho = 1.0f64;
    let mut warm: Vec<usize> = Vec::new();
    let mut last_step = f64::INFINITY;
    let mut last_df = f64::INFINITY;

    loop {
        // quadratic model at x
        let b: Vec<f64> = x.iter().flat_map(|&xi| [1.0 - xi, xi - floor]).collect();
        let qp = QpSubproblem {
            h: state.hessian.clone(),
            c: grad.clone(),
            a: a.clone(),
            b,
            a_eq: a_eq.clone(),
            b_eq: vec![-problem.equality(&x)],
        };
        let sol = match solve_qp_with(&qp, &vec![0.0; n], &warm, &qp_opts) {
            Ok(sol) => sol,
            Err(Error::QpMaxIterations(best)) => *best,
            Err(e) => return Err(e),
        };
        warm = sol.active_set.clone();
        let mu = sol.eq_multipliers[0];
        let gamma = sol.ineq_multipliers.clone();
        rho = rho.max(2.0 * gamma.iter().fold(mu.abs(), |m, g| m.max(g.abs())));

        let kkt = KktPoint::evaluate(&problem, x.clone(), mu, gamma.clone())?;
        let certified = kkt.residuals.certified(config.sigma_kkt);
        let s_norm = norm2(&sol.s_star);
        let settled = s_norm <= config.sigma
            || (last_step <= config.sigma && last_df <= config.sigma * fval.abs().max(1.0));
        let finish = |state: SolverState, kkt: KktPoint, certified: bool| SolverReport {
            alpha: state.x.clone(),
            objective: -fval / scale,
            kkt,
            certified,
            iterations: state.iteration,
            trace: state.trace,
            wall_time: clock.now() - t_start,
            scale,
            hessian: state.hessian,
        };
        if certified && settled {
            return Ok(finish(state, kkt, true));
        }
        if state.iteration >= config.max_iters {
            return Err(Error::MaxIterations(alloc::boxed::Box::new(finish(
                state, kkt, false,
            ))));
        }

        let ls = match merit_line_search(&problem, rho, floor, &x, &sol.s_star, config.eps2) {
            Ok(ls) => ls,
            // no merit progress possible along the model step
            Err(Error::NoDecrease) => return Ok(finish(state, kkt, certified)),
            Err(e) => return Err(e),
        };
        let x_new = clamp_point(&x, &sol.s_star, ls.t, floor);
        let grad_new = problem.gradient(&x_new)?;
        let f_new = problem.value(&x_new)?;
        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let q: Vec<f64> = {
            let l_new = problem.lagrangian_gradient(&x_new, mu, &gamma)?;
            let l_old = problem.lagrangian_gradient(&x, mu, &gamma)?;
            l_new.iter().zip(&l_old).map(|(a, b)| a - b).collect()
        };
        match bfgs_update(&state.hessian, &step, &q) {
            Ok(upd) => state.hessian = upd.hessian,
            Err(Error::DegenerateStep) => {}
            Err(e) => return Err(e),
        }
        last_step = norm2(&step);
        last_df = (f_new - fval).abs();
        state.iteration += 1;
        state.trace.push(TraceRow {
            iteration: state.iteration,
            objective: -f_new / scale,
            step_norm: last_step,
            kkt_residual: kkt.residuals.max(),
            linesearch_evals: ls.evals,
            merit: ls.merit,
            elapsed_s: clock.now() - t_start,
        });
        x = x_new;
        grad = grad_new;
        fval = f_new;
        state.x = x.clone();
        state.step = step;
        state.q = q;
    }
}

/// Clamp to `[floor, 1]` and rescale onto the simplex.
fn project_to_simplex(x: &[f64], floor: f64) -> Vec<f64> {
    let clamped: Vec<f64> = x.iter().map(|v| v.clamp(floor, 1.0)).collect();
    let sum: f64 = clamped.iter().sum();
    clamped.iter().map(|v| (v / sum).max(floor)).collect()
}
