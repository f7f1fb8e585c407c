//! Dense strictly convex QP by a primal active-set method.
//!
//! Solves `min 1/2 s'Hs + c's  s.t.  A s <= b,  A_eq s = b_eq`. Equalities are
//! always in the working set; inequalities enter through the ratio test and
//! leave on a negative multiplier. An infeasible start is repaired by an
//! elastic phase-1 solve.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSubproblem {
    pub h: Matrix,
    pub c: Vec<f64>,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub s_star: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Inequalities in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// True when `H` needed diagonal regularisation to factor.
    pub regularized: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// Stationarity / step tolerance (eps1).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

impl QpSubproblem {
    /// Problem with no constraints.
    pub fn unconstrained(h: Matrix, c: Vec<f64>) -> Self {
        let n = c.len();
        QpSubproblem {
            h,
            c,
            a: Matrix::zeros(0, n),
            b: Vec::new(),
            a_eq: Matrix::zeros(0, n),
            b_eq: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, s: &[f64]) -> f64 {
        0.5 * dot(s, &self.h.mul_vec(s)) + dot(&self.c, s)
    }

    /// Largest constraint violation at `s`.
    pub fn violation(&self, s: &[f64]) -> f64 {
        let ineq = self
            .a
            .mul_vec(s)
            .iter()
            .zip(&self.b)
            .fold(0.0f64, |m, (as_, b)| m.max(as_ - b));
        let eq = self
            .a_eq
            .mul_vec(s)
            .iter()
            .zip(&self.b_eq)
            .fold(0.0f64, |m, (as_, b)| m.max((as_ - b).abs()));
        ineq.max(eq)
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.dim();
        let ok = self.h.rows() == n
            && self.h.cols() == n
            && self.a.cols() == n
            && self.a.rows() == self.b.len()
            && self.a_eq.cols() == n
            && self.a_eq.rows() == self.b_eq.len();
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch)
        }
    }

    fn feas_tol(&self) -> f64 {
        1e-9 * (1.0 + norm_inf(&self.b).max(norm_inf(&self.b_eq)))
    }
}

/// Cold solve from `start` with default options.
pub fn solve_qp(qp: &QpSubproblem, start: &[f64]) -> Result<QpSolution> {
    solve_qp_with(qp, start, &[], &QpOptions::default())
}

/// Solve from `start`, seeding the working set with those indices of `warm`
/// that are active at the start point.
pub fn solve_qp_with(
    qp: &QpSubproblem,
    start: &[f64],
    warm: &[usize],
    opts: &QpOptions,
) -> Result<QpSolution> {
    qp.check_dims()?;
    if start.len() != qp.dim() {
        return Err(Error::DimensionMismatch);
    }
    let scale = 1.0f64.max(qp.h.max_abs());
    if qp.h.max_asymmetry() > 1e-12 * scale {
        return Err(Error::InvalidArgument("H must be symmetric"));
    }
    let mut h = qp.h.clone();
    let mut regularized = false;
    let mut shift = 1e-10;
    while h.cholesky().is_err() {
        if shift > 1e-2 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        h = qp.h.clone();
        h.add_diagonal(shift);
        regularized = true;
        shift *= 10.0;
    }

    let feas_tol = qp.feas_tol();
    let x0 = if qp.violation(start) > feas_tol {
        phase_one(qp, start, opts)?
    } else {
        start.to_vec()
    };
    let mut sol = ActiveSet::new(qp, &h, x0, opts).run(warm)?;
    sol.regularized = regularized;
    Ok(sol)
}

/// Elastic phase 1 over `(s, t)`:
/// `min 1/2 d|s - start|^2 + 1/2 d t^2 + t` with every constraint relaxed by `t`.
fn phase_one(qp: &QpSubproblem, start: &[f64], opts: &QpOptions) -> Result<Vec<f64>> {
    let n = qp.dim();
    let p = qp.a.rows();
    let m = qp.a_eq.rows();
    let delta = 1e-8;
    let mut h = Matrix::identity(n + 1).scaled(delta);
    h[(n, n)] = delta;
    let mut c: Vec<f64> = start.iter().map(|v| -delta * v).collect();
    c.push(1.0);
    let rows = p + 2 * m + 1;
    let mut a = Matrix::zeros(rows, n + 1);
    let mut b = vec![0.0; rows];
    for j in 0..p {
        a.row_mut(j)[..n].copy_from_slice(qp.a.row(j));
        a[(j, n)] = -1.0;
        b[j] = qp.b[j];
    }
    for v in 0..m {
        let r = p + 2 * v;
        a.row_mut(r)[..n].copy_from_slice(qp.a_eq.row(v));
        a[(r, n)] = -1.0;
        b[r] = qp.b_eq[v];
        for (dst, src) in a.row_mut(r + 1)[..n].iter_mut().zip(qp.a_eq.row(v)) {
            *dst = -src;
        }
        a[(r + 1, n)] = -1.0;
        b[r + 1] = -qp.b_eq[v];
    }
    a[(rows - 1, n)] = -1.0;
    let elastic = QpSubproblem {
        h: h.clone(),
        c,
        a,
        b,
        a_eq: Matrix::zeros(0, n + 1),
        b_eq: Vec::new(),
    };
    let mut z = start.to_vec();
    z.push(qp.violation(start) * (1.0 + 1e-12) + 1e-300);
    let sol = ActiveSet::new(&elastic, &h, z, opts).run(&[])?;
    let s: Vec<f64> = sol.s_star[..n].to_vec();
    if qp.violation(&s) > qp.feas_tol() {
        return Err(Error::Infeasible);
    }
    Ok(s)
}

struct ActiveSet<'a> {
    qp: &'a QpSubproblem,
    h: &'a Matrix,
    x: Vec<f64>,
    opts: &'a QpOptions,
    /// Equality rows kept (linearly independent subset).
    eq_rows: Vec<usize>,
    working: Vec<usize>,
}

impl<'a> ActiveSet<'a> {
    fn new(qp: &'a QpSubproblem, h: &'a Matrix, x: Vec<f64>, opts: &'a QpOptions) -> Self {
        ActiveSet {
            qp,
            h,
            x,
            opts,
            eq_rows: Vec::new(),
            working: Vec::new(),
        }
    }

    /// Orthonormal basis of the rows currently constraining the step.
    fn basis(&self) -> Vec<Vec<f64>> {
        let mut q: Vec<Vec<f64>> = Vec::new();
        let rows = self
            .eq_rows
            .iter()
            .map(|&v| self.qp.a_eq.row(v))
            .chain(self.working.iter().map(|&j| self.qp.a.row(j)));
        for r in rows {
            if let Some(u) = orthogonal_part(&q, r) {
                q.push(u);
            }
        }
        q
    }

    fn independent(&self, row: &[f64]) -> bool {
        orthogonal_part(&self.basis(), row).is_some()
    }

    fn run(mut self, warm: &[usize]) -> Result<QpSolution> {
        let feas_tol = self.qp.feas_tol();
        for v in 0..self.qp.a_eq.rows() {
            if self.independent(self.qp.a_eq.row(v)) {
                self.eq_rows.push(v);
            }
        }
        let ax = self.qp.a.mul_vec(&self.x);
        let mut seed: Vec<usize> = warm.iter().copied().filter(|&j| j < ax.len()).collect();
        seed.extend(0..ax.len());
        for j in seed {
            if (ax[j] - self.qp.b[j]).abs() <= feas_tol
                && !self.working.contains(&j)
                && self.independent(self.qp.a.row(j))
            {
                self.working.push(j);
            }
        }

        for iter in 0..self.opts.max_iter {
            let (p, lambda) = self.eqp_step()?;
            let neq = self.eq_rows.len();
            let grad_scale = 1.0f64.max(norm_inf(&self.gradient()));
            if norm_inf(&p) <= self.opts.tol * (1.0 + norm_inf(&self.x)) {
                self.x.iter_mut().zip(&p).for_each(|(x, d)| *x += d);
                let worst =
                    self.working
                        .iter()
                        .enumerate()
                        .fold(None::<(usize, f64)>, |acc, (k, _)| {
                            let l = lambda[neq + k];
                            match acc {
                                Some((_, best)) if best <= l => acc,
                                _ => Some((k, l)),
                            }
                        });
                match worst {
                    Some((k, l)) if l < -self.opts.tol * grad_scale => {
                        self.working.remove(k);
                    }
                    _ => return Ok(self.finish(&lambda, iter + 1)),
                }
                continue;
            }
            // ratio test over constraints outside the working set
            let mut step = 1.0;
            let mut blocking = None;
            for j in 0..self.qp.a.rows() {
                if self.working.contains(&j) {
                    continue;
                }
                let row = self.qp.a.row(j);
                let ap = dot(row, &p);
                if ap <= 1e-14 * (1.0 + norm_inf(row) * norm_inf(&p)) {
                    continue;
                }
                let slack = (self.qp.b[j] - dot(row, &self.x)).max(0.0);
                let t = slack / ap;
                if t < step {
                    step = t;
                    blocking = Some(j);
                }
            }
            self.x.iter_mut().zip(&p).for_each(|(x, d)| *x += step * d);
            if let Some(j) = blocking {
                if self.independent(self.qp.a.row(j)) {
                    self.working.push(j);
                }
            }
        }
        let (_, lambda) = self.eqp_step()?;
        let best = self.finish(&lambda, self.opts.max_iter);
        Err(Error::QpMaxIterations(Box::new(best)))
    }

    fn gradient(&self) -> Vec<f64> {
        let mut g = self.h.mul_vec(&self.x);
        g.iter_mut().zip(&self.qp.c).for_each(|(gi, ci)| *gi += ci);
        g
    }

    /// Newton step onto the working-set face and the face multipliers.
    fn eqp_step(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.qp.dim();
        let rows: Vec<(&[f64], f64)> = self
            .eq_rows
            .iter()
            .map(|&v| (self.qp.a_eq.row(v), self.qp.b_eq[v]))
            .chain(
                self.working
                    .iter()
                    .map(|&j| (self.qp.a.row(j), self.qp.b[j])),
            )
            .collect();
        let k = rows.len();
        let mut kkt = Matrix::zeros(n + k, n + k);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = self.h[(i, j)];
            }
        }
        let mut rhs = vec![0.0; n + k];
        let g = self.gradient();
        for i in 0..n {
            rhs[i] = -g[i];
        }
        for (r, (row, b)) in rows.iter().enumerate() {
            for i in 0..n {
                kkt[(n + r, i)] = row[i];
                kkt[(i, n + r)] = row[i];
            }
            rhs[n + r] = b - dot(row, &self.x);
        }
        let sol = kkt.solve(&rhs).ok_or(Error::NotPositiveDefinite)?;
        Ok((sol[..n].to_vec(), sol[n..].to_vec()))
    }

    fn finish(&self, lambda: &[f64], iterations: usize) -> QpSolution {
        let neq = self.eq_rows.len();
        let mut eq = vec![0.0; self.qp.a_eq.rows()];
        for (k, &v) in self.eq_rows.iter().enumerate() {
            eq[v] = lambda[k];
        }
        let mut ineq = vec![0.0; self.qp.a.rows()];
        for (k, &j) in self.working.iter().enumerate() {
            ineq[j] = lambda[neq + k].max(0.0);
        }
        let mut active_set = self.working.clone();
        active_set.sort_unstable();
        QpSolution {
            s_star: self.x.clone(),
            ineq_multipliers: ineq,
            eq_multipliers: eq,
            active_set,
            iterations,
            regularized: false,
        }
    }
}

/// Component of `row` orthogonal to the orthonormal set `q`, normalised, or
/// `None` when `row` is (numerically) in its span.
fn orthogonal_part(q: &[Vec<f64>], row: &[f64]) -> Option<Vec<f64>> {
    let norm = norm_inf(row);
    if norm == 0.0 {
        return None;
    }
    let mut u = row.to_vec();
    for _ in 0..2 {
        for qi in q {
            let d = dot(qi, &u);
            u.iter_mut().zip(qi).for_each(|(ui, qv)| *ui -= d * qv);
        }
    }
    let len = libm::sqrt(dot(&u, &u));
    if len <= 1e-10 * norm {
        return None;
    }
    u.iter_mut().for_each(|v| *v /= len);
    Some(u)
}
