//! CSV writers and readers.

use std::cmp::Ordering;
use std::path::Path;

use railalloc_core::allocators::Method;
use railalloc_core::SolverReport;

use crate::error::{Error, Result};
use crate::experiment::{CertifyRow, SweepRow};

pub const SWEEP_HEADER: [&str; 8] = [
    "sweep_var",
    "value",
    "method",
    "capacity_bps",
    "iterations",
    "wall_time_s",
    "seed",
    "alpha_json",
];

/// 15 significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.14e}")
}

pub fn alpha_json(alpha: &[f64]) -> String {
    let parts: Vec<String> = alpha.iter().map(|&a| fmt_num(a)).collect();
    format!("[{}]", parts.join(","))
}

fn row_order(a: &SweepRow, b: &SweepRow) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then_with(|| a.method.name().cmp(b.method.name()))
        .then_with(|| a.seed.cmp(&b.seed))
}

/// Sweep rows as CSV text, sorted by (value, method, seed).
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| row_order(a, b));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in sorted {
        w.write_record([
            r.sweep_var.clone(),
            fmt_num(r.value),
            r.method.name().to_string(),
            fmt_num(r.capacity_bps),
            r.iterations.to_string(),
            fmt_num(r.wall_time_s),
            r.seed.to_string(),
            alpha_json(&r.alpha),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes sweep rows. Nothing is created when `rows` is empty.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let text = sweep_csv(rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let bad = |field: &str, v: &str| Error::Parse(format!("bad {field} {v:?}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| f(i).parse::<f64>().map_err(|_| bad(SWEEP_HEADER[i], f(i)));
        let alpha: Vec<f64> = serde_json::from_str(f(7)).map_err(|_| bad("alpha_json", f(7)))?;
        rows.push(SweepRow {
            sweep_var: f(0).to_string(),
            value: num(1)?,
            method: Method::parse(f(2)).ok_or_else(|| bad("method", f(2)))?,
            capacity_bps: num(3)?,
            iterations: f(4).parse().map_err(|_| bad("iterations", f(4)))?,
            wall_time_s: num(5)?,
            seed: f(6).parse().map_err(|_| bad("seed", f(6)))?,
            alpha,
        });
    }
    Ok(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    parse_sweep_csv(&std::fs::read_to_string(path)?)
}

/// Per-iteration SQP trace.
pub fn write_trace_csv(report: &SolverReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "iter",
        "objective_bps",
        "step_norm",
        "kkt_residual",
        "linesearch_evals",
        "elapsed_s",
    ])?;
    for t in &report.trace {
        w.write_record([
            t.iteration.to_string(),
            fmt_num(t.objective),
            fmt_num(t.step_norm),
            fmt_num(t.kkt_residual),
            t.linesearch_evals.to_string(),
            fmt_num(t.elapsed_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_certify_csv(rows: &[CertifyRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "instance",
        "seed",
        "sqp_bps",
        "dual_bps",
        "grid_bps",
        "sqp_dual_rel",
        "dual_grid_gap_bps",
        "lipschitz_bound_bps",
        "kkt_residual",
        "passed",
    ])?;
    for r in rows {
        let c = &r.certificate;
        w.write_record([
            r.instance.to_string(),
            r.seed.to_string(),
            fmt_num(c.sqp.objective),
            fmt_num(c.dual.objective),
            fmt_num(c.grid.objective),
            fmt_num(c.sqp_dual_rel),
            fmt_num(c.dual_grid_gap),
            fmt_num(c.lipschitz_bound),
            fmt_num(c.report.kkt.residuals.max()),
            r.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
