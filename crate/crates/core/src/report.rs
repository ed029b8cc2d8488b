//! CSV table schemas shared by the CLI and the experiment modules.
//!
//! All tables carry a mandatory header row, use the decimal point with no
//! thousands separators, and format floats in shortest-roundtrip form so
//! rereading a file reproduces the in-memory values exactly. Fields never
//! contain commas or quotes, which keeps the emitted files valid under
//! RFC-style quoting rules.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mlens::{AggregateRow, CheckpointReport, DatasetSummary, IterationReport, Stats};
use crate::trajectory::{RegimeReport, RecursionReport, TrajectoryResult};

pub const TRAJECTORY_HEADER: &str = "run_id,trajectory,k,mse";
pub const SUMMARY_HEADER: &str = "k,mean_mse,stderr,regime";
pub const RECURSION_HEADER: &str = "k,lhs_r2,rhs_r2,lhs_se,rhs_se,combined_se,pass,var_rho,var_rho_se";
pub const THEORY_HEADER: &str = "k,r2,mse,partial_corr";
pub const ITERATION_HEADER: &str =
    "iteration,k_prime,rmse,share_full,n_users,n_items,n_ratings,rootn_baseline";
pub const AGGREGATE_HEADER: &str =
    "k_prime,mean_rmse,stderr_rmse,mean_share_full,mean_n_users,mean_n_items,mean_n_ratings,mean_rootn";
pub const STATS_HEADER: &str = "variable,mean,min,p25,p50,p75,max";
pub const COUNTS_HEADER: &str = "metric,value";
pub const CF_EVAL_HEADER: &str = "rmse,share_full";

/// Long-format trajectory table: one row per (trajectory, k).
pub fn render_trajectory_long(run_id: &str, result: &TrajectoryResult) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (t, path) in result.mse_paths.iter().enumerate() {
        for (i, mse) in path.iter().enumerate() {
            let _ = writeln!(out, "{run_id},{t},{},{}", i + 1, mse);
        }
    }
    out
}

/// Reads a long-format trajectory table back into per-trajectory paths.
pub fn parse_trajectory_long(text: &str) -> Result<(String, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    expect_header(lines.next(), TRAJECTORY_HEADER)?;
    let mut run_id = String::new();
    let mut paths: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split_fields(line, 4, i + 2)?;
        if run_id.is_empty() {
            run_id = fields[0].to_string();
        }
        let trajectory: usize = parse_field(fields[1], "trajectory", i + 2)?;
        let k: usize = parse_field(fields[2], "k", i + 2)?;
        let mse: f64 = parse_field(fields[3], "mse", i + 2)?;
        if trajectory >= paths.len() {
            paths.resize_with(trajectory + 1, Vec::new);
        }
        if paths[trajectory].len() + 1 != k {
            return Err(Error::validation(format!(
                "trajectory {trajectory} rows out of order at k={k}"
            )));
        }
        paths[trajectory].push(mse);
    }
    Ok((run_id, paths))
}

/// Per-k summary with the regime labels where defined ("na" at the curve
/// ends, where no second difference exists).
pub fn render_trajectory_summary(result: &TrajectoryResult, regimes: &RegimeReport) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for (i, (mean, se)) in result
        .mean_curve
        .iter()
        .zip(result.stderr_curve.iter())
        .enumerate()
    {
        // second_diffs[j] is centered at curve index j+1.
        let regime = if i >= 1 && i - 1 < regimes.regimes.len() {
            regimes.regimes[i - 1].as_str()
        } else {
            "na"
        };
        let _ = writeln!(out, "{},{},{},{}", i + 1, mean, se, regime);
    }
    out
}

/// Reads back the (k, mean, stderr) columns of a summary table.
pub fn parse_trajectory_summary(text: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut lines = text.lines();
    expect_header(lines.next(), SUMMARY_HEADER)?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split_fields(line, 4, i + 2)?;
        rows.push((
            parse_field(fields[0], "k", i + 2)?,
            parse_field(fields[1], "mean_mse", i + 2)?,
            parse_field(fields[2], "stderr", i + 2)?,
        ));
    }
    Ok(rows)
}

pub fn render_recursion(report: &RecursionReport) -> String {
    let mut out = String::new();
    out.push_str(RECURSION_HEADER);
    out.push('\n');
    for rec in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rec.k,
            rec.lhs,
            rec.rhs,
            rec.lhs_se,
            rec.rhs_se,
            rec.combined_se,
            rec.pass,
            report.var_rho,
            report.var_rho_se
        );
    }
    out
}

pub fn render_theory(curve: &[f64], partials: &[Option<f64>]) -> String {
    let mut out = String::new();
    out.push_str(THEORY_HEADER);
    out.push('\n');
    for (i, r2) in curve.iter().enumerate() {
        let partial = match partials.get(i).copied().flatten() {
            Some(p) => p.to_string(),
            None => "na".to_string(),
        };
        let _ = writeln!(out, "{},{},{},{}", i + 1, r2, 1.0 - r2, partial);
    }
    out
}

/// Per-iteration checkpoint table of the accumulation experiment.
pub fn render_iterations(iterations: &[IterationReport]) -> String {
    let mut out = String::new();
    out.push_str(ITERATION_HEADER);
    out.push('\n');
    for it in iterations {
        for cp in &it.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                it.iteration,
                cp.k_prime,
                cp.rmse,
                cp.share_full,
                cp.n_users,
                cp.n_items,
                cp.n_ratings,
                cp.rootn_baseline
            );
        }
    }
    out
}

pub fn parse_iterations(text: &str) -> Result<Vec<IterationReport>> {
    let mut lines = text.lines();
    expect_header(lines.next(), ITERATION_HEADER)?;
    let mut reports: Vec<IterationReport> = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split_fields(line, 8, i + 2)?;
        let iteration: usize = parse_field(fields[0], "iteration", i + 2)?;
        let cp = CheckpointReport {
            k_prime: parse_field(fields[1], "k_prime", i + 2)?,
            rmse: parse_field(fields[2], "rmse", i + 2)?,
            share_full: parse_field(fields[3], "share_full", i + 2)?,
            n_users: parse_field(fields[4], "n_users", i + 2)?,
            n_items: parse_field(fields[5], "n_items", i + 2)?,
            n_ratings: parse_field(fields[6], "n_ratings", i + 2)?,
            rootn_baseline: parse_field(fields[7], "rootn_baseline", i + 2)?,
        };
        match reports.last_mut() {
            Some(last) if last.iteration == iteration => last.checkpoints.push(cp),
            _ => reports.push(IterationReport {
                iteration,
                checkpoints: vec![cp],
                truncated_at: None,
            }),
        }
    }
    Ok(reports)
}

pub fn render_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k_prime,
            r.mean_rmse,
            r.stderr_rmse,
            r.mean_share_full,
            r.mean_n_users,
            r.mean_n_items,
            r.mean_n_ratings,
            r.mean_rootn
        );
    }
    out
}

pub fn parse_aggregate(text: &str) -> Result<Vec<AggregateRow>> {
    let mut lines = text.lines();
    expect_header(lines.next(), AGGREGATE_HEADER)?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split_fields(line, 8, i + 2)?;
        rows.push(AggregateRow {
            k_prime: parse_field(fields[0], "k_prime", i + 2)?,
            mean_rmse: parse_field(fields[1], "mean_rmse", i + 2)?,
            stderr_rmse: parse_field(fields[2], "stderr_rmse", i + 2)?,
            mean_share_full: parse_field(fields[3], "mean_share_full", i + 2)?,
            mean_n_users: parse_field(fields[4], "mean_n_users", i + 2)?,
            mean_n_items: parse_field(fields[5], "mean_n_items", i + 2)?,
            mean_n_ratings: parse_field(fields[6], "mean_n_ratings", i + 2)?,
            mean_rootn: parse_field(fields[7], "mean_rootn", i + 2)?,
        });
    }
    Ok(rows)
}

/// The ingest summary: one row per variable.
pub fn render_stats(summary: &DatasetSummary) -> String {
    let mut out = String::new();
    out.push_str(STATS_HEADER);
    out.push('\n');
    let mut row = |name: &str, s: &Stats| {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{}",
            s.mean, s.min, s.p25, s.p50, s.p75, s.max
        );
    };
    row("rating", &summary.rating);
    row("obs_by_user", &summary.per_user_count);
    row("obs_by_movie", &summary.per_item_count);
    out
}

pub fn render_counts(summary: &DatasetSummary) -> String {
    let mut out = String::new();
    out.push_str(COUNTS_HEADER);
    out.push('\n');
    let _ = writeln!(out, "n_ratings,{}", summary.n_ratings);
    let _ = writeln!(out, "n_users,{}", summary.n_users);
    let _ = writeln!(out, "n_items,{}", summary.n_items);
    let _ = writeln!(out, "popularity_threshold,{}", summary.popularity_threshold);
    let _ = writeln!(out, "items_at_threshold,{}", summary.items_at_threshold);
    out
}

pub fn render_cf_eval(rmse: f64, share_full: f64) -> String {
    format!("{CF_EVAL_HEADER}\n{rmse},{share_full}\n")
}

fn expect_header(line: Option<&str>, expected: &str) -> Result<()> {
    match line {
        Some(h) if h == expected => Ok(()),
        Some(h) => Err(Error::validation(format!(
            "unexpected CSV header '{h}', expected '{expected}'"
        ))),
        None => Err(Error::validation("empty CSV input")),
    }
}

fn split_fields(line: &str, arity: usize, lineno: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != arity {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected {arity} fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, lineno: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("field {name} '{s}' failed to parse"),
    })
}
