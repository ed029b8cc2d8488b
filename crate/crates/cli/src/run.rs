//! Command implementations: experiment orchestration and artifact output.

use std::path::{Path, PathBuf};

use learncurve::cf;
use learncurve::mlens::{self, synthetic, RatingsDataset};
use learncurve::report;
use learncurve::trajectory;

use crate::config::ResolvedConfig;
use crate::error::{from_core, io_err, CliError};
use crate::plot::{line_chart, LineClass, Series};

/// Where a run writes its artifacts. If any target file already exists in
/// the requested directory, the run moves into a fresh subdirectory named
/// by UTC timestamp and seed so earlier artifacts are never overwritten.
pub struct OutputContext {
    dir: PathBuf,
}

impl OutputContext {
    pub fn prepare(out: &Path, files: &[&str], seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| io_err("creating output directory", e))?;
        let collision = files.iter().any(|f| out.join(f).exists());
        let dir = if collision {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
            let sub = out.join(format!("run-{stamp}-s{seed}"));
            std::fs::create_dir_all(&sub).map_err(|e| io_err("creating run directory", e))?;
            sub
        } else {
            out.to_path_buf()
        };
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&format!("writing {name}"), e))?;
        Ok(path)
    }
}

fn manifest_name(command: &str) -> String {
    format!("manifest-{command}.cfg")
}

fn write_manifest(io: &OutputContext, cfg: &ResolvedConfig, command: &str) -> Result<(), CliError> {
    io.write(&manifest_name(command), &cfg.render_manifest(command))?;
    Ok(())
}

pub fn cmd_simulate(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let tcfg = cfg.trajectory()?;
    let io = OutputContext::prepare(
        out,
        &["trajectories.csv", "summary.csv", "manifest-simulate.cfg"],
        cfg.seed(),
    )?;
    let result = trajectory::run_simulation(&tcfg).map_err(|e| from_core("trajectory", e))?;
    let regimes = trajectory::classify_returns_with(
        &result,
        cfg.get_f64("regime.band_multiplier"),
        cfg.get_usize("regime.smooth_window"),
        cfg.get_f64("regime.floor_frac"),
    )
    .map_err(|e| from_core("trajectory", e))?;

    let run_id = cfg.run_id("simulate");
    io.write("trajectories.csv", &report::render_trajectory_long(&run_id, &result))?;
    io.write("summary.csv", &report::render_trajectory_summary(&result, &regimes))?;
    write_manifest(&io, cfg, "simulate")?;
    println!(
        "simulate: {} trajectories, K={}, repaired {} of {}; wrote {}",
        tcfg.num_trajectories,
        tcfg.num_vars,
        result.repaired_count,
        tcfg.num_trajectories,
        io.dir().display()
    );
    Ok(())
}

pub fn cmd_verify(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let tcfg = cfg.trajectory()?;
    let k_max = cfg.get_usize("verify.k_max");
    let io = OutputContext::prepare(out, &["recursion.csv", "manifest-verify.cfg"], cfg.seed())?;
    let rep = trajectory::verify_recursion(&tcfg, k_max).map_err(|e| from_core("trajectory", e))?;
    io.write("recursion.csv", &report::render_recursion(&rep))?;
    write_manifest(&io, cfg, "verify")?;
    let passed = rep.records.iter().filter(|r| r.pass).count();
    println!(
        "verify: {passed}/{} recursion checks passed, k=1 vs Var(rho) pass={}, wrote {}",
        rep.records.len(),
        rep.k1_pass,
        io.dir().display()
    );
    Ok(())
}

pub fn cmd_theory(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let rho_bar = cfg.get_f64("theory.rho_bar");
    let k_max = cfg.get_usize("theory.k_max");
    let io = OutputContext::prepare(out, &["theory.csv", "manifest-theory.cfg"], cfg.seed())?;
    let curve =
        trajectory::theory_mean_curve(rho_bar, k_max).map_err(|e| from_core("trajectory", e))?;
    let partials: Vec<Option<f64>> = (1..=k_max)
        .map(|k| {
            if k >= 2 {
                trajectory::partial_correlation_at_mean(rho_bar, k).ok()
            } else {
                None
            }
        })
        .collect();
    io.write("theory.csv", &report::render_theory(&curve, &partials))?;
    write_manifest(&io, cfg, "theory")?;
    println!(
        "theory: rho_bar={rho_bar}, k_max={k_max}, wrote {}",
        io.dir().display()
    );
    Ok(())
}

fn ratings_to_cf(ds: &RatingsDataset) -> Vec<cf::Rating> {
    ds.rows()
        .iter()
        .map(|r| cf::Rating::new(r.user, r.item, r.rating as f64))
        .collect()
}

fn load_ratings(ratings: Option<&Path>, command: &str) -> Result<RatingsDataset, CliError> {
    let path = ratings.ok_or_else(|| {
        CliError::Config(format!("{command} requires --ratings <file>"))
    })?;
    mlens::load_movielens(path).map_err(|e| from_core("mlens", e))
}

pub fn cmd_cf_train(
    cfg: &ResolvedConfig,
    out: &Path,
    ratings: Option<&Path>,
) -> Result<(), CliError> {
    let hp = cfg.hyperparams()?;
    let ds = load_ratings(ratings, "cf-train")?;
    let io = OutputContext::prepare(out, &["model.json", "manifest-cf-train.cfg"], cfg.seed())?;
    let train_set = ratings_to_cf(&ds);
    let model = cf::train(&train_set, &hp, cfg.seed()).map_err(|e| from_core("cf", e))?;
    let model_out = cfg.get("cf.model_out");
    let model_path = if model_out.is_empty() {
        io.write("model.json", &model.to_json())?
    } else {
        std::fs::write(model_out, model.to_json())
            .map_err(|e| io_err(&format!("writing {model_out}"), e))?;
        PathBuf::from(model_out)
    };
    write_manifest(&io, cfg, "cf-train")?;
    println!(
        "cf-train: {} ratings, {} users, {} items, alpha={:.4}; model at {}",
        train_set.len(),
        model.n_users(),
        model.n_items(),
        model.alpha(),
        model_path.display()
    );
    Ok(())
}

pub fn cmd_cf_eval(
    cfg: &ResolvedConfig,
    out: &Path,
    ratings: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_ratings(ratings, "cf-eval")?;
    let io = OutputContext::prepare(out, &["cf_eval.csv", "manifest-cf-eval.cfg"], cfg.seed())?;
    let model_in = cfg.get("cf.model_in");
    let model_path = if model_in.is_empty() {
        io.dir().join("model.json")
    } else {
        PathBuf::from(model_in)
    };
    let text = std::fs::read_to_string(&model_path)
        .map_err(|e| io_err(&format!("reading model {}", model_path.display()), e))?;
    let model = cf::SvdModel::from_json(&text).map_err(|e| from_core("cf", e))?;
    let holdout = ratings_to_cf(&ds);
    let (rmse, share_full) = cf::evaluate_rmse_with(&model, &holdout, cfg.get_bool("cf.clip"))
        .map_err(|e| from_core("cf", e))?;
    io.write("cf_eval.csv", &report::render_cf_eval(rmse, share_full))?;
    write_manifest(&io, cfg, "cf-eval")?;
    println!(
        "cf-eval: rmse={rmse:.6} share_full={share_full:.4} over {} ratings; wrote {}",
        holdout.len(),
        io.dir().display()
    );
    Ok(())
}

pub fn cmd_accumulate(
    cfg: &ResolvedConfig,
    out: &Path,
    ratings: Option<&Path>,
) -> Result<(), CliError> {
    let acfg = cfg.accumulation()?;
    let ds = match ratings {
        Some(path) => mlens::load_movielens(path).map_err(|e| from_core("mlens", e))?,
        None if cfg.get_bool("accum.synthetic") => {
            let scfg = cfg.synthetic()?;
            synthetic::power_law_dataset(&scfg).map_err(|e| from_core("mlens", e))?
        }
        None => {
            return Err(CliError::Config(
                "accumulate requires --ratings <file>, or accum.synthetic=true to use the \
                 built-in generator"
                    .to_string(),
            ))
        }
    };
    let io = OutputContext::prepare(
        out,
        &["iterations.csv", "aggregate.csv", "manifest-accumulate.cfg"],
        cfg.seed(),
    )?;
    let result = mlens::run_accumulation(&ds, &acfg).map_err(|e| from_core("mlens", e))?;
    for (i, msg) in &result.failures {
        eprintln!("warning: iteration {i} failed: {msg}");
    }
    for it in &result.iterations {
        if let Some(at) = it.truncated_at {
            eprintln!(
                "warning: iteration {} truncated at k'={at} (checkpoint_max {} unreachable)",
                it.iteration, acfg.checkpoint_max
            );
        }
    }
    let aggregate =
        mlens::aggregate_reports(&result.iterations).map_err(|e| from_core("mlens", e))?;
    io.write("iterations.csv", &report::render_iterations(&result.iterations))?;
    io.write("aggregate.csv", &report::render_aggregate(&aggregate))?;
    write_manifest(&io, cfg, "accumulate")?;
    println!(
        "accumulate: {} iterations ({} failed), {} checkpoints aggregated; wrote {}",
        result.iterations.len(),
        result.failures.len(),
        aggregate.len(),
        io.dir().display()
    );
    Ok(())
}

pub fn cmd_ingest_summary(
    cfg: &ResolvedConfig,
    out: &Path,
    ratings: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_ratings(ratings, "ingest-summary")?;
    let io = OutputContext::prepare(out, &["stats.csv", "counts.csv", "manifest-ingest-summary.cfg"], cfg.seed())?;
    let summary = mlens::summarize(&ds, cfg.get_usize("ingest.threshold"))
        .map_err(|e| from_core("mlens", e))?;
    io.write("stats.csv", &report::render_stats(&summary))?;
    io.write("counts.csv", &report::render_counts(&summary))?;
    write_manifest(&io, cfg, "ingest-summary")?;
    println!(
        "ingest-summary: {} ratings, {} users, {} items, mean rating {:.4}; wrote {}",
        summary.n_ratings,
        summary.n_users,
        summary.n_items,
        summary.rating.mean,
        io.dir().display()
    );
    Ok(())
}

/// Renders SVG charts from previously written CSVs. Plots never recompute
/// results; they are derived strictly from the files.
pub fn cmd_plot(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let input = cfg.get("plot.input");
    let dir = if input.is_empty() {
        out.to_path_buf()
    } else {
        PathBuf::from(input)
    };
    std::fs::create_dir_all(out).map_err(|e| io_err("creating output directory", e))?;
    let mut rendered = Vec::new();

    let traj_path = dir.join("trajectories.csv");
    if traj_path.exists() {
        let text = std::fs::read_to_string(&traj_path)
            .map_err(|e| io_err("reading trajectories.csv", e))?;
        let (_, paths) = report::parse_trajectory_long(&text).map_err(|e| from_core("report", e))?;
        let summary_path = dir.join("summary.csv");
        let summary_text = std::fs::read_to_string(&summary_path)
            .map_err(|e| io_err("reading summary.csv", e))?;
        let summary =
            report::parse_trajectory_summary(&summary_text).map_err(|e| from_core("report", e))?;

        let path_points: Vec<Vec<(f64, f64)>> = paths
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &m)| ((i + 1) as f64, m))
                    .collect()
            })
            .collect();
        let mean_points: Vec<(f64, f64)> = summary
            .iter()
            .map(|&(k, mean, _)| (k as f64, mean))
            .collect();
        let mut series: Vec<Series> = path_points
            .iter()
            .map(|p| Series {
                label: "",
                points: p,
                class: LineClass::Faint,
            })
            .collect();
        series.push(Series {
            label: "mean MSE",
            points: &mean_points,
            class: LineClass::Heavy,
        });
        let svg = line_chart(
            "Learning trajectories",
            "conditioning variables k",
            "MSE",
            &series,
        );
        let path = out.join("trajectories.svg");
        std::fs::write(&path, svg).map_err(|e| io_err("writing trajectories.svg", e))?;
        rendered.push(path);
    }

    let agg_path = dir.join("aggregate.csv");
    if agg_path.exists() {
        let text =
            std::fs::read_to_string(&agg_path).map_err(|e| io_err("reading aggregate.csv", e))?;
        let rows = report::parse_aggregate(&text).map_err(|e| from_core("report", e))?;
        if !rows.is_empty() {
            let rmse: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.k_prime as f64, r.mean_rmse))
                .collect();
            // The reference curve is scale-free; anchor it to the first
            // observed RMSE so the shapes are comparable in one panel.
            let anchor = rmse[0].1 / rows[0].mean_rootn;
            let rootn: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.k_prime as f64, r.mean_rootn * anchor))
                .collect();
            let svg = line_chart(
                "Hold-out RMSE vs root-N reference",
                "items at popularity threshold k'",
                "RMSE",
                &[
                    Series { label: "mean RMSE", points: &rmse, class: LineClass::Heavy },
                    Series { label: "C/sqrt(N_r), rescaled", points: &rootn, class: LineClass::Dashed },
                ],
            );
            let path = out.join("accumulation_rmse.svg");
            std::fs::write(&path, svg).map_err(|e| io_err("writing accumulation_rmse.svg", e))?;
            rendered.push(path);

            let users: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.k_prime as f64, r.mean_n_users))
                .collect();
            let items: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.k_prime as f64, r.mean_n_items))
                .collect();
            let svg = line_chart(
                "Training-set composition",
                "items at popularity threshold k'",
                "count",
                &[
                    Series { label: "users", points: &users, class: LineClass::Heavy },
                    Series { label: "items", points: &items, class: LineClass::Accent },
                ],
            );
            let path = out.join("accumulation_counts.svg");
            std::fs::write(&path, svg).map_err(|e| io_err("writing accumulation_counts.svg", e))?;
            rendered.push(path);

            let share: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.k_prime as f64, r.mean_share_full))
                .collect();
            let svg = line_chart(
                "Share of full-model predictions",
                "items at popularity threshold k'",
                "share",
                &[Series { label: "share full", points: &share, class: LineClass::Heavy }],
            );
            let path = out.join("accumulation_share.svg");
            std::fs::write(&path, svg).map_err(|e| io_err("writing accumulation_share.svg", e))?;
            rendered.push(path);
        }
    }

    if rendered.is_empty() {
        return Err(CliError::Io(format!(
            "plot: no plottable CSVs (trajectories.csv or aggregate.csv) in {}",
            dir.display()
        )));
    }
    // Plots are derived artifacts, so re-plotting overwrites in place; the
    // manifest is still recorded for provenance.
    std::fs::write(
        out.join(manifest_name("plot")),
        cfg.render_manifest("plot"),
    )
    .map_err(|e| io_err("writing plot manifest", e))?;
    println!(
        "plot: rendered {} chart(s) in {}",
        rendered.len(),
        out.display()
    );
    Ok(())
}
