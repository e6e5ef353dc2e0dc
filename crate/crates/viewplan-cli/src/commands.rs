//! Command implementations: `pool`, `select`, `simulate`, `report`.
//!
//! Every output file is written atomically and embeds the full config, so a
//! result is interpretable on its own. Timing goes to stdout only; files
//! are byte-identical across reruns of the same config and seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use viewplan::diagnostics::{assemble_report, Report, ReportParams};
use viewplan::error::{Error, Result};
use viewplan::gating::{gate_report, GateReportEntry};
use viewplan::geometry::{visibility_from_pose, VisibilitySet};
use viewplan::io::{tables, write_atomic};
use viewplan::proxy::{benchmark_from_logs, run_episodes, BenchmarkResult, EpisodeLog, Outcome};
use viewplan::sampling::{build_candidate_pool, pool_from_json, pool_to_json, Provenance};
use viewplan::selection::{select, SelectionResult};

use crate::config::{LoadedConfig, RunConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().expect("vec writer");
    write_atomic(path, &bytes)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn fmt_ci(ci: Option<f64>) -> String {
    match ci {
        Some(v) => format!("+/- {v:.4}"),
        None => "+/- undefined".to_string(),
    }
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    command: &'a str,
    run_key: &'a str,
    scene_id: &'a str,
    config: &'a RunConfig,
    result: &'a SelectionResult,
}

/// Selection sweep: one JSON per (policy, budget) plus an aggregate CSV.
/// Failing runs are reported by key and the command exits nonzero, but the
/// rest of the sweep still completes.
pub fn cmd_select(lc: &LoadedConfig) -> Result<()> {
    let total = Instant::now();
    let policies = lc.policies()?;
    let budgets = &lc.config.run.budgets;
    let seed = lc.config.run.seed;
    let scene = lc.scene()?;
    let train = lc.train_poses()?;
    let sampler = lc.sampler_params()?;
    let intr = lc.intrinsics()?;
    let cov = lc.coverage_params()?;

    let t = Instant::now();
    let pool = build_candidate_pool(scene.id(), &train, &sampler, seed)?;
    println!(
        "[pool] scene {} seed {}: {} candidates in {:.1} ms",
        scene.id(),
        seed,
        pool.len(),
        elapsed_ms(t)
    );

    let t = Instant::now();
    let vis: Vec<VisibilitySet> = pool
        .candidates
        .par_iter()
        .map(|c| visibility_from_pose(&scene, &intr, &c.pose, &cov))
        .collect();
    let extract_ms = elapsed_ms(t);
    println!(
        "[extract] {} visibility sets in {:.1} ms ({:.3} ms/candidate)",
        vis.len(),
        extract_ms,
        extract_ms / pool.len().max(1) as f64
    );

    let dir = lc.out_dir().join("select");
    let mut rows = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for &policy in &policies {
        for &budget in budgets {
            let run_key = format!("{}_{}_{}", policy.name(), budget, seed);
            let params = lc.selection_params(policy, budget);
            let t = Instant::now();
            match select(&pool, &vis, &train, &params, seed) {
                Ok(result) => {
                    let select_ms = elapsed_ms(t);
                    let path = dir.join(format!("{run_key}.json"));
                    write_json(
                        &path,
                        &SelectOutput {
                            command: "select",
                            run_key: &run_key,
                            scene_id: scene.id(),
                            config: &lc.config,
                            result: &result,
                        },
                    )?;
                    println!(
                        "[select] {run_key}: coverage {:.4}, {} unique, stream {}, {:.1} ms ({:.3} ms/candidate)",
                        result.final_fraction(),
                        result.selected.len(),
                        result.training_stream.len(),
                        select_ms,
                        select_ms / pool.len().max(1) as f64
                    );
                    rows.push(vec![
                        policy.name().to_string(),
                        budget.to_string(),
                        seed.to_string(),
                        scene.id().to_string(),
                        result.selected.len().to_string(),
                        result.training_stream.len().to_string(),
                        result.final_fraction().to_string(),
                    ]);
                }
                Err(e) => {
                    eprintln!("[select] {run_key} failed: {e}");
                    failures.push(run_key);
                }
            }
        }
    }
    write_csv(
        &dir.join(format!("summary_{seed}.csv")),
        &[
            "policy",
            "N",
            "seed",
            "scene_id",
            "unique_count",
            "stream_length",
            "coverage_fraction",
        ],
        &rows,
    )?;
    println!("[select] sweep done in {:.1} ms", elapsed_ms(total));
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::param(
            "run",
            format!("failed runs: {}", failures.join(", ")),
        ))
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    command: &'a str,
    run_key: &'a str,
    config: &'a RunConfig,
    result: &'a BenchmarkResult,
}

fn episode_rows(logs: &[EpisodeLog]) -> Vec<Vec<String>> {
    logs.iter()
        .map(|l| {
            let (outcome, reason) = match &l.outcome {
                Outcome::Success => ("success", String::new()),
                Outcome::Failure => ("failure", String::new()),
                Outcome::Skipped { reason } => ("skipped", reason.clone()),
            };
            vec![
                l.episode.to_string(),
                outcome.to_string(),
                reason,
                l.counters.steps_attempted.to_string(),
                l.counters.steps_taken.to_string(),
                l.counters.collisions.to_string(),
                l.counters.progress_moves.to_string(),
                l.counters.oracle_safe_moves.to_string(),
            ]
        })
        .collect()
}

/// Control-proxy benchmark: metrics JSON plus an optional per-episode CSV.
pub fn cmd_simulate(lc: &LoadedConfig) -> Result<()> {
    let scene = lc.scene()?;
    let cfg = lc.episode_config();
    let estimator = lc.estimator()?;
    let t = Instant::now();
    let logs = run_episodes(&scene, &cfg, &estimator)?;
    let run_ms = elapsed_ms(t);
    let result = benchmark_from_logs(&cfg, &estimator, &logs);
    let run_key = format!("{}_{}_{}", result.estimator, cfg.n_episodes, cfg.seed);
    let dir = lc.out_dir().join("simulate");
    write_json(
        &dir.join(format!("{run_key}.json")),
        &SimulateOutput {
            command: "simulate",
            run_key: &run_key,
            config: &lc.config,
            result: &result,
        },
    )?;
    if lc.config.episodes.write_episode_csv {
        write_csv(
            &dir.join(format!("{run_key}_episodes.csv")),
            &[
                "episode",
                "outcome",
                "reason",
                "steps_attempted",
                "steps_taken",
                "collisions",
                "progress_moves",
                "oracle_safe_moves",
            ],
            &episode_rows(&logs),
        )?;
    }
    let m = &result.metrics;
    println!(
        "[simulate] {run_key}: {} episodes ({} skipped) in {:.1} ms",
        result.episodes_run, result.episodes_skipped, run_ms
    );
    println!(
        "[simulate] succ {:.4} {} | col/100 {:.4} {} | col/fail {:.4} {} | path {:.4} {}",
        m.succ.mean,
        fmt_ci(m.succ.ci95),
        m.col_per_100.mean,
        fmt_ci(m.col_per_100.ci95),
        m.col_per_fail.mean,
        fmt_ci(m.col_per_fail.ci95),
        m.path_ratio.mean,
        fmt_ci(m.path_ratio.ci95),
    );
    Ok(())
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    command: &'a str,
    run_key: &'a str,
    config: &'a RunConfig,
    report: &'a Report,
}

#[derive(Serialize)]
struct GateOutput<'a> {
    command: &'a str,
    run_key: &'a str,
    config: &'a RunConfig,
    entries: &'a [GateReportEntry],
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn report_tables(dir: &Path, stem: &str, report: &Report) -> Result<()> {
    write_csv(
        &dir.join(format!("{stem}_scaling.csv")),
        &["method", "N", "mean_metric", "mean_coverage", "n_scenes"],
        &report
            .scaling
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.budget.to_string(),
                    r.mean_metric.to_string(),
                    r.mean_coverage.to_string(),
                    r.n_scenes.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        &dir.join(format!("{stem}_stability.csv")),
        &["method", "mean", "worst", "range", "n_budgets"],
        &report
            .stability
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.mean.to_string(),
                    r.worst.to_string(),
                    r.range.to_string(),
                    r.n_budgets.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        &dir.join(format!("{stem}_correlation.csv")),
        &["method", "pearson", "spearman", "n"],
        &report
            .correlation
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    opt_str(r.pearson),
                    opt_str(r.spearman),
                    r.n.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        &dir.join(format!("{stem}_tail.csv")),
        &["method", "bin", "mean_metric", "n_frames"],
        &report
            .tail
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.bin.to_string(),
                    r.mean_metric.to_string(),
                    r.n_frames.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        &dir.join(format!("{stem}_paired.csv")),
        &[
            "target",
            "baseline",
            "budget",
            "n_scenes",
            "median_delta",
            "mean_delta",
            "w_statistic",
            "wins",
            "losses",
            "ties",
            "p_value",
            "exact",
            "degenerate",
        ],
        &report
            .paired
            .iter()
            .map(|r| {
                vec![
                    r.target.clone(),
                    r.baseline.clone(),
                    r.budget.to_string(),
                    r.n_scenes.to_string(),
                    r.test.median_delta.to_string(),
                    r.test.mean_delta.to_string(),
                    r.test.w_statistic.to_string(),
                    r.test.wins.to_string(),
                    r.test.losses.to_string(),
                    r.test.ties.to_string(),
                    r.test.p_value.to_string(),
                    r.test.exact.to_string(),
                    r.test.degenerate.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(())
}

/// Diagnostic tables from run-record CSVs: full report JSON, one CSV per
/// table, and plot-ready long-format CSVs.
pub fn cmd_report(lc: &LoadedConfig) -> Result<()> {
    let block = &lc.config.report;
    let Some(runs) = &block.runs else {
        return Err(Error::param("report.runs", "required for this command"));
    };
    let runs_path = lc.resolve(runs);
    let records = tables::load_run_records(&runs_path)?;
    let frames = match &block.frames {
        Some(path) => tables::load_frame_records(&lc.resolve(path))?,
        None => Vec::new(),
    };
    let params = ReportParams {
        stability_floor: block.stability_floor,
        novelty_bin_count: block.novelty_bin_count,
        target_method: block.target_method.clone(),
    };
    let report = assemble_report(&records, &frames, &params)?;
    let stem = runs_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".to_string());
    let dir = lc.out_dir().join("report");
    write_json(
        &dir.join(format!("{stem}.json")),
        &ReportOutput {
            command: "report",
            run_key: &stem,
            config: &lc.config,
            report: &report,
        },
    )?;
    report_tables(&dir, &stem, &report)?;
    write_csv(
        &dir.join(format!("{stem}_error_vs_coverage.csv")),
        &["method", "N", "scene_id", "coverage_fraction", "metric"],
        &records
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.budget.to_string(),
                    r.scene_id.clone(),
                    r.coverage_fraction.to_string(),
                    r.metric_value.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        &dir.join(format!("{stem}_error_vs_novelty_bin.csv")),
        &["method", "scene_id", "bin", "novelty", "metric"],
        &report
            .binned_frames
            .iter()
            .map(|f| {
                vec![
                    f.method.clone(),
                    f.scene_id.clone(),
                    f.bin.to_string(),
                    f.novelty.to_string(),
                    f.metric_value.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    if let Some(quality) = &block.quality {
        let scenes = tables::load_quality(&lc.resolve(quality))?;
        let entries = gate_report(&scenes, &lc.gate_params())?;
        write_json(
            &dir.join(format!("{stem}_gate.json")),
            &GateOutput {
                command: "report",
                run_key: &stem,
                config: &lc.config,
                entries: &entries,
            },
        )?;
        println!("[report] gate report: {} scenes", entries.len());
    }
    println!(
        "[report] {stem}: {} scaling rows, {} stability rows, {} correlation rows, {} tail rows, {} paired rows",
        report.scaling.len(),
        report.stability.len(),
        report.correlation.len(),
        report.tail.len(),
        report.paired.len()
    );
    Ok(())
}

fn provenance_counts(kinds: impl Iterator<Item = Provenance>) -> (usize, usize) {
    let mut random = 0;
    let mut robot = 0;
    for k in kinds {
        match k {
            Provenance::Random => random += 1,
            Provenance::Robot => robot += 1,
        }
    }
    (random, robot)
}

/// Builds the candidate pool and writes it as JSON, or summarizes an
/// existing pool file.
pub fn cmd_pool(lc: Option<&LoadedConfig>, inspect: Option<&Path>) -> Result<()> {
    if let Some(path) = inspect {
        let record = pool_from_json(&std::fs::read_to_string(path)?)?;
        let (random, robot) = provenance_counts(record.candidates.iter().map(|c| c.provenance));
        println!(
            "[pool] {}: scene {} seed {}, {} candidates ({random} jitter, {robot} arc)",
            path.display(),
            record.scene_id,
            record.seed,
            record.candidates.len()
        );
        return Ok(());
    }
    let lc = lc.ok_or_else(|| Error::param("config", "required unless --inspect is given"))?;
    let scene_id = lc.scene_id()?;
    let train = lc.train_poses()?;
    let sampler = lc.sampler_params()?;
    let seed = lc.config.run.seed;
    let t = Instant::now();
    let pool = build_candidate_pool(&scene_id, &train, &sampler, seed)?;
    let build_ms = elapsed_ms(t);
    let (random, robot) = provenance_counts(pool.candidates.iter().map(|c| c.provenance));
    let path: PathBuf = lc
        .out_dir()
        .join("pool")
        .join(format!("{scene_id}_{seed}.json"));
    write_atomic(&path, pool_to_json(&pool)?.as_bytes())?;
    println!(
        "[pool] scene {scene_id} seed {seed}: {} candidates ({random} jitter, {robot} arc) in {build_ms:.1} ms, wrote {}",
        pool.len(),
        path.display()
    );
    Ok(())
}
