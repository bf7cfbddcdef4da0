//! Experiment orchestration and output files.
//!
//! `run` writes into its output directory:
//!
//! * `trace.csv`: `t_total,y,y_best`, one row per evaluation
//! * `best_deployment.csv`: `index,x_m,y_m,power_dbm,yaw,pitch,roll`
//! * `heatmap.csv`: per-point total throughput of the best deployment
//! * `manifest`: every resolved setting plus `result.*` lines
//!
//! `compare` writes `summary.csv` (`method,seed,final_y_best`) and one trace
//! per pair under `traces/`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::domain::Deployment;
use crate::error::{Error, Result};
use crate::optimizer::{run_method, CountingObjective, Method, RunOutcome, RunTrace};
use crate::radio::{format_sig6, heatmap, objective, Heatmap};

/// Runs `method` with `seed` on the scene and budgets of `config`.
///
/// Also returns the number of objective calls actually made.
pub fn execute(config: &RunConfig, method: Method, seed: u64) -> Result<(RunOutcome, usize)> {
    config.validate_for(method)?;
    let scene = method.evaluation_scene(&config.scene()?);
    let bounds = config.bounds()?;
    let mut counted = CountingObjective::new(|dep: &Deployment| objective(dep, &scene));
    let outcome = run_method(
        method,
        &mut counted,
        &bounds,
        config.side_m,
        config.n_tx,
        &config.settings(),
        seed,
    )?;
    Ok((outcome, counted.calls()))
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from("t_total,y,y_best\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.t_total,
            format_sig6(r.y),
            format_sig6(r.y_best)
        );
    }
    out
}

pub fn deployment_csv(dep: &Deployment) -> String {
    let mut out = String::from("index,x_m,y_m,power_dbm,yaw,pitch,roll\n");
    for (i, bs) in dep.stations().iter().enumerate() {
        let o = bs.orientation;
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            format_sig6(bs.x_m),
            format_sig6(bs.y_m),
            format_sig6(bs.power_dbm),
            format_sig6(o.yaw()),
            format_sig6(o.pitch()),
            format_sig6(o.roll())
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Creates `dir` and opens `file` in it for writing, so an unusable output
/// location fails before any evaluation.
fn prepare_output(dir: &Path, file: &str) -> Result<(PathBuf, File)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(file);
    let handle = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, handle))
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: RunOutcome,
    /// Objective calls counted during the run.
    pub evaluations: usize,
    pub heatmap: Heatmap,
    pub out_dir: PathBuf,
}

/// Runs the configured method and writes all outputs to `config.out_dir`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let out_dir = config.out_dir.clone();
    let (manifest_path, mut manifest) = prepare_output(&out_dir, "manifest")?;

    let (outcome, evaluations) = execute(config, config.method, config.seed)?;
    let scene = config.method.evaluation_scene(&config.scene()?);
    let map = heatmap(&outcome.best, &scene);

    write_file(&out_dir.join("trace.csv"), &trace_csv(&outcome.trace))?;
    write_file(
        &out_dir.join("best_deployment.csv"),
        &deployment_csv(&outcome.best),
    )?;
    write_file(&out_dir.join("heatmap.csv"), &map.to_csv())?;
    let mut text = config.to_manifest();
    let _ = writeln!(text, "result.final_y_best = {}", outcome.best_y);
    let _ = writeln!(text, "result.evaluations = {evaluations}");
    manifest
        .write_all(text.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;

    Ok(RunReport {
        outcome,
        evaluations,
        heatmap: map,
        out_dir,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub seed: u64,
    pub final_y_best: f64,
}

pub fn trace_file_name(method: Method, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

/// Runs every `(method, seed)` pair on a shared scene and budget.
///
/// With `parallel`, pairs run on separate threads; results and files are
/// identical either way.
pub fn compare(
    config: &RunConfig,
    methods: &[Method],
    seeds: &[u64],
    out_dir: &Path,
    parallel: bool,
) -> Result<Vec<SummaryRow>> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::config(
            if methods.is_empty() {
                "methods"
            } else {
                "seeds"
            },
            "at least one value is required",
        ));
    }
    for &method in methods {
        config.validate_for(method)?;
    }
    let (summary_path, mut summary) = prepare_output(out_dir, "summary.csv")?;
    let trace_dir = out_dir.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;

    let pairs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let run_pair = |&(method, seed): &(Method, u64)| -> Result<SummaryRow> {
        let (outcome, _) = execute(config, method, seed)?;
        write_file(
            &trace_dir.join(trace_file_name(method, seed)),
            &trace_csv(&outcome.trace),
        )?;
        Ok(SummaryRow {
            method,
            seed,
            final_y_best: outcome.trace.final_best().unwrap_or(f64::NAN),
        })
    };
    let results: Vec<Result<SummaryRow>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .iter()
                .map(|p| scope.spawn(move || run_pair(p)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("compare worker panicked"))
                .collect()
        })
    } else {
        pairs.iter().map(run_pair).collect()
    };
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut text = String::from("method,seed,final_y_best\n");
    for row in &rows {
        let _ = writeln!(
            text,
            "{},{},{}",
            row.method,
            row.seed,
            format_sig6(row.final_y_best)
        );
    }
    summary
        .write_all(text.as_bytes())
        .map_err(|e| Error::io(&summary_path, e))?;
    Ok(rows)
}
