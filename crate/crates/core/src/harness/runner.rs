//! Experiment execution and the files it leaves behind.
//!
//! Data files (`trials.jsonl`, `trials.csv`, `summary.json`, `config.toml`)
//! depend only on the config; wall-clock data goes to `metadata.json`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::summary::{summarize, ExperimentSummary};
use super::trial::{run_trial, TrialContext, TrialRecord};
use crate::error::{Error, Result};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const CSV_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const METADATA_FILE: &str = "metadata.json";

/// Trials evaluated between two flushes of `trials.jsonl`.
const CHUNK: usize = 64;

pub const CSV_COLUMNS: &[&str] = &[
    "trial_index",
    "seed",
    "status",
    "lambda",
    "prediction_error",
    "bound_rhs",
    "bound_holds",
    "bound_rhs_analytic",
    "bound_holds_analytic",
    "delta_empirical",
    "delta_analytic",
    "proxy_discrepancy",
    "center_energy",
    "signal_energy",
    "center_gram_dev",
    "design_gram_dev",
    "noise_corr_inf",
    "compatibility",
    "event_1",
    "event_2",
    "event_3",
    "event_4",
    "rho_measured",
    "norm_a",
    "norm_b",
    "norm_a_star",
    "norm_b_star",
    "step1_residual",
    "assumptions",
    "solver_iterations",
    "duality_gap",
];

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Debug, Serialize)]
struct Metadata {
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
    workers: usize,
    host: Option<String>,
    version: &'static str,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every trial in index order, `workers` at a time (0 = all cores).
pub fn run_trials(config: &ExperimentConfig, mut sink: impl FnMut(&[TrialRecord]) -> Result<()>) -> Result<Vec<TrialRecord>> {
    let ctx = TrialContext::new(config)?;
    let pool = pool(config.experiment.workers)?;
    let total = config.experiment.trials as u64;
    let mut records = Vec::with_capacity(total as usize);
    let mut start = 0u64;
    while start < total {
        let end = (start + CHUNK as u64).min(total);
        let chunk: Vec<TrialRecord> =
            pool.install(|| (start..end).into_par_iter().map(|i| run_trial(&ctx, i)).collect());
        sink(&chunk)?;
        records.extend(chunk);
        start = end;
    }
    Ok(records)
}

pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let started = unix_now();
    let clock = Instant::now();
    write_file(&out.join(CONFIG_FILE), config.to_toml().as_bytes())?;

    let trials_path = out.join(TRIALS_FILE);
    let file = File::create(&trials_path).map_err(|e| io_err(&trials_path, e))?;
    let mut writer = BufWriter::new(file);
    let records = run_trials(config, |chunk| {
        for rec in chunk {
            let line = serde_json::to_string(rec).map_err(|e| io_err(&trials_path, e))?;
            writeln!(writer, "{line}").map_err(|e| io_err(&trials_path, e))?;
        }
        writer.flush().map_err(|e| io_err(&trials_path, e))
    })?;
    drop(writer);

    let summary = write_outputs(config, &records, out)?;
    let meta = Metadata {
        started_unix: started,
        finished_unix: unix_now(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        workers: if config.experiment.workers == 0 {
            rayon::current_num_threads()
        } else {
            config.experiment.workers
        },
        host: std::env::var("HOSTNAME").ok(),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&out.join(METADATA_FILE), &meta)?;
    Ok(summary)
}

/// Writes `summary.json` and `trials.csv` for the given records.
pub fn write_outputs(config: &ExperimentConfig, records: &[TrialRecord], out: &Path) -> Result<ExperimentSummary> {
    let summary = summarize(config, records);
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    write_file(&out.join(CSV_FILE), to_csv(records).as_bytes())?;
    Ok(summary)
}

pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Rebuilds the summary and CSV of an experiment directory from its records.
pub fn report(dir: &Path) -> Result<ExperimentSummary> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let records = load_records(&dir.join(TRIALS_FILE))?;
    write_outputs(&config, &records, dir)
}

pub fn experiment_files(dir: &Path) -> Vec<PathBuf> {
    [CONFIG_FILE, TRIALS_FILE, CSV_FILE, SUMMARY_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn to_csv(records: &[TrialRecord]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for rec in records {
        let Some(r) = &rec.result else {
            let _ = write!(s, "{},{},failed", rec.trial_index, rec.seed);
            s.push_str(&",".repeat(CSV_COLUMNS.len() - 3));
            s.push('\n');
            continue;
        };
        let c = &r.conditions;
        let d = &c.decomposition;
        let fields: Vec<String> = vec![
            rec.trial_index.to_string(),
            rec.seed.to_string(),
            "ok".into(),
            r.lambda.to_string(),
            r.prediction_error.to_string(),
            opt(r.bound_rhs),
            r.bound_holds.map(|b| flag(b).to_string()).unwrap_or_default(),
            opt(r.bound_rhs_analytic),
            r.bound_holds_analytic.map(|b| flag(b).to_string()).unwrap_or_default(),
            opt(r.delta_empirical),
            opt(r.delta_analytic),
            r.proxy_discrepancy.to_string(),
            r.center_energy.to_string(),
            r.signal_energy.to_string(),
            c.center_gram_dev.to_string(),
            c.design_gram_dev.to_string(),
            c.noise_corr_inf.to_string(),
            opt(c.compatibility.map(|x| x.total)),
            flag(c.event_flags[0]).into(),
            flag(c.event_flags[1]).into(),
            flag(c.event_flags[2]).into(),
            flag(c.event_flags[3]).into(),
            c.rho_measured.to_string(),
            d.a.to_string(),
            d.b.to_string(),
            d.a_star.to_string(),
            d.b_star.to_string(),
            r.step1_residual.to_string(),
            r.assumption_flags.iter().map(|&b| flag(b)).collect(),
            r.solver.iterations.to_string(),
            r.solver.duality_gap.to_string(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}
