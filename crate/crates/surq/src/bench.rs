//! Replicated benchmark runs, result rows and summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surq_core::testbed::{error_metric, oracle_percentile, OracleEstimate};

use crate::config::{BenchmarkConfig, OutputFormat};
use crate::engine::{self, Criterion, RunRecord};

/// One iteration of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub preset: String,
    pub criterion: Criterion,
    pub replication: usize,
    pub iteration: usize,
    pub n_evaluations: usize,
    pub estimate: f64,
    pub q_true: f64,
    pub error_percent: f64,
    pub wall_time_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub criterion: Criterion,
    pub replication: usize,
    pub seed: u64,
    pub message: String,
}

/// Error curve of one criterion across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub criterion: Criterion,
    pub iterations: Vec<usize>,
    pub mean: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    /// Replications contributing at each iteration.
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInfo {
    #[serde(flatten)]
    pub estimate: OracleEstimate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub preset: String,
    pub oracle: OracleInfo,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub replications: usize,
    pub curves: Vec<ErrorCurve>,
    pub failures: Vec<ReplicationFailure>,
}

/// Row of the plot-data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub iteration: usize,
    pub criterion: Criterion,
    pub mean_error: f64,
    pub q10: f64,
    pub q90: f64,
}

#[derive(Debug)]
pub struct BenchmarkOutcome {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub runs: Vec<(Criterion, usize, RunRecord)>,
}

impl BenchmarkOutcome {
    pub fn failed(&self) -> bool {
        !self.summary.failures.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Model(#[from] surq_core::Error),
    #[error("{0}")]
    Schema(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot encode results: {0}")]
    Encode(String),
}

/// Ground truth for a config, from its own seed.
pub fn oracle(config: &BenchmarkConfig) -> Result<OracleInfo, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.oracle_seed);
    let estimate = oracle_percentile(&config.experiment, &mut rng)?;
    Ok(OracleInfo { estimate, seed: config.oracle_seed })
}

/// Runs every criterion and replication of `config`. The oracle is computed
/// once and shared. A failing replication is recorded in the summary (with
/// the rows it produced before failing) and the others go on.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutcome, BenchError> {
    let oracle = oracle(config)?;
    let range = (oracle.estimate.range_lo, oracle.estimate.range_hi);
    let q_true = oracle.estimate.q_true;

    let jobs: Vec<(Criterion, usize)> =
        config.criteria.iter().flat_map(|&c| (0..config.experiment.replications).map(move |r| (c, r))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(criterion, r)| {
            let sur = config.run_config(criterion, r);
            log::info!("{}: {} replication {r} (seed {})", config.name, criterion.name(), sur.seed);
            (criterion, r, sur.seed, engine::run(&config.experiment, &sur))
        })
        .collect();

    let mut rows = Vec::with_capacity(config.expected_rows());
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for (criterion, replication, seed, result) in results {
        let record = match result {
            Ok(record) => record,
            Err(e) => {
                failures.push(ReplicationFailure { criterion, replication, seed, message: e.to_string() });
                continue;
            }
        };
        for it in &record.iterations {
            rows.push(ResultRow {
                preset: config.name.clone(),
                criterion,
                replication,
                iteration: it.iteration,
                n_evaluations: it.n_evaluations,
                estimate: it.estimate,
                q_true,
                error_percent: error_metric(it.estimate, q_true, range)?,
                wall_time_ms: it.wall_time_ms,
                seed,
            });
        }
        if let Some(message) = &record.failure {
            failures.push(ReplicationFailure { criterion, replication, seed, message: message.clone() });
        }
        runs.push((criterion, replication, record));
    }

    let curves = error_curves(&rows, &config.criteria);
    let summary = Summary {
        preset: config.name.clone(),
        oracle,
        master_seed: config.sur.seed,
        seed_derivation: "replication r runs with seed master_seed + r; each seed feeds independent \
                          streams for the initial design, clouds, pools, shortlists, the baseline and \
                          likelihood restarts"
            .into(),
        replications: config.experiment.replications,
        curves,
        failures,
    };
    Ok(BenchmarkOutcome { rows, summary, runs })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn error_curves(rows: &[ResultRow], criteria: &[Criterion]) -> Vec<ErrorCurve> {
    criteria
        .iter()
        .map(|&criterion| {
            let mut by_iter: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
            for r in rows.iter().filter(|r| r.criterion == criterion) {
                by_iter.entry(r.iteration).or_default().push(r.error_percent);
            }
            let mut curve =
                ErrorCurve { criterion, iterations: vec![], mean: vec![], q10: vec![], q90: vec![], count: vec![] };
            for (it, mut errs) in by_iter {
                errs.sort_by(f64::total_cmp);
                curve.iterations.push(it);
                curve.mean.push(errs.iter().sum::<f64>() / errs.len() as f64);
                curve.q10.push(quantile(&errs, 0.1));
                curve.q90.push(quantile(&errs, 0.9));
                curve.count.push(errs.len());
            }
            curve
        })
        .collect()
}

/// Long-format plot data: one row per criterion and iteration.
pub fn emit_plotdata(rows: &[ResultRow]) -> Result<Vec<PlotRow>, BenchError> {
    let Some(first) = rows.first() else {
        return Err(BenchError::Schema("no result rows".into()));
    };
    if let Some(other) = rows.iter().find(|r| r.preset != first.preset) {
        return Err(BenchError::Schema(format!("rows mix presets `{}` and `{}`", first.preset, other.preset)));
    }
    if let Some(bad) = rows.iter().find(|r| !r.error_percent.is_finite()) {
        return Err(BenchError::Schema(format!("non-finite error at iteration {}", bad.iteration)));
    }
    let mut criteria: Vec<Criterion> = Vec::new();
    for r in rows {
        if !criteria.contains(&r.criterion) {
            criteria.push(r.criterion);
        }
    }
    let mut out = Vec::new();
    for curve in error_curves(rows, &criteria) {
        for (i, &iteration) in curve.iterations.iter().enumerate() {
            out.push(PlotRow {
                iteration,
                criterion: curve.criterion,
                mean_error: curve.mean[i],
                q10: curve.q10[i],
                q90: curve.q90[i],
            });
        }
    }
    Ok(out)
}

/// Paths of the files written for one benchmark.
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
    pub config: PathBuf,
}

impl OutputFiles {
    pub fn new(dir: &Path, name: &str, format: OutputFormat) -> Self {
        Self {
            results: dir.join(format!("{name}.results.{}", format.extension())),
            summary: dir.join(format!("{name}.summary.json")),
            plot: dir.join(format!("{name}.plot.csv")),
            config: dir.join(format!("{name}.config.json")),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|source| BenchError::Io { path: path.into(), source })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.into(), source }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<(), BenchError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(|e| BenchError::Encode(e.to_string()))?;
            }
            w.flush().map_err(|e| BenchError::Encode(e.to_string()))
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| BenchError::Encode(e.to_string()))?;
                out.write_all(b"\n").map_err(|e| BenchError::Encode(e.to_string()))?;
            }
            out.flush().map_err(|e| BenchError::Encode(e.to_string()))
        }
    }
}

pub fn read_rows(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| BenchError::Schema(e.to_string())),
        OutputFormat::Jsonl => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| BenchError::Schema(e.to_string())))
            .collect(),
    }
}

/// Writes results, summary, plot data and the resolved config into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &BenchmarkConfig,
    outcome: &BenchmarkOutcome,
) -> Result<OutputFiles, BenchError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = OutputFiles::new(dir, &config.name, config.output_format);

    write_rows(&outcome.rows, config.output_format, create(&files.results)?)?;

    let mut w = create(&files.summary)?;
    serde_json::to_writer_pretty(&mut w, &outcome.summary).map_err(|e| BenchError::Encode(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(&files.summary))?;

    if !outcome.rows.is_empty() {
        let plot = emit_plotdata(&outcome.rows)?;
        let mut w = csv::Writer::from_writer(create(&files.plot)?);
        for r in &plot {
            w.serialize(r).map_err(|e| BenchError::Encode(e.to_string()))?;
        }
        w.flush().map_err(io_err(&files.plot))?;
    }

    let mut w = create(&files.config)?;
    w.write_all(config.to_json().as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(io_err(&files.config))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(criterion: Criterion, replication: usize, iteration: usize, err: f64) -> ResultRow {
        ResultRow {
            preset: "p".into(),
            criterion,
            replication,
            iteration,
            n_evaluations: 5 + iteration,
            estimate: 0.0,
            q_true: 0.0,
            error_percent: err,
            wall_time_ms: 1.0,
            seed: replication as u64,
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0];
        assert_eq!(quantile(&v, 0.1), 2.0);
        assert_eq!(quantile(&v, 0.9), 10.0);
        assert_eq!(quantile(&[1.0, 3.0], 0.25), 1.5);
        assert_eq!(quantile(&[4.0], 0.9), 4.0);
    }

    #[test]
    fn single_replication_curve_is_degenerate() {
        let rows: Vec<_> = (0..4).map(|i| row(Criterion::Var, 0, i, 10.0 - i as f64)).collect();
        for p in emit_plotdata(&rows).unwrap() {
            assert_eq!(p.mean_error, p.q10);
            assert_eq!(p.q10, p.q90);
        }
    }

    #[test]
    fn constant_errors_give_flat_curves() {
        let rows: Vec<_> = (0..10).flat_map(|r| (0..6).map(move |i| row(Criterion::Prob, r, i, 2.5))).collect();
        let plot = emit_plotdata(&rows).unwrap();
        assert_eq!(plot.len(), 6);
        assert!(plot.iter().all(|p| p.mean_error == 2.5 && p.q10 == 2.5 && p.q90 == 2.5));
    }

    #[test]
    fn plotdata_rejects_bad_input() {
        assert!(emit_plotdata(&[]).is_err());
        let mut rows = vec![row(Criterion::Prob, 0, 0, 1.0), row(Criterion::Prob, 1, 0, 1.0)];
        rows[1].preset = "other".into();
        assert!(emit_plotdata(&rows).is_err());
        rows[1].preset = "p".into();
        rows[1].error_percent = f64::NAN;
        assert!(emit_plotdata(&rows).is_err());
    }
}
