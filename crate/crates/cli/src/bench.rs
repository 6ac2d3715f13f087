//! Timing harness: enlarge a dataset to each target size, time both engines
//! over repeated runs and summarize in the sequential-vs-parallel table form.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use pfcm_core::parallel::ParallelEngine;
use pfcm_core::{fcm, imgio, FcmConfig, GrayImage};
use serde::{Deserialize, Serialize};

use crate::Engine;

/// One timed run, as stored in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset_bytes: usize,
    pub engine: Engine,
    pub run: usize,
    pub seconds: f64,
    pub iterations: usize,
}

/// All runs of one engine at one dataset size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub dataset_bytes: usize,
    pub engine: Engine,
    pub runs: usize,
    pub mean_seconds: f64,
    pub run_seconds: Vec<f64>,
    pub iterations: usize,
    /// Sequential mean divided by this record's mean.
    pub speedup: f64,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset_bytes: usize,
    pub pixels: usize,
    pub sequential_seconds: f64,
    pub parallel_seconds: f64,
    pub speedup: f64,
    pub sequential_iterations: usize,
    pub parallel_iterations: usize,
    pub baseline: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
    pub workers: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Groups rows by (size, engine). Speedups are relative to the sequential
/// record of the same size.
pub fn records_from_rows(rows: &[BenchRow]) -> Result<Vec<BenchRecord>> {
    let mut groups: BTreeMap<(usize, Engine), Vec<&BenchRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.dataset_bytes, row.engine)).or_default().push(row);
    }
    let mut records: Vec<BenchRecord> = groups
        .into_iter()
        .map(|((dataset_bytes, engine), mut group)| {
            group.sort_by_key(|r| r.run);
            let run_seconds: Vec<f64> = group.iter().map(|r| r.seconds).collect();
            let iterations = group[0].iterations;
            if group.iter().any(|r| r.iterations != iterations) {
                log::warn!("{engine} at {dataset_bytes} bytes: iteration counts differ between runs");
            }
            BenchRecord {
                dataset_bytes,
                engine,
                runs: group.len(),
                mean_seconds: mean(&run_seconds),
                run_seconds,
                iterations,
                speedup: f64::NAN,
            }
        })
        .collect();
    let baselines: BTreeMap<usize, f64> = records
        .iter()
        .filter(|r| r.engine == Engine::Sequential)
        .map(|r| (r.dataset_bytes, r.mean_seconds))
        .collect();
    for r in &mut records {
        let base = baselines
            .get(&r.dataset_bytes)
            .with_context(|| format!("no sequential baseline at {} bytes", r.dataset_bytes))?;
        r.speedup = base / r.mean_seconds;
    }
    Ok(records)
}

pub fn write_rows<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    ensure!(
        headers.iter().eq(["dataset_bytes", "engine", "run", "seconds", "iterations"]),
        "unexpected bench CSV header {headers:?}"
    );
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a size such as `20480`, `20K` or `20KB` (K = 1024 bytes).
pub fn parse_size(s: &str) -> Result<usize, String> {
    let t = s.trim();
    let upper = t.to_ascii_uppercase();
    let (digits, scale) = if let Some(d) = upper.strip_suffix("KB").or_else(|| upper.strip_suffix('K')) {
        (d.to_string(), 1024)
    } else if let Some(d) = upper.strip_suffix("MB").or_else(|| upper.strip_suffix('M')) {
        (d.to_string(), 1024 * 1024)
    } else {
        (upper.clone(), 1)
    };
    let n: usize = digits
        .trim()
        .parse()
        .map_err(|_| format!("invalid size {s:?}"))?;
    if n == 0 {
        return Err(format!("size {s:?} must be positive"));
    }
    Ok(n * scale)
}

/// Times both engines at every size. Only the iteration loop is timed:
/// enlargement, membership initialization and file I/O happen outside it.
pub fn run_bench(
    base: &GrayImage,
    sizes: &[usize],
    runs: usize,
    cfg: &FcmConfig,
    engine: &ParallelEngine,
) -> Result<BenchReport> {
    ensure!(runs >= 1, "runs must be at least 1");
    ensure!(!sizes.is_empty(), "no dataset sizes given");
    if let Some(w) = sizes.windows(2).find(|w| w[1] < w[0]) {
        bail!("sizes must be non-decreasing, got {} after {}", w[1], w[0]);
    }
    cfg.validate()?;

    let mut rows = Vec::new();
    let mut pixels_at = BTreeMap::new();
    for &size in sizes {
        let img = imgio::enlarge_dataset(base, size);
        pixels_at.insert(size, img.len());
        let u0 = fcm::init_membership(img.len(), cfg)?;
        log::info!("{size} bytes: {}x{} pixels", img.width(), img.height());
        for which in [Engine::Sequential, Engine::Parallel] {
            for run in 1..=runs {
                let start_u = u0.clone();
                let t = Instant::now();
                let result = match which {
                    Engine::Sequential => fcm::run_fcm_sequential_from(&img, cfg, start_u)?,
                    Engine::Parallel => engine.run_from(&img, cfg, start_u)?,
                };
                let seconds = t.elapsed().as_secs_f64();
                rows.push(BenchRow {
                    dataset_bytes: size,
                    engine: which,
                    run,
                    seconds,
                    iterations: result.iterations,
                });
            }
        }
    }

    let records = records_from_rows(&rows)?;
    let summary = summarize(&records, &pixels_at);
    Ok(BenchReport {
        rows,
        records,
        summary,
        workers: engine.workers(),
    })
}

fn summarize(records: &[BenchRecord], pixels_at: &BTreeMap<usize, usize>) -> Vec<SummaryRow> {
    let mut summary = Vec::new();
    // sizes may repeat in the input; each appears once here
    for (&size, &pixels) in pixels_at {
        let find = |e| records.iter().find(|r| r.dataset_bytes == size && r.engine == e);
        if let (Some(s), Some(p)) = (find(Engine::Sequential), find(Engine::Parallel)) {
            summary.push(SummaryRow {
                dataset_bytes: size,
                pixels,
                sequential_seconds: s.mean_seconds,
                parallel_seconds: p.mean_seconds,
                speedup: p.speedup,
                sequential_iterations: s.iterations,
                parallel_iterations: p.iterations,
                baseline: "sequential".into(),
            });
        }
    }
    summary
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Execution time in seconds, mean of {} runs (parallel engine: {} workers; speedup baseline: sequential)",
            self.records.first().map_or(0, |r| r.runs),
            self.workers
        )?;
        writeln!(
            f,
            "{:>12} {:>10} {:>16} {:>16} {:>10} {:>12}",
            "Dataset (KB)", "Pixels", "Sequential (s)", "Parallel (s)", "Speedup", "Iterations"
        )?;
        for row in &self.summary {
            writeln!(
                f,
                "{:>12.2} {:>10} {:>16.6} {:>16.6} {:>10.2} {:>12}",
                row.dataset_bytes as f64 / 1024.0,
                row.pixels,
                row.sequential_seconds,
                row.parallel_seconds,
                row.speedup,
                row.sequential_iterations
            )?;
        }
        Ok(())
    }
}
