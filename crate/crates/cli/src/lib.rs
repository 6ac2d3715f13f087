//! Command-line front end for the pfcm segmentation engines.

pub mod bench;

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pfcm_core::imgio::{self, CLASS_NAMES};
use pfcm_core::metrics::{self, DscReport};
use pfcm_core::parallel::ParallelEngine;
use pfcm_core::{fcm, FcmConfig, FcmResult, GrayImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Sequential,
    Parallel,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Sequential => "sequential",
            Engine::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "pfcm", version, about = "Fuzzy C-Means image segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a PGM image and write the label map as a PGM.
    Segment {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        fcm: FcmArgs,
        #[arg(long, value_enum, default_value_t = Engine::Parallel)]
        engine: Engine,
    },
    /// Score a label map against a ground-truth directory with the Dice coefficient.
    Dsc {
        prediction: PathBuf,
        truth_dir: PathBuf,
        #[arg(short = 'c', long, default_value_t = 4)]
        clusters: usize,
    },
    /// Time both engines on enlarged copies of an image.
    Bench {
        input: PathBuf,
        /// Target dataset sizes in bytes (suffixes K and M accepted).
        #[arg(long, value_delimiter = ',', value_parser = bench::parse_size, default_value = "20K,40K,80K")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[command(flatten)]
        fcm: FcmArgs,
        /// Per-run CSV; the summary table goes next to it as `<stem>.summary.csv`.
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Run both engines with the same seed and report how far apart they are.
    Compare {
        input: PathBuf,
        #[command(flatten)]
        fcm: FcmArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct FcmArgs {
    #[arg(short = 'c', long, default_value_t = 4)]
    pub clusters: usize,
    /// Fuzzifier.
    #[arg(long, default_value_t = 2.0)]
    pub m: f64,
    #[arg(long, default_value_t = 0.005)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub block_size: usize,
    /// Worker threads for the parallel engine (default: available CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl FcmArgs {
    pub fn config(&self) -> Result<FcmConfig> {
        let cfg = FcmConfig {
            clusters: self.clusters,
            fuzzifier: self.m,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            seed: self.seed,
            block_size: self.block_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn engine(&self) -> Result<ParallelEngine> {
        Ok(match self.workers {
            Some(n) => ParallelEngine::new(n)?,
            None => ParallelEngine::with_available_parallelism()?,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment {
            input,
            output,
            fcm,
            engine,
        } => {
            let summary = cmd_segment(&input, &output, &fcm, engine)?;
            print!("{summary}");
        }
        Command::Dsc {
            prediction,
            truth_dir,
            clusters,
        } => {
            let report = cmd_dsc(&prediction, &truth_dir, clusters)?;
            print!("{}", DscTable(&report));
        }
        Command::Bench {
            input,
            sizes,
            runs,
            fcm,
            out,
        } => {
            let report = cmd_bench(&input, &sizes, runs, &fcm, &out)?;
            print!("{report}");
        }
        Command::Compare { input, fcm } => {
            let report = cmd_compare(&input, &fcm)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<GrayImage> {
    imgio::read_pgm(path).with_context(|| format!("cannot read input image {}", path.display()))
}

pub struct SegmentSummary {
    pub engine: Engine,
    pub result: FcmResult,
}

impl fmt::Display for SegmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.result;
        writeln!(f, "engine: {}", self.engine)?;
        writeln!(f, "iterations: {}", r.iterations)?;
        writeln!(f, "converged: {}", r.converged)?;
        writeln!(f, "final delta: {:e}", r.final_delta)?;
        writeln!(f, "objective: {}", r.final_objective())?;
        let centers: Vec<String> = r.centers.as_slice().iter().map(|v| format!("{v:.4}")).collect();
        writeln!(f, "centers: {}", centers.join(" "))
    }
}

pub fn cmd_segment(input: &Path, output: &Path, args: &FcmArgs, engine: Engine) -> Result<SegmentSummary> {
    let cfg = args.config()?;
    let img = read_input(input)?;
    let result = match engine {
        Engine::Sequential => fcm::run_fcm_sequential(&img, &cfg)?,
        Engine::Parallel => args.engine()?.run(&img, &cfg)?,
    };
    imgio::write_pgm(&result.labels, output)
        .with_context(|| format!("cannot write label map {}", output.display()))?;
    Ok(SegmentSummary { engine, result })
}

/// Per-class Dice table, as fractions and percentages.
pub struct DscTable<'a>(pub &'a DscReport);

impl fmt::Display for DscTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>10} {:>10}", "class", "dsc", "percent")?;
        for (name, d) in &self.0.per_class {
            writeln!(f, "{name:<12} {d:>10.6} {:>9.2}%", 100.0 * d)?;
        }
        Ok(())
    }
}

pub fn cmd_dsc(prediction: &Path, truth_dir: &Path, clusters: usize) -> Result<DscReport> {
    ensure!(
        clusters == CLASS_NAMES.len(),
        "ground truth has {} classes but --clusters is {clusters}",
        CLASS_NAMES.len()
    );
    let pred = imgio::read_label_map(prediction, clusters)
        .with_context(|| format!("cannot read label map {}", prediction.display()))?;
    let truth = imgio::read_ground_truth(truth_dir)
        .with_context(|| format!("cannot read ground truth in {}", truth_dir.display()))?;
    for w in &truth.warnings {
        eprintln!("warning: {w}");
    }
    let reference = truth.reference_labels()?;
    let perm = metrics::match_clusters(&pred, &reference, clusters)?;
    let aligned = pred.relabel(&perm)?;
    let mut report = DscReport::default();
    for (k, name) in CLASS_NAMES.iter().enumerate() {
        let d = metrics::dsc(&metrics::mask_for_class(&aligned, k), &truth.masks[*name])?;
        report.per_class.insert(name.to_string(), d);
    }
    Ok(report)
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.csv")
}

pub fn cmd_bench(input: &Path, sizes: &[usize], runs: usize, args: &FcmArgs, out: &Path) -> Result<bench::BenchReport> {
    let cfg = args.config()?;
    let img = read_input(input)?;
    let report = bench::run_bench(&img, sizes, runs, &cfg, &args.engine()?)?;
    let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    bench::write_rows(&report.rows, BufWriter::new(file))?;
    let summary = summary_path(out);
    let file = File::create(&summary).with_context(|| format!("cannot create {}", summary.display()))?;
    bench::write_summary(&report.summary, BufWriter::new(file))?;
    Ok(report)
}

pub struct CompareReport {
    pub sequential: FcmResult,
    pub parallel: FcmResult,
    pub max_membership_diff: f64,
    pub label_agreement: f64,
    pub dsc: DscReport,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "iterations: sequential {} / parallel {}",
            self.sequential.iterations, self.parallel.iterations
        )?;
        writeln!(f, "max membership difference: {:e}", self.max_membership_diff)?;
        writeln!(f, "label agreement: {:.4}%", 100.0 * self.label_agreement)?;
        writeln!(f, "cross-engine dsc:")?;
        write!(f, "{}", DscTable(&self.dsc))
    }
}

pub fn cmd_compare(input: &Path, args: &FcmArgs) -> Result<CompareReport> {
    let cfg = args.config()?;
    let img = read_input(input)?;
    compare_engines(&img, &cfg, &args.engine()?)
}

/// Runs both engines from the same seed. Per-class DSC is taken between the
/// two label maps directly, since both share the same initial membership.
pub fn compare_engines(img: &GrayImage, cfg: &FcmConfig, engine: &ParallelEngine) -> Result<CompareReport> {
    let sequential = fcm::run_fcm_sequential(img, cfg)?;
    let parallel = engine.run(img, cfg)?;
    let max_membership_diff = sequential.membership.max_abs_diff(&parallel.membership)?;
    let agree = sequential
        .labels
        .labels()
        .iter()
        .zip(parallel.labels.labels())
        .filter(|(a, b)| a == b)
        .count();
    let names: Vec<String> = (0..cfg.clusters).map(|j| format!("cluster{j}")).collect();
    let dsc = metrics::per_class_dsc(&parallel.labels, &sequential.labels, &names)?;
    Ok(CompareReport {
        label_agreement: agree as f64 / img.len() as f64,
        sequential,
        parallel,
        max_membership_diff,
        dsc,
    })
}
