use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use minwise::analysis::grid::{grid_csv_fields, grid_csv_header};
use minwise::analysis::simulate::CSV_HEADER as SIM_HEADER;
use minwise::analysis::{
    format_float, run_simulation, variance_ratio_grid, Comparison, CsvWriter, SamplingMode, SimEstimator,
    SimulationSpec, VarianceGridSpec,
};
use minwise::corpus::{
    pair_ratio_stats_exhaustive, pair_ratio_stats_sampled, read_corpus, size_histogram, InputFormat,
};
use minwise::hashing::{
    estimate_from_sketches, sketch_minwise, sketch_minwise_in_universe, truncate_to_bbit, HashFamily, Sketch,
};
use minwise::minwise::EstimatorTag;
use minwise::{PairGroundTruth, UniverseConfig};

#[derive(Parser)]
#[command(name = "minwise", version, about = "Minwise and b-bit minwise sketches with MLE intersection estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch every set of a corpus into <out-dir>/<id>.mhs.
    Sketch(SketchArgs),
    /// Estimate intersection, resemblance and containment from two sketches.
    Estimate(EstimateArgs),
    /// Asymptotic variance ratios over an (r2/r1, s/r2) grid, as CSV.
    Grid(GridArgs),
    /// Monte Carlo bias and MSE of the estimators, as CSV.
    Simulate(SimulateArgs),
    /// Set-size histogram and pairwise size-ratio statistics of a corpus.
    Stats(StatsArgs),
}

#[derive(clap::Args)]
struct SketchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "lines")]
    format: InputFormat,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only the lowest b bits of each minimum.
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Sketch as ranks in a permutation of {0, .., D-1} instead of 64-bit hashes.
    #[arg(long, value_name = "D")]
    universe: Option<u64>,
}

#[derive(clap::Args)]
struct EstimateArgs {
    #[arg(long, value_name = "SKETCH")]
    a: PathBuf,
    #[arg(long, value_name = "SKETCH")]
    b: PathBuf,
    /// standard, less, greater, mle, bbit-full, bbit-do, bbit-d, bbit-3 or bbit-eq
    #[arg(long, default_value = "mle")]
    estimator: EstimatorTag,
    /// Universe size D used to turn b-bit sketches into rates.
    #[arg(long, value_name = "D")]
    universe: Option<u64>,
}

#[derive(clap::Args)]
struct GridArgs {
    /// 0 for plain minwise hashing.
    #[arg(long, default_value_t = 0)]
    b: u32,
    #[arg(long, default_value_t = 0.5)]
    r1: f64,
    /// Ratio to report, e.g. eq/mle or 3/full; repeatable.
    #[arg(long)]
    compare: Vec<String>,
    #[arg(long, default_value_t = 50)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    f1: u64,
    #[arg(long)]
    f2: u64,
    #[arg(long)]
    a: u64,
    /// Universe size; 2^64 when omitted.
    #[arg(long = "D", value_name = "D")]
    universe: Option<u64>,
    /// Sample size; repeatable.
    #[arg(long, required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "standard,mle")]
    estimators: Vec<SimEstimator>,
    /// Bits for the bbit-* estimators.
    #[arg(long, default_value_t = 1)]
    bits: u32,
    #[arg(long, default_value = "model")]
    mode: SamplingMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "lines")]
    format: InputFormat,
    /// Sample this many pairs instead of enumerating all of them.
    #[arg(long, value_name = "N")]
    pairs_sample: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Write the set-size histogram as CSV here.
    #[arg(long, value_name = "PATH")]
    histogram: Option<PathBuf>,
}

fn universe(d: Option<u64>) -> Result<UniverseConfig> {
    Ok(match d {
        Some(d) => UniverseConfig::bounded(d)?,
        None => UniverseConfig::Full,
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_sketch(args: SketchArgs) -> Result<()> {
    let sets = read_corpus(&args.input, args.format).with_context(|| format!("reading {}", args.input.display()))?;
    let mut seen = HashSet::new();
    for s in &sets {
        let id = s.id();
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            bail!("set id {id:?} is not usable as a file name");
        }
        if !seen.insert(id) {
            bail!("duplicate set id {id:?}");
        }
    }
    let family = HashFamily::new(args.seed, args.k)?;
    let full = match universe(args.universe)? {
        UniverseConfig::Bounded(d) => sketch_minwise_in_universe(&sets, &family, d.get())?,
        UniverseConfig::Full => sets.par_iter().map(|s| sketch_minwise(s, &family)).collect(),
    };
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    for (set, sk) in sets.iter().zip(full) {
        let sketch = match args.b {
            Some(b) => Sketch::BBit(truncate_to_bbit(&sk, b)?),
            None => Sketch::Full(sk),
        };
        let path = args.out_dir.join(format!("{}.mhs", set.id()));
        sketch.write_file(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let s1 = Sketch::read_file(&args.a).with_context(|| format!("reading {}", args.a.display()))?;
    let s2 = Sketch::read_file(&args.b).with_context(|| format!("reading {}", args.b.display()))?;
    let est = estimate_from_sketches(&s1, &s2, args.estimator, &universe(args.universe)?)?;
    let mut w = CsvWriter::new(
        output(None)?,
        &["a_hat", "resemblance", "containment", "std_error", "estimator", "k", "b", "at_boundary"],
    )?;
    w.row(&[
        format_float(est.a_hat),
        format_float(est.r_hat),
        format_float(est.t_hat),
        format_float(est.std_error()),
        est.estimator.to_string(),
        s1.k().to_string(),
        s1.b().unwrap_or(64).to_string(),
        est.at_boundary.to_string(),
    ])?;
    w.into_inner().flush()?;
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    if args.resolution < 2 {
        bail!("resolution must be at least 2");
    }
    let mut spec = VarianceGridSpec::standard(args.b, args.r1, args.resolution);
    if !args.compare.is_empty() {
        spec.comparisons = args
            .compare
            .iter()
            .map(|c| Comparison::parse(c, args.b))
            .collect::<minwise::Result<_>>()?;
    }
    let rows = variance_ratio_grid(&spec)?;
    let header = grid_csv_header(&spec);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::new(output(args.out.as_deref())?, &header)?;
    for row in &rows {
        w.row(&grid_csv_fields(row))?;
    }
    w.into_inner().flush()?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let spec = SimulationSpec {
        ground_truth: PairGroundTruth::new(args.f1, args.f2, args.a)?,
        universe: universe(args.universe)?,
        k_values: args.k,
        replications: args.reps,
        seed: args.seed,
        estimators: args.estimators,
        bits: args.bits,
        mode: args.mode,
    };
    let rows = run_simulation(&spec)?;
    let mut w = CsvWriter::new(output(args.out.as_deref())?, &SIM_HEADER)?;
    for row in &rows {
        w.row(&row.csv_fields())?;
    }
    w.into_inner().flush()?;
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let sets = read_corpus(&args.input, args.format).with_context(|| format!("reading {}", args.input.display()))?;
    let sizes: Vec<u64> = sets.iter().map(|s| s.len() as u64).collect();
    if sizes.len() < 2 {
        bail!("need at least two sets, found {}", sizes.len());
    }
    let stats = match args.pairs_sample {
        Some(n) => pair_ratio_stats_sampled(&sizes, n, args.seed)?,
        None => pair_ratio_stats_exhaustive(&sizes),
    };
    let hist = size_histogram(&sizes, args.bins)?;
    let mean_size = sizes.iter().sum::<u64>() as f64 / sizes.len() as f64;

    let mut w = CsvWriter::new(
        output(None)?,
        &[
            "sets", "min_size", "max_size", "mean_size", "pairs", "exhaustive", "ratio_mean", "ratio_std",
            "ratio_std_error",
        ],
    )?;
    w.row(&[
        sizes.len().to_string(),
        sizes.iter().min().expect("non-empty").to_string(),
        sizes.iter().max().expect("non-empty").to_string(),
        format_float(mean_size),
        stats.pairs.to_string(),
        stats.exhaustive.to_string(),
        format_float(stats.mean),
        format_float(stats.std),
        format_float(stats.std_error),
    ])?;
    w.into_inner().flush()?;

    if let Some(path) = args.histogram {
        let mut h = CsvWriter::new(output(Some(&path))?, &["size_lo", "size_hi", "count"])?;
        for (lo, hi, c) in &hist.bins {
            h.row(&[format_float(*lo), format_float(*hi), c.to_string()])?;
        }
        h.into_inner().flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sketch(a) => cmd_sketch(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("minwise: {msg}");
            ExitCode::FAILURE
        }
    }
}
