//! `emcc`: counterfactual bounds, compatibility tests and benchmarks from the
//! command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use emcc_core::data::Dataset;
use emcc_core::em::{bounds, seed_sequence, BoundsOptions, BoundsResult, EmConfig, DEFAULT_CREDIBILITY_EPSILON};
use emcc_core::io::load_model;
use emcc_core::likelihood::{compatibility_test, CompatibilityReport, DEFAULT_COMPAT_TOL};
use emcc_core::oracle::{exact_bounds, run_instance, BenchClass, BenchOptions, BenchRow, BenchmarkSpec};
use emcc_core::query::parse_query;
use emcc_core::scm::Scm;

#[derive(Parser)]
#[command(name = "emcc", version, about = "Causal EM bounds for counterfactual queries")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound a query by running EM from several random starting points.
    Bounds(BoundsArgs),
    /// Test whether the data can come from some quantification of the model.
    Compat(CompatArgs),
    /// Exact bounds by vertex enumeration (at most one exogenous variable per c-component).
    Exact(ExactArgs),
    /// Accuracy of EM bounds against a baseline on random chain models, as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Inputs {
    /// Model file (JSON).
    #[arg(short, long)]
    model: PathBuf,
    /// Data file (CSV, one column per endogenous variable, optional `count`).
    #[arg(short, long)]
    data: PathBuf,
}

#[derive(Args)]
struct EmArgs {
    /// Base seed; run i uses seed + i. Drawn at random and printed if omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop when the summed KL divergence between iterates falls to this.
    #[arg(long, default_value_t = 2.0 * f64::EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            ..EmConfig::default()
        }
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Query, e.g. `pns(X, Y)`, `pn(X=1/0, Y | Z=0)`, `effect(do X=1; Y)`.
    #[arg(short, long)]
    query: String,
    #[arg(short = 'n', long, default_value_t = 20)]
    runs: usize,
    #[command(flatten)]
    em: EmArgs,
    /// Relative error at each end of the interval for the credibility report.
    #[arg(long, default_value_t = DEFAULT_CREDIBILITY_EPSILON)]
    credibility_epsilon: f64,
    /// JSON report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-run convergence traces as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompatArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short = 'n', long, default_value_t = 10)]
    runs: usize,
    #[command(flatten)]
    em: EmArgs,
    /// Largest accepted gap, in nats, between the best run and the data optimum.
    #[arg(long, default_value_t = DEFAULT_COMPAT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short, long)]
    query: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// markovian, quasi-markovian or general.
    #[arg(long, default_value = "markovian")]
    class: BenchClass,
    /// Chain length.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// EM runs per instance; one CSV row per prefix length.
    #[arg(short = 'n', long, default_value_t = 20)]
    runs: usize,
    /// EM runs forming the baseline when exact bounds are unavailable.
    #[arg(long, default_value_t = 1000)]
    reference_runs: usize,
    /// Sampled records per instance.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    #[command(flatten)]
    em: EmArgs,
    /// CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    match cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Compat(a) => cmd_compat(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load(inputs: &Inputs) -> Result<(Scm, Dataset)> {
    let model = load_model(&inputs.model).with_context(|| format!("loading model {}", inputs.model.display()))?;
    let data = Dataset::load_csv(&inputs.data, &model)
        .with_context(|| format!("loading data {}", inputs.data.display()))?;
    Ok((model, data))
}

fn seed(em: &EmArgs) -> u64 {
    em.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let (model, data) = load(&a.inputs)?;
    let query = parse_query(&a.query, Some(&model))?;
    let base = seed(&a.em);
    let opts = BoundsOptions {
        em: EmConfig {
            record_trace: a.trace.is_some(),
            ..a.em.config()
        },
        credibility_epsilon: a.credibility_epsilon,
    };
    let result = bounds(&model, &data, &query, &seed_sequence(base, a.runs), &opts)?;
    if let Some(t) = &a.trace {
        let mut w = BufWriter::new(File::create(t).with_context(|| format!("creating {}", t.display()))?);
        result.write_trace(&mut w)?;
        w.flush()?;
    }
    summarize_bounds(&result, base);
    write_json(&result, a.out.as_deref())
}

fn summarize_bounds(r: &BoundsResult, seed: u64) {
    let c = &r.credibility;
    eprintln!("query        {}", r.query);
    eprintln!("interval     [{:.6}, {:.6}]", r.lower, r.upper);
    eprintln!("runs         {} valid, {} excluded (seed {seed})", r.values.len(), r.excluded.len());
    match c.probability {
        Some(p) => eprintln!(
            "credibility  {p:.4} that both ends are within {:.2}% of the width (delta {:.3e})",
            100.0 * c.epsilon_rel,
            c.delta
        ),
        None => eprintln!("credibility  n/a"),
    }
    if let Some(note) = &c.note {
        eprintln!("note         {note}");
    }
}

fn cmd_compat(a: CompatArgs) -> Result<()> {
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let (model, data) = load(&a.inputs)?;
    let base = seed(&a.em);
    let report = compatibility_test(&model, &data, &seed_sequence(base, a.runs), a.tol, &a.em.config())?;
    summarize_compat(&report);
    write_json(&report, a.out.as_deref())
}

fn summarize_compat(r: &CompatibilityReport) {
    eprintln!("verdict      {:?}", r.verdict);
    eprintln!("LL*          {:.6}", r.ll_star);
    if let (Some(b), Some(g)) = (r.best_ll, r.gap) {
        eprintln!("best LL      {b:.6} (gap {g:.3e}, tol {:.1e})", r.tol);
    }
    eprintln!("runs         {} converged of {}", r.converged_runs, r.runs);
}

fn cmd_exact(a: ExactArgs) -> Result<()> {
    let (model, data) = load(&a.inputs)?;
    let query = parse_query(&a.query, Some(&model))?;
    let e = exact_bounds(&model, &data, &query)?;
    eprintln!("query        {query}");
    eprintln!("interval     [{:.6}, {:.6}]", e.lower, e.upper);
    eprintln!("vertices     {:?} ({} evaluations)", e.vertex_counts, e.evaluations);
    write_json(&e, a.out.as_deref())
}

const BENCH_HEADER: [&str; 13] = [
    "instance", "seed", "class", "m", "topology", "n", "a", "b", "a_star", "b_star", "rmse",
    "wall_time_s", "baseline",
];

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let base = seed(&a.em);
    let opts = BenchOptions {
        runs: a.runs,
        reference_runs: a.reference_runs,
        em: a.em.config(),
    };
    let results: Vec<(usize, emcc_core::Result<Vec<BenchRow>>)> = (0..a.instances)
        .into_par_iter()
        .map(|i| {
            let spec = BenchmarkSpec {
                samples: a.samples,
                ..BenchmarkSpec::new(a.m, a.class, base.wrapping_add(i as u64))
            };
            (i, run_instance(i, &spec, &opts))
        })
        .collect();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output(a.out.as_deref())?);
    w.write_record(BENCH_HEADER)?;
    let mut failed = 0;
    for (i, r) in results {
        match r {
            Ok(rows) => {
                if let Some(last) = rows.last() {
                    eprintln!(
                        "instance {i:>3}  {:<11}  rmse@{} {}",
                        format!("{:?}", last.baseline),
                        last.n,
                        last.rmse.map_or("n/a".into(), |r| format!("{r:.5}"))
                    );
                }
                for row in rows {
                    w.serialize(row)?;
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("instance {i:>3}  skipped: {e}");
            }
        }
    }
    w.flush()?;
    eprintln!("{} instances, {failed} skipped (seed {base})", a.instances);
    Ok(())
}
