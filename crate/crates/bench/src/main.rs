use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use parsco::outer::OuterMode;
use parsco::rank1::MatmulBackend;
use parsco_bench::config::{parse_backend, ExperimentConfig, Overrides};
use parsco_bench::invariants::check_invariants;
use parsco_bench::record::{read_csv, write_csv};
use parsco_bench::runner::run_experiment;
use parsco_bench::scaling::depth_scaling_report;

#[derive(Parser)]
#[command(name = "parsco", version, about = "Benchmarks for parallel stochastic convex optimization")]
struct Cli {
    /// Master seed mixed into every problem and run stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 lets rayon decide).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Chunk parameter C for the SGD engine (C = 1 runs each SGD call as one chunk).
    #[arg(long = "chunk-C", global = true)]
    chunk_c: Option<f64>,
    /// Outer loop for parsco methods.
    #[arg(long, global = true, value_parser = parse_outer)]
    outer: Option<OuterMode>,
    /// Matrix product backend of the rank-1 engine.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<MatmulBackend>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config and write CSV.
    Run {
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify the problem zoo and ledger accounting. Exits with 2 on failure.
    CheckInvariants,
    /// Fit log(query_depth) against log(1/eps) per method.
    ScalingReport { csv: PathBuf },
}

fn parse_outer(s: &str) -> std::result::Result<OuterMode, String> {
    s.parse().map_err(|e: parsco::Error| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config, output } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig = text.parse().with_context(|| format!("in {}", config.display()))?;
            if let Some(c) = cli.chunk_c {
                anyhow::ensure!(c >= 1.0, "--chunk-C must be at least 1");
            }
            cfg.apply(&Overrides {
                outer: cli.outer,
                chunk_c: cli.chunk_c,
                backend: cli.backend,
            });
            eprintln!("running {} cells", cfg.cells());
            let records = run_experiment(&cfg, cli.seed)?;
            for r in &records {
                for w in &r.warnings {
                    eprintln!("warning: {} {} d={} eps={} seed={}: {w}", r.method, r.problem, r.d, r.eps, r.seed);
                }
            }
            let hash = cfg.hash(cli.seed);
            match output {
                Some(path) => write_csv(BufWriter::new(File::create(&path)?), &records, hash)?,
                None => write_csv(io::stdout().lock(), &records, hash)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckInvariants => {
            let results = check_invariants(cli.seed);
            let mut out = io::stdout().lock();
            let mut failed = 0;
            for r in &results {
                writeln!(out, "{} {}: {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail)?;
                failed += usize::from(!r.passed);
            }
            writeln!(out, "{} checks, {failed} failed", results.len())?;
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::ScalingReport { csv } => {
            let rows = read_csv(File::open(&csv).with_context(|| format!("opening {}", csv.display()))?)?;
            let mut out = io::stdout().lock();
            writeln!(out, "method,problem,d,slope,stderr,ci95_lo,ci95_hi,points")?;
            for line in depth_scaling_report(&rows) {
                match line {
                    Ok(l) => writeln!(
                        out,
                        "{},{},{},{:.4},{:.4},{:.4},{:.4},{}",
                        l.method, l.problem, l.d, l.fit.slope, l.fit.stderr, l.fit.lo, l.fit.hi, l.fit.points
                    )?,
                    Err((label, e)) => eprintln!("skipping {label}: {e}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
