//! Experiment cells and sweeps.

use std::time::Instant;

use rayon::prelude::*;

use parsco::outer::{solve, PipelineConfig};
use parsco::RngStream;

use crate::baseline::{baseline_iters, baseline_sgd};
use crate::config::{ExperimentConfig, MethodKind, MethodSpec};
use crate::error::Result;
use crate::problems::{ProblemKind, TestProblem};
use crate::record::RunRecord;

/// One (problem, d, eps, seed) point of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub problem: ProblemKind,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub lipschitz: f64,
    pub radius: f64,
}

impl Cell {
    /// The instance depends on (master seed, problem, d, seed) only, so all
    /// methods and accuracies see the same function.
    pub fn problem(&self, master_seed: u64) -> Result<TestProblem> {
        let s = RngStream::root(master_seed)
            .named("problem")
            .named(self.problem.name())
            .child(self.d as u64)
            .child(self.seed);
        TestProblem::generate(self.problem, self.d, self.lipschitz, self.radius, &s)
    }

    fn stream(&self, master_seed: u64, method: &str) -> RngStream {
        RngStream::root(master_seed)
            .named("run")
            .named(method)
            .named(self.problem.name())
            .child(self.d as u64)
            .child(self.eps.to_bits())
            .child(self.seed)
    }
}

pub fn run_baseline(problem: &TestProblem, cell: &Cell, t_scale: f64, stream: &RngStream) -> Result<(f64, parsco::OracleHandle)> {
    let oracle = problem.oracle().phase("sgd");
    let iters = (baseline_iters(problem.lipschitz, problem.radius, cell.eps) as f64 * t_scale).ceil() as usize;
    let x = baseline_sgd(&oracle, problem.lipschitz, problem.radius, iters, stream)?;
    Ok((problem.gap(&x), oracle))
}

pub fn run_parsco(problem: &TestProblem, cell: &Cell, config: &PipelineConfig, stream: &RngStream) -> Result<(f64, parsco::OracleHandle, Vec<String>)> {
    let oracle = problem.oracle();
    let instance = problem.instance(cell.eps, oracle.clone())?;
    let out = solve(&instance, config, stream)?;
    Ok((problem.gap(&out.outer.x), oracle, out.outer.warnings))
}

pub fn run_cell(method: &MethodSpec, cell: &Cell, master_seed: u64, config_hash: u64) -> Result<RunRecord> {
    let problem = cell.problem(master_seed)?;
    let stream = cell.stream(master_seed, &method.name);
    let start = Instant::now();
    let (gap, oracle, warnings) = match &method.kind {
        MethodKind::Baseline { t_scale } => {
            let (gap, oracle) = run_baseline(&problem, cell, *t_scale, &stream)?;
            (gap, oracle, Vec::new())
        }
        MethodKind::Parsco(s) => run_parsco(&problem, cell, &s.pipeline(), &stream)?,
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let snap = oracle.ledger().snapshot();
    Ok(RunRecord {
        method: method.name.clone(),
        problem: cell.problem.name().to_string(),
        d: cell.d,
        eps: cell.eps,
        seed: cell.seed,
        config_hash,
        gap,
        query_depth: snap.query_depth,
        query_count: snap.query_count,
        est_work: snap.est_comp_work,
        wall_ms,
        phases: oracle.ledger().phase_breakdown(),
        warnings,
    })
}

/// Runs every cell of the grid concurrently and returns the records in
/// (method, problem, d, eps, seed) order.
pub fn run_experiment(config: &ExperimentConfig, master_seed: u64) -> Result<Vec<RunRecord>> {
    let hash = config.hash(master_seed);
    let mut jobs = Vec::with_capacity(config.cells());
    for m in &config.methods {
        for &problem in &config.problems {
            for &d in &config.dims {
                for &eps in &config.eps {
                    for &seed in &config.seeds {
                        let cell = Cell {
                            problem,
                            d,
                            eps,
                            seed,
                            lipschitz: config.lipschitz,
                            radius: config.radius,
                        };
                        jobs.push((m, cell));
                    }
                }
            }
        }
    }
    jobs.par_iter().map(|(m, cell)| run_cell(m, cell, master_seed, hash)).collect()
}
