//! Self-checks behind the `check-invariants` command.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use parsco::outer::{solve, OuterMode, PipelineConfig};
use parsco::rng::StreamRng;
use parsco::{GradientOracle, OracleHandle, ProblemInstance, RngStream};

use crate::problems::{ProblemKind, TestProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Wraps an oracle and counts rounds and queries independently of the ledger.
pub struct Instrumented {
    pub inner: Arc<dyn GradientOracle>,
    pub rounds: AtomicU64,
    pub batch_total: AtomicU64,
    pub samples: AtomicU64,
}

impl Instrumented {
    pub fn new(inner: Arc<dyn GradientOracle>) -> Arc<Self> {
        Arc::new(Self {
            inner,
            rounds: AtomicU64::new(0),
            batch_total: AtomicU64::new(0),
            samples: AtomicU64::new(0),
        })
    }

    /// Whether the ledger of `handle` agrees with the counts seen here.
    pub fn agrees_with(&self, handle: &OracleHandle) -> (bool, String) {
        let snap = handle.ledger().snapshot();
        let rounds = self.rounds.load(Ordering::SeqCst);
        let total = self.batch_total.load(Ordering::SeqCst);
        let samples = self.samples.load(Ordering::SeqCst);
        let ok = snap.query_depth == rounds && snap.query_count == total && total == samples;
        (
            ok,
            format!(
                "ledger depth {} count {}; observed rounds {rounds} batch sum {total} samples {samples}",
                snap.query_depth, snap.query_count
            ),
        )
    }
}

impl GradientOracle for Instrumented {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample(&self, x: &DVector<f64>, rng: &mut StreamRng) -> DVector<f64> {
        self.samples.fetch_add(1, Ordering::Relaxed);
        self.inner.sample(x, rng)
    }
    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
    fn on_batch(&self, size: usize) {
        self.rounds.fetch_add(1, Ordering::Relaxed);
        self.batch_total.fetch_add(size as u64, Ordering::Relaxed);
    }
}

fn result(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> InvariantResult {
    InvariantResult {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

pub fn check_invariants(master_seed: u64) -> Vec<InvariantResult> {
    let mut out = Vec::new();
    let root = RngStream::root(master_seed).named("invariants");
    for kind in ProblemKind::ALL {
        for d in 1..=3 {
            let mut worst_grid = f64::INFINITY;
            let mut ok = true;
            let mut lip_ok = true;
            let mut probe_max = 0.0f64;
            for seed in 0..3 {
                let s = root.named(kind.name()).child(d as u64).child(seed);
                let p = match TestProblem::generate(kind, d, 1.0, 1.0, &s) {
                    Ok(p) => p,
                    Err(e) => {
                        out.push(result(format!("{kind} d={d}"), false, e.to_string()));
                        ok = false;
                        continue;
                    }
                };
                let c = p.verify_optimum(if d == 3 { 61 } else { 201 });
                ok &= c.holds(1e-6);
                worst_grid = worst_grid.min(c.grid_min - c.f_star);
                let probe = p.probe_lipschitz(200, &s.named("probe")).unwrap_or(f64::INFINITY);
                probe_max = probe_max.max(probe);
                lip_ok &= (p.certified_lipschitz() - p.lipschitz).abs() <= 1e-12 && probe <= p.lipschitz * (1.0 + 1e-12);
                let inst = ProblemInstance::new(p.lipschitz, p.radius, 0.1, p.oracle());
                let x = DVector::from_element(d, 0.3 / (d as f64).sqrt());
                lip_ok &= inst
                    .and_then(|i| i.check_second_moment(&x, 1000, &s.named("moment")))
                    .unwrap_or(false);
            }
            out.push(result(
                format!("optimum {kind} d={d}"),
                ok,
                format!("grid min minus recorded optimum {worst_grid:.3e}"),
            ));
            out.push(result(
                format!("lipschitz {kind} d={d}"),
                lip_ok,
                format!("largest probed gradient norm {probe_max:.6}"),
            ));
        }
    }

    // Ledger conservation and determinism on a short pipeline run.
    let s = root.named("pipeline");
    match TestProblem::generate(ProblemKind::NormDistance, 2, 1.0, 1.0, &s) {
        Ok(p) => {
            let cfg = PipelineConfig {
                mode: OuterMode::Accel,
                max_steps: 40,
                ..PipelineConfig::default()
            };
            let run = || {
                let inner = p.oracle().inner().clone();
                let inst = Instrumented::new(inner);
                let handle = OracleHandle::from_arc(inst.clone());
                let r = ProblemInstance::new(1.0, 1.0, 0.3, handle.clone()).and_then(|i| solve(&i, &cfg, &s.named("solve")));
                (r, inst, handle)
            };
            let (a, inst, handle) = run();
            let (b, _, _) = run();
            let (agree, detail) = inst.agrees_with(&handle);
            out.push(result("ledger conservation", agree, detail));
            let same = matches!((&a, &b), (Ok(x), Ok(y)) if x.outer == y.outer);
            out.push(result("determinism", same, "two runs with one seed"));
        }
        Err(e) => out.push(result("pipeline setup", false, e.to_string())),
    }
    out
}
