//! Query and computation cost accounting.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// Counters for one named phase of an algorithm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseCounts {
    pub rounds: u64,
    pub queries: u64,
}

/// Point-in-time copy of a ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerSnapshot {
    pub query_depth: u64,
    pub query_count: u64,
    pub est_comp_depth: f64,
    pub est_comp_work: f64,
}

impl LedgerSnapshot {
    /// Counter growth between `earlier` and `self`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            query_depth: self.query_depth - earlier.query_depth,
            query_count: self.query_count - earlier.query_count,
            est_comp_depth: self.est_comp_depth - earlier.est_comp_depth,
            est_comp_work: self.est_comp_work - earlier.est_comp_work,
        }
    }
}

/// Thread-safe cost ledger. Query counters are exact; computation counters
/// are estimates logged by the algorithms from their complexity formulas.
#[derive(Debug, Default)]
pub struct CostLedger {
    query_depth: AtomicU64,
    query_count: AtomicU64,
    comp_depth_bits: AtomicU64,
    comp_work_bits: AtomicU64,
    phases: Mutex<BTreeMap<&'static str, PhaseCounts>>,
}

fn atomic_add_f64(cell: &AtomicU64, delta: f64) {
    let _ = cell.fetch_update(Ordering::AcqRel, Ordering::Acquire, |bits| {
        Some((f64::from_bits(bits) + delta).to_bits())
    });
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one batch round of `size` queries.
    pub fn record_round(&self, size: usize, phase: &'static str) {
        self.query_depth.fetch_add(1, Ordering::AcqRel);
        self.query_count.fetch_add(size as u64, Ordering::AcqRel);
        let mut phases = self.phases.lock().unwrap_or_else(|e| e.into_inner());
        let entry = phases.entry(phase).or_default();
        entry.rounds += 1;
        entry.queries += size as u64;
    }

    /// Adds formula-based computation estimates.
    pub fn log_computation(&self, depth: f64, work: f64) {
        if depth > 0.0 {
            atomic_add_f64(&self.comp_depth_bits, depth);
        }
        if work > 0.0 {
            atomic_add_f64(&self.comp_work_bits, work);
        }
    }

    pub fn query_depth(&self) -> u64 {
        self.query_depth.load(Ordering::Acquire)
    }

    pub fn query_count(&self) -> u64 {
        self.query_count.load(Ordering::Acquire)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            query_depth: self.query_depth(),
            query_count: self.query_count(),
            est_comp_depth: f64::from_bits(self.comp_depth_bits.load(Ordering::Acquire)),
            est_comp_work: f64::from_bits(self.comp_work_bits.load(Ordering::Acquire)),
        }
    }

    pub fn phase_breakdown(&self) -> BTreeMap<&'static str, PhaseCounts> {
        self.phases.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}
