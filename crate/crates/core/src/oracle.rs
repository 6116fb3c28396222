//! Stochastic subgradient oracles with batched submission.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::rng::{RngStream, StreamRng};

/// A stochastic subgradient oracle `g` with `E g(x) ∈ ∂f(x)`.
pub trait GradientOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// One sample at `x`. Deterministic oracles may ignore `rng`.
    fn sample(&self, x: &DVector<f64>, rng: &mut StreamRng) -> DVector<f64>;

    /// When true, no random generator is constructed per query.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Called once per submitted round with its size, before sampling.
    fn on_batch(&self, _size: usize) {}
}

const PARALLEL_BATCH: usize = 256;

/// Shared oracle plus the ledger every query is charged to.
#[derive(Clone)]
pub struct OracleHandle {
    oracle: Arc<dyn GradientOracle>,
    ledger: Arc<CostLedger>,
    phase: &'static str,
}

impl std::fmt::Debug for OracleHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleHandle")
            .field("dim", &self.dim())
            .field("phase", &self.phase)
            .field("ledger", &self.ledger.snapshot())
            .finish()
    }
}

impl OracleHandle {
    pub fn new<O: GradientOracle + 'static>(oracle: O) -> Self {
        Self::from_arc(Arc::new(oracle))
    }

    pub fn from_arc(oracle: Arc<dyn GradientOracle>) -> Self {
        Self {
            oracle,
            ledger: Arc::new(CostLedger::new()),
            phase: "default",
        }
    }

    /// Same oracle, fresh ledger.
    pub fn with_fresh_ledger(&self) -> Self {
        Self {
            oracle: self.oracle.clone(),
            ledger: Arc::new(CostLedger::new()),
            phase: self.phase,
        }
    }

    /// Same oracle and ledger; rounds are attributed to `phase`.
    pub fn phase(&self, phase: &'static str) -> Self {
        Self {
            oracle: self.oracle.clone(),
            ledger: self.ledger.clone(),
            phase,
        }
    }

    /// A different oracle charged to the same ledger and phase.
    pub fn with_oracle(&self, oracle: Arc<dyn GradientOracle>) -> Self {
        Self {
            oracle,
            ledger: self.ledger.clone(),
            phase: self.phase,
        }
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn inner(&self) -> &Arc<dyn GradientOracle> {
        &self.oracle
    }

    /// Queries every point in one parallel round. Query `i` draws its noise
    /// from `stream.child(i)`.
    pub fn submit_batch(
        &self,
        points: &[DVector<f64>],
        stream: &RngStream,
    ) -> Result<Vec<DVector<f64>>> {
        if points.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let d = self.dim();
        for (index, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinitePoint { index });
            }
        }
        self.ledger.record_round(points.len(), self.phase);
        self.oracle.on_batch(points.len());
        let oracle = &self.oracle;
        if oracle.is_deterministic() {
            let mut rng = stream.rng();
            return Ok(points.iter().map(|p| oracle.sample(p, &mut rng)).collect());
        }
        let eval = |(i, p): (usize, &DVector<f64>)| oracle.sample(p, &mut stream.child(i as u64).rng());
        Ok(if points.len() >= PARALLEL_BATCH {
            points.par_iter().enumerate().map(eval).collect()
        } else {
            points.iter().enumerate().map(eval).collect()
        })
    }
}

/// Free-function form of [`OracleHandle::submit_batch`].
pub fn submit_batch(
    oracle: &OracleHandle,
    points: &[DVector<f64>],
    stream: &RngStream,
) -> Result<Vec<DVector<f64>>> {
    oracle.submit_batch(points, stream)
}

/// The oracle of x ↦ f(x + shift).
pub struct Shifted {
    pub inner: Arc<dyn GradientOracle>,
    pub shift: DVector<f64>,
}

impl GradientOracle for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample(&self, x: &DVector<f64>, rng: &mut StreamRng) -> DVector<f64> {
        self.inner.sample(&(x + &self.shift), rng)
    }
    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
    fn on_batch(&self, size: usize) {
        self.inner.on_batch(size)
    }
}
