use nalgebra::DVector;

use crate::error::{require, Result};
use crate::oracle::OracleHandle;
use crate::rng::RngStream;

/// An instance of stochastic convex optimization over B(R).
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub d: usize,
    pub lipschitz: f64,
    pub radius: f64,
    pub eps: f64,
    pub oracle: OracleHandle,
}

impl ProblemInstance {
    pub fn new(lipschitz: f64, radius: f64, eps: f64, oracle: OracleHandle) -> Result<Self> {
        require(lipschitz > 0.0 && lipschitz.is_finite(), "lipschitz", "must be positive")?;
        require(radius > 0.0 && radius.is_finite(), "radius", "must be positive")?;
        require(eps > 0.0, "eps", "must be positive")?;
        require(eps <= lipschitz * radius, "eps", "must not exceed L·R")?;
        Ok(Self {
            d: oracle.dim(),
            lipschitz,
            radius,
            eps,
            oracle,
        })
    }

    /// κ = LR/ε.
    pub fn kappa(&self) -> f64 {
        self.lipschitz * self.radius / self.eps
    }

    /// Statistical check that the empirical second moment at `x` over `n`
    /// samples is at most L²(1 + 5/√n). Uses a fresh ledger.
    pub fn check_second_moment(&self, x: &DVector<f64>, n: usize, stream: &RngStream) -> Result<bool> {
        let oracle = self.oracle.with_fresh_ledger();
        let pts = vec![x.clone(); n.max(1)];
        let samples = oracle.submit_batch(&pts, stream)?;
        let m = samples.iter().map(|g| g.norm_squared()).sum::<f64>() / samples.len() as f64;
        let l2 = self.lipschitz * self.lipschitz;
        Ok(m <= l2 * (1.0 + 5.0 / (samples.len() as f64).sqrt()))
    }
}
