//! Projected stochastic subgradient descent with averaging.

use nalgebra::DVector;
use parsco::{OracleHandle, Result, RngStream};

/// T = ⌈(LR/ε)²⌉, the length that brings the expected gap to ε.
pub fn baseline_iters(lipschitz: f64, radius: f64, eps: f64) -> usize {
    ((lipschitz * radius / eps).powi(2)).ceil().max(1.0) as usize
}

/// T sequential single-point rounds from the origin with step R/(L√T),
/// projecting onto B(R). Returns the average of x_1, …, x_T.
pub fn baseline_sgd(oracle: &OracleHandle, lipschitz: f64, radius: f64, iters: usize, stream: &RngStream) -> Result<DVector<f64>> {
    let iters = iters.max(1);
    let eta = radius / (lipschitz * (iters as f64).sqrt());
    let mut x = DVector::zeros(oracle.dim());
    let mut sum = DVector::zeros(oracle.dim());
    for t in 0..iters {
        let g = oracle.submit_batch(std::slice::from_ref(&x), &stream.child(t as u64))?;
        x -= &g[0] * eta;
        let n = x.norm();
        if n > radius {
            x *= radius / n;
        }
        sum += &x;
    }
    Ok(sum / iters as f64)
}
