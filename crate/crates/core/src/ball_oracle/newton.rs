//! Approximate constrained Newton iteration and its subproblem.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::oracle::OracleHandle;
use crate::rng::RngStream;
use crate::smoothing::grad_estimator_many;

use super::quadratic::QuadraticModel;

/// Runs `iters` steps x_{t+1} = step(t, x_t) and returns x_0, …, x_T.
///
/// Each step should approximately minimize ⟨∇f(x_t), x⟩ + ‖x − x_t‖²_A over
/// the domain, to expected error φ/20.
pub fn constrained_newton<S>(x0: DVector<f64>, iters: usize, mut step: S) -> Result<Vec<DVector<f64>>>
where
    S: FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut xs = Vec::with_capacity(iters + 1);
    xs.push(x0);
    for t in 0..iters {
        let next = step(t, &xs[t])?;
        xs.push(next);
    }
    Ok(xs)
}

/// ⌈c·ln(20·range/φ)⌉, at least 1.
pub fn newton_iterations(constant: f64, range: f64, phi: f64) -> usize {
    ((constant * (20.0 * range / phi).ln()).ceil().max(1.0)) as usize
}

/// Exact Newton step on B(r): argmin ⟨grad, x⟩ + ‖x − x_t‖²_A over ‖x‖ ≤ r.
pub fn exact_newton_step(grad: &DVector<f64>, a: &DMatrix<f64>, x_t: &DVector<f64>, r: f64) -> Result<DVector<f64>> {
    // ⟨grad − 2A x_t, x⟩ + xᵀAx, i.e. Q = 2A.
    let model = QuadraticModel::new(a * 2.0, grad - a * x_t * 2.0)?;
    Ok(model.ball_minimizer(0.0, r).0)
}

/// F(x) = ⟨∇f_ρ(z) − λz, x⟩ + ‖x − z‖²_{∇²f_ρ(0)}, accessed through the
/// smoothing estimator anchored at z.
#[derive(Debug, Clone)]
pub struct NewtonSubproblem {
    pub z: DVector<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub lipschitz: f64,
    pub r: f64,
}

impl NewtonSubproblem {
    /// The explicit linear part −λz.
    pub fn linear_term(&self) -> DVector<f64> {
        -&self.z * self.lambda
    }

    /// Unbiased samples of ∇F(x), one per point, in a single round.
    pub fn gradient_samples(&self, oracle: &OracleHandle, xs: &[DVector<f64>], stream: &RngStream) -> Result<Vec<DVector<f64>>> {
        let lin = self.linear_term();
        Ok(grad_estimator_many(oracle, xs, &self.z, self.rho, stream)?
            .into_iter()
            .map(|g| g + &lin)
            .collect())
    }

    /// Second-moment bound 2L² + 8L²(5r)²/ρ² + λ²r² for ∇F samples on B(4r).
    pub fn second_moment_bound(&self) -> f64 {
        let l2 = self.lipschitz * self.lipschitz;
        2.0 * l2 + 8.0 * l2 * (5.0 * self.r / self.rho).powi(2) + (self.lambda * self.r).powi(2)
    }

    /// Bound on ‖∇F(0)‖: 2L + λr.
    pub fn gradient_bound_at_zero(&self) -> f64 {
        2.0 * self.lipschitz + self.lambda * self.r
    }
}
