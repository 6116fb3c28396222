//! The (φ, λ, r) ball optimization oracle for f_ρ.
//!
//! Given a center x̄, returns a point of B_x̄(r) whose expected gap for
//! f_ρ(x) + (λ/2)‖x − x̄‖² over that ball is at most φ. The center is shifted
//! to the origin, a few approximate Newton steps are taken in the metric
//! ∇²f_ρ(0) + λI, and each step's ball-constrained quadratic is solved by a
//! binary search on its multiplier using SGD-based phase oracles.

pub mod newton;
pub mod phases;
pub mod quadratic;
pub mod search;

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{require, Result};
use crate::oracle::{OracleHandle, Shifted};
use crate::rank1::MatmulBackend;
use crate::rng::RngStream;
use crate::sgd::InitRule;

pub use newton::{constrained_newton, exact_newton_step, newton_iterations, NewtonSubproblem};
pub use phases::{phase_one, phase_two, PhaseResult};
pub use quadratic::{reg_minima_check, QuadraticModel, RegMinimaReport};
pub use search::{binary_search, SearchConfig, SearchOutcome};

/// Constants and caps controlling how much work each oracle call spends.
///
/// [`EffortProfile::theory`] uses the constants from the analysis. They are
/// far too expensive for small machines, so [`EffortProfile::practical`]
/// scales SGD lengths down and skips boosting.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortProfile {
    /// c in T_N = ⌈c·ln(20(Lr + λr²)/φ)⌉.
    pub newton_const: f64,
    pub newton_max_iters: usize,
    /// Multiplier on the SGD length implied by the rate bound.
    pub sgd_scale: f64,
    pub sgd_min_iters: usize,
    pub sgd_max_iters: usize,
    /// Repetitions ⌈agg_const·ln(1/δ)⌉ before aggregation.
    pub agg_const: f64,
    pub agg_max_runs: usize,
    pub comparator_scale: f64,
    pub comparator_max_samples: usize,
    pub search_budget_factor: f64,
    /// Chunk parameter C ≥ 1: each SGD run of T steps goes through the
    /// engine ⌈T/C⌉ steps at a time. C = 1 runs all T steps as one chunk.
    pub chunk_c: f64,
    pub backend: MatmulBackend,
    pub init: InitRule,
}

impl EffortProfile {
    pub fn theory() -> Self {
        Self {
            newton_const: 16.0,
            newton_max_iters: usize::MAX,
            sgd_scale: 1.0,
            sgd_min_iters: 1,
            sgd_max_iters: usize::MAX,
            agg_const: 36.0,
            agg_max_runs: usize::MAX,
            comparator_scale: 1.0,
            comparator_max_samples: usize::MAX,
            search_budget_factor: 10.0,
            chunk_c: 1.0,
            backend: MatmulBackend::Naive,
            init: InitRule::HalfInverse,
        }
    }

    pub fn practical() -> Self {
        Self {
            newton_const: 1.0,
            newton_max_iters: 2,
            sgd_scale: 0.0,
            sgd_min_iters: 64,
            sgd_max_iters: 64,
            agg_const: 36.0,
            agg_max_runs: 1,
            comparator_scale: 1.0,
            comparator_max_samples: 64,
            search_budget_factor: 10.0,
            chunk_c: 1.0,
            backend: MatmulBackend::Naive,
            init: InitRule::HalfInverse,
        }
    }

    /// Practical settings with four times the SGD length and up to four
    /// Newton steps.
    pub fn accurate() -> Self {
        Self {
            newton_max_iters: 4,
            ..Self::practical().with_sgd_iters(256)
        }
    }

    /// SGD chunk length for a run of `iters` steps.
    pub fn chunk_len(&self, iters: usize) -> usize {
        ((iters as f64 / self.chunk_c.max(1.0)).ceil() as usize).clamp(1, iters.max(1))
    }

    /// Fixed SGD length `iters` for every phase oracle call.
    pub fn with_sgd_iters(mut self, iters: usize) -> Self {
        self.sgd_scale = 0.0;
        self.sgd_min_iters = iters;
        self.sgd_max_iters = iters;
        self
    }
}

impl Default for EffortProfile {
    fn default() -> Self {
        Self::practical()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallOracleParams {
    pub phi: f64,
    pub lambda: f64,
    pub r: f64,
    pub center: DVector<f64>,
    pub rho: f64,
    pub lipschitz: f64,
}

impl BallOracleParams {
    /// Largest admissible radius (ρ/6)·ln^{−1/2}(2L/(λρ)).
    pub fn max_radius(lipschitz: f64, lambda: f64, rho: f64) -> f64 {
        rho / 6.0 / (2.0 * lipschitz / (lambda * rho)).ln().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        require(self.lambda > 0.0, "lambda", "must be positive")?;
        require(self.r > 0.0, "r", "must be positive")?;
        require(self.rho > 0.0, "rho", "must be positive")?;
        require(self.lipschitz > 0.0, "lipschitz", "must be positive")?;
        require(self.phi > 0.0, "phi", "must be positive")?;
        require(
            self.rho <= self.lipschitz / self.lambda * (1.0 + 1e-12),
            "rho",
            "must be at most L/λ",
        )?;
        require(
            self.r <= Self::max_radius(self.lipschitz, self.lambda, self.rho) * (1.0 + 1e-12),
            "r",
            "exceeds (ρ/6)·ln^{-1/2}(2L/(λρ))",
        )?;
        require(
            self.phi <= self.lambda * self.r * self.r / 100.0 * (1.0 + 1e-12),
            "phi",
            "must be at most λr²/100",
        )
    }

    /// Lr + λr², the range of the objective over the ball.
    pub fn range(&self) -> f64 {
        self.lipschitz * self.r + self.lambda * self.r * self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallOutcome {
    /// The returned point, in original coordinates.
    pub x: DVector<f64>,
    pub newton_iters: usize,
    pub phase_one_calls: usize,
    pub phase_two_calls: usize,
    /// The last search ended on the sphere.
    pub on_boundary: bool,
    /// Multiplier μ ≥ 0 of the ball constraint in the last Newton step.
    pub multiplier: f64,
    /// Phase-oracle calls that reported a degenerate aggregation, plus
    /// searches that needed a repair.
    pub degenerate_events: usize,
}

/// Runs the ball optimization oracle on the function sampled by `oracle`.
pub fn ball_optimization_oracle(
    params: &BallOracleParams,
    oracle: &OracleHandle,
    effort: &EffortProfile,
    stream: &RngStream,
) -> Result<BallOutcome> {
    params.validate()?;
    require(params.center.len() == oracle.dim(), "center", "dimension must match the oracle")?;
    let shifted = if params.center.iter().all(|v| *v == 0.0) {
        oracle.clone()
    } else {
        oracle.with_oracle(Arc::new(Shifted {
            inner: oracle.inner().clone(),
            shift: params.center.clone(),
        }))
    };
    let (lambda, r) = (params.lambda, params.r);
    let iters = newton_iterations(effort.newton_const, params.range(), params.phi).min(effort.newton_max_iters);
    let delta_acc = params.phi / 40.0;
    let mut search = SearchConfig::new(lambda, r, delta_acc, 2.0 * params.lipschitz + lambda * r);
    search.budget_factor = effort.search_budget_factor;
    let fail = params.phi / (2.0 * params.lipschitz * r + lambda * r * r);
    let calls = iters as f64 * (search.phase_one_log().ceil() + search.phase_two_log().ceil());
    let delta_call = (fail / calls).min(0.5);

    let mut stats = BallOutcome {
        x: DVector::zeros(0),
        newton_iters: iters,
        phase_one_calls: 0,
        phase_two_calls: 0,
        on_boundary: false,
        multiplier: 0.0,
        degenerate_events: 0,
    };
    let xs = constrained_newton(DVector::zeros(oracle.dim()), iters, |t, x_t| {
        let sub = NewtonSubproblem {
            z: x_t.clone(),
            lambda,
            rho: params.rho,
            lipschitz: params.lipschitz,
            r,
        };
        let st = stream.child(t as u64);
        let degenerate = std::cell::Cell::new(0usize);
        let mut n1 = 0u64;
        let mut n2 = 0u64;
        let out = binary_search(
            &search,
            |alpha| {
                n1 += 1;
                let res = phase_one(&shifted, &sub, alpha, delta_call, effort, &st.named("one").child(n1))?;
                degenerate.set(degenerate.get() + res.degenerate as usize);
                Ok(res.x)
            },
            |alpha| {
                n2 += 1;
                let res = phase_two(&shifted, &sub, alpha, delta_acc / 2.0, delta_call, effort, &st.named("two").child(n2))?;
                degenerate.set(degenerate.get() + res.degenerate as usize);
                Ok(res.x)
            },
        )?;
        stats.phase_one_calls += out.phase_one_calls;
        stats.phase_two_calls += out.phase_two_calls;
        stats.degenerate_events += degenerate.get() + out.repaired as usize;
        stats.on_boundary = out.on_boundary;
        stats.multiplier = if out.on_boundary { (0.5 * out.u - lambda).max(0.0) } else { 0.0 };
        Ok(out.x)
    })?;
    stats.x = xs.last().expect("at least x0") + &params.center;
    Ok(stats)
}
