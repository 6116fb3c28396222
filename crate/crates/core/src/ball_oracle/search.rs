//! Binary search on the multiplier α of the ball constraint.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{require, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub lambda: f64,
    pub r: f64,
    /// Target accuracy Δ for F(x) + λ‖x‖² over B(r).
    pub accuracy: f64,
    /// Bound on ‖∇F(0)‖.
    pub lipschitz: f64,
    /// Calls beyond this multiple of the logarithmic bounds abort the search.
    pub budget_factor: f64,
}

impl SearchConfig {
    pub fn new(lambda: f64, r: f64, accuracy: f64, lipschitz: f64) -> Self {
        Self {
            lambda,
            r,
            accuracy,
            lipschitz,
            budget_factor: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.lambda > 0.0, "lambda", "must be positive")?;
        require(self.r > 0.0, "r", "must be positive")?;
        require(self.lipschitz > 0.0, "lipschitz", "must be positive")?;
        require(self.accuracy > 0.0, "accuracy", "must be positive")?;
        require(
            self.accuracy <= self.lambda * self.r * self.r / 100.0 * (1.0 + 1e-12),
            "accuracy",
            "must be at most λr²/100",
        )
    }

    /// max(1, ln(L/(λr))).
    pub fn phase_one_log(&self) -> f64 {
        (self.lipschitz / (self.lambda * self.r)).ln().max(1.0)
    }

    /// max(1, ln((Lr + λr²)/Δ)).
    pub fn phase_two_log(&self) -> f64 {
        (self.range() / self.accuracy).ln().max(1.0)
    }

    /// Lr + λr².
    pub fn range(&self) -> f64 {
        self.lipschitz * self.r + self.lambda * self.r * self.r
    }

    pub fn max_phase_one_calls(&self) -> usize {
        (self.budget_factor * self.phase_one_log()).floor() as usize
    }

    pub fn max_phase_two_calls(&self) -> usize {
        (self.budget_factor * self.phase_two_log()).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: DVector<f64>,
    /// Result of phase one.
    pub alpha_prime: f64,
    /// Final bracket of phase two.
    pub ell: f64,
    pub u: f64,
    /// Distinct multipliers passed to each oracle.
    pub phase_one_calls: usize,
    pub phase_two_calls: usize,
    /// Output interpolated onto the sphere of radius r.
    pub on_boundary: bool,
    /// A bracket invariant failed (an oracle broke its contract) and the
    /// output was repaired by projection.
    pub repaired: bool,
}

struct Memo<F> {
    oracle: F,
    cache: HashMap<u64, DVector<f64>>,
    limit: usize,
    name: &'static str,
}

impl<F: FnMut(f64) -> Result<DVector<f64>>> Memo<F> {
    fn call(&mut self, alpha: f64) -> Result<DVector<f64>> {
        if let Some(x) = self.cache.get(&alpha.to_bits()) {
            return Ok(x.clone());
        }
        if self.cache.len() >= self.limit {
            return Err(Error::BudgetExceeded(format!(
                "{} oracle called more than {} times",
                self.name, self.limit
            )));
        }
        let x = (self.oracle)(alpha)?;
        self.cache.insert(alpha.to_bits(), x.clone());
        Ok(x)
    }
}

/// Finds an approximate minimizer of F(x) + λ‖x‖² over B(r) from a
/// phase-one oracle `o1` (distance-accurate x*_α) and a phase-two oracle
/// `o2` (value-accurate x*_α to Δ/2). Each oracle is asked at most once per
/// multiplier; repeats reuse the first answer.
pub fn binary_search<O1, O2>(config: &SearchConfig, o1: O1, o2: O2) -> Result<SearchOutcome>
where
    O1: FnMut(f64) -> Result<DVector<f64>>,
    O2: FnMut(f64) -> Result<DVector<f64>>,
{
    config.validate()?;
    let SearchConfig { lambda, r, lipschitz, .. } = *config;
    let mut o1 = Memo {
        oracle: o1,
        cache: HashMap::new(),
        limit: config.max_phase_one_calls().max(1),
        name: "phase-one",
    };
    let mut o2 = Memo {
        oracle: o2,
        cache: HashMap::new(),
        limit: config.max_phase_two_calls().max(2),
        name: "phase-two",
    };

    let base = 2.0 * lambda;
    let mut u = base;
    while o1.call(u)?.norm() > 2.5 * r {
        u *= 2.0;
    }
    let alpha_prime = if u == base {
        base
    } else {
        let mut ell = u / 2.0;
        loop {
            let m = (u * ell).sqrt();
            let n = o1.call(m)?.norm();
            if (2.1 * r..=2.9 * r).contains(&n) {
                break m;
            } else if n > 2.9 * r {
                ell = m;
            } else {
                u = m;
            }
        }
    };

    let mut ell = alpha_prime;
    let mut u = 4.0 * lipschitz / r + base;
    let stop = 1.0 + config.accuracy / (10.0 * config.range());
    while u / ell > stop {
        let m = (u * ell).sqrt();
        if o2.call(m)?.norm() > r {
            ell = m;
        } else {
            u = m;
        }
    }

    let x2 = o2.call(u)?;
    let mut repaired = x2.norm() > r;
    let x2 = project(x2, r);
    let (x, on_boundary) = if ell == base {
        (x2, false)
    } else {
        let x1 = o2.call(ell)?;
        if x1.norm() <= r {
            repaired = true;
            (x2, false)
        } else {
            (onto_sphere(&x1, &x2, r), true)
        }
    };
    Ok(SearchOutcome {
        x,
        alpha_prime,
        ell,
        u,
        phase_one_calls: o1.cache.len(),
        phase_two_calls: o2.cache.len(),
        on_boundary,
        repaired,
    })
}

fn project(x: DVector<f64>, r: f64) -> DVector<f64> {
    let n = x.norm();
    if n > r {
        x * (r / n)
    } else {
        x
    }
}

/// (1 − t)x₁ + t x₂ with norm r, given ‖x₁‖ > r ≥ ‖x₂‖.
fn onto_sphere(x1: &DVector<f64>, x2: &DVector<f64>, r: f64) -> DVector<f64> {
    let dir = x2 - x1;
    let a = dir.norm_squared();
    let b = 2.0 * x1.dot(&dir);
    let c = x1.norm_squared() - r * r;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    // Smaller root, written to avoid cancellation since b < 0 here.
    let t = if b < 0.0 { 2.0 * c / (-b + disc.sqrt()) } else { (-b - disc.sqrt()) / (2.0 * a) };
    project(x1 + dir * t.clamp(0.0, 1.0), r)
}
