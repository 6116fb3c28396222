//! Parallel solver for x_t = c_t (I − u_t v_tᵀ) x_{t−1} + w_t.
//!
//! Steps are composed pairwise into a dyadic tree of affine maps whose linear
//! parts are scaled low-rank factors `C·(I − ABᵀ)`. The last iterate is one
//! application of the root; all iterates follow from a divide-and-conquer
//! pass where each half is solved from a zero start and the left half's
//! endpoint is fanned out through the right subtree.

mod backend;
mod factor;
mod tree;

pub use backend::MatmulBackend;
pub use factor::{LowRankFactor, Scale};
pub use tree::DyadicTree;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Inputs of the recurrence, steps indexed 1..=T (stored 0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Recurrence {
    pub x0: DVector<f64>,
    pub c: Vec<f64>,
    pub u: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
}

impl Rank1Recurrence {
    pub fn new(
        x0: DVector<f64>,
        c: Vec<f64>,
        u: Vec<DVector<f64>>,
        v: Vec<DVector<f64>>,
        w: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let rec = Self { x0, c, u, v, w };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.c.len();
        if t == 0 {
            return Err(invalid("T", "must be at least 1"));
        }
        if self.u.len() != t || self.v.len() != t || self.w.len() != t {
            return Err(invalid("steps", "c, u, v, w must have equal length"));
        }
        let d = self.x0.len();
        for vec in self.u.iter().chain(&self.v).chain(&self.w) {
            if vec.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: vec.len() });
            }
        }
        let finite = self.x0.iter().all(|x| x.is_finite())
            && self.c.iter().all(|x| x.is_finite())
            && self.u.iter().chain(&self.v).chain(&self.w).all(|x| x.iter().all(|y| y.is_finite()));
        if !finite {
            return Err(invalid("recurrence", "entries must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// One step of the recurrence from `x` using step index `t` (0-based).
    pub fn step(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        let coef = self.v[t].dot(x);
        (x - &self.u[t] * coef) * self.c[t] + &self.w[t]
    }

    /// Steps `range` as a recurrence starting from `x0`.
    pub fn slice(&self, range: std::ops::Range<usize>, x0: DVector<f64>) -> Rank1Recurrence {
        Rank1Recurrence {
            x0,
            c: self.c[range.clone()].to_vec(),
            u: self.u[range.clone()].to_vec(),
            v: self.v[range.clone()].to_vec(),
            w: self.w[range].to_vec(),
        }
    }
}

/// Direct O(dT) evaluation; ground truth for the engine.
pub fn sequential_reference(rec: &Rank1Recurrence) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(rec.len());
    let mut x = rec.x0.clone();
    for t in 0..rec.len() {
        x = rec.step(t, &x);
        out.push(x.clone());
    }
    out
}

/// Largest relative one-step residual of a claimed solution.
pub fn residual(rec: &Rank1Recurrence, xs: &[DVector<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev = &rec.x0;
    for (t, x) in xs.iter().enumerate() {
        let expected = rec.step(t, prev);
        let denom = expected.norm().max(f64::MIN_POSITIVE);
        worst = worst.max((x - &expected).norm() / denom);
        prev = x;
    }
    worst
}

/// Formula estimate d·T^{ω−1} of the engine's arithmetic work.
pub fn work_estimate(d: usize, t: usize, backend: MatmulBackend) -> f64 {
    d as f64 * (t as f64).powf(backend.omega() - 1.0)
}

/// Formula estimate of the engine's computational depth, log²(T)·log(d).
pub fn depth_estimate(d: usize, t: usize) -> f64 {
    let lt = (t as f64).log2().max(1.0);
    lt * lt * (d as f64).log2().max(1.0)
}

/// Engine configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Engine {
    pub backend: MatmulBackend,
    /// Fork into parallel tasks only for blocks at least this long.
    pub parallel_grain: usize,
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            backend: MatmulBackend::Naive,
            parallel_grain: 128,
        }
    }
}

impl Engine {
    pub fn with_backend(backend: MatmulBackend) -> Self {
        Self { backend, ..Self::default() }
    }

    /// Sequential execution (same results, no task spawning).
    pub fn sequential(self) -> Self {
        Self { parallel_grain: usize::MAX, ..self }
    }

    /// x_T.
    pub fn solve_last(&self, rec: &Rank1Recurrence) -> Result<DVector<f64>> {
        rec.validate()?;
        // A zero scalar resets the state to w_t, so only the steps after the
        // last zero matter.
        match rec.c.iter().rposition(|&c| c == 0.0) {
            Some(z) if z + 1 == rec.len() => Ok(rec.w[z].clone()),
            Some(z) => {
                let tail = rec.slice(z + 1..rec.len(), rec.w[z].clone());
                Ok(DyadicTree::build(&tail, self)?.apply_root(&tail.x0))
            }
            None => Ok(DyadicTree::build(rec, self)?.apply_root(&rec.x0)),
        }
    }

    /// x_1, ..., x_T.
    pub fn solve_all(&self, rec: &Rank1Recurrence) -> Result<Vec<DVector<f64>>> {
        rec.validate()?;
        // Contiguous blocks separated by zero scalars are independent.
        let mut blocks = Vec::new();
        let mut start = 0;
        for (t, &c) in rec.c.iter().enumerate() {
            if c == 0.0 {
                if t > start {
                    blocks.push(start..t);
                }
                blocks.push(t..t + 1);
                start = t + 1;
            }
        }
        if start < rec.len() {
            blocks.push(start..rec.len());
        }
        let solve_block = |range: &std::ops::Range<usize>| -> Result<Vec<DVector<f64>>> {
            if range.len() == 1 && rec.c[range.start] == 0.0 {
                return Ok(vec![rec.w[range.start].clone()]);
            }
            let x_in = if range.start == 0 {
                rec.x0.clone()
            } else {
                rec.w[range.start - 1].clone()
            };
            let sub = rec.slice(range.clone(), x_in);
            DyadicTree::build(&sub, self)?.solve_all_from(&sub.x0, self)
        };
        let parts: Vec<Result<Vec<DVector<f64>>>> = if blocks.len() > 1 && rec.len() >= self.parallel_grain {
            blocks.par_iter().map(solve_block).collect()
        } else {
            blocks.iter().map(solve_block).collect()
        };
        let mut out = Vec::with_capacity(rec.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// [`Engine::solve_last`] with default settings and the given backend.
pub fn solve_last(rec: &Rank1Recurrence, backend: MatmulBackend) -> Result<DVector<f64>> {
    Engine::with_backend(backend).solve_last(rec)
}

/// [`Engine::solve_all`] with default settings and the given backend.
pub fn solve_all(rec: &Rank1Recurrence, backend: MatmulBackend) -> Result<Vec<DVector<f64>>> {
    Engine::with_backend(backend).solve_all(rec)
}
