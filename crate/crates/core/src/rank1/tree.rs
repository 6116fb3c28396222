use nalgebra::DVector;
use rayon::prelude::*;

use super::factor::{LowRankFactor, Scale};
use super::{Engine, Rank1Recurrence};
use crate::error::Result;

/// Affine map x ↦ C·(I − ABᵀ)x + p for a contiguous block of steps.
#[derive(Clone, Debug)]
struct Node {
    scale: Scale,
    factor: LowRankFactor,
    partial: DVector<f64>,
}

impl Node {
    fn apply_linear(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.scale.is_zero() {
            return DVector::zeros(x.len());
        }
        let mut y = self.factor.apply(x);
        y *= self.scale.value();
        y
    }
}

/// Dyadic tree over the steps of a recurrence, padded with identity steps to
/// a power of two. Level 0 holds single steps; node (i, j) covers steps
/// j·2^i .. (j+1)·2^i and is the composition of its two children.
#[derive(Clone, Debug)]
pub struct DyadicTree {
    len: usize,
    levels: Vec<Vec<Node>>,
}

fn maybe_join<A, B, RA, RB>(parallel: bool, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    if parallel {
        rayon::join(a, b)
    } else {
        (a(), b())
    }
}

impl DyadicTree {
    pub fn build(rec: &Rank1Recurrence, engine: &Engine) -> Result<Self> {
        rec.validate()?;
        let (d, len) = (rec.dim(), rec.len());
        let n = len.next_power_of_two();
        let zero = DVector::zeros(d);
        let leaves: Vec<Node> = (0..n)
            .map(|t| {
                if t < len {
                    Node {
                        scale: Scale::new(rec.c[t]),
                        factor: LowRankFactor::rank_one(&rec.u[t], &rec.v[t]),
                        partial: rec.w[t].clone(),
                    }
                } else {
                    Node {
                        scale: Scale::ONE,
                        factor: LowRankFactor::rank_one(&zero, &zero),
                        partial: zero.clone(),
                    }
                }
            })
            .collect();
        let mut levels = vec![leaves];
        while levels.last().map_or(0, Vec::len) > 1 {
            let below = levels.last().expect("nonempty");
            let combine = |pair: &[Node]| -> Result<Node> {
                let (left, right) = (&pair[0], &pair[1]);
                let factor = LowRankFactor::compose(&right.factor, &left.factor, engine.backend)?.compressed();
                let partial = right.apply_linear(&left.partial) + &right.partial;
                Ok(Node {
                    scale: right.scale.mul(left.scale),
                    factor,
                    partial,
                })
            };
            let block = n / below.len() * 2;
            let next: Result<Vec<Node>> = if below.len() >= 4 && block * below.len() >= engine.parallel_grain {
                below.par_chunks(2).map(combine).collect()
            } else {
                below.chunks(2).map(combine).collect()
            };
            levels.push(next?);
        }
        Ok(Self { len, levels })
    }

    /// Number of real (unpadded) steps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of levels, ℓ + 1.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    /// Low-rank part of node (level, j); its matrix is `scale(level, j)·factor`.
    pub fn factor(&self, level: usize, j: usize) -> &LowRankFactor {
        &self.levels[level][j].factor
    }

    pub fn scale(&self, level: usize, j: usize) -> Scale {
        self.levels[level][j].scale
    }

    /// Image of the zero vector under node (level, j).
    pub fn partial(&self, level: usize, j: usize) -> &DVector<f64> {
        &self.levels[level][j].partial
    }

    /// Prefix products C_t = c_1 ⋯ c_t for t = 1..=len.
    pub fn prefix_scales(&self) -> Vec<Scale> {
        let mut out = Vec::with_capacity(self.len);
        self.scale_fanout(self.levels.len() - 1, 0, Scale::ONE, &mut out);
        out
    }

    fn scale_fanout(&self, level: usize, j: usize, s: Scale, out: &mut Vec<Scale>) {
        if (j << level) >= self.len {
            return;
        }
        if level == 0 {
            out.push(self.levels[0][j].scale.mul(s));
            return;
        }
        let mid = self.levels[level - 1][2 * j].scale.mul(s);
        self.scale_fanout(level - 1, 2 * j, s, out);
        self.scale_fanout(level - 1, 2 * j + 1, mid, out);
    }

    /// x_len for the start state `x0`.
    pub fn apply_root(&self, x0: &DVector<f64>) -> DVector<f64> {
        let root = &self.levels[self.levels.len() - 1][0];
        root.apply_linear(x0) + &root.partial
    }

    /// All states x_1..x_len for the start state `x0`.
    pub fn solve_all_from(&self, x0: &DVector<f64>, engine: &Engine) -> Result<Vec<DVector<f64>>> {
        let top = self.levels.len() - 1;
        let par = (1usize << top) >= engine.parallel_grain;
        let (mut zero_start, linear) = maybe_join(
            par,
            || self.solve_zero(top, 0, engine),
            || self.fanout(top, 0, x0, engine),
        );
        for (x, l) in zero_start.iter_mut().zip(&linear) {
            *x += l;
        }
        Ok(zero_start)
    }

    /// M_{s:start}·y for every real step s of node (level, j).
    fn fanout(&self, level: usize, j: usize, y: &DVector<f64>, engine: &Engine) -> Vec<DVector<f64>> {
        if (j << level) >= self.len {
            return Vec::new();
        }
        if level == 0 {
            return vec![self.levels[0][j].apply_linear(y)];
        }
        let left = &self.levels[level - 1][2 * j];
        let y_mid = left.apply_linear(y);
        let par = (1usize << level) >= engine.parallel_grain;
        let (mut a, b) = maybe_join(
            par,
            || self.fanout(level - 1, 2 * j, y, engine),
            || self.fanout(level - 1, 2 * j + 1, &y_mid, engine),
        );
        a.extend(b);
        a
    }

    /// States of node (level, j) when entered from the zero vector.
    fn solve_zero(&self, level: usize, j: usize, engine: &Engine) -> Vec<DVector<f64>> {
        if (j << level) >= self.len {
            return Vec::new();
        }
        if level == 0 {
            return vec![self.levels[0][j].partial.clone()];
        }
        let left_partial = &self.levels[level - 1][2 * j].partial;
        let par = (1usize << level) >= engine.parallel_grain;
        let (mut a, (mut b, shift)) = maybe_join(
            par,
            || self.solve_zero(level - 1, 2 * j, engine),
            || {
                maybe_join(
                    par,
                    || self.solve_zero(level - 1, 2 * j + 1, engine),
                    || self.fanout(level - 1, 2 * j + 1, left_partial, engine),
                )
            },
        );
        for (x, s) in b.iter_mut().zip(&shift) {
            *x += s;
        }
        a.extend(b);
        a
    }
}
