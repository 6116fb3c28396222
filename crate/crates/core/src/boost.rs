//! Expectation-to-high-probability reductions.
//!
//! [`geometric_aggregate`] turns a solver that lands near an unknown point with
//! probability 2/3 into one that succeeds with probability 1 − δ, and
//! [`tournament`] picks a near-optimal candidate using noisy estimates of
//! value differences.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{require, Error, Result};
use crate::rng::RngStream;

/// Accuracy and sample-size parameters for one gap estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSpec {
    /// Bound on E‖g₁‖² along the segment, as L.
    pub lipschitz: f64,
    /// Length bound R on the segment.
    pub radius: f64,
    pub accuracy: f64,
    pub delta: f64,
    /// Multiplier on the per-group sample count.
    pub sample_scale: f64,
    /// Hard cap on samples per group.
    pub max_group_samples: usize,
}

impl GapSpec {
    pub fn new(lipschitz: f64, radius: f64, accuracy: f64, delta: f64) -> Result<Self> {
        let spec = GapSpec {
            lipschitz,
            radius,
            accuracy,
            delta,
            sample_scale: 1.0,
            max_group_samples: usize::MAX,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.lipschitz >= 0.0 && self.lipschitz.is_finite(), "lipschitz", "must be finite and nonnegative")?;
        require(self.radius >= 0.0 && self.radius.is_finite(), "radius", "must be finite and nonnegative")?;
        require(self.accuracy > 0.0, "accuracy", "must be positive")?;
        require(self.delta > 0.0 && self.delta < 1.0, "delta", "must lie in (0, 1)")?;
        require(self.sample_scale > 0.0, "sample_scale", "must be positive")
    }

    /// ⌈4L²R²/Δ²⌉ samples per group, scaled and capped.
    pub fn group_size(&self) -> usize {
        let n = 4.0 * (self.lipschitz * self.radius / self.accuracy).powi(2) * self.sample_scale;
        (n.ceil().max(1.0).min(self.max_group_samples as f64) as usize).max(1)
    }

    /// ⌈8 ln(1/δ)⌉ groups for the median.
    pub fn groups(&self) -> usize {
        ((8.0 * (1.0 / self.delta).ln()).ceil() as usize).max(1)
    }

    pub fn total_samples(&self) -> usize {
        self.group_size() * self.groups()
    }
}

/// Estimates h(x_j) − h(x_i) for a batch of pairs.
pub trait BatchComparator: Sync {
    fn compare(&self, pairs: &[(&DVector<f64>, &DVector<f64>)], spec: &GapSpec, stream: &RngStream) -> Result<Vec<f64>>;
}

/// Noiseless comparator from a value function.
pub struct ExactComparator<F>(pub F);

impl<F: Fn(&DVector<f64>) -> f64 + Sync> BatchComparator for ExactComparator<F> {
    fn compare(&self, pairs: &[(&DVector<f64>, &DVector<f64>)], _: &GapSpec, _: &RngStream) -> Result<Vec<f64>> {
        Ok(pairs.iter().map(|(a, b)| (self.0)(b) - (self.0)(a)).collect())
    }
}

/// Comparator for h = h₁ + h₂ from a batched stochastic gradient of h₁ and an
/// evaluator for h₂.
///
/// Each sample is ⟨g₁(x_i + t(x_j − x_i)), x_j − x_i⟩ with t uniform on [0, 1];
/// the estimate is a median of group means plus h₂(x_j) − h₂(x_i). All samples
/// of one call go to `g1` as a single batch.
pub struct SampledComparator<G, H> {
    pub g1: G,
    pub h2: H,
}

impl<G, H> BatchComparator for SampledComparator<G, H>
where
    G: Fn(&[DVector<f64>], &RngStream) -> Result<Vec<DVector<f64>>> + Sync,
    H: Fn(&DVector<f64>) -> f64 + Sync,
{
    fn compare(&self, pairs: &[(&DVector<f64>, &DVector<f64>)], spec: &GapSpec, stream: &RngStream) -> Result<Vec<f64>> {
        spec.validate()?;
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let per_pair = spec.total_samples();
        let mut points = Vec::with_capacity(per_pair * pairs.len());
        for (p, (a, b)) in pairs.iter().enumerate() {
            let dir = *b - *a;
            let mut rng = stream.named("t").child(p as u64).rng();
            for _ in 0..per_pair {
                let t: f64 = rng.gen();
                points.push(*a + &dir * t);
            }
        }
        let grads = (self.g1)(&points, &stream.named("g1"))?;
        let mut out = Vec::with_capacity(pairs.len());
        for (p, (a, b)) in pairs.iter().enumerate() {
            let dir = *b - *a;
            let z: Vec<f64> = grads[p * per_pair..(p + 1) * per_pair].iter().map(|g| g.dot(&dir)).collect();
            out.push(median_of_means(&z, spec.group_size()) + (self.h2)(b) - (self.h2)(a));
        }
        Ok(out)
    }
}

/// Median of the means of consecutive groups of `group` samples.
pub fn median_of_means(samples: &[f64], group: usize) -> f64 {
    let mut means: Vec<f64> = samples
        .chunks(group.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    median(&mut means)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Single gap estimate for h(x_j) − h(x_i).
pub fn estimate_gap<G, H>(
    g1: G,
    x_i: &DVector<f64>,
    x_j: &DVector<f64>,
    h2: H,
    spec: &GapSpec,
    stream: &RngStream,
) -> Result<f64>
where
    G: Fn(&[DVector<f64>], &RngStream) -> Result<Vec<DVector<f64>>> + Sync,
    H: Fn(&DVector<f64>) -> f64 + Sync,
{
    let cmp = SampledComparator { g1, h2 };
    Ok(cmp.compare(&[(x_i, x_j)], spec, stream)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TournamentConfig {
    pub eps: f64,
    pub delta: f64,
    pub lipschitz: f64,
    pub radius: f64,
    pub sample_scale: f64,
    pub max_group_samples: usize,
}

impl TournamentConfig {
    pub fn new(eps: f64, delta: f64, lipschitz: f64, radius: f64) -> Self {
        TournamentConfig {
            eps,
            delta,
            lipschitz,
            radius,
            sample_scale: 1.0,
            max_group_samples: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.eps > 0.0, "eps", "must be positive")?;
        require(self.delta > 0.0 && self.delta < 1.0, "delta", "must lie in (0, 1)")
    }

    /// ⌈log₂ k⌉.
    pub fn levels(k: usize) -> usize {
        k.max(1).next_power_of_two().trailing_zeros() as usize
    }

    /// Δ_ℓ = (ε/3)(4/3)^{−ℓ} for ℓ = 1, 2, …; these sum to less than ε.
    pub fn level_accuracy(&self, level: usize) -> f64 {
        self.eps / 3.0 * (4.0f64 / 3.0).powi(-(level as i32))
    }

    pub fn level_spec(&self, k: usize, level: usize) -> GapSpec {
        GapSpec {
            lipschitz: self.lipschitz,
            radius: self.radius,
            accuracy: self.level_accuracy(level),
            delta: self.delta / Self::levels(k).max(1) as f64,
            sample_scale: self.sample_scale,
            max_group_samples: self.max_group_samples,
        }
    }

    /// Σ_ℓ k2^{−ℓ} · 36L²R²(4/3)^{2ℓ}/ε² · 8 ln(levels/δ) for k a power of two.
    pub fn budget_formula(&self, k: usize) -> f64 {
        let levels = Self::levels(k);
        let lr = self.lipschitz * self.radius / self.eps;
        (1..=levels)
            .map(|l| {
                let pairs = k.next_power_of_two() as f64 / 2f64.powi(l as i32);
                pairs * 36.0 * lr * lr * (16.0f64 / 9.0).powi(l as i32) * 8.0 * (levels as f64 / self.delta).ln()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentOutcome {
    /// Index into the original candidate list.
    pub winner: usize,
    pub levels: usize,
    pub comparisons: usize,
    /// Comparator samples requested across all levels.
    pub samples: usize,
}

/// Single-elimination tournament. The list is padded to a power of two with
/// copies of candidate 0; a comparison with estimate ≤ 0 keeps the left entry.
/// Each level issues one batched comparator call.
pub fn tournament<C: BatchComparator + ?Sized>(
    candidates: &[DVector<f64>],
    comparator: &C,
    config: &TournamentConfig,
    stream: &RngStream,
) -> Result<TournamentOutcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    config.validate()?;
    let k = candidates.len();
    let mut alive: Vec<usize> = (0..k.next_power_of_two()).map(|i| if i < k { i } else { 0 }).collect();
    let levels = TournamentConfig::levels(k);
    let mut comparisons = 0;
    let mut samples = 0;
    for level in 1..=levels {
        let spec = config.level_spec(k, level);
        let contested: Vec<usize> = (0..alive.len() / 2).filter(|&m| alive[2 * m] != alive[2 * m + 1]).collect();
        let pairs: Vec<_> = contested
            .iter()
            .map(|&m| (&candidates[alive[2 * m]], &candidates[alive[2 * m + 1]]))
            .collect();
        let est = if pairs.is_empty() {
            Vec::new()
        } else {
            comparator.compare(&pairs, &spec, &stream.child(level as u64))?
        };
        comparisons += pairs.len();
        samples += pairs.len() * spec.total_samples();
        let mut next: Vec<usize> = (0..alive.len() / 2).map(|m| alive[2 * m]).collect();
        for (&m, &e) in contested.iter().zip(&est) {
            if e < 0.0 {
                next[m] = alive[2 * m + 1];
            }
        }
        alive = next;
    }
    Ok(TournamentOutcome {
        winner: alive[0],
        levels,
        comparisons,
        samples,
    })
}

/// ⌈36 ln(1/δ)⌉ repetitions.
pub fn aggregate_runs(delta: f64) -> Result<usize> {
    require(delta > 0.0 && delta < 1.0, "delta", "must lie in (0, 1)")?;
    Ok(((36.0 * (1.0 / delta).ln()).ceil() as usize).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    pub point: DVector<f64>,
    pub index: usize,
    /// Number of outputs within 2Δ/3 of the chosen one, itself included.
    pub support: usize,
    pub runs: usize,
    /// No output had more than half of the outputs nearby.
    pub degenerate: bool,
}

/// Picks the output with the most neighbours within 2Δ/3, earliest on ties.
pub fn aggregate_points(points: &[DVector<f64>], accuracy: f64) -> Result<AggregateOutcome> {
    if points.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let radius = 2.0 * accuracy / 3.0;
    let mut best = (0, 0);
    for (i, p) in points.iter().enumerate() {
        let count = points.iter().filter(|q| (*q - p).norm() <= radius).count();
        if count > best.1 {
            best = (i, count);
        }
    }
    Ok(AggregateOutcome {
        point: points[best.0].clone(),
        index: best.0,
        support: best.1,
        runs: points.len(),
        degenerate: 2 * best.1 <= points.len(),
    })
}

/// Runs `runner` on ⌈36 ln(1/δ)⌉ child streams in one call and aggregates.
pub fn geometric_aggregate<R>(runner: R, accuracy: f64, delta: f64, stream: &RngStream) -> Result<AggregateOutcome>
where
    R: FnOnce(&[RngStream]) -> Result<Vec<DVector<f64>>>,
{
    geometric_aggregate_with(runner, accuracy, aggregate_runs(delta)?, stream)
}

/// As [`geometric_aggregate`] with an explicit repetition count.
pub fn geometric_aggregate_with<R>(runner: R, accuracy: f64, runs: usize, stream: &RngStream) -> Result<AggregateOutcome>
where
    R: FnOnce(&[RngStream]) -> Result<Vec<DVector<f64>>>,
{
    require(accuracy > 0.0, "accuracy", "must be positive")?;
    require(runs >= 1, "runs", "must be at least 1")?;
    let streams: Vec<RngStream> = (0..runs as u64).map(|i| stream.child(i)).collect();
    let points = runner(&streams)?;
    aggregate_points(&points, accuracy)
}
