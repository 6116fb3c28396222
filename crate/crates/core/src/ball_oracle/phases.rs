//! Stochastic phase-one and phase-two oracles for the Newton subproblem.

use nalgebra::DVector;

use crate::boost::{aggregate_points, tournament, SampledComparator, TournamentConfig};
use crate::error::{require, Result};
use crate::oracle::OracleHandle;
use crate::rank1::Engine;
use crate::rng::RngStream;
use crate::sgd::{iters_for_gap, unconstrained_sgd_conv_many, CompositeSgdConfig};

use super::newton::NewtonSubproblem;
use super::EffortProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub x: DVector<f64>,
    pub runs: usize,
    pub iters: usize,
    /// Aggregation found no majority cluster, or phase two had to fall back
    /// to the closest candidate.
    pub degenerate: bool,
    /// Largest pairwise distance among the tournament candidates.
    pub cluster_diameter: f64,
}

/// SGD iterations reaching expected gap `gap` on F + (α/2)‖·‖², scaled and
/// clamped by the effort profile.
pub fn sgd_iters(effort: &EffortProfile, sub: &NewtonSubproblem, alpha: f64, gap: f64) -> usize {
    let x_norm = sub.gradient_bound_at_zero() / alpha;
    let theory = iters_for_gap(gap, sub.lipschitz, alpha, sub.rho, x_norm);
    let scaled = (theory * effort.sgd_scale).ceil();
    (scaled.max(effort.sgd_min_iters as f64).min(effort.sgd_max_iters as f64) as usize).max(1)
}

/// Repetitions for failure probability δ.
pub fn runs_for(effort: &EffortProfile, delta: f64) -> usize {
    let k = (effort.agg_const * (1.0 / delta).ln()).ceil().max(1.0) as usize;
    k.min(effort.agg_max_runs).max(1)
}

fn sgd_runs(
    oracle: &OracleHandle,
    sub: &NewtonSubproblem,
    alpha: f64,
    iters: usize,
    runs: usize,
    effort: &EffortProfile,
    stream: &RngStream,
) -> Result<Vec<DVector<f64>>> {
    let mut cfg = CompositeSgdConfig::new(alpha, sub.linear_term(), sub.z.clone(), iters, sub.rho, sub.lipschitz);
    cfg.init = effort.init;
    cfg = cfg.with_chunk(effort.chunk_len(iters));
    cfg.engine = Engine::with_backend(effort.backend);
    let cfgs = vec![&cfg; runs];
    let streams: Vec<RngStream> = (0..runs as u64).map(|i| stream.child(i)).collect();
    let out = unconstrained_sgd_conv_many(oracle, &cfgs, &streams, &stream.named("round"))?;
    Ok(out.into_iter().map(|o| o.x_avg).collect())
}

/// Coordinatewise median, a robust stand-in for the unknown x*_α.
fn coordinate_median(points: &[DVector<f64>]) -> DVector<f64> {
    let d = points[0].len();
    DVector::from_fn(d, |i, _| {
        let mut v: Vec<f64> = points.iter().map(|p| p[i]).collect();
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    })
}

/// Returns x with ‖x − x*_α‖ ≤ (r + ‖x*_α‖)/100 with probability ≥ 1 − δ.
pub fn phase_one(
    oracle: &OracleHandle,
    sub: &NewtonSubproblem,
    alpha: f64,
    delta: f64,
    effort: &EffortProfile,
    stream: &RngStream,
) -> Result<PhaseResult> {
    require(alpha >= 2.0 * sub.lambda * (1.0 - 1e-12), "alpha", "must be at least 2λ")?;
    let gap = alpha / 6.0 * (sub.r / 300.0).powi(2);
    let iters = sgd_iters(effort, sub, alpha, gap);
    let runs = runs_for(effort, delta);
    let points = sgd_runs(oracle, sub, alpha, iters, runs, effort, stream)?;
    if runs == 1 {
        return Ok(PhaseResult { x: points[0].clone(), runs, iters, degenerate: false, cluster_diameter: 0.0 });
    }
    let accuracy = (sub.r + coordinate_median(&points).norm()) / 100.0;
    let agg = aggregate_points(&points, accuracy)?;
    Ok(PhaseResult { x: agg.point, runs, iters, degenerate: agg.degenerate, cluster_diameter: 0.0 })
}

/// Returns x with F(x) + (α/2)‖x‖² within `accuracy` of its minimum with
/// probability ≥ 1 − δ, for α ≥ max(α_{3r}, 2λ).
pub fn phase_two(
    oracle: &OracleHandle,
    sub: &NewtonSubproblem,
    alpha: f64,
    accuracy: f64,
    delta: f64,
    effort: &EffortProfile,
    stream: &RngStream,
) -> Result<PhaseResult> {
    require(alpha >= 2.0 * sub.lambda * (1.0 - 1e-12), "alpha", "must be at least 2λ")?;
    require(accuracy > 0.0, "accuracy", "must be positive")?;
    let iters = sgd_iters(effort, sub, alpha, accuracy / 6.0);
    let runs = runs_for(effort, delta / 3.0).max(runs_for_some_success(delta, effort));
    let points = sgd_runs(oracle, sub, alpha, iters, runs, effort, stream)?;
    if runs == 1 {
        return Ok(PhaseResult { x: points[0].clone(), runs, iters, degenerate: false, cluster_diameter: 0.0 });
    }
    let scale = (accuracy / alpha).sqrt();
    let agg = aggregate_points(&points, 3.0 * scale)?;
    let mut cands: Vec<DVector<f64>> = points.iter().filter(|p| (*p - &agg.point).norm() <= 4.0 * scale).cloned().collect();
    let mut degenerate = agg.degenerate;
    if cands.is_empty() {
        degenerate = true;
        cands.push(agg.point.clone());
    }
    let lin = sub.linear_term();
    let z = sub.z.clone();
    let rho = sub.rho;
    let cmp = SampledComparator {
        g1: |xs: &[DVector<f64>], s: &RngStream| crate::smoothing::grad_estimator_many(oracle, xs, &z, rho, s),
        h2: |x: &DVector<f64>| lin.dot(x) + 0.5 * alpha * x.norm_squared(),
    };
    let l2 = sub.lipschitz.powi(2);
    let lc = (2.0 * l2 + 8.0 * l2 * (5.0 * sub.r / sub.rho).powi(2)).sqrt();
    let mut cfg = TournamentConfig::new(accuracy / 2.0, delta / 3.0, lc, 8.0 * scale);
    cfg.sample_scale = effort.comparator_scale;
    cfg.max_group_samples = effort.comparator_max_samples;
    let won = tournament(&cands, &cmp, &cfg, &stream.named("tournament"))?;
    let cluster_diameter = cands
        .iter()
        .flat_map(|a| cands.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    Ok(PhaseResult { x: cands[won.winner].clone(), runs, iters, degenerate, cluster_diameter })
}

/// k ≥ log₃(3/δ) so that some run succeeds with probability ≥ 1 − δ/3.
fn runs_for_some_success(delta: f64, effort: &EffortProfile) -> usize {
    let k = ((3.0 / delta).ln() / 3f64.ln()).ceil().max(1.0) as usize;
    k.min(effort.agg_max_runs).max(1)
}
