//! Warm-started composite SGD.
//!
//! Minimizes h(x) = h₁(x) + h₂(x) with h₂ Λ-strongly convex, using step sizes
//! η_t = 2/(Λ(t + T₀)) and returning the average of x_0..x_{T−1}. The
//! Gaussian-smoothing specialization draws every sample up front in one
//! query round and then runs the iterate loop through [`crate::rank1`].

use nalgebra::DVector;

use crate::error::{require, Result};
use crate::oracle::OracleHandle;
use crate::rank1::{depth_estimate, work_estimate, Engine, Rank1Recurrence};
use crate::rng::{fill_gaussian, RngStream, StreamRng};

/// Starting point of the smoothing specialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitRule {
    /// x₀ = −v/(2Λ).
    #[default]
    HalfInverse,
    /// x₀ = argmin h₂ = −v/Λ.
    H2Minimizer,
}

/// Configuration of the smoothing specialization, where
/// h(x) = ⟨∇f_ρ(z) + v, x⟩ + ‖x − z‖²_{∇²f_ρ(0)} + (Λ/2)‖x‖².
#[derive(Clone, Debug)]
pub struct CompositeSgdConfig {
    pub lambda: f64,
    pub v: DVector<f64>,
    pub z: DVector<f64>,
    pub iters: usize,
    pub rho: f64,
    /// Steps per engine call.
    pub chunk: usize,
    /// Oracle second-moment bound L.
    pub lipschitz: f64,
    pub init: InitRule,
    pub engine: Engine,
}

impl CompositeSgdConfig {
    pub fn new(lambda: f64, v: DVector<f64>, z: DVector<f64>, iters: usize, rho: f64, lipschitz: f64) -> Self {
        Self {
            lambda,
            v,
            z,
            iters,
            rho,
            chunk: iters.max(1),
            lipschitz,
            init: InitRule::default(),
            engine: Engine::default(),
        }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require(self.lambda > 0.0 && self.lambda.is_finite(), "Lambda", "must be positive")?;
        require(self.iters >= 1, "T", "must be at least 1")?;
        require(self.rho > 0.0, "rho", "must be positive")?;
        require(self.lipschitz > 0.0, "L", "must be positive")?;
        require(self.chunk >= 1, "S", "must be at least 1")?;
        require(self.chunk <= self.iters, "S", "must not exceed T")?;
        require(self.v.len() == self.z.len(), "v", "must match the dimension of z")?;
        Ok(())
    }

    /// T₀ = 64L²/(ρ²Λ²).
    pub fn t0(&self) -> f64 {
        64.0 * self.lipschitz.powi(2) / (self.rho * self.lambda).powi(2)
    }

    /// η_t = 2/(Λ(t + T₀)).
    pub fn eta(&self, t: usize) -> f64 {
        2.0 / (self.lambda * (t as f64 + self.t0()))
    }

    pub fn x0(&self) -> DVector<f64> {
        match self.init {
            InitRule::HalfInverse => &self.v * (-0.5 / self.lambda),
            InitRule::H2Minimizer => &self.v * (-1.0 / self.lambda),
        }
    }

    /// Whether max(‖z‖, ‖x₀‖) ≤ ρ and ρ ≤ L/Λ, the premises of the rate bound.
    pub fn rate_hypotheses_hold(&self) -> bool {
        self.z.norm().max(self.x0().norm()) <= self.rho * (1.0 + 1e-12)
            && self.rho <= self.lipschitz / self.lambda * (1.0 + 1e-12)
    }
}

/// Expected-suboptimality bound of the smoothing specialization:
/// (66L² ln(T+T₀)/(ΛT) + Λρ²/(2T))(1 + ‖x*‖²/ρ²).
pub fn specific_rate_bound(lipschitz: f64, lambda: f64, rho: f64, iters: f64, x_star_norm: f64) -> f64 {
    let t0 = 64.0 * lipschitz.powi(2) / (rho * lambda).powi(2);
    (66.0 * lipschitz.powi(2) * (iters + t0).ln() / (lambda * iters) + lambda * rho * rho / (2.0 * iters))
        * (1.0 + x_star_norm.powi(2) / (rho * rho))
}

/// Smallest T (as a real) for which [`specific_rate_bound`] is at most `gap`.
pub fn iters_for_gap(gap: f64, lipschitz: f64, lambda: f64, rho: f64, x_star_norm: f64) -> f64 {
    let bound = |t: f64| specific_rate_bound(lipschitz, lambda, rho, t, x_star_norm);
    let mut hi = 1.0;
    while bound(hi) > gap {
        hi *= 2.0;
        if hi > 1e30 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    if bound(lo) <= gap {
        return lo.max(1.0);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) <= gap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.ceil()
}

/// Configuration of the generic method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralSgdConfig {
    pub lambda: f64,
    /// L₂ in E‖g₁(x)‖² ≤ L₁² + L₂²‖x − z‖².
    pub l2: f64,
    pub iters: usize,
}

impl GeneralSgdConfig {
    /// T₀ = 8L₂²/Λ².
    pub fn t0(&self) -> f64 {
        8.0 * self.l2 * self.l2 / (self.lambda * self.lambda)
    }

    pub fn eta(&self, t: usize) -> f64 {
        2.0 / (self.lambda * (t as f64 + self.t0()))
    }
}

/// Generic composite SGD: x_{t+1} = prox_{η_t h₂}(x_t − η_t g₁(x_t)), starting
/// from argmin h₂. `h2_prox(p, η)` returns argmin_x η h₂(x) + ½‖x − p‖².
pub fn unconstrained_sgd<P, G>(
    h2_minimizer: DVector<f64>,
    mut h2_prox: P,
    mut g1_sampler: G,
    config: &GeneralSgdConfig,
    stream: &RngStream,
) -> Result<DVector<f64>>
where
    P: FnMut(&DVector<f64>, f64) -> DVector<f64>,
    G: FnMut(&DVector<f64>, &mut StreamRng) -> DVector<f64>,
{
    require(config.lambda > 0.0, "Lambda", "must be positive")?;
    require(config.iters >= 1, "T", "must be at least 1")?;
    let mut rng = stream.rng();
    let mut x = h2_minimizer;
    let mut sum = x.clone();
    for t in 0..config.iters - 1 {
        let eta = config.eta(t);
        let g = g1_sampler(&x, &mut rng);
        x = h2_prox(&(&x - g * eta), eta);
        sum += &x;
    }
    Ok(sum / config.iters as f64)
}

/// h₂(x) = ⟨v, x⟩ + (Λ/2)‖x‖² with its minimizer and proximal map.
#[derive(Clone, Debug)]
pub struct QuadraticH2 {
    pub v: DVector<f64>,
    pub lambda: f64,
}

impl QuadraticH2 {
    pub fn minimizer(&self) -> DVector<f64> {
        &self.v * (-1.0 / self.lambda)
    }

    pub fn prox(&self, p: &DVector<f64>, eta: f64) -> DVector<f64> {
        (p - &self.v * eta) / (1.0 + eta * self.lambda)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.v.dot(x) + 0.5 * self.lambda * x.norm_squared()
    }
}

/// x_{t+1} = (x_t − ηv − ηg' − (2η/ρ²)⟨ξ, x_t − z⟩g) / (1 + ηΛ).
#[allow(clippy::too_many_arguments)]
pub fn sgd_conv_step_closed_form(
    x_t: &DVector<f64>,
    eta: f64,
    lambda: f64,
    v: &DVector<f64>,
    g_prime: &DVector<f64>,
    g: &DVector<f64>,
    xi: &DVector<f64>,
    z: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    let coef = 2.0 * eta / (rho * rho) * (xi.dot(x_t) - xi.dot(z));
    (x_t - v * eta - g_prime * eta - g * coef) / (1.0 + eta * lambda)
}

/// Presampled ξ_t, g_t = g(ξ_t) and g'_t = g(z − ξ_t).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSamples {
    pub xi: Vec<DVector<f64>>,
    pub g: Vec<DVector<f64>>,
    pub g_prime: Vec<DVector<f64>>,
}

fn draw_xis(config: &CompositeSgdConfig, stream: &RngStream) -> Vec<DVector<f64>> {
    let d = config.z.len();
    let mut rng = stream.named("xi").rng();
    (0..config.iters)
        .map(|_| {
            let mut xi = DVector::zeros(d);
            fill_gaussian(&mut rng, config.rho, xi.as_mut_slice());
            xi
        })
        .collect()
}

/// Draws the samples of several independent runs in a single query round.
pub fn draw_samples(
    oracle: &OracleHandle,
    configs: &[&CompositeSgdConfig],
    streams: &[RngStream],
    round: &RngStream,
) -> Result<Vec<ConvSamples>> {
    assert_eq!(configs.len(), streams.len(), "one stream per run");
    let mut points = Vec::new();
    let mut all_xis = Vec::with_capacity(configs.len());
    for (cfg, s) in configs.iter().zip(streams) {
        cfg.validate()?;
        let xis = draw_xis(cfg, s);
        for xi in &xis {
            points.push(xi.clone());
            points.push(&cfg.z - xi);
        }
        all_xis.push(xis);
    }
    let answers = oracle.submit_batch(&points, round)?;
    let mut it = answers.into_iter();
    Ok(all_xis
        .into_iter()
        .map(|xi| {
            let mut g = Vec::with_capacity(xi.len());
            let mut g_prime = Vec::with_capacity(xi.len());
            for _ in 0..xi.len() {
                g.push(it.next().expect("one answer per query"));
                g_prime.push(it.next().expect("one answer per query"));
            }
            ConvSamples { xi, g, g_prime }
        })
        .collect())
}

/// Expresses the iterate loop as x_t = c_t(I − u_t v_tᵀ)x_{t−1} + w_t with
/// c_t = 1/(1+η_{t−1}Λ), u_t = (2η_{t−1}/ρ²)g_{t−1}, v_t = ξ_{t−1} and
/// w_t = −c_t(η_{t−1}(v + g'_{t−1}) − (2η_{t−1}/ρ²)⟨ξ_{t−1}, z⟩g_{t−1}).
pub fn map_to_recurrence(samples: &ConvSamples, config: &CompositeSgdConfig) -> Result<Rank1Recurrence> {
    config.validate()?;
    require(samples.xi.len() >= config.iters, "samples", "need one sample per iteration")?;
    let t_count = config.iters;
    let rho2 = config.rho * config.rho;
    let mut c = Vec::with_capacity(t_count);
    let mut u = Vec::with_capacity(t_count);
    let mut w = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let eta = config.eta(t);
        let ct = 1.0 / (1.0 + eta * config.lambda);
        let k = 2.0 * eta / rho2;
        let zdot = samples.xi[t].dot(&config.z);
        c.push(ct);
        u.push(&samples.g[t] * k);
        let mut wt = (&config.v + &samples.g_prime[t]) * eta;
        wt.axpy(-k * zdot, &samples.g[t], 1.0);
        w.push(wt * -ct);
    }
    Rank1Recurrence::new(config.x0(), c, u, samples.xi[..t_count].to_vec(), w)
}

/// Result of one smoothing-specialized SGD run.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdOutput {
    pub x_avg: DVector<f64>,
    pub x_last: DVector<f64>,
    /// Whether the premises of [`specific_rate_bound`] held for this run.
    pub rate_hypotheses_hold: bool,
}

/// Runs the iterate loop in chunks of `config.chunk` steps and averages.
pub fn iterate(samples: &ConvSamples, config: &CompositeSgdConfig, oracle: Option<&OracleHandle>) -> Result<SgdOutput> {
    let rec = map_to_recurrence(samples, config)?;
    let t_count = config.iters;
    let d = config.z.len();
    let mut x = rec.x0.clone();
    let mut sum = x.clone();
    let mut start = 0;
    while start < t_count {
        let end = (start + config.chunk).min(t_count);
        let xs = config.engine.solve_all(&rec.slice(start..end, x.clone()))?;
        if let Some(o) = oracle {
            o.ledger().log_computation(
                depth_estimate(d, end - start),
                work_estimate(d, end - start, config.engine.backend),
            );
        }
        for (k, xt) in xs.iter().enumerate() {
            if start + k + 1 < t_count {
                sum += xt;
            }
        }
        x = xs.into_iter().last().expect("nonempty chunk");
        start = end;
    }
    Ok(SgdOutput {
        x_avg: sum / t_count as f64,
        x_last: x,
        rate_hypotheses_hold: config.rate_hypotheses_hold(),
    })
}

/// Several independent runs sharing one query round.
pub fn unconstrained_sgd_conv_many(
    oracle: &OracleHandle,
    configs: &[&CompositeSgdConfig],
    streams: &[RngStream],
    round: &RngStream,
) -> Result<Vec<SgdOutput>> {
    let samples = draw_samples(oracle, configs, streams, round)?;
    samples
        .iter()
        .zip(configs)
        .map(|(s, cfg)| iterate(s, cfg, Some(oracle)))
        .collect()
}

/// One run: 2T queries in one round, then the iterate loop.
pub fn unconstrained_sgd_conv(oracle: &OracleHandle, config: &CompositeSgdConfig, stream: &RngStream) -> Result<SgdOutput> {
    let out = unconstrained_sgd_conv_many(oracle, &[config], &[*stream], &stream.named("oracle"))?;
    Ok(out.into_iter().next().expect("one run"))
}
