//! Outer loops: parameter selection, the ball-acceleration budget schedule,
//! an accelerated proximal loop driven by ball oracle calls, and a plain
//! inexact proximal point loop.
//!
//! The accelerated loop is a Monteiro–Svaiter-type scheme. Each step guesses
//! the effective proximal parameter λ, takes a ball oracle step from the
//! extrapolated point, reads off the λ actually realised from a gradient
//! estimate at the new point, and retries with that value when the guess was
//! off by more than a factor of two.

use nalgebra::DVector;

use crate::ball_oracle::{ball_optimization_oracle, BallOracleParams, EffortProfile};
use crate::error::{require, Error, Result};
use crate::oracle::OracleHandle;
use crate::problem::ProblemInstance;
use crate::rng::RngStream;

/// Smoothing, radius and regularization chosen for a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MainParams {
    pub d: usize,
    pub lipschitz: f64,
    pub radius: f64,
    pub eps: f64,
    pub kappa: f64,
    pub rho: f64,
    /// d^{1/3}κ^{2/3}ln^{1/3}(dκ).
    pub k: f64,
    /// εκ^{4/3}d^{2/3}ln²(dκ)/R².
    pub lam_star: f64,
    pub r: f64,
    pub c_ba: f64,
    /// Number of times r was halved to satisfy the stability hypothesis.
    pub halvings: u32,
}

impl MainParams {
    /// Regularization of every ball oracle call, λ*/C_ba.
    pub fn lambda(&self) -> f64 {
        self.lam_star / self.c_ba
    }

    /// Largest accuracy the ball oracle accepts, λr²/100.
    pub fn phi(&self) -> f64 {
        self.lambda() * self.r * self.r / 100.0
    }

    pub fn ball_params(&self, center: DVector<f64>) -> BallOracleParams {
        BallOracleParams {
            phi: self.phi(),
            lambda: self.lambda(),
            r: self.r,
            center,
            rho: self.rho,
            lipschitz: self.lipschitz,
        }
    }
}

/// (ρ/6)·ln^{−1/2}(2C_ba L/(λ*ρ)), or ∞ when the logarithm is not positive.
pub fn radius_bound(lipschitz: f64, lam_star: f64, rho: f64, c_ba: f64) -> f64 {
    let l = (2.0 * c_ba * lipschitz / (lam_star * rho)).ln();
    if l > 0.0 {
        rho / 6.0 / l.sqrt()
    } else {
        f64::INFINITY
    }
}

pub fn main_params(d: usize, lipschitz: f64, radius: f64, eps: f64, c_ba: f64) -> Result<MainParams> {
    require(d >= 1, "d", "must be positive")?;
    require(lipschitz > 0.0 && radius > 0.0 && eps > 0.0, "eps", "L, R and ε must be positive")?;
    require(c_ba > 0.0, "c_ba", "must be positive")?;
    let kappa = lipschitz * radius / eps;
    require(kappa >= 2.0, "eps", "κ = LR/ε must be at least 2")?;
    let df = d as f64;
    let log = (df * kappa).ln();
    let rho = eps / (2.0 * lipschitz * df.sqrt());
    let k = df.cbrt() * kappa.powf(2.0 / 3.0) * log.cbrt();
    let lam_star = eps * kappa.powf(4.0 / 3.0) * df.powf(2.0 / 3.0) * log * log / (radius * radius);
    let bound = radius_bound(lipschitz, lam_star, rho, c_ba);
    let mut r = rho / log.sqrt();
    let mut halvings = 0;
    while r > bound {
        r /= 2.0;
        halvings += 1;
    }
    Ok(MainParams {
        d,
        lipschitz,
        radius,
        eps,
        kappa,
        rho,
        k,
        lam_star,
        r,
        c_ba,
        halvings,
    })
}

/// One row of the accuracy ladder: `count` oracle calls at (φ, λ, r).
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    /// `None` for the main row.
    pub j: Option<usize>,
    pub count: f64,
    pub phi: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccelSchedule {
    /// (R/r)^{2/3}.
    pub k: f64,
    /// (εK²/R²)·ln²K.
    pub lam_star: f64,
    pub r: f64,
    pub radius: f64,
    pub kappa: f64,
    pub c_ba: f64,
    pub rows: Vec<LadderRow>,
}

impl AccelSchedule {
    /// ln(Rκ/r).
    pub fn log_term(&self) -> f64 {
        (self.radius * self.kappa / self.r).ln()
    }

    pub fn total_calls(&self) -> f64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn main_row(&self) -> &LadderRow {
        &self.rows[0]
    }

    pub fn j_rows(&self) -> &[LadderRow] {
        &self.rows[1..]
    }
}

pub fn build_schedule(radius: f64, r: f64, eps: f64, lipschitz: f64, c_ba: f64) -> Result<AccelSchedule> {
    require(r > 0.0 && r <= radius, "r", "must lie in (0, R]")?;
    require(eps > 0.0 && eps <= lipschitz * radius, "eps", "must lie in (0, LR]")?;
    require(c_ba > 0.0, "c_ba", "must be positive")?;
    let kappa = lipschitz * radius / eps;
    let k = (radius / r).powf(2.0 / 3.0);
    let lam_star = eps * k * k / (radius * radius) * k.ln().powi(2);
    let log = (radius * kappa / r).ln();
    let lambda = lam_star / c_ba;
    let mut rows = vec![LadderRow {
        j: None,
        count: c_ba * k * log.powi(3),
        phi: lam_star * r * r / c_ba,
        lambda,
    }];
    let jmax = (k.log2() + c_ba).ceil() as usize;
    for j in 1..=jmax {
        let p = 2f64.powi(j as i32);
        rows.push(LadderRow {
            j: Some(j),
            count: c_ba * k * log / p,
            phi: lam_star * r * r / (c_ba * p) / (log * log),
            lambda,
        });
    }
    Ok(AccelSchedule {
        k,
        lam_star,
        r,
        radius,
        kappa,
        c_ba,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterOutcome {
    pub x: DVector<f64>,
    /// Accepted outer steps.
    pub steps: usize,
    pub ball_calls: usize,
    pub gradient_batches: usize,
    /// Accelerated steps redone because the λ guess was off.
    pub retries: usize,
    /// Steps taken by the proximal fallback after an accelerated-loop abort.
    pub fallback_steps: usize,
    pub warnings: Vec<String>,
}

impl OuterOutcome {
    fn new(x: DVector<f64>) -> Self {
        Self {
            x,
            steps: 0,
            ball_calls: 0,
            gradient_batches: 0,
            retries: 0,
            fallback_steps: 0,
            warnings: Vec::new(),
        }
    }
}

/// x_{k+1} = ball(x_k, k) until `iters` steps or two consecutive steps
/// shorter than r/2.
pub fn prox_point_run<B>(x0: DVector<f64>, r: f64, iters: usize, mut ball: B) -> Result<OuterOutcome>
where
    B: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
{
    let mut out = OuterOutcome::new(x0);
    let mut short = 0;
    for k in 0..iters {
        let next = ball(&out.x, k)?;
        out.ball_calls += 1;
        out.steps += 1;
        let step = (&next - &out.x).norm();
        out.x = next;
        short = if step < r / 2.0 { short + 1 } else { 0 };
        if short >= 2 {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccelConfig {
    /// Feasible set radius for the dual sequence v.
    pub radius: f64,
    pub r: f64,
    /// Stop once A_k reaches this value; A_k ≥ R²/ε bounds the gap by ε/2.
    pub target_weight: f64,
    pub max_steps: usize,
    pub max_retries: usize,
    /// Ball oracle calls allowed before aborting to the fallback.
    pub max_ball_calls: usize,
    /// Lower clamp on the effective λ.
    pub min_lambda: f64,
}

/// The accelerated loop. `ball(y, call)` returns a point of B_y(r) and
/// `grad(x, call)` a gradient estimate at x. Returns `BudgetExceeded` with the
/// partial outcome's point lost; see [`ball_accel_with_fallback`].
pub fn ball_accel_run<B, G>(x0: DVector<f64>, config: &AccelConfig, mut ball: B, mut grad: G) -> Result<OuterOutcome>
where
    B: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
    G: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
{
    let mut state = AccelState::new(x0);
    state.run(config, &mut ball, &mut grad)?;
    Ok(state.out)
}

struct AccelState {
    out: OuterOutcome,
    v: DVector<f64>,
    weight: f64,
}

impl AccelState {
    fn new(x0: DVector<f64>) -> Self {
        Self {
            v: x0.clone(),
            out: OuterOutcome::new(x0),
            weight: 0.0,
        }
    }

    fn run<B, G>(&mut self, cfg: &AccelConfig, ball: &mut B, grad: &mut G) -> Result<()>
    where
        B: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
        G: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
    {
        let g0 = grad(&self.out.x, 0)?;
        self.out.gradient_batches += 1;
        let mut lambda = (g0.norm() / cfg.r).max(cfg.min_lambda);
        while self.out.steps < cfg.max_steps && self.weight < cfg.target_weight {
            let mut tries = 0;
            loop {
                if self.out.ball_calls >= cfg.max_ball_calls {
                    return Err(Error::BudgetExceeded(format!(
                        "accelerated loop used {} ball oracle calls",
                        self.out.ball_calls
                    )));
                }
                let a = (1.0 + (1.0 + 4.0 * lambda * self.weight).sqrt()) / (2.0 * lambda);
                let next_weight = self.weight + a;
                let y = (&self.out.x * self.weight + &self.v * a) / next_weight;
                let x = ball(&y, self.out.ball_calls)?;
                self.out.ball_calls += 1;
                let g = grad(&x, self.out.ball_calls)?;
                self.out.gradient_batches += 1;
                let disp = &y - &x;
                let moved = disp.norm_squared();
                let observed = if moved > 0.0 {
                    (g.dot(&disp) / moved).max(cfg.min_lambda)
                } else {
                    lambda
                };
                let consistent = observed <= 2.0 * lambda && observed >= lambda / 2.0;
                if consistent || tries >= cfg.max_retries {
                    self.out.x = x;
                    self.v -= &g * a;
                    let n = self.v.norm();
                    if n > cfg.radius {
                        self.v *= cfg.radius / n;
                    }
                    self.weight = next_weight;
                    self.out.steps += 1;
                    lambda = observed;
                    break;
                }
                tries += 1;
                self.out.retries += 1;
                lambda = observed;
            }
        }
        Ok(())
    }
}

/// Runs the accelerated loop; if it exceeds its ball-call budget, continues
/// from the last accepted point with [`prox_point_run`] for `fallback_iters`
/// steps and records a warning.
pub fn ball_accel_with_fallback<B, G>(
    x0: DVector<f64>,
    config: &AccelConfig,
    fallback_iters: usize,
    mut ball: B,
    mut grad: G,
) -> Result<OuterOutcome>
where
    B: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
    G: FnMut(&DVector<f64>, usize) -> Result<DVector<f64>>,
{
    let mut state = AccelState::new(x0);
    match state.run(config, &mut ball, &mut grad) {
        Ok(()) => Ok(state.out),
        Err(Error::BudgetExceeded(msg)) => {
            let mut out = state.out;
            out.warnings.push(format!("falling back to proximal steps: {msg}"));
            let base = out.ball_calls;
            let fb = prox_point_run(out.x.clone(), config.r, fallback_iters, |x, k| ball(x, base + k))?;
            out.x = fb.x;
            out.ball_calls += fb.ball_calls;
            out.fallback_steps = fb.steps;
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// Outer loop selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterMode {
    Prox,
    Accel,
}

impl std::str::FromStr for OuterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prox" => Ok(Self::Prox),
            "accel" => Ok(Self::Accel),
            other => Err(crate::error::invalid("outer", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OuterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Prox => "prox",
            Self::Accel => "accel",
        })
    }
}

/// Knobs of the full pipeline beyond the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: OuterMode,
    pub c_ba: f64,
    pub effort: EffortProfile,
    /// Hard cap on outer steps.
    pub max_steps: usize,
    /// Queries per gradient estimate in the accelerated loop.
    pub gradient_batch: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: OuterMode::Prox,
            c_ba: 8.0,
            effort: EffortProfile::practical(),
            max_steps: 20_000,
            gradient_batch: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub params: MainParams,
    pub outer: OuterOutcome,
}

/// Minimizes the problem's f over B(R) from the origin by optimizing f_ρ to
/// error ε/2 with ball oracle calls.
pub fn solve(problem: &ProblemInstance, config: &PipelineConfig, stream: &RngStream) -> Result<PipelineOutcome> {
    let params = main_params(problem.d, problem.lipschitz, problem.radius, problem.eps, config.c_ba)?;
    let oracle = problem.oracle.phase("ball");
    let ball = |center: &DVector<f64>, call: usize| -> Result<DVector<f64>> {
        let p = params.ball_params(center.clone());
        Ok(ball_optimization_oracle(&p, &oracle, &config.effort, &stream.named("ball").child(call as u64))?.x)
    };
    let x0 = DVector::zeros(problem.d);
    let outer = match config.mode {
        OuterMode::Prox => prox_point_run(x0, params.r, config.max_steps, ball)?,
        OuterMode::Accel => {
            let grad_oracle = problem.oracle.phase("gradient");
            let n = config.gradient_batch.max(1);
            let grad = |x: &DVector<f64>, call: usize| smoothed_gradient(&grad_oracle, x, params.rho, n, &stream.named("grad").child(call as u64));
            let cfg = AccelConfig {
                radius: problem.radius,
                r: params.r,
                target_weight: problem.radius * problem.radius / problem.eps,
                max_steps: config.max_steps,
                max_retries: 3,
                max_ball_calls: config.max_steps,
                min_lambda: params.lambda(),
            };
            ball_accel_with_fallback(x0, &cfg, config.max_steps, ball, grad)?
        }
    };
    Ok(PipelineOutcome { params, outer })
}

/// Mean of n samples g(x + ξ), ξ ~ N(0, ρ²I), in one round.
pub fn smoothed_gradient(oracle: &OracleHandle, x: &DVector<f64>, rho: f64, n: usize, stream: &RngStream) -> Result<DVector<f64>> {
    let xi = stream.named("xi");
    let points: Vec<DVector<f64>> = (0..n as u64)
        .map(|i| crate::rng::gaussian_vector(&xi.child(i), x.len(), rho).map(|e| x + e))
        .collect::<Result<_>>()?;
    let g = oracle.submit_batch(&points, &stream.named("oracle"))?;
    Ok(g.iter().fold(DVector::zeros(x.len()), |acc, v| acc + v) / n as f64)
}
