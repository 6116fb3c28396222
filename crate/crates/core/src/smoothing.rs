//! Gaussian smoothing: the gradient estimator for f_ρ, Monte Carlo Hessians
//! and the Hessian stability certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, require, Error, Result};
use crate::oracle::OracleHandle;
use crate::rng::{fill_gaussian, gaussian_vector, RngStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub rho: f64,
}

impl SmoothingParams {
    pub fn new(rho: f64) -> Result<Self> {
        require(rho > 0.0 && rho.is_finite(), "rho", "must be positive")?;
        Ok(Self { rho })
    }
}

/// Additive and multiplicative slack of a Loewner comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCert {
    pub eps_add: f64,
    pub eps_mul: f64,
}

impl StabilityCert {
    pub fn new(eps_add: f64, eps_mul: f64) -> Result<Self> {
        require(eps_add >= 0.0 && eps_add.is_finite(), "eps_add", "must be finite and nonnegative")?;
        require(eps_mul >= 0.0 && eps_mul.is_finite(), "eps_mul", "must be finite and nonnegative")?;
        Ok(Self { eps_add, eps_mul })
    }
}

/// ρ = ε / (2L√d): with this choice |f_ρ − f| ≤ ε/2.
pub fn rho_for_target(eps: f64, lipschitz: f64, d: usize) -> Result<f64> {
    require(eps > 0.0, "eps", "must be positive")?;
    require(lipschitz > 0.0, "lipschitz", "must be positive")?;
    require(d >= 1, "d", "must be at least 1")?;
    Ok(eps / (2.0 * lipschitz * (d as f64).sqrt()))
}

/// Monte Carlo estimate of f_ρ(x) = E f(x − ξ). Test helper for low dimension.
pub fn smoothed_value_mc<F>(f: F, x: &DVector<f64>, rho: f64, n: usize, stream: &RngStream) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    require(n >= 1, "n_samples", "must be at least 1")?;
    require(rho >= 0.0, "rho", "must be nonnegative")?;
    if rho == 0.0 {
        return Ok(f(x));
    }
    let mut rng = stream.rng();
    let mut xi = DVector::zeros(x.len());
    let mut total = 0.0;
    for _ in 0..n {
        fill_gaussian(&mut rng, rho, xi.as_mut_slice());
        total += f(&(x - &xi));
    }
    Ok(total / n as f64)
}

/// Combines samples into g(z − ξ) + (2/ρ²)⟨ξ, x − z⟩ g(ξ).
pub fn combine_estimator(
    x: &DVector<f64>,
    z: &DVector<f64>,
    rho: f64,
    xi: &DVector<f64>,
    g_xi: &DVector<f64>,
    g_z_minus_xi: &DVector<f64>,
) -> DVector<f64> {
    let coef = 2.0 / (rho * rho) * (xi.dot(x) - xi.dot(z));
    g_z_minus_xi + g_xi * coef
}

/// One estimator sample per point in `xs`, all sharing the anchor `z`.
/// Submits the 2·|xs| oracle queries as a single batch.
pub fn grad_estimator_many(
    oracle: &OracleHandle,
    xs: &[DVector<f64>],
    z: &DVector<f64>,
    rho: f64,
    stream: &RngStream,
) -> Result<Vec<DVector<f64>>> {
    require(rho > 0.0, "rho", "must be positive")?;
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = z.len();
    let xi_stream = stream.named("xi");
    let mut xis = Vec::with_capacity(xs.len());
    let mut points = Vec::with_capacity(2 * xs.len());
    for i in 0..xs.len() {
        let xi = gaussian_vector(&xi_stream.child(i as u64), d, rho)?;
        points.push(xi.clone());
        points.push(z - &xi);
        xis.push(xi);
    }
    let g = oracle.submit_batch(&points, &stream.named("oracle"))?;
    Ok(xs
        .iter()
        .zip(&xis)
        .enumerate()
        .map(|(i, (x, xi))| combine_estimator(x, z, rho, xi, &g[2 * i], &g[2 * i + 1]))
        .collect())
}

/// One sample of the unbiased estimator of ∇f_ρ(z) + 2∇²f_ρ(0)(x − z).
/// Costs two queries in one round.
pub fn grad_estimator(
    oracle: &OracleHandle,
    x: &DVector<f64>,
    z: &DVector<f64>,
    rho: f64,
    stream: &RngStream,
) -> Result<DVector<f64>> {
    Ok(grad_estimator_many(oracle, std::slice::from_ref(x), z, rho, stream)?.remove(0))
}

/// Symmetrized Monte Carlo estimate of ∇²f_ρ(x) from n queries at x + ξ_i.
pub fn hessian_mc(
    oracle: &OracleHandle,
    x: &DVector<f64>,
    rho: f64,
    n: usize,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    require(n >= 1, "n", "must be at least 1")?;
    require(rho > 0.0, "rho", "must be positive")?;
    let d = x.len();
    let xi_stream = stream.named("xi");
    let xis = (0..n)
        .map(|i| gaussian_vector(&xi_stream.child(i as u64), d, rho))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<_> = xis.iter().map(|xi| x + xi).collect();
    let g = oracle.submit_batch(&points, &stream.named("oracle"))?;
    let mut h = DMatrix::zeros(d, d);
    for (gi, xi) in g.iter().zip(&xis) {
        h.ger(1.0, gi, xi, 1.0);
    }
    let h = (&h + h.transpose()) * (1.0 / (2.0 * n as f64 * rho * rho));
    Ok(h)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-8 * scale {
        Err(Error::NotSymmetric(asym))
    } else {
        Ok(())
    }
}

const PSD_TOL: f64 = 1e-8;

/// Whether Hx ⪯ e^{ε_mul}Hy + ε_add I and Hy ⪯ e^{ε_mul}Hx + ε_add I.
pub fn check_approx(hx: &DMatrix<f64>, hy: &DMatrix<f64>, cert: &StabilityCert) -> Result<bool> {
    if hx.shape() != hy.shape() || !hx.is_square() {
        return Err(Error::DimensionMismatch {
            expected: hx.nrows(),
            got: hy.nrows(),
        });
    }
    check_symmetric(hx)?;
    check_symmetric(hy)?;
    let d = hx.nrows();
    let scale = cert.eps_mul.exp();
    let shift = DMatrix::<f64>::identity(d, d) * cert.eps_add;
    let upper = hy * scale + &shift - hx;
    let lower = hx * scale + &shift - hy;
    Ok(min_eigenvalue(&upper) >= -PSD_TOL && min_eigenvalue(&lower) >= -PSD_TOL)
}

/// Certificate for ∇²f_ρ(x) versus ∇²f_ρ(y):
/// ε_mul = ‖x−y‖²/ρ² + 2‖x−y‖√(ln 1/δ)/ρ, ε_add = √2·Lδ/ρ.
pub fn stability_cert(
    x: &DVector<f64>,
    y: &DVector<f64>,
    rho: f64,
    lipschitz: f64,
    delta: f64,
) -> Result<StabilityCert> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    require(rho > 0.0, "rho", "must be positive")?;
    let dist = (x - y).norm();
    let eps_mul = dist * dist / (rho * rho) + 2.0 * dist * (1.0 / delta).ln().sqrt() / rho;
    let eps_add = std::f64::consts::SQRT_2 * lipschitz * delta / rho;
    StabilityCert::new(eps_add, eps_mul)
}
