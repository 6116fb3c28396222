//! Closed-form quadratic models F(x) = ⟨g, x⟩ + ½xᵀQx used as test oracles
//! and for exact inner solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{require, Result};

#[derive(Clone, Debug)]
pub struct QuadraticModel {
    pub q: DMatrix<f64>,
    pub g: DVector<f64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    /// g in the eigenbasis.
    g_eig: DVector<f64>,
}

impl QuadraticModel {
    /// `q` must be symmetric positive semidefinite.
    pub fn new(q: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        require(q.is_square() && q.nrows() == g.len(), "q", "must be square and match g")?;
        let asym = (&q - q.transpose()).amax();
        require(asym <= 1e-12 * q.amax().max(1.0), "q", "must be symmetric")?;
        let eig = q.clone().symmetric_eigen();
        require(
            eig.eigenvalues.iter().all(|&v| v >= -1e-12 * q.amax().max(1.0)),
            "q",
            "must be positive semidefinite",
        )?;
        let g_eig = eig.eigenvectors.transpose() * &g;
        Ok(Self { q, g, eig, g_eig })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.g.dot(x) + 0.5 * x.dot(&(&self.q * x))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.g + &self.q * x
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.eigenvalues.min()
    }

    /// x*_α = −(Q + αI)⁻¹g.
    pub fn reg_minimizer(&self, alpha: f64) -> DVector<f64> {
        let coef = DVector::from_iterator(
            self.dim(),
            self.g_eig.iter().zip(self.eig.eigenvalues.iter()).map(|(&c, &mu)| -c / (mu + alpha)),
        );
        &self.eig.eigenvectors * coef
    }

    /// ‖x*_α‖ without forming the vector.
    pub fn reg_norm(&self, alpha: f64) -> f64 {
        self.g_eig
            .iter()
            .zip(self.eig.eigenvalues.iter())
            .map(|(&c, &mu)| (c / (mu + alpha)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// F(x) + (α/2)‖x‖².
    pub fn reg_value(&self, x: &DVector<f64>, alpha: f64) -> f64 {
        self.value(x) + 0.5 * alpha * x.norm_squared()
    }

    /// argmin of F(x) + (α₀/2)‖x‖² over B(r), with the multiplier α ≥ α₀ such
    /// that the minimizer equals x*_α.
    pub fn ball_minimizer(&self, alpha0: f64, r: f64) -> (DVector<f64>, f64) {
        if self.reg_norm(alpha0) <= r {
            return (self.reg_minimizer(alpha0), alpha0);
        }
        // ‖x*_α‖ is decreasing in α; bracket then bisect.
        let mut lo = alpha0;
        let mut hi = alpha0.abs().max(1.0);
        while self.reg_norm(hi) > r {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.reg_norm(mid) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (self.reg_minimizer(hi), hi)
    }

    /// min over B(r) of F(x) + λ‖x‖².
    pub fn constrained_value(&self, lambda: f64, r: f64) -> f64 {
        let (x, _) = self.ball_minimizer(2.0 * lambda, r);
        self.reg_value(&x, 2.0 * lambda)
    }
}

/// Outcome of checking the regularized-minima laws on an α grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegMinimaReport {
    /// ‖x*_α‖ strictly decreasing along the sorted grid.
    pub norms_decreasing: bool,
    /// ‖x*_α − x*_α′‖ ≤ ‖x*_α‖·ln(α′/α) for every grid pair.
    pub log_bound_holds: bool,
    /// α ≥ 4L/r implies ‖x*_α‖ ≤ r/2, with L = ‖∇F(0)‖.
    pub radius_bound_holds: bool,
    /// Largest violation over all three checks (≤ 0 when all hold).
    pub worst_violation: f64,
}

impl RegMinimaReport {
    pub fn all_hold(&self) -> bool {
        self.norms_decreasing && self.log_bound_holds && self.radius_bound_holds
    }
}

/// Checks the three regularized-minima laws with absolute tolerance `tol`.
pub fn reg_minima_check(model: &QuadraticModel, alphas: &[f64], r: f64, tol: f64) -> RegMinimaReport {
    let mut a: Vec<f64> = alphas.iter().copied().filter(|v| *v > 0.0).collect();
    a.sort_by(f64::total_cmp);
    a.dedup();
    let xs: Vec<DVector<f64>> = a.iter().map(|&v| model.reg_minimizer(v)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut decreasing = true;
    for w in xs.windows(2) {
        let v = w[1].norm() - w[0].norm();
        worst = worst.max(v);
        if !(v < 0.0) {
            decreasing = false;
        }
    }
    let mut log_ok = true;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let v = (&xs[i] - &xs[j]).norm() - xs[i].norm() * (a[j] / a[i]).ln();
            worst = worst.max(v);
            if v > tol {
                log_ok = false;
            }
        }
    }
    let l = model.g.norm();
    let mut radius_ok = true;
    for (x, &alpha) in xs.iter().zip(&a) {
        if alpha >= 4.0 * l / r {
            let v = x.norm() - r / 2.0;
            worst = worst.max(v);
            if v > tol {
                radius_ok = false;
            }
        }
    }
    RegMinimaReport {
        norms_decreasing: decreasing,
        log_bound_holds: log_ok,
        radius_bound_holds: radius_ok,
        worst_violation: worst,
    }
}
