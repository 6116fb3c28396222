//! Synthetic problems with known minimizers.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use parsco::functions::{AbsCoordinate, MaxOfLinear, NormDistance, Quadratic, TestFunction};
use parsco::{gaussian_vector, OracleHandle, ProblemInstance, RngStream};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    MaxOfLinear,
    NormDistance,
    SmoothQuadratic,
    AbsCoordinate,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::MaxOfLinear,
        ProblemKind::NormDistance,
        ProblemKind::SmoothQuadratic,
        ProblemKind::AbsCoordinate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MaxOfLinear => "max-of-linear",
            Self::NormDistance => "norm-distance",
            Self::SmoothQuadratic => "smooth-quadratic",
            Self::AbsCoordinate => "abs-coordinate",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::Invalid(format!("unknown problem `{s}`")))
    }
}

#[derive(Debug, Clone)]
enum Func {
    Max(MaxOfLinear),
    Norm(NormDistance),
    Quad(Quadratic),
    Abs(AbsCoordinate),
}

impl Func {
    fn as_test(&self) -> &dyn TestFunction {
        match self {
            Func::Max(f) => f,
            Func::Norm(f) => f,
            Func::Quad(f) => f,
            Func::Abs(f) => f,
        }
    }
}

/// A convex function over B(R) with its minimizer and minimum recorded.
#[derive(Debug, Clone)]
pub struct TestProblem {
    pub kind: ProblemKind,
    pub d: usize,
    pub lipschitz: f64,
    pub radius: f64,
    pub x_star: DVector<f64>,
    pub f_star: f64,
    func: Func,
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_rotation(d: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    let cols: Vec<DVector<f64>> = (0..d as u64)
        .map(|j| gaussian_vector(&stream.child(j), d, 1.0))
        .collect::<parsco::Result<_>>()?;
    Ok(DMatrix::from_columns(&cols).qr().q())
}

impl TestProblem {
    /// Builds an instance with ‖x*‖ = R/2, scaled so the certified Lipschitz
    /// constant over B(R) is `lipschitz`.
    pub fn generate(kind: ProblemKind, d: usize, lipschitz: f64, radius: f64, stream: &RngStream) -> Result<Self> {
        if d == 0 || !(lipschitz > 0.0) || !(radius > 0.0) {
            return Err(BenchError::Invalid("d, L and R must be positive".into()));
        }
        let dir = gaussian_vector(&stream.named("direction"), d, 1.0)?;
        let x_star = &dir * (0.5 * radius / dir.norm());
        let (func, x_star, f_star) = match kind {
            ProblemKind::MaxOfLinear => {
                // max_j |⟨q_j, x − x*⟩| over an orthonormal basis q_j.
                let q = random_rotation(d, &stream.named("rotation"))?;
                let mut a = Vec::with_capacity(2 * d);
                let mut b = Vec::with_capacity(2 * d);
                for j in 0..d {
                    for s in [1.0, -1.0] {
                        let aj = q.column(j) * (s * lipschitz);
                        b.push(-aj.dot(&x_star));
                        a.push(aj);
                    }
                }
                (Func::Max(MaxOfLinear { a, b }), x_star, 0.0)
            }
            ProblemKind::NormDistance => (
                Func::Norm(NormDistance {
                    center: x_star.clone(),
                    scale: lipschitz,
                }),
                x_star,
                0.0,
            ),
            ProblemKind::SmoothQuadratic => {
                // (c/2)‖x − x*‖² − (c/2)‖x*‖² with c(R + ‖x*‖) = L.
                let c = lipschitz / (radius + x_star.norm());
                let f_star = -0.5 * c * x_star.norm_squared();
                let f = Quadratic {
                    q: DMatrix::identity(d, d) * c,
                    b: &x_star * -c,
                    radius,
                };
                (Func::Quad(f), x_star, f_star)
            }
            ProblemKind::AbsCoordinate => {
                let mut x = DVector::zeros(d);
                x[0] = 0.5 * radius * dir[0].signum();
                let f = AbsCoordinate {
                    dim: d,
                    index: 0,
                    scale: lipschitz,
                    shift: x[0],
                };
                (Func::Abs(f), x, 0.0)
            }
        };
        Ok(Self {
            kind,
            d,
            lipschitz,
            radius,
            x_star,
            f_star,
            func,
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.func.as_test().value(x)
    }

    pub fn gap(&self, x: &DVector<f64>) -> f64 {
        self.value(x) - self.f_star
    }

    /// Lipschitz constant certified by the function itself.
    pub fn certified_lipschitz(&self) -> f64 {
        self.func.as_test().lipschitz()
    }

    /// A fresh oracle handle with its own ledger.
    pub fn oracle(&self) -> OracleHandle {
        match &self.func {
            Func::Max(f) => OracleHandle::new(f.clone()),
            Func::Norm(f) => OracleHandle::new(f.clone()),
            Func::Quad(f) => OracleHandle::new(f.clone()),
            Func::Abs(f) => OracleHandle::new(f.clone()),
        }
    }

    pub fn instance(&self, eps: f64, oracle: OracleHandle) -> Result<ProblemInstance> {
        Ok(ProblemInstance::new(self.lipschitz, self.radius, eps, oracle)?)
    }

    /// Grid check of the recorded optimum over B(R) for d ≤ 3.
    pub fn verify_optimum(&self, points_per_axis: usize) -> OptimumCheck {
        let attained = (self.value(&self.x_star) - self.f_star).abs();
        let mut grid_min = f64::INFINITY;
        if self.d <= 3 {
            let n = points_per_axis.max(2);
            let step = 2.0 * self.radius / (n - 1) as f64;
            let total = n.pow(self.d as u32);
            let mut x = DVector::zeros(self.d);
            for idx in 0..total {
                let mut k = idx;
                for i in 0..self.d {
                    x[i] = -self.radius + step * (k % n) as f64;
                    k /= n;
                }
                if x.norm() <= self.radius {
                    grid_min = grid_min.min(self.value(&x));
                }
            }
        }
        OptimumCheck {
            attained_error: attained,
            grid_min,
            in_ball: self.x_star.norm() <= self.radius,
            f_star: self.f_star,
        }
    }

    /// Largest oracle norm over B(R) probes, including the analytic worst
    /// case for each kind.
    pub fn probe_lipschitz(&self, probes: usize, stream: &RngStream) -> Result<f64> {
        let mut pts = vec![DVector::zeros(self.d), -self.x_star.normalize() * self.radius];
        for i in 0..probes as u64 {
            let g = gaussian_vector(&stream.child(i), self.d, 1.0)?;
            pts.push(&g * (self.radius / g.norm().max(1.0)));
        }
        let oracle = self.oracle();
        let g = oracle.submit_batch(&pts, stream)?;
        Ok(g.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumCheck {
    pub attained_error: f64,
    /// Smallest value on the grid (∞ when d > 3 and no grid was used).
    pub grid_min: f64,
    pub in_ball: bool,
    pub f_star: f64,
}

impl OptimumCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.attained_error <= tol && self.grid_min >= self.f_star - tol && self.in_ball
    }
}
