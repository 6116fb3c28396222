//! Built-in test functions with exact subgradient oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::oracle::GradientOracle;
use crate::rng::StreamRng;

/// A convex function with a value oracle, used for ground truth.
pub trait TestFunction: GradientOracle {
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Lipschitz constant certified for the function (on its stated domain).
    fn lipschitz(&self) -> f64;
}

/// f(x) = ⟨a, x⟩ + b.
#[derive(Clone, Debug)]
pub struct Linear {
    pub a: DVector<f64>,
    pub b: f64,
}

impl GradientOracle for Linear {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn sample(&self, _x: &DVector<f64>, _rng: &mut StreamRng) -> DVector<f64> {
        self.a.clone()
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl TestFunction for Linear {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) + self.b
    }
    fn lipschitz(&self) -> f64 {
        self.a.norm()
    }
}

/// f(x) = ½ xᵀQx + ⟨b, x⟩ with Q symmetric PSD. Lipschitz on B(radius).
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub radius: f64,
}

impl Quadratic {
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.b
    }
}

impl GradientOracle for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn sample(&self, x: &DVector<f64>, _rng: &mut StreamRng) -> DVector<f64> {
        self.gradient(x)
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl TestFunction for Quadratic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x)
    }
    fn lipschitz(&self) -> f64 {
        let qn = self.q.clone().symmetric_eigenvalues().amax();
        qn * self.radius + self.b.norm()
    }
}

/// f(x) = scale·|x_index − shift|.
#[derive(Clone, Debug)]
pub struct AbsCoordinate {
    pub dim: usize,
    pub index: usize,
    pub scale: f64,
    pub shift: f64,
}

impl GradientOracle for AbsCoordinate {
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&self, x: &DVector<f64>, _rng: &mut StreamRng) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        let s = x[self.index] - self.shift;
        g[self.index] = if s > 0.0 {
            self.scale
        } else if s < 0.0 {
            -self.scale
        } else {
            0.0
        };
        g
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl TestFunction for AbsCoordinate {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.scale * (x[self.index] - self.shift).abs()
    }
    fn lipschitz(&self) -> f64 {
        self.scale.abs()
    }
}

/// f(x) = max_i ⟨a_i, x⟩ + b_i. Ties resolve to the lowest index.
#[derive(Clone, Debug)]
pub struct MaxOfLinear {
    pub a: Vec<DVector<f64>>,
    pub b: Vec<f64>,
}

impl MaxOfLinear {
    fn active(&self, x: &DVector<f64>) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (ai, bi)) in self.a.iter().zip(&self.b).enumerate() {
            let v = ai.dot(x) + bi;
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

impl GradientOracle for MaxOfLinear {
    fn dim(&self) -> usize {
        self.a[0].len()
    }
    fn sample(&self, x: &DVector<f64>, _rng: &mut StreamRng) -> DVector<f64> {
        self.a[self.active(x).0].clone()
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl TestFunction for MaxOfLinear {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.active(x).1
    }
    fn lipschitz(&self) -> f64 {
        self.a.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// f(x) = scale·‖x − center‖.
#[derive(Clone, Debug)]
pub struct NormDistance {
    pub center: DVector<f64>,
    pub scale: f64,
}

impl GradientOracle for NormDistance {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn sample(&self, x: &DVector<f64>, _rng: &mut StreamRng) -> DVector<f64> {
        let diff = x - &self.center;
        let n = diff.norm();
        if n > 0.0 {
            diff * (self.scale / n)
        } else {
            DVector::zeros(x.len())
        }
    }
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl TestFunction for NormDistance {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.scale * (x - &self.center).norm()
    }
    fn lipschitz(&self) -> f64 {
        self.scale
    }
}

/// Adds independent uniform noise on [−s, s] to every coordinate.
#[derive(Clone, Debug)]
pub struct WithNoise<F> {
    pub inner: F,
    pub noise: f64,
}

impl<F: GradientOracle> GradientOracle for WithNoise<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample(&self, x: &DVector<f64>, rng: &mut StreamRng) -> DVector<f64> {
        let mut g = self.inner.sample(x, rng);
        for v in g.iter_mut() {
            *v += rng.gen_range(-self.noise..=self.noise);
        }
        g
    }
}

impl<F: TestFunction> TestFunction for WithNoise<F> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(x)
    }
    /// Bound on the root second moment of the noisy samples.
    fn lipschitz(&self) -> f64 {
        let l = self.inner.lipschitz();
        (l * l + self.dim() as f64 * self.noise * self.noise / 3.0).sqrt()
    }
}
