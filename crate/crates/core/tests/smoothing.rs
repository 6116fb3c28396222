use std::f64::consts::PI;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use parsco::functions::{AbsCoordinate, Linear, MaxOfLinear, NormDistance, Quadratic, TestFunction, WithNoise};
use parsco::oracle::{GradientOracle, OracleHandle};
use parsco::rng::RngStream;
use parsco::smoothing::*;

/// Mean and per-coordinate standard error of n estimator samples.
fn estimator_stats(oracle: &OracleHandle, x: &DVector<f64>, z: &DVector<f64>, rho: f64, n: usize, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let xs = vec![x.clone(); n];
    let g = grad_estimator_many(oracle, &xs, z, rho, &RngStream::root(seed)).unwrap();
    let d = x.len();
    let mean = g.iter().fold(DVector::zeros(d), |a, v| a + v) / n as f64;
    let var = g.iter().fold(DVector::zeros(d), |a: DVector<f64>, v| a + (v - &mean).map(|e| e * e)) / (n - 1) as f64;
    (mean, var.map(|v| (v / n as f64).sqrt()))
}

fn assert_within(mean: &DVector<f64>, se: &DVector<f64>, expected: &DVector<f64>, k: f64) {
    for i in 0..mean.len() {
        assert!(
            (mean[i] - expected[i]).abs() <= k * se[i] + 1e-12,
            "coordinate {i}: {} vs {} (se {})",
            mean[i],
            expected[i],
            se[i]
        );
    }
}

#[test]
fn linear_estimator_is_unbiased() {
    let a = dvector![0.6, -0.8, 0.0];
    let oracle = OracleHandle::new(Linear { a: a.clone(), b: 1.0 });
    let (mean, se) = estimator_stats(&oracle, &dvector![0.5, 0.1, -0.2], &dvector![0.0, 0.3, 0.1], 0.4, 100_000, 1);
    assert_within(&mean, &se, &a, 4.0);
}

#[test]
fn quadratic_estimator_is_unbiased() {
    let q = dmatrix![2.0, 0.5; 0.5, 1.0];
    let b = dvector![0.1, -0.3];
    let oracle = OracleHandle::new(Quadratic { q: q.clone(), b: b.clone(), radius: 1.0 });
    let (x, z) = (dvector![0.4, -0.1], dvector![0.1, 0.2]);
    let expected = &q * &z + &b + &q * (&x - &z) * 2.0;
    let (mean, se) = estimator_stats(&oracle, &x, &z, 0.3, 100_000, 2);
    assert_within(&mean, &se, &expected, 4.0);
}

#[test]
fn absolute_value_estimator_is_unbiased() {
    // f_ρ'(0) = 0 and f_ρ''(0) = √(2/π)/ρ for |x|.
    let oracle = OracleHandle::new(AbsCoordinate { dim: 1, index: 0, scale: 1.0, shift: 0.0 });
    let rho = 0.5;
    let x = dvector![0.2];
    let expected = dvector![2.0 * (2.0 / PI).sqrt() / rho * 0.2];
    let (mean, se) = estimator_stats(&oracle, &x, &DVector::zeros(1), rho, 200_000, 3);
    assert_within(&mean, &se, &expected, 4.0);
}

#[test]
fn estimator_error_shrinks_like_inverse_root_n() {
    let a = dvector![1.0, 0.0];
    let oracle = OracleHandle::new(Linear { a: a.clone(), b: 0.0 });
    let (x, z) = (dvector![0.3, 0.3], DVector::zeros(2));
    let (_, se_small) = estimator_stats(&oracle, &x, &z, 0.5, 2_500, 4);
    let (_, se_big) = estimator_stats(&oracle, &x, &z, 0.5, 40_000, 5);
    let ratio = se_small[0] / se_big[0];
    assert!((3.0..=5.5).contains(&ratio), "{ratio}");
}

#[test]
fn linear_second_moment_closed_form() {
    let a = dvector![0.0, 2.0];
    let oracle = OracleHandle::new(Linear { a: a.clone(), b: 0.0 });
    let rho = 0.5;
    let x = dvector![0.5, 0.0];
    let z = DVector::zeros(2);
    let n = 100_000;
    let g = grad_estimator_many(&oracle, &vec![x.clone(); n], &z, rho, &RngStream::root(6)).unwrap();
    let sq: Vec<f64> = g.iter().map(|v| v.norm_squared()).collect();
    let m = sq.iter().sum::<f64>() / n as f64;
    let sd = (sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let exact = 4.0 * (1.0 + 4.0 * 0.25 / 0.25);
    assert!((m - exact).abs() <= 5.0 * sd / (n as f64).sqrt(), "{m} vs {exact}");
    assert!(exact <= 2.0 * 4.0 + 8.0 * 4.0 * 0.25 / 0.25);
}

fn lipschitz_zoo(d: usize) -> Vec<(&'static str, OracleHandle, f64)> {
    let max = MaxOfLinear {
        a: vec![DVector::from_element(d, 1.0 / (d as f64).sqrt()), DVector::from_fn(d, |i, _| if i == 0 { -1.0 } else { 0.0 })],
        b: vec![0.0, 0.1],
    };
    let noisy = WithNoise { inner: max.clone(), noise: 0.3 };
    let norm = NormDistance { center: DVector::from_element(d, 0.2), scale: 1.5 };
    let abs = AbsCoordinate { dim: d, index: d - 1, scale: 1.0, shift: 0.1 };
    let lin = Linear { a: DVector::from_element(d, 0.5), b: 0.0 };
    vec![
        ("max", OracleHandle::new(max.clone()), max.lipschitz()),
        ("noisy max", OracleHandle::new(noisy.clone()), noisy.lipschitz()),
        ("norm", OracleHandle::new(norm.clone()), norm.lipschitz()),
        ("abs", OracleHandle::new(abs.clone()), abs.lipschitz()),
        ("linear", OracleHandle::new(lin.clone()), lin.lipschitz()),
    ]
}

#[test]
fn second_moment_within_bound_on_grid() {
    let rho = 0.3;
    let n = 20_000;
    let z = dvector![0.1, -0.1, 0.05];
    for (name, oracle, l) in lipschitz_zoo(3) {
        for (k, dist) in [0.0, rho / 2.0, rho, 4.0 * rho].into_iter().enumerate() {
            let x = &z + DVector::from_element(3, dist / 3f64.sqrt());
            let g = grad_estimator_many(&oracle, &vec![x; n], &z, rho, &RngStream::root(10 + k as u64)).unwrap();
            let sq: Vec<f64> = g.iter().map(|v| v.norm_squared()).collect();
            let m = sq.iter().sum::<f64>() / n as f64;
            let sd = (sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let bound = 2.0 * l * l + 8.0 * l * l * dist * dist / (rho * rho);
            assert!(m <= bound + 5.0 * sd / (n as f64).sqrt(), "{name} at {dist}: {m} > {bound}");
        }
    }
}

#[test]
fn estimator_uses_one_round_of_two_queries_each() {
    let oracle = OracleHandle::new(Linear { a: dvector![1.0], b: 0.0 });
    grad_estimator_many(&oracle, &vec![dvector![0.0]; 17], &dvector![0.0], 1.0, &RngStream::root(0)).unwrap();
    let s = oracle.ledger().snapshot();
    assert_eq!((s.query_depth, s.query_count), (1, 34));
}

/// max(⟨a, x⟩, ⟨b, x⟩) and its exact smoothed Hessian
/// (a − b)(a − b)ᵀ·φ_σ(⟨a − b, x⟩) with σ = ρ‖a − b‖.
struct MaxOfTwo {
    f: MaxOfLinear,
    u: DVector<f64>,
}

impl MaxOfTwo {
    fn new(a: DVector<f64>, b: DVector<f64>) -> Self {
        let u = &a - &b;
        Self { f: MaxOfLinear { a: vec![a, b], b: vec![0.0, 0.0] }, u }
    }

    fn hessian(&self, x: &DVector<f64>, rho: f64) -> DMatrix<f64> {
        let sigma = rho * self.u.norm();
        let t = self.u.dot(x);
        let density = (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
        &self.u * self.u.transpose() * density
    }
}

fn max_of_two() -> MaxOfTwo {
    MaxOfTwo::new(dvector![1.0, 0.0], dvector![0.0, 1.0])
}

#[test]
fn monte_carlo_hessian_matches_closed_form() {
    let m = max_of_two();
    let oracle = OracleHandle::new(m.f.clone());
    let rho = 0.5;
    let x = dvector![0.1, -0.05];
    let n = 200_000;
    let h = hessian_mc(&oracle, &x, rho, n, &RngStream::root(20)).unwrap();
    let err = (h - m.hessian(&x, rho)).symmetric_eigenvalues().amax();
    assert!(err <= 5.0 * m.f.lipschitz() / (rho * (n as f64).sqrt()), "{err}");
}

fn random_pair(seed: u64, rho: f64, max_dist: f64) -> (DVector<f64>, DVector<f64>) {
    let s = RngStream::root(seed);
    let x = parsco::rng::gaussian_vector(&s.named("x"), 2, rho).unwrap();
    let dir = parsco::rng::gaussian_vector(&s.named("dir"), 2, 1.0).unwrap();
    let frac = parsco::rng::gaussian_vector(&s.named("frac"), 1, 1.0).unwrap()[0].abs().min(1.0);
    let y = &x + dir.normalize() * (max_dist * frac);
    (x, y)
}

#[test]
fn exact_hessians_satisfy_stability_certificate() {
    let m = max_of_two();
    let rho = 0.4;
    let l = m.f.lipschitz();
    for seed in 0..200 {
        let (x, y) = random_pair(seed, rho, rho / 2.0);
        let cert = stability_cert(&x, &y, rho, l, 0.01).unwrap();
        assert!(check_approx(&m.hessian(&x, rho), &m.hessian(&y, rho), &cert).unwrap(), "seed {seed}");
    }
}

#[test]
fn monte_carlo_hessians_satisfy_certificate_with_slack() {
    let m = max_of_two();
    let oracle = OracleHandle::new(m.f.clone());
    let rho = 0.4;
    let l = m.f.lipschitz();
    for seed in 0..5 {
        let (x, y) = random_pair(100 + seed, rho, rho / 2.0);
        let s = RngStream::root(seed);
        let hx = hessian_mc(&oracle, &x, rho, 100_000, &s.named("x")).unwrap();
        let hy = hessian_mc(&oracle, &y, rho, 100_000, &s.named("y")).unwrap();
        let mut cert = stability_cert(&x, &y, rho, l, 0.01).unwrap();
        cert.eps_add += 0.05 * l / rho;
        assert!(check_approx(&hx, &hy, &cert).unwrap(), "seed {seed}");
    }
}

#[test]
fn regularized_hessians_within_factor_two() {
    let m = max_of_two();
    let rho = 0.4;
    let l = m.f.lipschitz();
    let eye = DMatrix::<f64>::identity(2, 2);
    for lambda in [0.1, 1.0, l / rho] {
        let r = rho / 6.0 / (2.0 * l / (lambda * rho)).ln().max(f64::MIN_POSITIVE).sqrt();
        let r = r.min(rho);
        for seed in 0..100 {
            let (x, y) = random_pair(1000 + seed, rho, r);
            let hx = m.hessian(&x, rho) + &eye * lambda;
            let hy = m.hessian(&y, rho) + &eye * lambda;
            let cert = StabilityCert::new(0.0, 2f64.ln()).unwrap();
            assert!(check_approx(&hx, &hy, &cert).unwrap(), "λ={lambda} seed {seed}");
        }
    }
}

#[test]
fn builtin_oracles_have_bounded_mean() {
    let d = 3;
    let probes = [DVector::zeros(d), DVector::from_element(d, 0.2), dvector![1.0, -2.0, 0.5]];
    for (name, oracle, l) in lipschitz_zoo(d) {
        for (k, x) in probes.iter().enumerate() {
            let n = 2_000;
            let g = oracle.submit_batch(&vec![x.clone(); n], &RngStream::root(k as u64)).unwrap();
            let mean = g.iter().fold(DVector::zeros(d), |a, v| a + v) / n as f64;
            assert!(mean.norm() <= l * (1.0 + 5.0 / (n as f64).sqrt()), "{name}: {}", mean.norm());
        }
    }
}

#[test]
fn noisy_oracle_bound_covers_noise() {
    let f = WithNoise { inner: Linear { a: dvector![1.0, 0.0], b: 0.0 }, noise: 0.5 };
    let oracle = OracleHandle::new(f.clone());
    assert!(!f.is_deterministic());
    let n = 50_000;
    let g = oracle.submit_batch(&vec![dvector![0.0, 0.0]; n], &RngStream::root(3)).unwrap();
    let m = g.iter().map(|v| v.norm_squared()).sum::<f64>() / n as f64;
    assert!((m - f.lipschitz().powi(2)).abs() < 0.01, "{m}");
}
