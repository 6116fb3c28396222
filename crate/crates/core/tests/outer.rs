use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use parsco::ball_oracle::QuadraticModel;
use parsco::functions::{NormDistance, TestFunction};
use parsco::oracle::OracleHandle;
use parsco::outer::*;
use parsco::problem::ProblemInstance;
use parsco::rng::RngStream;

#[test]
fn rho_for_unit_problem_in_four_dimensions() {
    let p = main_params(4, 1.0, 1.0, 1.0 / 4.0, 100.0).unwrap();
    assert!((p.rho - 1.0 / 16.0).abs() < 1e-15);
    let p = main_params(4, 1.0, 4.0, 1.0, 100.0).unwrap();
    assert_eq!(p.rho, 0.25);
}

#[test]
fn kappa_below_two_rejected() {
    assert!(main_params(3, 1.0, 1.0, 0.75, 100.0).is_err());
    assert!(main_params(3, 1.0, 1.0, 0.5, 100.0).is_ok());
}

#[test]
fn radius_satisfies_stability_bound() {
    for (d, eps) in [(1, 0.3), (10, 0.05), (100, 0.01), (3, 0.001)] {
        let p = main_params(d, 1.0, 1.0, eps, 100.0).unwrap();
        let bound = radius_bound(p.lipschitz, p.lam_star, p.rho, p.c_ba);
        assert!(p.r <= bound, "d={d} eps={eps}");
        assert!(p.r <= p.rho / (d as f64 * p.kappa).ln().sqrt() * (1.0 + 1e-15));
        if p.halvings > 0 {
            assert!(2.0 * p.r > bound);
        }
    }
}

#[test]
fn eighth_of_eps_grows_k_by_three_to_six() {
    for d in [2, 10, 100] {
        let a = main_params(d, 1.0, 1.0, 0.1, 100.0).unwrap();
        let b = main_params(d, 1.0, 1.0, 0.1 / 8.0, 100.0).unwrap();
        let ratio = b.k / a.k;
        assert!((3.0..=6.0).contains(&ratio), "d={d} ratio={ratio}");
    }
}

#[test]
fn benchmark_parameters_are_admissible_for_the_ball_oracle() {
    let p = main_params(10, 1.0, 1.0, 0.05, 8.0).unwrap();
    p.ball_params(DVector::zeros(10)).validate().unwrap();
}

#[test]
fn degenerate_schedule_when_ball_is_the_domain() {
    let s = build_schedule(1.0, 1.0, 0.1, 1.0, 100.0).unwrap();
    assert_eq!(s.k, 1.0);
    assert_eq!(s.j_rows().len(), 100);
}

#[test]
fn j_row_counts_halve() {
    let s = build_schedule(1.0, 1e-3, 0.01, 1.0, 10.0).unwrap();
    assert_eq!(s.j_rows().len(), (s.k.log2() + 10.0).ceil() as usize);
    for w in s.j_rows().windows(2) {
        assert!((w[1].count / w[0].count - 0.5).abs() < 1e-12);
        assert!((w[1].phi / w[0].phi - 0.5).abs() < 1e-12);
    }
    let total: f64 = s.j_rows().iter().map(|r| r.count).sum();
    assert!(total <= 2.0 * s.c_ba * s.k * s.log_term());
    let main = s.main_row();
    assert!((main.count - 10.0 * s.k * s.log_term().powi(3)).abs() < 1e-9 * main.count);
    assert!((main.phi - s.lam_star * 1e-6 / 10.0).abs() < 1e-12 * main.phi);
}

#[test]
fn schedule_rejects_bad_inputs() {
    assert!(build_schedule(1.0, 2.0, 0.1, 1.0, 10.0).is_err());
    assert!(build_schedule(1.0, 0.1, 2.0, 1.0, 10.0).is_err());
    assert!(build_schedule(1.0, 0.1, 0.1, 1.0, 0.0).is_err());
}

/// f(x) = ½xᵀQx + ⟨b, x⟩ with an exact ball oracle for f + (λ/2)‖x − c‖².
struct ExactQuadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    r: f64,
}

impl ExactQuadratic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x)
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.b
    }

    fn ball(&self, c: &DVector<f64>) -> DVector<f64> {
        let n = c.len();
        let m = QuadraticModel::new(&self.q + DMatrix::identity(n, n) * self.lambda, self.grad(c)).unwrap();
        m.ball_minimizer(0.0, self.r).0 + c
    }

    fn minimum(&self) -> f64 {
        let x = -self.q.clone().lu().solve(&self.b).unwrap();
        self.value(&x)
    }
}

fn exact_quadratic() -> ExactQuadratic {
    ExactQuadratic {
        q: dmatrix![1.0, 0.2; 0.2, 0.5],
        b: dvector![-0.6, 0.3],
        lambda: 0.5,
        r: 0.05,
    }
}

#[test]
fn prox_steps_never_increase_value() {
    let f = exact_quadratic();
    let mut values = vec![f.value(&DVector::zeros(2))];
    let out = prox_point_run(DVector::zeros(2), f.r, 200, |x, _| {
        let y = f.ball(x);
        values.push(f.value(&y));
        Ok(y)
    })
    .unwrap();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!(f.value(&out.x) - f.minimum() < 1e-3);
}

#[test]
fn prox_stops_after_two_short_steps() {
    let f = exact_quadratic();
    let out = prox_point_run(DVector::zeros(2), f.r, 10_000, |x, _| Ok(f.ball(x))).unwrap();
    assert!(out.steps < 10_000);
    assert_eq!(out.steps, out.ball_calls);
}

#[test]
fn prox_respects_iteration_cap() {
    let f = exact_quadratic();
    let out = prox_point_run(DVector::zeros(2), f.r, 3, |x, _| Ok(f.ball(x))).unwrap();
    assert_eq!(out.steps, 3);
    assert!(out.x.norm() <= 3.0 * f.r + 1e-12);
}

fn accel_config(f: &ExactQuadratic, target: f64) -> AccelConfig {
    AccelConfig {
        radius: 10.0,
        r: f.r,
        target_weight: target,
        max_steps: 100_000,
        max_retries: 3,
        max_ball_calls: 100_000,
        min_lambda: f.lambda,
    }
}

#[test]
fn accelerated_loop_reaches_weight_bound() {
    let f = exact_quadratic();
    let start = dvector![3.0, -2.0];
    let dist = (&start - (-f.q.clone().lu().solve(&f.b).unwrap())).norm();
    let eps = 1e-3;
    let cfg = accel_config(&f, dist * dist / eps);
    let out = ball_accel_run(start.clone(), &cfg, |y, _| Ok(f.ball(y)), |x, _| Ok(f.grad(x))).unwrap();
    assert!(f.value(&out.x) - f.minimum() <= eps);
    assert!(out.steps > 0 && out.ball_calls == out.steps + out.retries);
}

#[test]
fn budget_overrun_falls_back_to_prox() {
    let f = exact_quadratic();
    let mut cfg = accel_config(&f, 1e6);
    cfg.max_ball_calls = 5;
    let err = ball_accel_run(dvector![1.0, 1.0], &cfg, |y, _| Ok(f.ball(y)), |x, _| Ok(f.grad(x)));
    assert!(matches!(err, Err(parsco::error::Error::BudgetExceeded(_))));
    let out = ball_accel_with_fallback(dvector![1.0, 1.0], &cfg, 500, |y, _| Ok(f.ball(y)), |x, _| Ok(f.grad(x))).unwrap();
    assert_eq!(out.warnings.len(), 1);
    assert!(out.fallback_steps > 0);
    assert_eq!(out.ball_calls, 5 + out.fallback_steps);
}

#[test]
fn ball_calls_within_schedule_budget() {
    // The schedule's hidden constants make it much larger than the calls
    // actually spent, so only the upper end of the budget is asserted.
    let f = exact_quadratic();
    let start = dvector![3.0, -2.0];
    let eps = 1e-3;
    let cfg = accel_config(&f, 16.0 / eps);
    let out = ball_accel_run(start, &cfg, |y, _| Ok(f.ball(y)), |x, _| Ok(f.grad(x))).unwrap();
    let s = build_schedule(4.0, f.r, eps, 4.0, 1.0).unwrap();
    let ratio = out.ball_calls as f64 / s.total_calls();
    println!("ball calls {} schedule {:.1} ratio {ratio:.2e}", out.ball_calls, s.total_calls());
    assert!(ratio <= 10.0);
}

fn norm_problem(d: usize, eps: f64) -> (NormDistance, ProblemInstance) {
    let f = NormDistance {
        center: DVector::from_fn(d, |i, _| if i == 0 { 0.3 } else { 0.0 }),
        scale: 1.0,
    };
    let p = ProblemInstance::new(1.0, 1.0, eps, OracleHandle::new(f.clone())).unwrap();
    (f, p)
}

#[test]
fn pipeline_stays_feasible_and_solves_norm_distance() {
    for mode in [OuterMode::Prox, OuterMode::Accel] {
        let (f, p) = norm_problem(3, 0.2);
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        let out = solve(&p, &cfg, &RngStream::root(5)).unwrap();
        let steps = out.outer.ball_calls as f64;
        assert!(out.outer.x.norm() <= p.radius + out.params.r * steps);
        assert!(f.value(&out.outer.x) <= p.eps, "{mode}: {}", f.value(&out.outer.x));
    }
}

#[test]
fn pipeline_is_deterministic_given_seed() {
    let (_, p) = norm_problem(2, 0.3);
    let cfg = PipelineConfig {
        mode: OuterMode::Accel,
        ..PipelineConfig::default()
    };
    let a = solve(&p, &cfg, &RngStream::root(9)).unwrap();
    let (_, p) = norm_problem(2, 0.3);
    let b = solve(&p, &cfg, &RngStream::root(9)).unwrap();
    assert_eq!(a.outer, b.outer);
}

#[test]
fn mode_parsing() {
    assert_eq!("prox".parse::<OuterMode>().unwrap(), OuterMode::Prox);
    assert_eq!("accel".parse::<OuterMode>().unwrap(), OuterMode::Accel);
    assert!("fast".parse::<OuterMode>().is_err());
}
