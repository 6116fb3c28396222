use nalgebra::DVector;
use parsco::RngStream;
use parsco_bench::baseline::{baseline_iters, baseline_sgd};
use parsco_bench::config::{ExperimentConfig, MethodKind, Overrides};
use parsco_bench::error::BenchError;
use parsco_bench::problems::{ProblemKind, TestProblem};
use parsco_bench::record::{read_csv, write_csv, CsvRow, COLUMNS};
use parsco_bench::runner::run_experiment;
use parsco_bench::scaling::{depth_scaling_report, fit_log_log};
use proptest::prelude::*;

fn problem(kind: ProblemKind, d: usize, seed: u64) -> TestProblem {
    TestProblem::generate(kind, d, 1.0, 1.0, &RngStream::root(seed)).unwrap()
}

#[test]
fn baseline_on_quadratic_reaches_classical_bound() {
    let seeds = 100;
    let mut total = 0.0;
    for seed in 0..seeds {
        let p = problem(ProblemKind::SmoothQuadratic, 5, seed);
        let oracle = p.oracle();
        let x = baseline_sgd(&oracle, 1.0, 1.0, 10_000, &RngStream::root(seed)).unwrap();
        total += p.gap(&x);
        let s = oracle.ledger().snapshot();
        assert_eq!((s.query_depth, s.query_count), (10_000, 10_000));
    }
    assert!(total / seeds as f64 <= 0.03, "{}", total / seeds as f64);
}

#[test]
fn single_step_baseline_stays_within_range() {
    for kind in ProblemKind::ALL {
        let p = problem(kind, 3, 7);
        let oracle = p.oracle();
        let x = baseline_sgd(&oracle, 1.0, 1.0, 1, &RngStream::root(0)).unwrap();
        assert!(x.norm() <= 1.0 + 1e-12);
        assert!(p.gap(&x) <= 2.0, "{kind}: {}", p.gap(&x));
        assert_eq!(oracle.ledger().query_depth(), 1);
    }
}

#[test]
fn baseline_length_is_kappa_squared() {
    assert_eq!(baseline_iters(1.0, 1.0, 0.1), 100);
    assert_eq!(baseline_iters(2.0, 1.0, 0.1), 400);
    assert_eq!(baseline_iters(1.0, 1.0, 2.0), 1);
}

#[test]
fn recorded_optima_hold_on_grid() {
    for kind in ProblemKind::ALL {
        for d in 1..=3 {
            let p = problem(kind, d, d as u64);
            let check = p.verify_optimum(if d == 3 { 41 } else { 121 });
            assert!(check.holds(1e-6), "{kind} d={d}: {check:?}");
            assert!((p.certified_lipschitz() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn problems_reproducible_from_stream() {
    for kind in ProblemKind::ALL {
        let a = problem(kind, 4, 11);
        let b = problem(kind, 4, 11);
        let x = DVector::from_element(4, 0.1);
        assert_eq!(a.value(&x), b.value(&x));
        assert_eq!(a.x_star, b.x_star);
        assert!((a.x_star.norm() - 0.5).abs() < 1e-12);
    }
}

const SMALL: &str = "\
# two methods, one problem, five seeds
problems = norm-distance
d = 2
eps = 0.3
seeds = 0..5

[baseline]

[full]
kind = parsco
outer = accel
max_steps = 30
";

#[test]
fn grid_produces_one_row_per_cell() {
    let cfg: ExperimentConfig = SMALL.parse().unwrap();
    assert_eq!(cfg.cells(), 10);
    let records = run_experiment(&cfg, 0).unwrap();
    assert_eq!(records.len(), 10);
    assert_eq!(records[0].method, "baseline");
    assert_eq!(records[9].method, "full");
    assert!(records.iter().all(|r| r.query_count >= r.query_depth && r.query_depth > 0));
}

fn without_wall_time(csv: &[u8]) -> Vec<String> {
    String::from_utf8(csv.to_vec())
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn rerun_gives_identical_csv_apart_from_wall_time() {
    let cfg: ExperimentConfig = SMALL.parse().unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_csv(&mut a, &run_experiment(&cfg, 3).unwrap(), cfg.hash(3)).unwrap();
    write_csv(&mut b, &run_experiment(&cfg, 3).unwrap(), cfg.hash(3)).unwrap();
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    let text = String::from_utf8(a.clone()).unwrap();
    assert!(text.starts_with("# schema parsco-bench/1"));
    assert_eq!(text.lines().nth(1).unwrap(), COLUMNS.join(","));
    let rows = read_csv(&a[..]).unwrap();
    assert_eq!(rows.len(), 10);
}

#[test]
fn master_seed_changes_results() {
    let cfg: ExperimentConfig = SMALL.parse().unwrap();
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 2).unwrap();
    assert_ne!(a[0].gap, b[0].gap);
    assert_ne!(cfg.hash(1), cfg.hash(2));
}

fn line_of(text: &str) -> usize {
    match text.parse::<ExperimentConfig>() {
        Err(BenchError::Config { line, .. }) => line,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn malformed_configs_report_line_numbers() {
    assert_eq!(line_of("d = 2\neps = fast\n[baseline]\n"), 2);
    assert_eq!(line_of("problems = circle\n[baseline]\n"), 1);
    assert_eq!(line_of("d = 2\n\n[full\n"), 3);
    assert_eq!(line_of("[baseline]\nt_scale = 1\nouter = accel\n"), 3);
    assert_eq!(line_of("# nothing\n[a]\nkind = gradient\n"), 2);
    assert_eq!(line_of("seeds = 4..2\n[baseline]\n"), 1);
    assert_eq!(line_of("d = 0\n[baseline]\n"), 1);
    assert_eq!(line_of("color\n[baseline]\n"), 1);
    assert_eq!(line_of("[baseline]\n[baseline]\n"), 2);
    assert_eq!(line_of("d = 3\n"), 1);
}

#[test]
fn overrides_reach_parsco_methods_only() {
    let mut cfg: ExperimentConfig = SMALL.parse().unwrap();
    let before = cfg.hash(0);
    cfg.apply(&Overrides {
        outer: Some(parsco::outer::OuterMode::Prox),
        chunk_c: Some(4.0),
        backend: None,
    });
    assert_ne!(cfg.hash(0), before);
    assert_eq!(cfg.methods[0].kind, MethodKind::Baseline { t_scale: 1.0 });
    match &cfg.methods[1].kind {
        MethodKind::Parsco(s) => {
            assert_eq!(s.outer, parsco::outer::OuterMode::Prox);
            assert_eq!(s.chunk_c, 4.0);
            assert_eq!(s.max_steps, 30);
        }
        k => panic!("{k:?}"),
    }
}

#[test]
fn baseline_depth_slope_is_two() {
    let cfg: ExperimentConfig = "problems = max-of-linear\nd = 10\neps = 0.2, 0.1, 0.05, 0.025\nseeds = 0..2\n[baseline]\n"
        .parse()
        .unwrap();
    let rows: Vec<CsvRow> = run_experiment(&cfg, 0).unwrap().iter().map(CsvRow::from).collect();
    let report = depth_scaling_report(&rows);
    assert_eq!(report.len(), 1);
    let line = report[0].as_ref().unwrap();
    assert!((line.fit.slope - 2.0).abs() <= 0.2, "{}", line.fit.slope);
    assert!(line.fit.lo <= line.fit.slope && line.fit.slope <= line.fit.hi);
}

#[test]
fn power_law_counters_recover_exponent() {
    let xs = [5.0, 10.0, 20.0, 40.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 1000.0 * x.powf(2.0 / 3.0)).collect();
    let fit = fit_log_log(&xs, &ys).unwrap();
    assert!((fit.slope - 2.0 / 3.0).abs() <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitted_slope_recovers_any_power(p in -3.0f64..3.0, c in 0.1f64..100.0) {
        let xs = [1.0, 3.0, 9.0, 27.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        let fit = fit_log_log(&xs, &ys).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trips(gap in 0.0f64..10.0, depth in 1u64..1_000_000, seed in 0u64..1000) {
        let rec = parsco_bench::record::RunRecord {
            method: "m".into(),
            problem: "norm-distance".into(),
            d: 3,
            eps: 0.05,
            seed,
            config_hash: 1,
            gap,
            query_depth: depth,
            query_count: depth * 2,
            est_work: 1.5,
            wall_ms: 3,
            phases: Default::default(),
            warnings: vec![],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&rec), 1).unwrap();
        let rows = read_csv(&buf[..]).unwrap();
        prop_assert_eq!(rows, vec![CsvRow::from(&rec)]);
    }
}
