use nalgebra::{dvector, DVector};
use parsco::rank1::{
    residual, sequential_reference, solve_all, solve_last, work_estimate, DyadicTree, Engine, LowRankFactor,
    MatmulBackend, Rank1Recurrence,
};
use parsco::rng::{fill_gaussian, RngStream};
use proptest::prelude::*;
use rand::Rng;

/// Random instance with ‖u_t‖‖v_t‖ ≤ 1/2, |c_t| ∈ [0.5, 1] and `zeros` zero scalars.
fn random_instance(d: usize, t: usize, zeros: usize, seed: u64) -> Rank1Recurrence {
    let s = RngStream::root(seed);
    let mut rng = s.rng();
    let vec = |rng: &mut _| {
        let mut v = DVector::zeros(d);
        fill_gaussian(rng, 1.0, v.as_mut_slice());
        v
    };
    let x0 = vec(&mut rng);
    let mut c = Vec::new();
    let (mut u, mut v, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..t {
        let mut ut = vec(&mut rng);
        let mut vt = vec(&mut rng);
        let nu = ut.norm().max(1e-300);
        let nv = vt.norm().max(1e-300);
        let target: f64 = rng.gen_range(0.0..0.5);
        ut *= target.sqrt() / nu;
        vt *= target.sqrt() / nv;
        u.push(ut);
        v.push(vt);
        w.push(vec(&mut rng) * 0.1);
        let mag: f64 = rng.gen_range(0.5..1.0);
        c.push(if rng.gen::<bool>() { mag } else { -mag });
    }
    for _ in 0..zeros.min(t) {
        let i = rng.gen_range(0..t);
        c[i] = 0.0;
    }
    Rank1Recurrence::new(x0, c, u, v, w).unwrap()
}

fn max_rel_err(xs: &[DVector<f64>], reference: &[DVector<f64>]) -> f64 {
    assert_eq!(xs.len(), reference.len());
    xs.iter()
        .zip(reference)
        .map(|(x, r)| (x - r).norm() / r.norm().max(1e-12))
        .fold(0.0, f64::max)
}

#[test]
fn pure_accumulation() {
    let rec = Rank1Recurrence::new(
        dvector![1.0, 0.0],
        vec![1.0, 1.0],
        vec![DVector::zeros(2); 2],
        vec![DVector::zeros(2); 2],
        vec![dvector![0.0, 1.0], dvector![1.0, 1.0]],
    )
    .unwrap();
    assert_eq!(solve_last(&rec, MatmulBackend::Naive).unwrap(), dvector![2.0, 2.0]);
    assert_eq!(sequential_reference(&rec).last().unwrap(), &dvector![2.0, 2.0]);
    assert_eq!(solve_all(&rec, MatmulBackend::Naive).unwrap(), sequential_reference(&rec));
}

#[test]
fn single_scaled_projection_step() {
    let e1 = dvector![1.0, 0.0];
    let rec = Rank1Recurrence::new(dvector![1.0, 1.0], vec![2.0], vec![e1.clone()], vec![e1], vec![DVector::zeros(2)])
        .unwrap();
    assert_eq!(solve_last(&rec, MatmulBackend::Naive).unwrap(), dvector![0.0, 2.0]);
    assert_eq!(solve_all(&rec, MatmulBackend::Naive).unwrap(), vec![dvector![0.0, 2.0]]);
}

#[test]
fn all_zero_scalars_give_w() {
    let mut rec = random_instance(3, 9, 0, 1);
    rec.c = vec![0.0; 9];
    let xs = solve_all(&rec, MatmulBackend::Naive).unwrap();
    assert_eq!(xs, rec.w);
    assert_eq!(sequential_reference(&rec), rec.w);
    assert_eq!(solve_last(&rec, MatmulBackend::Naive).unwrap(), rec.w[8]);
}

#[test]
fn random_d16_t257_last_iterate() {
    let rec = random_instance(16, 257, 0, 2);
    let reference = sequential_reference(&rec);
    let last = solve_last(&rec, MatmulBackend::Naive).unwrap();
    assert!(max_rel_err(&[last], &reference[256..]) <= 1e-9);
}

#[test]
fn linear_part_matches_iterated_compose() {
    let mut rec = random_instance(5, 13, 0, 3);
    rec.c = vec![1.0; 13];
    rec.w = vec![DVector::zeros(5); 13];
    let xs = solve_all(&rec, MatmulBackend::Naive).unwrap();
    let mut m = LowRankFactor::identity(5);
    for t in 0..13 {
        let step = LowRankFactor::rank_one(&rec.u[t], &rec.v[t]);
        m = LowRankFactor::compose(&step, &m, MatmulBackend::Naive).unwrap();
        let expected = m.apply(&rec.x0);
        assert!((&xs[t] - &expected).norm() <= 1e-12 * expected.norm().max(1.0));
    }
}

#[test]
fn zero_scalar_blocks_match_reference() {
    let rec = random_instance(8, 100, 3, 4);
    assert!(rec.c.iter().filter(|&&c| c == 0.0).count() >= 1);
    let xs = solve_all(&rec, MatmulBackend::Naive).unwrap();
    assert!(max_rel_err(&xs, &sequential_reference(&rec)) <= 1e-9);
}

#[test]
fn zero_scalars_split_into_independent_blocks() {
    let rec = random_instance(4, 60, 0, 5);
    let mut cut = rec.clone();
    for &z in &[7usize, 8, 31, 59] {
        cut.c[z] = 0.0;
    }
    let whole = solve_all(&cut, MatmulBackend::Naive).unwrap();
    // Solve each block on its own.
    let mut pieces = Vec::new();
    let bounds = [(0usize, 7usize), (9, 31), (32, 59)];
    for (i, &(a, b)) in bounds.iter().enumerate() {
        let start = if i == 0 { cut.x0.clone() } else { cut.w[a - 1].clone() };
        pieces.push((a, solve_all(&cut.slice(a..b, start), MatmulBackend::Naive).unwrap()));
    }
    for (a, xs) in pieces {
        for (k, x) in xs.iter().enumerate() {
            assert_eq!(x, &whole[a + k]);
        }
    }
    for &z in &[7usize, 8, 31, 59] {
        assert_eq!(whole[z], cut.w[z]);
    }
}

#[test]
fn self_consistency_sweep() {
    let mut seed = 100;
    let mut count = 0;
    for &d in &[1usize, 2, 8, 33] {
        for &t in &[1usize, 2, 7, 64, 257] {
            let reps = if t >= 64 && d == 33 { 4 } else { 10 };
            for _ in 0..reps {
                seed += 1;
                let rec = random_instance(d, t, (seed % 3) as usize, seed);
                let xs = solve_all(&rec, MatmulBackend::Naive).unwrap();
                assert!(max_rel_err(&xs, &sequential_reference(&rec)) <= 1e-9, "d={d} t={t}");
                count += 1;
            }
        }
    }
    assert!(count >= 160);
}

#[test]
fn factor_tree_children_multiply_to_parents() {
    for k in 0..=6 {
        let t = 1usize << k;
        let rec = random_instance(6, t, 0, 40 + k as u64);
        let tree = DyadicTree::build(&rec, &Engine::default()).unwrap();
        assert_eq!(tree.level_count(), k + 1);
        for level in 1..tree.level_count() {
            assert_eq!(tree.node_count(level), t >> level);
            for j in 0..tree.node_count(level) {
                let dense = |l: usize, i: usize| tree.factor(l, i).dense() * tree.scale(l, i).value();
                let product = dense(level - 1, 2 * j + 1) * dense(level - 1, 2 * j);
                let parent = dense(level, j);
                assert!((parent - &product).amax() <= 1e-11 * product.amax().max(1.0));
                assert!(tree.factor(level, j).rank() <= (1 << level).min(6));
            }
        }
        // prefix scalars are the running products of c
        let mut running = 1.0;
        for (t, s) in tree.prefix_scales().iter().enumerate() {
            running *= rec.c[t];
            assert!((s.value() - running).abs() <= 1e-12 * running.abs());
        }
    }
}

#[test]
fn long_products_do_not_overflow() {
    let mut rec = random_instance(3, 2000, 0, 77);
    for (t, c) in rec.c.iter_mut().enumerate() {
        *c = if t % 2 == 0 { 1e-3 } else { 1e3 };
    }
    let tree = DyadicTree::build(&rec, &Engine::default()).unwrap();
    let last = tree.prefix_scales()[1998];
    assert!((last.value() - 1e-3).abs() <= 1e-9);
    for c in rec.c.iter_mut() {
        *c = 0.9;
    }
    let tree = DyadicTree::build(&rec, &Engine::default()).unwrap();
    let last = tree.prefix_scales()[1999];
    assert!((last.ln_abs() - 2000.0 * 0.9f64.ln()).abs() < 1e-8);
    assert!((last.value() / 0.9f64.powi(2000) - 1.0).abs() < 1e-10);
}

#[test]
fn work_estimate_formula() {
    assert_eq!(work_estimate(1, 1, MatmulBackend::Naive), 1.0);
    let r = work_estimate(7, 200, MatmulBackend::Naive) / work_estimate(7, 100, MatmulBackend::Naive);
    assert!((r - 4.0).abs() < 1e-12);
    let s = work_estimate(64, 1024, MatmulBackend::strassen());
    assert!((s - 64.0 * 1024f64.powf(7f64.log2() - 1.0)).abs() <= 1e-9 * s);
}

#[test]
fn residual_flags_corruption() {
    let rec = random_instance(4, 30, 1, 9);
    let mut xs = sequential_reference(&rec);
    assert!(residual(&rec, &xs) < 1e-14);
    xs[10][0] += 1.0;
    assert!(residual(&rec, &xs) > 1e-3);
}

#[test]
fn sequential_and_parallel_execution_agree() {
    let rec = random_instance(10, 777, 2, 21);
    let par = Engine { parallel_grain: 2, ..Engine::default() }.solve_all(&rec).unwrap();
    let seq = Engine::default().sequential().solve_all(&rec).unwrap();
    assert_eq!(par, seq);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn engine_matches_reference(d in 1usize..20, t in 1usize..300, zeros in 0usize..4, seed in any::<u64>()) {
        let rec = random_instance(d, t, zeros, seed);
        let reference = sequential_reference(&rec);
        let xs = solve_all(&rec, MatmulBackend::Naive).unwrap();
        prop_assert!(max_rel_err(&xs, &reference) <= 1e-9);
        let last = solve_last(&rec, MatmulBackend::Naive).unwrap();
        prop_assert!(max_rel_err(&[last], &reference[t - 1..]) <= 1e-9);
    }

    #[test]
    fn backends_agree(d in 1usize..12, t in 1usize..200, seed in any::<u64>()) {
        let rec = random_instance(d, t, 1, seed);
        let a = solve_all(&rec, MatmulBackend::Naive).unwrap();
        let b = solve_all(&rec, MatmulBackend::Strassen { leaf: 1 }).unwrap();
        prop_assert!(max_rel_err(&b, &a) <= 1e-9);
    }
}
