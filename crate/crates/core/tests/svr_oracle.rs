mod common;

use intraday_paths::svr::{
    corrected_kernel, fit_kernel_widths, fit_svr, gram_matrix, solve_dual, KernelLevels,
    KernelParams, SvrHyperParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, KernelParams) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let aux: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let p = KernelParams::new(rng.random_range(0.2..2.0), rng.random_range(0.1..2.0)).unwrap();
    (rows, aux, y, p)
}

fn dense(gram: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| gram[i * n..(i + 1) * n].to_vec()).collect()
}

#[test]
fn solver_matches_brute_force_qp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut count = 0;
    for &c in &[0.1, 1.0, 10.0] {
        for &eps in &[0.0, 0.1] {
            for _ in 0..12 {
                let n = rng.random_range(1..=6);
                let (rows, aux, y, p) = instance(&mut rng, n);
                let gram = gram_matrix(&rows, &aux, &p);
                let hyper = SvrHyperParams {
                    c,
                    epsilon: eps,
                    ..Default::default()
                };
                let sol = solve_dual(&gram, &y, &hyper).unwrap();
                assert!(sol.converged);
                let k = dense(&gram, n);
                let oracle = common::brute_force_svr(&k, &y, c, eps);
                let beta: Vec<f64> = sol
                    .alpha
                    .iter()
                    .zip(&sol.alpha_star)
                    .map(|(a, s)| a - s)
                    .collect();
                let obj = common::svr_objective(&k, &y, eps, &beta);
                assert!(
                    (obj - oracle.objective).abs() < 1e-6,
                    "{obj} vs {}",
                    oracle.objective
                );
                for i in 0..n {
                    let f: f64 = -(0..n).map(|j| k[i][j] * beta[j]).sum::<f64>() + sol.bias;
                    let g: f64 =
                        -(0..n).map(|j| k[i][j] * oracle.beta[j]).sum::<f64>() + oracle.bias;
                    assert!((f - g).abs() < 1e-4, "prediction {f} vs {g}");
                }
                count += 1;
            }
        }
    }
    assert_eq!(count, 72);
}

#[test]
fn duals_respect_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..=20);
        let (rows, aux, y, p) = instance(&mut rng, n);
        let hyper = SvrHyperParams::default();
        let m = fit_svr(&rows, &aux, &y, p, &hyper).unwrap();
        let mut balance = 0.0;
        for &(a, s) in &m.dual_coefs {
            assert!((0.0..=hyper.c).contains(&a));
            assert!((0.0..=hyper.c).contains(&s));
            assert!(a * s == 0.0);
            balance += a - s;
        }
        assert!(balance.abs() < 1e-9);
    }
}

#[test]
fn free_support_vectors_sit_on_tube_edge() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (rows, aux, y, p) = instance(&mut rng, 12);
    let hyper = SvrHyperParams {
        c: 10.0,
        ..Default::default()
    };
    let m = fit_svr(&rows, &aux, &y, p, &hyper).unwrap();
    for (i, &(a, s)) in m.dual_coefs.iter().enumerate() {
        let f = m.predict(&rows[i], aux[i]).unwrap();
        let free = (a > 0.0 && a < hyper.c) || (s > 0.0 && s < hyper.c);
        if free {
            assert!(((f - y[i]).abs() - hyper.epsilon).abs() < 1e-4);
        }
        if a == 0.0 && s == 0.0 {
            assert!((f - y[i]).abs() <= hyper.epsilon + 1e-4);
        }
    }
}

#[test]
fn small_c_gives_constant_predictor() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (rows, aux, y, p) = instance(&mut rng, 10);
    let hyper = SvrHyperParams {
        c: 1e-9,
        ..Default::default()
    };
    let m = fit_svr(&rows, &aux, &y, p, &hyper).unwrap();
    let preds: Vec<f64> = rows
        .iter()
        .zip(&aux)
        .map(|(r, a)| m.predict(r, *a).unwrap())
        .collect();
    let spread = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - preds.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-7);
}

#[test]
fn width_closed_forms_against_quantile_oracle() {
    let levels = KernelLevels::default();
    let p = fit_kernel_widths(&[1.0], &[1.0], levels).unwrap();
    assert!((p.l - std::f64::consts::LN_2).abs() < 1e-12);
    let z = common::normal_quantile_oracle(0.75);
    assert!((p.g - z * z / 2.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_symmetric_and_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        ya in -3.0f64..3.0, yb in -3.0f64..3.0,
        l in 0.01f64..3.0, g in 0.01f64..3.0,
    ) {
        let p = KernelParams::new(l, g).unwrap();
        let k1 = corrected_kernel(&a, &b, ya, yb, &p).unwrap();
        let k2 = corrected_kernel(&b, &a, yb, ya, &p).unwrap();
        prop_assert_eq!(k1, k2);
        prop_assert!(k1 > 0.0 && k1 <= 1.0);
        prop_assert_eq!(corrected_kernel(&a, &a, ya, ya, &p).unwrap(), 1.0);
    }

    #[test]
    fn widths_are_homogeneous(
        xs in prop::collection::vec(0.01f64..10.0, 5..40),
        ys in prop::collection::vec(0.01f64..10.0, 5..40),
        c in 0.1f64..10.0,
    ) {
        let levels = KernelLevels::default();
        let p = fit_kernel_widths(&xs, &ys, levels).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| y * c).collect();
        let q = fit_kernel_widths(&xs2, &ys2, levels).unwrap();
        prop_assert!((q.l - p.l / c).abs() <= 1e-10 * p.l.max(1.0));
        prop_assert!((q.g - p.g / (c * c)).abs() <= 1e-10 * p.g.max(1.0));
    }

    #[test]
    fn solver_never_beats_oracle(seed in 0u64..10_000, n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, aux, y, p) = instance(&mut rng, n);
        let gram = gram_matrix(&rows, &aux, &p);
        let sol = solve_dual(&gram, &y, &SvrHyperParams::default()).unwrap();
        let k = dense(&gram, n);
        let oracle = common::brute_force_svr(&k, &y, 1.0, 0.1);
        let beta: Vec<f64> = sol.alpha.iter().zip(&sol.alpha_star).map(|(a, s)| a - s).collect();
        let obj = common::svr_objective(&k, &y, 0.1, &beta);
        prop_assert!(obj >= oracle.objective - 1e-9);
        prop_assert!(obj <= oracle.objective + 1e-6);
    }
}
