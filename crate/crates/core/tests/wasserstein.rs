mod common;

use common::lp_transport;
use intraday_paths::ensembles::wasserstein1;
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=10).prop_flat_map(|n| {
        (
            prop::collection::vec(-20.0f64..20.0, n),
            prop::collection::vec(0.01f64..5.0, n),
        )
    })
}

fn pairs(x: &[f64], w: &[f64]) -> Vec<(f64, f64)> {
    let t: f64 = w.iter().sum();
    x.iter().zip(w).map(|(a, b)| (*a, b / t)).collect()
}

#[test]
fn point_masses() {
    assert!((wasserstein1(&[0.0], None, &[3.0], None) - 3.0).abs() < 1e-15);
    assert!((wasserstein1(&[0.0, 1.0], None, &[0.0], None) - 0.5).abs() < 1e-15);
    assert_eq!(
        wasserstein1(&[2.0, 2.0, 5.0], None, &[5.0, 2.0], Some(&[1.0, 2.0])),
        0.0
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_linear_program((a, wa) in sample(), (b, wb) in sample()) {
        let fast = wasserstein1(&a, Some(&wa), &b, Some(&wb));
        let lp = lp_transport(&pairs(&a, &wa), &pairs(&b, &wb));
        prop_assert!((fast - lp).abs() < 1e-9, "{} vs {}", fast, lp);
    }

    #[test]
    fn is_a_metric((a, wa) in sample(), (b, wb) in sample(), (c, wc) in sample()) {
        let d = |x: &[f64], wx: &[f64], y: &[f64], wy: &[f64]| wasserstein1(x, Some(wx), y, Some(wy));
        prop_assert!(d(&a, &wa, &a, &wa).abs() < 1e-12);
        prop_assert!((d(&a, &wa, &b, &wb) - d(&b, &wb, &a, &wa)).abs() < 1e-12);
        prop_assert!(d(&a, &wa, &c, &wc) <= d(&a, &wa, &b, &wb) + d(&b, &wb, &c, &wc) + 1e-12);
        prop_assert!(d(&a, &wa, &b, &wb) >= 0.0);
    }

    #[test]
    fn shifting_one_sample_moves_by_the_shift((a, wa) in sample(), s in -10.0f64..10.0) {
        let moved: Vec<f64> = a.iter().map(|x| x + s).collect();
        prop_assert!((wasserstein1(&a, Some(&wa), &moved, Some(&wa)) - s.abs()).abs() < 1e-9);
    }
}
