use proptest::prelude::*;
use tvlab_core::twovalued::{metric_g, Pair2, TwoValuedGrid, lipschitz_estimate};

fn pair(k: usize) -> impl Strategy<Value = Pair2> {
    (prop::collection::vec(-5.0f64..5.0, k), prop::collection::vec(-5.0f64..5.0, k)).prop_map(|(a, b)| Pair2::new(a, b))
}

fn triple() -> impl Strategy<Value = (Pair2, Pair2, Pair2)> {
    (1usize..=3).prop_flat_map(|k| (pair(k), pair(k), pair(k)))
}

/// Brute-force 𝒢: both pairings written out by hand.
fn oracle(a: &Pair2, b: &Pair2) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let straight = d(a.a1(), b.a1()) + d(a.a2(), b.a2());
    let crossed = d(a.a1(), b.a2()) + d(a.a2(), b.a1());
    straight.min(crossed)
}

proptest! {
    #[test]
    fn metric_axioms((a, b, c) in triple()) {
        prop_assert_eq!(metric_g(&a, &a), 0.0);
        prop_assert!((metric_g(&a, &b) - metric_g(&b, &a)).abs() <= 1e-12);
        prop_assert!(metric_g(&a, &c) <= metric_g(&a, &b) + metric_g(&b, &c) + 1e-12);
        if a != b {
            prop_assert!(metric_g(&a, &b) > 0.0);
        }
    }

    #[test]
    fn metric_matches_pairing_oracle((a, b, _c) in triple()) {
        prop_assert!((metric_g(&a, &b) - oracle(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn order_of_values_is_irrelevant((a, b, _c) in triple()) {
        let (x, y) = a.clone().into_parts();
        let swapped = Pair2::new(y, x);
        prop_assert_eq!(&swapped, &a);
        prop_assert_eq!(metric_g(&swapped, &b), metric_g(&a, &b));
    }
}

#[test]
fn lipschitz_of_linear_pair_is_sum_of_slopes() {
    // 𝒢 between neighbours of x ↦ {sx, −sx} is 2|s| h
    let g = TwoValuedGrid::from_fn(1, 1, 1.0, 0.01, |x| Ok(Pair2::new(vec![0.7 * x[0]], vec![-0.7 * x[0]]))).unwrap();
    let l = lipschitz_estimate(&g).unwrap();
    assert!((l - 1.4).abs() < 1e-9, "{l}");
}
