//! Property-based invariants over the core primitives.

use num_complex::Complex64;
use proptest::prelude::*;
use wirebench_core::channel::{spatial_correlation, ChannelMatrix};
use wirebench_core::classical::project_capped_simplex;
use wirebench_core::patching::{from_patches, to_patches};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

proptest! {
    #[test]
    fn patch_round_trip_is_lossless(
        entries in complex_vec(24),
        p_choice in 0usize..4,
    ) {
        // 4x6 channel, 2MN = 48; any even divisor of 48 works.
        let h = ChannelMatrix::new(4, 6, entries).unwrap();
        let p = [2usize, 4, 8, 16][p_choice];
        let seq = to_patches(&h, p).unwrap();
        let back = from_patches(&seq).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        v in prop::collection::vec(-10.0..10.0f64, 1..8),
        p_total in 0.1..10.0f64,
    ) {
        let p = project_capped_simplex(&v, p_total);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= p_total * (1.0 + 1e-9));
        let again = project_capped_simplex(&p, p_total);
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_never_moves_further_than_input(
        v in prop::collection::vec(-5.0..5.0f64, 2..6),
        p_total in 0.1..5.0f64,
    ) {
        // The projection of a feasible point is itself.
        let p = project_capped_simplex(&v, p_total);
        let q = project_capped_simplex(&p, p_total);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn correlation_symmetric_and_scale_invariant(
        a in complex_vec(6),
        b in complex_vec(6),
        scale_re in 0.1..10.0f64,
        scale_im in -10.0..10.0f64,
    ) {
        let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
        prop_assume!(na > 1e-9 && nb > 1e-9);
        let r_ab = spatial_correlation(&a, &b).unwrap();
        let r_ba = spatial_correlation(&b, &a).unwrap();
        prop_assert!((r_ab - r_ba).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r_ab));
        let c = Complex64::new(scale_re, scale_im);
        let scaled: Vec<Complex64> = b.iter().map(|x| x * c).collect();
        let r_scaled = spatial_correlation(&a, &scaled).unwrap();
        prop_assert!((r_ab - r_scaled).abs() < 1e-7);
    }
}
