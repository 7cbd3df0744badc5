//! Independent search oracles for the classical optimizer: a grid-search QP
//! oracle for the capped-simplex projection and a dense feasible-grid oracle
//! for two-user PGD optimality.

use num_complex::Complex64;
use rand::Rng;
use wirebench_core::classical::{
    epa, pgd_sum_rate, project_capped_simplex, sum_rate, sum_rate_grad, PgdConfig,
};
use wirebench_core::rng::stream_rng;
use wirebench_core::tasks::PowerInstance;

/// Two-stage grid search for argmin ||p - v||^2 over {p >= 0, sum <= P}.
/// Coarse step 0.01*P, refined step 0.001*P around the coarse optimum; the
/// strongly convex objective puts the true minimizer within one refined step.
fn grid_projection_3d(v: &[f64; 3], p_total: f64) -> [f64; 3] {
    let dist2 = |p: &[f64; 3]| -> f64 {
        (p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2) + (p[2] - v[2]).powi(2)
    };
    let mut best = [0.0; 3];
    let mut best_d = dist2(&best);
    let coarse = p_total / 100.0;
    for i in 0..=100usize {
        for j in 0..=(100 - i) {
            for k in 0..=(100 - i - j) {
                let p = [i as f64 * coarse, j as f64 * coarse, k as f64 * coarse];
                let d = dist2(&p);
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
        }
    }
    let fine = p_total / 1000.0;
    let around = best;
    for di in -25i64..=25 {
        for dj in -25i64..=25 {
            for dk in -25i64..=25 {
                let p = [
                    around[0] + di as f64 * fine,
                    around[1] + dj as f64 * fine,
                    around[2] + dk as f64 * fine,
                ];
                if p.iter().any(|x| *x < 0.0) || p.iter().sum::<f64>() > p_total {
                    continue;
                }
                let d = dist2(&p);
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
        }
    }
    best
}

#[test]
fn projection_matches_grid_qp_oracle() {
    let mut rng = stream_rng(2024, 0);
    for _ in 0..100 {
        let v = [
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
        ];
        let got = project_capped_simplex(&v, 1.0);
        let oracle = grid_projection_3d(&v, 1.0);
        for (a, b) in got.iter().zip(&oracle) {
            assert!(
                (a - b).abs() <= 1e-3,
                "projection of {v:?}: {got:?} vs oracle {oracle:?}"
            );
        }
    }
}

fn random_instance(k: usize, m: usize, seed: u64) -> PowerInstance {
    let mut rng = stream_rng(seed, 0);
    let channels: Vec<Vec<Complex64>> = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let sigma2 = rng.gen_range(0.05..0.5);
    PowerInstance::from_channels((0..k).collect(), channels, sigma2, 1.0).unwrap()
}

#[test]
fn pgd_beats_dense_grid_on_two_user_instances() {
    // Triangular grid over {p >= 0, sum <= 1} with 63 steps per axis
    // (2016 feasible points).
    let cfg = PgdConfig::default();
    for trial in 0..50 {
        let inst = random_instance(2, 8, 3000 + trial);
        let sol = pgd_sum_rate(&inst.gains, 2, inst.noise_power, 1.0, &cfg, trial).unwrap();
        let mut grid_best = f64::NEG_INFINITY;
        let steps = 62usize;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let p = [i as f64 / steps as f64, j as f64 / steps as f64];
                let se = sum_rate(&inst.gains, 2, inst.noise_power, &p);
                if se > grid_best {
                    grid_best = se;
                }
            }
        }
        assert!(
            sol.sum_rate >= grid_best - 1e-2,
            "trial {trial}: PGD {} vs grid max {grid_best}",
            sol.sum_rate
        );
    }
}

#[test]
fn pgd_never_below_epa_across_sizes() {
    let cfg = PgdConfig::default();
    for trial in 0..30 {
        let k = 2 + (trial as usize % 5);
        let inst = random_instance(k, 8, 7000 + trial);
        let sol = pgd_sum_rate(&inst.gains, k, inst.noise_power, 1.0, &cfg, trial).unwrap();
        let se_epa = sum_rate(&inst.gains, k, inst.noise_power, &epa(k, 1.0));
        assert!(
            sol.sum_rate >= se_epa - 1e-12,
            "trial {trial} (K={k}): {} < EPA {se_epa}",
            sol.sum_rate
        );
    }
}

#[test]
fn analytic_gradient_matches_finite_differences_interior() {
    let mut rng = stream_rng(88, 0);
    for trial in 0..20 {
        let k = 2 + (trial as usize % 3);
        let inst = random_instance(k, 6, 500 + trial);
        // Interior point: strictly positive, strictly under budget.
        let mut p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..0.25)).collect();
        let total: f64 = p.iter().sum();
        if total > 0.9 {
            for x in p.iter_mut() {
                *x *= 0.9 / total;
            }
        }
        let grad = sum_rate_grad(&inst.gains, k, inst.noise_power, &p);
        let h = 1e-7;
        for i in 0..k {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (sum_rate(&inst.gains, k, inst.noise_power, &hi)
                - sum_rate(&inst.gains, k, inst.noise_power, &lo))
                / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-9);
            assert!(
                rel < 1e-6,
                "trial {trial} component {i}: {} vs {fd} (rel {rel})",
                grad[i]
            );
        }
    }
}
