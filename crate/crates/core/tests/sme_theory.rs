mod support;

use mvts_core::codec::CodecParams;
use mvts_core::sme::{
    bound_derivative, bound_second_derivative, check_convergence, derivative_sign_changes, monte_carlo_sme,
    reproduce_table1, solve_optimal_ms, sme_upper_bound, std_normal_cdf, BoundQuery, DEFAULT_MS_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::NORMAL_CDF_REFERENCE;

const TABLE1: [(usize, f64, f64); 5] = [
    (50, 2.29, 0.052),
    (100, 2.55, 0.028),
    (200, 2.79, 0.015),
    (400, 3.02, 0.008),
    (800, 3.22, 0.004),
];

fn bound(h: usize, ms: f64) -> f64 {
    sme_upper_bound(&BoundQuery::new(h, ms).unwrap())
}

#[test]
fn normal_cdf_matches_high_precision_reference() {
    for (x, phi) in NORMAL_CDF_REFERENCE {
        assert!((std_normal_cdf(x) - phi).abs() <= 1e-12, "x={x}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = rng.random_range(-10.0..10.0);
        assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() <= 1e-15);
    }
}

#[test]
fn table1_is_reproduced() {
    let rows = reproduce_table1().unwrap();
    assert_eq!(rows.len(), TABLE1.len());
    for (row, (h, ms, b)) in rows.iter().zip(TABLE1) {
        assert_eq!(row.h, h);
        assert!((row.best_ms - ms).abs() <= 0.01, "h={h}: {}", row.best_ms);
        assert!((row.upper_bound - b).abs() <= 0.002, "h={h}: {}", row.upper_bound);
    }
    assert!(rows.windows(2).all(|w| w[1].best_ms > w[0].best_ms));
    assert!(rows.windows(2).all(|w| w[1].upper_bound < w[0].upper_bound));
}

#[test]
fn solver_returns_a_minimum() {
    for h in [2, 3, 10, 50, 200, 800, 100_000] {
        let ms = solve_optimal_ms(h, DEFAULT_MS_TOLERANCE).unwrap();
        let q = |m| BoundQuery::new(h, m).unwrap();
        assert!(bound_derivative(&q(ms - 1e-3)) < 0.0);
        assert!(bound_derivative(&q(ms + 1e-3)) > 0.0);
        assert!(bound_second_derivative(&q(ms)) > 0.0);
        assert!(bound(h, ms) <= bound(h, ms * 0.9) && bound(h, ms) <= bound(h, ms * 1.1));
    }
    let at_root = bound_derivative(&BoundQuery::new(200, 2.79).unwrap());
    assert!(at_root.abs() < 5e-4, "{at_root}");
}

#[test]
fn derivative_limits_have_opposite_signs() {
    for h in [2, 50, 100, 1000] {
        assert!(bound_derivative(&BoundQuery::new(h, 1e-6).unwrap()) < 0.0);
    }
    assert!(bound_derivative(&BoundQuery::new(100, 20.0).unwrap()) > 0.0);
}

#[test]
fn derivative_root_is_unique() {
    for h in [50, 200, 800] {
        assert_eq!(derivative_sign_changes(h, 2000, 20.0), 1, "h={h}");
    }
}

#[test]
fn derivative_matches_finite_differences() {
    for h in [50, 200, 800] {
        for ms in [0.1, 0.5, 1.0, 2.0, 2.79, 3.5, 5.0, 8.0] {
            let q = BoundQuery::new(h, ms).unwrap();
            let step = 1e-5 * ms;
            let fd = (bound(h, ms + step) - bound(h, ms - step)) / (2.0 * step);
            let analytic = bound_derivative(&q);
            let rel = (fd - analytic).abs() / analytic.abs().max(1e-300);
            assert!(rel < 1e-6, "h={h} ms={ms}: {analytic} vs {fd} (rel {rel})");
        }
    }
}

#[test]
fn whole_series_bound_scales_by_element_count() {
    let q = BoundQuery::new(100, 2.5).unwrap();
    let whole = q.whole_series(3, 7);
    assert!(!whole.per_element());
    assert!((sme_upper_bound(&whole) - 21.0 * sme_upper_bound(&q)).abs() < 1e-12);
}

#[test]
fn monte_carlo_stays_below_bound_on_grid() {
    for h in [50, 100, 200] {
        let best = solve_optimal_ms(h, DEFAULT_MS_TOLERANCE).unwrap();
        for ms in [1.0, 2.0, best, 4.0] {
            let p = CodecParams::new(h, ms).unwrap();
            let r = monte_carlo_sme(&p, 1, 1, 100_000, 2024).unwrap();
            assert!(r.within_bound(), "h={h} ms={ms}: {} ± {} vs {}", r.mean, r.std_error, r.bound);
            assert!(r.std_error >= 0.0);
        }
    }
}

#[test]
fn monte_carlo_is_deterministic() {
    let p = CodecParams::new(200, 2.79).unwrap();
    let a = monte_carlo_sme(&p, 2, 3, 5000, 9).unwrap();
    let b = monte_carlo_sme(&p, 2, 3, 5000, 9).unwrap();
    assert_eq!(a.csv_row(), b.csv_row());
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    let other = monte_carlo_sme(&p, 2, 3, 5000, 10).unwrap();
    assert_ne!(a.mean, other.mean);
}

#[test]
fn extreme_quantization_sanity() {
    let p = CodecParams::new(2, 1000.0).unwrap();
    let r = monte_carlo_sme(&p, 1, 1, 10_000, 1).unwrap();
    assert!((r.mean - 500.0).abs() < 2.0, "{}", r.mean);
    assert!(r.within_bound());
}

#[test]
fn monte_carlo_rejects_small_samples() {
    let p = CodecParams::new(10, 2.0).unwrap();
    assert!(monte_carlo_sme(&p, 1, 1, 99, 0).is_err());
}

#[test]
fn convergence_profile() {
    let r = check_convergence(2.79, &[50, 100, 200, 400, 800]).unwrap();
    assert!(r.strictly_decreasing);

    // at MS = 8 the 1/h term is still MS/h; only the saturation terms vanish
    let large = check_convergence(8.0, &[1_000_000, 100_000_000]).unwrap();
    let at_1e8 = large.bounds[1].1;
    assert!((at_1e8 - 8e-8).abs() < 1e-9, "{at_1e8}");
    assert!(large.limit < 1e-9);
    assert!(large.limit > 0.0);

    let small = check_convergence(0.5, &[1_000, 1_000_000, 1_000_000_000]).unwrap();
    assert!(small.limit > 0.3);
    assert!(small.bounds.iter().all(|(_, b)| *b > small.limit));

    assert!(check_convergence(2.0, &[]).is_err());
    assert!(check_convergence(2.0, &[100, 50]).is_err());
}
