mod common;

use common::{dense_wls, explicit_ew, one_sided_slopes, rng};
use fused_gait::filters::{
    alpha_from_half_life, hard_coerce, sharp_deadband, smooth_deadband, soft_coerce, EwIntegrator, SoftBounds,
    WlbfFilter,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn wlbf_matches_dense_least_squares() {
    let mut r = rng(1);
    for _ in 0..2000 {
        let n = r.random_range(2..=32);
        let mut f = WlbfFilter::new(n).unwrap();
        let total = n + r.random_range(0..8);
        let mut t = r.random_range(-5.0..5.0);
        let mut samples = Vec::new();
        for _ in 0..total {
            t += r.random_range(0.001..0.05);
            let s = (t, r.random_range(-1.0..1.0), r.random_range(0.1..2.0));
            f.update(s.0, s.1, s.2).unwrap();
            samples.push(s);
        }
        let window = &samples[samples.len() - n..];
        let now = t + r.random_range(0.0..0.02);
        let fit = f.evaluate(now).unwrap();
        let (value, slope) = dense_wls(window, now);
        assert!((fit.value - value).abs() < 1e-9, "value {} vs {}", fit.value, value);
        assert!((fit.slope - slope).abs() < 1e-9 * slope.abs().max(1.0), "slope {} vs {}", fit.slope, slope);
    }
}

#[test]
fn wlbf_coincident_times_report_weighted_mean() {
    let mut f = WlbfFilter::<f64>::new(4).unwrap();
    f.update(1.0, 2.0, 1.0).unwrap();
    f.update(1.0, 4.0, 3.0).unwrap();
    let fit = f.evaluate(1.5).unwrap();
    assert_eq!(fit.slope, 0.0);
    assert!((fit.value - 3.5).abs() < 1e-15);
}

#[test]
fn ew_matches_explicit_sum() {
    let mut r = rng(2);
    let xs: Vec<f64> = (0..1000).map(|_| r.random_range(-1.0..1.0)).collect();
    for alpha in [0.0, 0.3, 0.9, 1.0] {
        let mut ew = EwIntegrator::new(alpha).unwrap();
        for (x, (sum, abs)) in xs.iter().zip(explicit_ew(&xs, alpha)) {
            let v = ew.update(*x);
            assert!((v - sum).abs() <= 1e-12 * abs.max(1.0), "alpha {alpha}: {v} vs {sum}");
        }
    }
}

#[test]
fn ew_half_life_halves_output() {
    let (half_life, dt) = (0.5_f64, 0.01);
    let alpha = alpha_from_half_life(half_life, dt).unwrap();
    let mut ew = EwIntegrator::new(alpha).unwrap();
    for _ in 0..5000 {
        ew.update(1.0);
    }
    let steps = (half_life / dt).round() as usize;
    let start = ew.update(0.0);
    for _ in 0..steps {
        ew.update(0.0);
    }
    let ratio = ew.value() / start;
    assert!((ratio - 0.5).abs() < 0.005, "{ratio}");
}

#[test]
fn soft_coerce_is_c1_at_branch_points() {
    let mut r = rng(3);
    for _ in 0..10_000 {
        let min = r.random_range(-10.0..0.0);
        let max = min + r.random_range(0.1..20.0);
        let b = r.random_range(1e-3..=(max - min) / 2.0);
        let bounds = SoftBounds::new(min, max, b).unwrap();
        let f = |x: f64| soft_coerce(x, &bounds);
        let h = 1e-7 * b;
        for p in [min + b, max - b] {
            let (left, right) = one_sided_slopes(f, p, h);
            assert!((left - right).abs() <= 1e-6 / b, "bounds ({min}, {max}, {b}) at {p}: {left} vs {right}");
        }
        let x = r.random_range(min - 5.0..max + 5.0);
        let y = f(x);
        assert!(y > min && y < max);
        if x >= min + b && x <= max - b {
            assert_eq!(y, x);
        }
    }
}

#[test]
fn smooth_deadband_is_c1_at_branch_points() {
    let mut r = rng(4);
    for _ in 0..10_000 {
        let radius = r.random_range(1e-3..1.0);
        let f = |x: f64| smooth_deadband(x, radius).unwrap();
        let h = 1e-7 * radius;
        for p in [2.0 * radius, -2.0 * radius] {
            let (left, right) = one_sided_slopes(f, p, h);
            assert!((left - right).abs() <= 1e-6 / radius, "r {radius} at {p}: {left} vs {right}");
        }
    }
}

#[test]
fn deadband_examples() {
    assert_eq!(smooth_deadband(0.0, 0.1).unwrap(), 0.0);
    assert!((smooth_deadband(0.1_f64, 0.1).unwrap() - 0.025).abs() < 1e-15);
    assert!((smooth_deadband(0.5_f64, 0.1).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(sharp_deadband(0.05, 0.1).unwrap(), 0.0);
    assert!((sharp_deadband(-0.3_f64, 0.1).unwrap() + 0.2).abs() < 1e-15);
    assert!(smooth_deadband(1.0, -0.1).is_err());
    assert!(hard_coerce(0.0, 1.0, -1.0).is_err());
}

proptest! {
    #[test]
    fn smooth_deadband_is_odd_and_shrinking(x in -10.0f64..10.0, r in 0.0f64..2.0) {
        let y = smooth_deadband(x, r).unwrap();
        prop_assert_eq!(smooth_deadband(-x, r).unwrap(), -y);
        prop_assert!(y.abs() <= x.abs());
    }

    #[test]
    fn soft_coerce_is_monotone(min in -5.0f64..0.0, width in 0.1f64..10.0, frac in 0.01f64..0.5, a in -20.0f64..20.0, d in 0.0f64..5.0) {
        let bounds = SoftBounds::new(min, min + width, frac * width).unwrap();
        prop_assert!(soft_coerce(a, &bounds) <= soft_coerce(a + d, &bounds));
    }

    #[test]
    fn hard_coerce_stays_in_range(x in -100.0f64..100.0, lo in -10.0f64..0.0, span in 0.0f64..10.0) {
        let y = hard_coerce(x, lo, lo + span).unwrap();
        prop_assert!(y >= lo && y <= lo + span);
    }
}
