use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;

use tugwar_core::bounds::{
    clock_hoeffding_series, compute_regularity_constants, gaussian_tail, hoeffding_bound,
    lemma_a_clock_bounds, nu_from_alpha, nu_np, reflection_identity_check, reflection_sweep,
    sin_inequality_check, CLOCK_RATE_DENOM,
};
use tugwar_core::density::density_constants;
use tugwar_core::rng::stream_rng;

#[test]
fn hoeffding_limits() {
    assert_eq!(hoeffding_bound(100, 1.0, 3, 0.0), 12.0);
    assert_eq!(hoeffding_bound(100, 1.0, 2, f64::INFINITY), 0.0);
    let a = hoeffding_bound(100, 1.0, 1, 10.0);
    assert!((a - 4.0 * (-0.5f64).exp()).abs() < 1e-15);
}

#[test]
fn hoeffding_dominates_simulated_walk_maxima() {
    let steps = 100;
    let trials = 100_000;
    let lambdas = [5, 10, 15, 20, 25];
    let mut hits = [0u64; 5];
    let mut rng = stream_rng(17, "hoeffding-walk", 0);
    for _ in 0..trials {
        let (mut s, mut m) = (0i32, 0i32);
        for _ in 0..steps {
            s += if rng.random::<bool>() { 1 } else { -1 };
            m = m.max(s.abs());
        }
        for (h, &l) in hits.iter_mut().zip(&lambdas) {
            *h += u64::from(m >= l);
        }
    }
    for (h, &l) in hits.iter().zip(&lambdas) {
        let freq = *h as f64 / trials as f64;
        let se = (freq * (1.0 - freq) / trials as f64).sqrt();
        assert!(
            freq - 3.0 * se <= hoeffding_bound(steps, 1.0, 1, l as f64),
            "lambda = {l}: {freq}"
        );
    }
}

/// `sqrt(2/pi) int_l^{l+40} exp(-s^2/2) ds` by composite Simpson.
fn tail_quadrature(l: f64) -> f64 {
    let panels = 400_000;
    let hh = 40.0 / panels as f64;
    let f = |s: f64| (-s * s / 2.0).exp();
    let mut sum = f(l) + f(l + 40.0);
    for i in 1..panels {
        sum += f(l + i as f64 * hh) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (2.0 / PI).sqrt() * sum * hh / 3.0
}

#[test]
fn gaussian_tail_matches_quadrature() {
    assert_eq!(gaussian_tail(0.0), 1.0);
    assert_eq!(gaussian_tail(f64::INFINITY), 0.0);
    assert!((gaussian_tail(1.96) - 0.05).abs() < 1e-5);
    for l in [0.0, 0.3, 1.0, 1.96, 2.5, 4.0, 6.0] {
        let q = tail_quadrature(l);
        assert!(
            (gaussian_tail(l) - q).abs() < 1e-12,
            "l = {l}: {} vs {q}",
            gaussian_tail(l)
        );
    }
}

proptest! {
    #[test]
    fn gaussian_tail_decreases(a in 0.0f64..8.0, d in 1e-3f64..2.0) {
        prop_assert!(gaussian_tail(a + d) < gaussian_tail(a));
    }

    #[test]
    fn gaussian_tail_mills_envelope(l in 1.0f64..30.0) {
        let env = (2.0 / PI).sqrt() * (-l * l / 2.0).exp() / l;
        prop_assert!(gaussian_tail(l) <= env * (1.0 + 1e-12));
    }
}

/// `P(max S >= l)` and `P(S_N >= l)`, `P(S_N = l)` as path counts from a
/// forward recursion over (position, running maximum).
fn reflection_by_recursion(steps: usize, l: usize) -> (u64, u64, u64) {
    let width = 2 * steps + 1;
    // counts[pos + steps][max]
    let mut counts = vec![vec![0u64; steps + 1]; width];
    counts[steps][0] = 1;
    for _ in 0..steps {
        let mut next = vec![vec![0u64; steps + 1]; width];
        for (p, row) in counts.iter().enumerate() {
            for (m, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                next[p - 1][m] += c;
                let up = p + 1;
                next[up][m.max(up.saturating_sub(steps))] += c;
            }
        }
        counts = next;
    }
    let mut max_ge = 0;
    let mut end_ge = 0;
    let mut end_eq = 0;
    for (p, row) in counts.iter().enumerate() {
        for (m, &c) in row.iter().enumerate() {
            if m >= l {
                max_ge += c;
            }
            if p >= steps + l {
                end_ge += c;
            }
            if p == steps + l {
                end_eq += c;
            }
        }
    }
    (max_ge, end_ge, end_eq)
}

#[test]
fn reflection_holds_exhaustively() {
    let c = reflection_identity_check(2, 1).unwrap();
    assert_eq!((*c.lhs.numer(), *c.lhs.denom()), (1, 2));
    assert_eq!((*c.rhs.numer(), *c.rhs.denom()), (1, 2));
    for steps in 1..=20u32 {
        let sweep = reflection_sweep(steps).unwrap();
        assert_eq!(sweep.len(), steps as usize);
        for (i, c) in sweep.iter().enumerate() {
            assert!(c.equal, "N = {steps}, l = {}", i + 1);
            let (max_ge, end_ge, end_eq) = reflection_by_recursion(steps as usize, i + 1);
            let total = 1i128 << steps;
            // lhs == max_ge / 2^N and rhs == (2 end_ge - end_eq) / 2^N.
            assert_eq!(
                *c.lhs.numer() as i128 * total,
                max_ge as i128 * *c.lhs.denom() as i128
            );
            assert_eq!(
                *c.rhs.numer() as i128 * total,
                (2 * end_ge as i128 - end_eq as i128) * *c.rhs.denom() as i128
            );
        }
    }
    assert!(reflection_identity_check(5, 0).is_err());
    assert!(reflection_identity_check(5, 6).is_err());
}

#[test]
fn sin_inequality_has_no_violation() {
    for m in [0.5, 1.0, 2.0, PI, 2.0 * PI] {
        let slack = sin_inequality_check(m).unwrap();
        assert!(slack >= -1e-12, "m = {m}: {slack}");
    }
    assert!(sin_inequality_check(7.0).is_err());
    assert!(sin_inequality_check(0.0).is_err());
}

#[test]
fn nu_values() {
    let limit = 2.0 * (0.01f64 / 0.99).sqrt();
    assert!((limit - 0.2010).abs() < 1e-4);
    assert!((nu_np(2, 1e12).unwrap() - limit).abs() < 1e-6);
    let direct = 2.0 * ((2.0 / 3.0 + 0.01 / 3.0) / (0.99 / 3.0) as f64).sqrt();
    assert!((nu_np(2, 4.0).unwrap() - direct).abs() < 1e-14);
    assert!((direct - 2.8498).abs() < 1e-4);
    assert!(nu_from_alpha(0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_is_positive_below_the_admissible_maximum(
        n in 1usize..4,
        p in 2.5f64..20.0,
        frac in 0.01f64..0.99,
        c_density in 0.05f64..1.0,
        c_np in 0.2f64..3.0,
    ) {
        let max = density_constants(n).unwrap().cstar_max;
        let k = compute_regularity_constants(n, p, c_density, c_np, Some(frac * max)).unwrap();
        prop_assert!(k.theta_np > 0.0);
        prop_assert_eq!(k.theta, 0.5 * k.theta_np);
        prop_assert!((k.ctilde_np - k.nu_np / c_np).abs() <= 1e-15 * k.ctilde_np);
        prop_assert!(compute_regularity_constants(n, p, c_density, c_np, Some(1.01 * max)).is_err());
    }
}

#[test]
fn regularity_report_lists_provenance() {
    let k = compute_regularity_constants(2, 4.0, 0.25, 0.8, None).unwrap();
    let report = k.to_key_values();
    assert!(report.contains("theta = ") && report.contains("# empirical"));
    assert!(report
        .lines()
        .any(|l| l.starts_with("nu_np = ") && l.ends_with("# analytic")));
}

#[test]
fn clock_series_closed_form() {
    for alpha in [0.1, 1.0 / 3.0, 1.0] {
        let gamma = alpha * alpha / CLOCK_RATE_DENOM;
        let start = 1000u64;
        // Sum until the terms drop below 1e-18 of the first one.
        let stop = start + (41.5 / gamma).ceil() as u64;
        let direct: f64 = (start..stop)
            .rev()
            .map(|j| 8.0 * (-gamma * j as f64).exp())
            .sum();
        let closed = clock_hoeffding_series(alpha, start);
        assert!(
            (direct - closed).abs() / closed < 1e-12,
            "alpha = {alpha}: {direct} vs {closed}"
        );
    }
}

#[test]
fn clock_bound_limits() {
    let (r, t0) = (1.0, 0.3);
    let margin = 0.3f64;
    let b = lemma_a_clock_bounds(2, 4.0, r, t0, 0.01, 0.5, 4.0 * margin * margin).unwrap();
    assert!((b.upper_eps2 - (1.0 - gaussian_tail(1.0))).abs() < 1e-15);
    let tiny = lemma_a_clock_bounds(2, 4.0, r, t0, 1e-9, 0.5, 1.0).unwrap();
    assert!((tiny.lower_eps1 - 1.0).abs() < 1e-6, "{tiny:?}");
    let coarse = lemma_a_clock_bounds(2, 4.0, r, t0, 0.1, 0.5, 1.0).unwrap();
    assert!(coarse.lower_eps1 < tiny.lower_eps1);
    assert!(lemma_a_clock_bounds(2, 4.0, r, 1.2, 0.01, 0.5, 1.0).is_err());
}
