use std::f64::consts::PI;

use lvalue_lab::arith::factorize;
use lvalue_lab::bessel::bessel_j;
use lvalue_lab::forms::{CatalogForm, NewformRecord};
use lvalue_lab::kloosterman::kloosterman;
use lvalue_lab::trace::*;
use lvalue_lab::Error;

/// `δ_{m,n} + 2π i^{−k} Σ_{c ≤ C, q | c} S(m, n; c)/c · J_{k−1}(4π√(mn)/c)` term by term.
fn naive_delta(m: u64, n: u64, q: u64, k: u32, c_max: u64) -> f64 {
    let sign = if k % 4 == 0 { 1.0 } else { -1.0 };
    let mut s = 0.0;
    let mut c = q;
    while c <= c_max {
        let x = 4.0 * PI * ((m * n) as f64).sqrt() / c as f64;
        s += kloosterman(m, n, c).unwrap() / c as f64 * bessel_j(k - 1, x).unwrap();
        c += q;
    }
    (m == n) as u8 as f64 + 2.0 * PI * sign * s
}

#[test]
fn truncated_series_matches_naive_sum() {
    for (m, n, q, k) in [(1, 1, 1, 12), (2, 3, 1, 4), (4, 9, 11, 2), (5, 5, 6, 8)] {
        let est = delta_full_truncated(m, n, q, k, 600).unwrap();
        assert!((est.value - naive_delta(m, n, q, k, 600)).abs() < 1e-12, "({m},{n},{q},{k})");
        assert!(est.tail_bound >= 0.0);
    }
}

#[test]
fn dimension_zero_levels_vanish() {
    let est = delta_full(1, 1, 1, 4, 1e-8).unwrap();
    assert!(est.value.abs() <= 1e-8 + est.tail_bound, "{est:?}");
    assert!(est.tail_bound <= 1e-8);
}

#[test]
fn symmetric_in_m_and_n() {
    for (m, n, q, k) in [(1, 2, 1, 12), (3, 7, 5, 4), (2, 9, 11, 2)] {
        let a = delta_full_truncated(m, n, q, k, 5000).unwrap();
        let b = delta_full_truncated(n, m, q, k, 5000).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}

#[test]
fn tail_target_is_honoured() {
    let est = delta_full(2, 3, 1, 12, 1e-10).unwrap();
    assert!(est.tail_bound <= 1e-10);
    let tighter = delta_full_truncated(2, 3, 1, 12, est.c_max * 4).unwrap();
    assert!((est.value - tighter.value).abs() <= est.tail_bound);
}

#[test]
fn bad_arguments() {
    assert!(matches!(delta_full(1, 1, 1, 3, 1e-6), Err(Error::Domain(_))));
    assert!(matches!(delta_full(0, 1, 1, 4, 1e-6), Err(Error::Domain(_))));
    assert!(matches!(delta_new(2, 1, 4, 12, 1e-6), Err(Error::Domain(_))));
    assert!(matches!(delta_full(1, 1, 1, 2, 1e-12), Err(Error::Unreachable { .. })));
}

#[test]
fn rank_one_at_level_one_weight_twelve() {
    let delta = NewformRecord::load(CatalogForm::Delta, 50, None).unwrap();
    let mut pairs = Vec::new();
    for m in 1..=6 {
        for n in 1..=6 {
            pairs.push((m, n));
        }
    }
    let est = delta_full_batch(&pairs, 1, 12, Truncation::CMax(10_000)).unwrap();
    let r0 = est[0].value;
    for e in &est {
        let ratio = e.value / (delta.a(e.m as usize) * delta.a(e.n as usize));
        assert!(((ratio - r0) / r0).abs() < 1e-6, "({},{}) {ratio} vs {r0}", e.m, e.n);
    }
    // Harmonic weight of Δ: Γ(11)/((4π)^11 ‖Δ‖²) ≈ 2.840287 with ‖Δ‖² = 1.035362e-6.
    assert!((r0 - 2.840_287).abs() < 1e-5, "{r0}");
}

#[test]
fn newform_average_at_level_one_is_full_average() {
    for (m, n) in [(1, 1), (2, 2), (3, 5)] {
        let a = delta_new_truncated(m, n, 1, 12, 3000).unwrap();
        let b = delta_full_truncated(m, n, 1, 12, 3000).unwrap();
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn prime_level_decomposition() {
    // q prime: Δ*_q(m,n) = Δ_q(m,n) − (1/q) Σ_{e | q^∞} Δ_1(m e², n)/e.
    let (q, k, c_max) = (3, 12, 4000);
    for (m, n) in [(1, 1), (2, 5)] {
        let new = delta_new_truncated(m, n, q, k, c_max).unwrap();
        let mut expect = delta_full_truncated(m, n, q, k, c_max).unwrap().value;
        let mut e = 1u64;
        while e <= 3u64.pow(8) {
            expect -= delta_full_truncated(m * e * e, n, 1, k, c_max).unwrap().value / (q * e) as f64;
            e *= q;
        }
        assert!((new.value - expect).abs() < 1e-9 + new.tail_bound, "({m},{n}): {} vs {expect}", new.value);
    }
}

#[test]
fn empty_new_space_gives_zero() {
    // S_12(Γ0(2)) is spanned by Δ(z), Δ(2z): no newforms.
    // The e-sum is cut at relative size 1e-6 of the divisor-weighted scale, so the residual is small but not rounding-level.
    let full = delta_full_truncated(1, 1, 2, 12, 10_000).unwrap().value;
    assert!(full > 0.1, "{full}");
    for (m, n) in [(1, 1), (1, 3), (3, 5), (5, 7)] {
        let est = delta_new_truncated(m, n, 2, 12, 10_000).unwrap();
        assert!(est.value.abs() <= est.tail_bound + 1e-9, "({m},{n}): {} tail {}", est.value, est.tail_bound);
        assert!(est.value.abs() < 5e-4, "({m},{n}): {}", est.value);
    }
}

#[test]
fn one_dimensional_new_space_is_rank_one() {
    // dim S_12^new(Γ0(4)) = 1 (4 − 3 oldforms from Δ): minors vanish, Hecke multiplicativity holds.
    assert_eq!(cusp_form_dimension(4, 12).unwrap(), 4);
    let pairs = [(1, 1), (3, 1), (5, 1), (15, 1), (3, 5), (9, 1)];
    let v = delta_new_batch(&pairs, 4, 12, Truncation::CMax(20_000)).unwrap();
    let d = |i: usize| v[i].value;
    assert!(d(0) > 0.0);
    let scale = d(0).abs();
    assert!((d(0) * d(4) - d(1) * d(2)).abs() < 1e-7 * scale * scale, "minor");
    assert!((d(0) * d(3) - d(1) * d(2)).abs() < 1e-7 * scale * scale, "multiplicativity");
    // a(3)² = a(9) + 3^{11} in integral normalization, i.e. a(3)² = a(9) + 1.
    assert!((d(1) * d(1) - d(0) * (d(5) + d(0))).abs() < 1e-7 * scale * scale, "Hecke at 3");
}

#[test]
fn dimension_one_level_eleven_weight_two() {
    let f11 = NewformRecord::load(CatalogForm::F11, 50, None).unwrap();
    let pairs: Vec<(u64, u64)> = (1..=6).flat_map(|m| (1..=6).map(move |n| (m, n))).collect();
    let est = delta_new_batch(&pairs, 11, 2, Truncation::CMax(200_000)).unwrap();
    let mut ratios = Vec::new();
    for e in &est {
        let am = f11.a(e.m as usize) * f11.a(e.n as usize);
        if am.abs() > 0.1 {
            ratios.push(e.value / am);
        } else {
            assert!(e.value.abs() < 1e-3, "({},{}) {}", e.m, e.n, e.value);
        }
    }
    let r0 = ratios[0];
    for r in &ratios {
        assert!(((r - r0) / r0).abs() < 1e-3, "{r} vs {r0}");
    }
}

#[test]
fn smooth_weight_examples() {
    let spec = FamilySpec::new(10.0, 2);
    assert_eq!(smooth_weight(&spec, 1.5), 1.0);
    assert_eq!(smooth_weight(&spec, 0.5), 0.0);
    assert!((smooth_weight(&spec, 1.25) - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-15);
    assert_eq!(smooth_weight(&spec, 1.0), 0.0);
    assert_eq!(smooth_weight(&spec, 2.0), 0.0);
}

#[test]
fn family_count_examples() {
    // Support (1, 2) of Ψ(q/Q) is open: Q = 1 admits only q = 1, 2 at the endpoints.
    let edge = family_count(&FamilySpec::new(1.0, 12), Truncation::TargetTail(1e-6)).unwrap();
    assert_eq!(edge.value, 0.0);
    assert!(edge.levels.is_empty());
    // Q = 1.2: only q = 2 lies in (1.2, 2.4), Ψ(5/3) ≠ 0, but S_12(Γ0(2)) has no newforms.
    let edge = family_count(&FamilySpec::new(1.2, 12), Truncation::CMax(10_000)).unwrap();
    assert_eq!(edge.levels.iter().map(|l| l.q).collect::<Vec<_>>(), vec![2]);
    assert!(edge.levels[0].weight > 0.5);
    assert!(edge.value.abs() < 5e-4, "{}", edge.value);

    let spec = FamilySpec::new(30.0, 2).with_levels(LevelFilter::Prime);
    let n = family_count(&spec, Truncation::CMax(20_000)).unwrap();
    let qs: Vec<u64> = n.levels.iter().map(|l| l.q).collect();
    assert_eq!(qs, vec![31, 37, 41, 43, 47, 53, 59]);
    let mut expect = 0.0;
    for &q in &qs {
        let w = smooth_weight(&spec, q as f64 / 30.0);
        expect += w * delta_new_truncated(1, 1, q, 2, 20_000).unwrap().value;
    }
    assert!((n.value - expect).abs() < 1e-12 * expect);
    assert!(n.value > 0.0);

    let squarefree = FamilySpec::new(20.0, 4).with_levels(LevelFilter::Squarefree);
    let s = family_count(&squarefree, Truncation::CMax(5_000)).map_err(|e| e.to_string()).unwrap();
    assert!(s.levels.iter().all(|l| factorize(l.q).unwrap().is_squarefree()));
}
