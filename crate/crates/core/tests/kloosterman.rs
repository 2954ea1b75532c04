use std::f64::consts::PI;

use lvalue_lab::arith::{divisor_count, factorize, gcd};
use lvalue_lab::kloosterman::{kloosterman, kloosterman_fast, weil_bound};
use proptest::prelude::*;

/// `Σ_{a coprime to c} e((am + ān)/c)` with the inverse found by search, as a complex number.
fn brute(m: u64, n: u64, c: u64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for a in 0..c {
        if gcd(a, c) != 1 {
            continue;
        }
        let inv = (0..c).find(|&b| (a * b) % c == 1 % c).unwrap();
        let phase = 2.0 * PI * ((a * m + inv * n) % c) as f64 / c as f64;
        re += phase.cos();
        im += phase.sin();
    }
    (re, im)
}

#[test]
fn examples() {
    assert_eq!(kloosterman(1, 1, 1).unwrap(), 1.0);
    assert!((kloosterman(1, 1, 3).unwrap() + 1.0).abs() < 1e-12);
    assert!((kloosterman(1, 1, 4).unwrap() + 2.0).abs() < 1e-12);
    for (m, n, c) in [(1, 1, 6), (1, 1, 101), (2, 3, 35), (7, 12, 360)] {
        let (re, im) = brute(m, n, c);
        assert!(im.abs() < 1e-10);
        assert!((kloosterman(m, n, c).unwrap() - re).abs() < 1e-10);
        assert!((kloosterman_fast(m, n, c, &factorize(c).unwrap()).unwrap() - re).abs() < 1e-10);
    }
}

#[test]
fn inconsistent_factorization_is_rejected() {
    let wrong = factorize(36).unwrap();
    assert!(kloosterman_fast(1, 1, 35, &wrong).is_err());
}

#[test]
fn weil_bound_and_symmetry_to_5000() {
    for c in 1..=5000u64 {
        let f = factorize(c).unwrap();
        let d = divisor_count(c).unwrap() as f64;
        for m in 1..=10u64 {
            for n in m..=10u64 {
                let s = kloosterman_fast(m, n, c, &f).unwrap();
                let t = kloosterman_fast(n, m, c, &f).unwrap();
                assert!((s - t).abs() < 1e-9, "symmetry S({m},{n};{c})");
                let bound = d * (gcd(gcd(m, n), c) as f64).sqrt() * (c as f64).sqrt();
                assert!(s.abs() <= bound * (1.0 + 1e-12) + 1e-9, "Weil S({m},{n};{c}) = {s} > {bound}");
                assert_eq!(weil_bound(m, n, c).unwrap(), bound);
            }
        }
    }
}

#[test]
fn fast_path_matches_direct_to_2000() {
    for c in 1..=2000u64 {
        let f = factorize(c).unwrap();
        for m in 1..=10u64 {
            for n in 1..=10u64 {
                let direct = kloosterman(m, n, c).unwrap();
                let fast = kloosterman_fast(m, n, c, &f).unwrap();
                assert!((direct - fast).abs() < 1e-10, "S({m},{n};{c}): {direct} vs {fast}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn symmetric_in_m_and_n(m in 1u64..1_000_000, n in 1u64..1_000_000, c in 1u64..20_000) {
        let f = factorize(c).unwrap();
        let s = kloosterman_fast(m, n, c, &f).unwrap();
        let t = kloosterman_fast(n, m, c, &f).unwrap();
        prop_assert!((s - t).abs() < 1e-8 * (1.0 + s.abs()));
    }

    #[test]
    fn depends_on_residues_only(m in 1u64..1000, n in 1u64..1000, c in 1u64..3000) {
        let f = factorize(c).unwrap();
        let s = kloosterman_fast(m, n, c, &f).unwrap();
        let t = kloosterman_fast(m + c, n + 5 * c, c, &f).unwrap();
        prop_assert!((s - t).abs() < 1e-8 * (1.0 + s.abs()));
    }
}
