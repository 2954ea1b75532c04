use lvalue_lab::forms::{
    cached_eta_product, coefficients, eta_product, hecke_check, CatalogForm, NewformRecord,
};

/// `Π_d Π_m (1 − q^{dm})^{r_d}` by repeated dense multiplication, shifted by `Σ d r / 24`.
fn naive_eta(recipe: &[(u64, i32)], n: usize) -> Vec<i128> {
    let shift = (recipe.iter().map(|&(d, r)| d as i64 * r as i64).sum::<i64>() / 24) as usize;
    let mut s = vec![0i128; n + 1];
    s[0] = 1;
    for &(d, r) in recipe {
        for _ in 0..r {
            let mut m = d as usize;
            while m <= n {
                for i in (m..=n).rev() {
                    s[i] -= s[i - m];
                }
                m += d as usize;
            }
        }
    }
    (1..=n).map(|i| if i >= shift { s[i - shift] } else { 0 }).collect()
}

#[test]
fn catalog_expansions_match_naive_products() {
    for form in CatalogForm::ALL {
        let fast = eta_product(form.recipe(), 300).unwrap();
        assert_eq!(fast.coefficients, naive_eta(form.recipe(), 300), "{form}");
        assert_eq!(fast.weight, form.weight());
    }
}

#[test]
fn known_coefficients() {
    let delta = eta_product(&[(1, 24)], 10).unwrap();
    assert_eq!(&delta.coefficients[..4], &[1, -24, 252, -1472]);
    assert_eq!(delta.c(4), delta.c(2) * delta.c(2) - (1 << 11));
    let f11 = eta_product(&[(1, 2), (11, 2)], 10).unwrap();
    assert_eq!(&f11.coefficients[..5], &[1, -2, -1, 2, 1]);
    let f5 = eta_product(&[(1, 4), (5, 4)], 10).unwrap();
    assert_eq!(&f5.coefficients[..2], &[1, -4]);
}

#[test]
fn prefactor_power_is_first_nonzero_index() {
    // η(z)^8 η(2z)^8: Σ d r / 24 = 1, so c(1) = 1; η(2z)^{12} starts at q^1 too,
    // and η(z)^{48} (Σ = 48) starts at q^2.
    let e = eta_product(&[(1, 48)], 5).unwrap();
    assert_eq!(&e.coefficients[..2], &[0, 1]);
    let g = eta_product(&[(1, 8), (2, 8)], 5).unwrap();
    assert_eq!(g.coefficients[0], 1);
}

#[test]
fn eta_quotient_with_negative_exponent() {
    // η(z)^{-2} η(11z)^{2} · η(z)^4 = η(z)^2 η(11z)^2.
    let direct = eta_product(&[(1, 2), (11, 2)], 200).unwrap();
    let quotient = eta_product(&[(1, 4), (11, 2), (1, -2)], 200).unwrap();
    assert_eq!(direct.coefficients, quotient.coefficients);
}

#[test]
fn normalized_coefficients() {
    let delta = NewformRecord::load(CatalogForm::Delta, 10, None).unwrap();
    let a = coefficients(&delta, 2).unwrap();
    assert_eq!(a[0], 1.0);
    assert!((a[1] - (-24.0 / 2f64.powf(5.5))).abs() < 1e-15);
    assert!((a[1] + 0.530330).abs() < 1e-6);
    let f11 = NewformRecord::load(CatalogForm::F11, 10, None).unwrap();
    assert!((f11.a(2) + 2f64.sqrt()).abs() < 1e-15);
    assert!(coefficients(&f11, 11).is_err());
}

#[test]
fn hecke_and_deligne_to_5000() {
    for form in CatalogForm::ALL {
        let rec = NewformRecord::load(form, 5000, None).unwrap();
        let report = hecke_check(&rec, 5000).unwrap();
        assert!(report.passed(), "{form}: {:?}", report.violations);
        assert!(report.prime_power_relations > 20);
        assert!(report.multiplicative_relations > 1000);
        assert_eq!(report.primes_bounded, 669);
        assert!(report.max_abs_ap <= 2.0);
    }
}

#[test]
fn hecke_check_flags_corrupted_coefficient() {
    let mut rec = NewformRecord::load(CatalogForm::F11, 100, None).unwrap();
    rec.expansion.coefficients[3] += 1; // c(4)
    let report = hecke_check(&rec, 100).unwrap();
    assert!(!report.passed());
}

#[test]
fn disk_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = cached_eta_product(&[(1, 24)], 500, dir.path()).unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    let second = cached_eta_product(&[(1, 24)], 500, dir.path()).unwrap();
    assert_eq!(first, second);
    assert_eq!(first, eta_product(&[(1, 24)], 500).unwrap());
}
