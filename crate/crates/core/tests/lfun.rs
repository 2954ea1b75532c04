use std::f64::consts::PI;

use num_complex::Complex64;
use lvalue_lab::forms::{CatalogForm, NewformRecord};
use lvalue_lab::lfun::{
    central_value, completed_lambda, find_zeros, find_zeros_with_step, hardy_z, l_value,
    required_length, root_number, zero_count_prediction, zero_grid_step,
};

fn load(form: CatalogForm) -> NewformRecord {
    NewformRecord::load(form, 5000, None).unwrap()
}

#[test]
fn root_numbers() {
    assert_eq!(root_number(&load(CatalogForm::Delta)).unwrap(), 1);
    assert_eq!(root_number(&load(CatalogForm::F11)).unwrap(), 1);
    assert_eq!(root_number(&load(CatalogForm::F5)).unwrap(), 1);
}

#[test]
fn functional_equation_residual() {
    for form in CatalogForm::ALL {
        let rec = load(form);
        let eps = root_number(&rec).unwrap() as f64;
        for sigma in [-0.4, 0.0, 0.3, 0.8, 1.4] {
            for t in [-20.0, -3.0, 0.0, 7.5, 40.0] {
                let s = Complex64::new(sigma, t);
                let a = completed_lambda(&rec, s).unwrap();
                let b = completed_lambda(&rec, 1.0 - s).unwrap();
                let resid = (a - b * eps).norm() / a.norm().max(b.norm());
                assert!(resid < 1e-10, "{form} s={s}: {resid:e}");
            }
        }
    }
}

#[test]
fn critical_line_values_are_real() {
    let rec = load(CatalogForm::F11);
    for t in [1.0, 6.0, 17.3, 44.0] {
        let lam = completed_lambda(&rec, Complex64::new(0.5, t)).unwrap();
        assert!(lam.im.abs() < 1e-10 * lam.norm().max(1e-300), "t={t}: {lam}");
    }
}

#[test]
fn f11_central_value_matches_theta_series() {
    // For weight 2, level 11, ε = +1: L(1/2) = 2 Σ c(n)/n e^{−2πn/√11}.
    let rec = load(CatalogForm::F11);
    let mut oracle = 0.0;
    for n in 1..=400 {
        oracle += rec.expansion.c(n) as f64 / n as f64 * (-2.0 * PI * n as f64 / 11f64.sqrt()).exp();
    }
    oracle *= 2.0;
    let cv = central_value(&rec).unwrap();
    assert!(!cv.vanishing);
    assert!((cv.value - oracle).abs() < 1e-8, "{} vs {oracle}", cv.value);
    assert!((cv.value - 0.253_841_860_855_910_7).abs() < 1e-10);
}

#[test]
fn dirichlet_series_in_absolute_convergence() {
    // Inside Re s > 1 the Dirichlet series itself is an oracle.
    let rec = load(CatalogForm::Delta);
    assert!(l_value(&rec, Complex64::new(7.0, 0.0)).is_err());
    let s = Complex64::new(2.5, 1.0);
    let direct_c: Complex64 = (1..=5000)
        .map(|n| Complex64::new(rec.a(n), 0.0) * (-s * (n as f64).ln()).exp())
        .sum();
    let l = l_value(&rec, s).unwrap();
    assert!((l - direct_c).norm() < 1e-7, "{l} vs {direct_c}");
}

#[test]
fn first_zeros() {
    let delta = load(CatalogForm::Delta);
    let z = find_zeros(&delta, 30.0).unwrap();
    assert!(z.ordinates[0] > 9.0 && z.ordinates[0] < 9.5);
    assert!((z.ordinates[0] - 9.222_379_399_921_1).abs() < 2e-6, "{}", z.ordinates[0]);
    for (a, b) in &z.brackets {
        assert!(b - a <= 1e-6);
        assert!(hardy_z(&delta, *a).unwrap() * hardy_z(&delta, *b).unwrap() <= 0.0);
    }
    let f11 = load(CatalogForm::F11);
    let z = find_zeros(&f11, 10.0).unwrap();
    assert!((z.ordinates[0] - 6.362_613_894_713).abs() < 2e-6, "{}", z.ordinates[0]);
}

#[test]
fn zero_counts_follow_prediction_and_refinement() {
    for form in CatalogForm::ALL {
        let rec = load(form);
        let z = find_zeros(&rec, 30.0).unwrap();
        let predicted = zero_count_prediction(&rec, 30.0);
        assert!((z.ordinates.len() as f64 - predicted).abs() <= 3.0, "{form}: {} vs {predicted}", z.ordinates.len());
        let fine = find_zeros_with_step(&rec, 30.0, zero_grid_step(&rec) / 2.0).unwrap();
        assert_eq!(fine.ordinates.len(), z.ordinates.len(), "{form}");
    }
}

#[test]
fn short_expansion_is_rejected() {
    let rec = NewformRecord::load(CatalogForm::F11, 20, None).unwrap();
    assert!(central_value(&rec).is_err());
    let need = required_length(&load(CatalogForm::F11), 50.0).unwrap();
    assert!(need < 5000, "{need}");
}
