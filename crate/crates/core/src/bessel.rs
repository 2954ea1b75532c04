//! Bessel functions `J_n(x)` of integer order for real `x ≥ 0`.
//!
//! Three regimes:
//! - ascending power series when `x ≤ 2` or `x² ≤ 2(n+1)`, where the terms
//!   decrease from the first one and cancellation is harmless;
//! - Hankel's asymptotic expansion for `x ≥ 50 + n²/4`;
//! - Miller's downward recurrence, normalized by `J_0 + 2 Σ J_{2k} = 1`,
//!   everywhere in between.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 200;
pub const MAX_ARGUMENT: f64 = 1.0e6;

fn check(order: u32, x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("Bessel argument must be ≥ 0, got {x}")));
    }
    if order > MAX_ORDER || x > MAX_ARGUMENT {
        return Err(Error::domain(format!(
            "Bessel J_{order}({x}) outside supported range (order ≤ {MAX_ORDER}, x ≤ {MAX_ARGUMENT:e})"
        )));
    }
    Ok(())
}

/// `J_order(x)`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    Ok(bessel_j_unchecked(order, x))
}

pub(crate) fn bessel_j_unchecked(order: u32, x: f64) -> f64 {
    let n = order as f64;
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if x <= 2.0 || x * x <= 2.0 * (n + 1.0) {
        series(order, x)
    } else if x >= 50.0 + n * n / 4.0 {
        hankel(order, x)
    } else {
        miller(order, x)
    }
}

/// `min(1, (x/2)^order / order!)`, a rigorous bound for `|J_order(x)|`.
pub fn bessel_j_tail_bound(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    Ok(tail_bound_unchecked(order, x))
}

pub(crate) fn tail_bound_unchecked(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut bound = 1.0f64;
    for i in 1..=order {
        bound *= half / i as f64;
        if bound == 0.0 {
            break;
        }
    }
    bound.min(1.0)
}

fn series(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut prefactor = 1.0f64;
    for i in 1..=order {
        prefactor *= half / i as f64;
    }
    if prefactor == 0.0 {
        return 0.0;
    }
    let z = -half * half;
    let n = order as f64;
    let mut term = 1.0f64;
    let mut total = 1.0f64;
    for j in 1..200 {
        let jf = j as f64;
        term *= z / (jf * (n + jf));
        total += term;
        if term.abs() <= 1e-17 * total.abs() {
            break;
        }
    }
    prefactor * total
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64) * (order as f64);
    // a_k(ν)/x^k with alternating sign pattern folded into P and Q.
    let mut p = 1.0f64;
    let mut q = 0.0f64;
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..400 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (8.0 * kf * x);
        if term.abs() > last && k > 2 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 * p.abs().max(q.abs()) {
            break;
        }
    }
    // χ = x − ω with ω = (n/2 + 1/4)π reduced mod 2π; expand to keep cos(x) exact.
    let omega = ((order % 4) as f64) * (PI / 2.0) + FRAC_PI_4;
    let (sx, cx) = x.sin_cos();
    let (so, co) = omega.sin_cos();
    let cos_chi = cx * co + sx * so;
    let sin_chi = sx * co - cx * so;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn miller(order: u32, x: f64) -> f64 {
    let big = (order as f64).max(x);
    let mut start = (big + 20.0 + (200.0 * big).sqrt()).ceil() as u32;
    start += start % 2;
    let (mut next, mut cur) = (0.0f64, 1.0f64);
    let mut norm = 0.0f64;
    let mut wanted = 0.0f64;
    const RESCALE: f64 = 1e250;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / x) * cur - next;
        next = cur;
        cur = prev;
        let idx = k - 1;
        if idx == order {
            wanted = cur;
        }
        if idx % 2 == 0 {
            norm += if idx == 0 { cur } else { 2.0 * cur };
        }
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            next /= RESCALE;
            norm /= RESCALE;
            wanted /= RESCALE;
        }
    }
    wanted / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    // J_n(x) to 20 digits from an arbitrary-precision reference.
    const REFERENCE: &[(u32, f64, f64)] = &[
        (0, 0.5, 0.93846980724081290423),
        (0, 1.0, 0.76519768655796655145),
        (0, 1.9, 0.28181855937438552233),
        (0, 2.5, -0.048383776468197996327),
        (0, 7.3, 0.28821694763501439904),
        (0, 49.0, -0.052900033322273515066),
        (0, 51.0, 0.11156465824468606822),
        (0, 1000.5, 0.019486559987130137373),
        (0, 123456.7, -0.0016644830258065925787),
        (1, 1.0, 0.44005058574493351596),
        (1, 3.3, 0.22066345298524115574),
        (1, 12.0, -0.22344710449062761237),
        (1, 64.0, 0.037791549354396374912),
        (1, 999999.0, -0.0006708061088033049569),
        (3, 0.01, 2.0833203125325521682e-8),
        (3, 4.7, 0.40722799498071287953),
        (3, 30.0, 0.12921122875972498304),
        (5, 17.1, -0.19173984557320762259),
        (11, 1.0, 1.1980067463031370965e-11),
        (11, 8.0, 0.025596672213248286081),
        (11, 25.0, -0.16823599003225700956),
        (11, 80.5, 0.083773508046715833518),
        (11, 500.0, -0.0063143839272995988192),
        (20, 3.0, 1.2275946737992986496e-15),
        (20, 21.0, 0.21452596327168664925),
        (20, 150.0, 0.063447240953861972933),
        (50, 40.0, 0.00068185243531768311415),
        (50, 75.0, 0.094076799581573464796),
        (50, 700.0, 0.027500382679863404956),
        (100, 10.0, 6.5973160641553809722e-89),
        (100, 101.0, 0.11480132142789914919),
        (100, 2600.0, 0.015574059842497017802),
        (100, 3000.0, -0.01150771540001410348),
        (199, 150.0, 1.788370500081208543e-13),
        (200, 1.0, 0.0),
        (200, 180.0, 0.000081543700011565725383),
        (200, 250.0, -0.0059021679152339692719),
        (200, 400.0, -0.01958998386955328339),
        (200, 10049.0, -0.0077126873900962260029),
        (200, 10051.0, 0.0049974349966110394578),
        (200, 1000000.0, 0.00034549521335497380018),
    ];

    #[test]
    fn matches_reference_values() {
        for &(n, x, want) in REFERENCE {
            let got = bessel_j(n, x).unwrap();
            let tol = if x < 1.0 { 1e-15 } else { 1e-12 * want.abs() };
            assert!(
                (got - want).abs() <= tol.max(1e-300),
                "J_{n}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn special_values_and_errors() {
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert!(bessel_j(0, -1.0).is_err());
        assert!(bessel_j(201, 1.0).is_err());
        assert!(bessel_j(0, f64::NAN).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        assert!((bessel_j_tail_bound(1, 0.2).unwrap() - 0.1).abs() < 1e-17);
        let want = 0.5f64.powi(11) / 39_916_800.0;
        assert!((bessel_j_tail_bound(11, 1.0).unwrap() - want).abs() < 1e-24);
        assert_eq!(bessel_j_tail_bound(3, 50.0).unwrap(), 1.0);
        assert_eq!(bessel_j_tail_bound(0, 0.3).unwrap(), 1.0);
    }
}
