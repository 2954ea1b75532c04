//! Complex gamma functions, oscillatory tail integrals and Gauss–Legendre rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

// B_{2j} / (2j (2j − 1)) for j = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Principal branch of `log Γ(z)` for `Re z > 0`, continuous in `z`.
///
/// Shifts `z` up until `Re z ≥ 15` and applies the Stirling series.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "ln_gamma needs Re z > 0, got {z}");
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < 15.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + HALF_LN_TAU + series - shift
}

/// Digamma `ψ(z) = Γ'(z)/Γ(z)` for `Re z > 0`.
pub fn digamma(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "digamma needs Re z > 0, got {z}");
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < 15.0 {
        shift += w.inv();
        w += 1.0;
    }
    let inv2 = (w * w).inv();
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv2;
    // B_{2j}/(2j) = (2j − 1) · STIRLING[j − 1]
    for (j, c) in STIRLING.iter().enumerate() {
        series += pow * (c * (2 * j + 1) as f64);
        pow *= inv2;
    }
    w.ln() - 0.5 * w.inv() - series - shift
}

pub fn ln_gamma_real(x: f64) -> f64 {
    ln_gamma(Complex64::new(x, 0.0)).re
}

/// Upper incomplete gamma `Γ(a, z) = ∫_z^∞ e^{−t} t^{a−1} dt` for `Re a > 0`,
/// `|arg z| < π/2`.
///
/// Uses the power series for `γ(a, z)` when `|z|` is small compared with `|a|`
/// and the Legendre continued fraction otherwise.
pub fn upper_gamma(a: Complex64, z: Complex64) -> Result<Complex64> {
    if !(a.re > 0.0) || !(z.re > 0.0) {
        return Err(Error::domain(format!("incomplete gamma outside Re a > 0, Re z > 0: a={a}, z={z}")));
    }
    if z.norm() < a.norm() + 2.0 {
        let lower = lower_gamma_series(a, z)?;
        Ok(ln_gamma(a).exp() - lower)
    } else {
        upper_gamma_fraction(a, z)
    }
}

/// `γ(a, z) = z^a e^{−z} Σ_j z^j / (a (a+1) ··· (a+j))`.
fn lower_gamma_series(a: Complex64, z: Complex64) -> Result<Complex64> {
    let mut term = a.inv();
    let mut sum = term;
    for j in 1..2000 {
        term *= z / (a + j as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            return Ok(sum * (a * z.ln() - z).exp());
        }
    }
    Err(Error::NonConvergence {
        what: format!("lower incomplete gamma series at a={a}, z={z}"),
        achieved: term.norm() / sum.norm(),
    })
}

/// `Γ(a, z) = e^{−z} z^a / (z + 1 − a − 1(1−a)/(z + 3 − a − 2(2−a)/(…)))`, modified Lentz.
fn upper_gamma_fraction(a: Complex64, z: Complex64) -> Result<Complex64> {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0 - a;
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for j in 1..5000 {
        let jf = j as f64;
        let an = -jf * (jf - a);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = Complex64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = Complex64::new(TINY, 0.0);
        }
        d = d.inv();
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            return Ok(h * (a * z.ln() - z).exp());
        }
    }
    Err(Error::NonConvergence {
        what: format!("incomplete gamma continued fraction at a={a}, z={z}"),
        achieved: f64::NAN,
    })
}

/// `∫_L^∞ e^{ibx} x^{−n} dx` for `L > 0`, `n ≥ 2`, via the asymptotic expansion
/// `−e^{ibL}/(ib L^n) Σ_j (n)_j/(−ibL)^j`, exact enough once `|b| L ≫ n`; `b = 0`
/// is the elementary integral.
pub fn oscillatory_tail(b: f64, n: u32, l: f64) -> Complex64 {
    assert!(n >= 2 && l > 0.0);
    if b == 0.0 {
        return Complex64::new(l.powi(1 - n as i32) / (n as f64 - 1.0), 0.0);
    }
    let ibl = Complex64::new(0.0, b * l);
    assert!(b.abs() * l > 4.0 * n as f64 + 20.0, "tail expansion needs |b| L large");
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for j in 0..60 {
        term *= (n + j) as f64 / ibl;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let phase = Complex64::new(0.0, b * l).exp();
    -phase / (Complex64::new(0.0, b) * l.powi(n as i32)) * sum
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// `∫_a^b f` by 20-point Gauss–Legendre on `panels` equal panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl20();
    let width = (b - a) / panels as f64;
    let mut acc = crate::sum::CompensatedSum::new();
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let mid = lo + 0.5 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            panel += w * f(mid + 0.5 * width * x);
        }
        acc.add(0.5 * width * panel);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ln_gamma_reference() {
        // mpmath.loggamma
        let cases = [
            (c(0.5, 0.0), c(0.57236494292470008707, 0.0)),
            (c(6.0, 0.0), c(4.7874917427820459942, 0.0)),
            (c(1.0, 30.0), c(-44.504352579811148147, 72.818541732570985572)),
            (c(6.0, 30.0), c(-27.468107672628873795, 80.175265344688934779)),
            (c(0.7, -2.0), c(-2.085859962485642724, 0.28859239945680937902)),
            (c(1.2, 100.0), c(-152.93707221608548482, 361.61454269625442381)),
        ];
        for (z, want) in cases {
            let got = ln_gamma(z);
            assert!((got - want).norm() < 1e-12 * want.norm().max(1.0), "{z}: {got} vs {want}");
        }
    }

    #[test]
    fn digamma_reference() {
        // mpmath.digamma
        let cases = [
            (c(1.0, 0.0), c(-0.57721566490153286061, 0.0)),
            (c(6.5, 0.0), c(1.792911330399932941915445, 0.0)),
            (c(1.0, 10.0), c(2.303419263671412535169218, 1.520796326794896619231322)),
            (c(0.5, -3.0), c(1.093886531678844039753318, -1.570796306335550628613386)),
        ];
        for (z, want) in cases {
            let got = digamma(z);
            assert!((got - want).norm() < 1e-13 * want.norm().max(1.0), "{z}: {got} vs {want}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_tail_matches_quadrature() {
        // ∫_L^∞ cos(bx)/x² dx against quadrature plus a far tail.
        let (b, l) = (3.0, 50.0);
        let far = 2000.0;
        let near = integrate(|x| (b * x).cos() / (x * x), l, far, 4000);
        let want = near + oscillatory_tail(b, 2, far).re;
        assert!((oscillatory_tail(b, 2, l).re - want).abs() < 1e-13);
        assert!((oscillatory_tail(0.0, 3, 2.0).re - 0.125).abs() < 1e-16);
    }
}
