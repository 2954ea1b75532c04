//! `L(s, f)` for catalog newforms through the completed function
//! `Λ(s) = Q^s Γ(s + κ) L(s)`, `Q = √q / 2π`, `κ = (k − 1)/2`, which satisfies
//! `Λ(s) = ε Λ(1 − s)`.
//!
//! With `θ(t) = Σ a(n) (n/Q)^κ e^{−nt/Q}` and `θ(1/t) = ε t^k θ(t)`, splitting the
//! Mellin integral at a point `δ` of the right half-plane gives
//!
//! `Λ(s) = Σ a(n) (Q/n)^s Γ(s+κ, nδ/Q) + ε Σ a(n) (Q/n)^{1−s} Γ(1−s+κ, n/(δQ))`.
//!
//! For large `|Im s|` the ray is rotated towards the imaginary axis so that the
//! terms have the size of `Λ` itself instead of cancelling.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::NewformRecord;
use crate::special::{ln_gamma, upper_gamma};

/// Relative truncation target for each approximate-functional-equation sum.
const TRUNCATION: f64 = 1e-14;
/// Largest `|Im s|` accepted.
pub const MAX_HEIGHT: f64 = 100.0;
/// Largest scan height accepted by [`find_zeros`].
pub const MAX_SCAN: f64 = 50.0;
/// Bisection stops at this bracket width.
pub const BRACKET_WIDTH: f64 = 1e-6;

struct Params {
    q_scale: f64,
    kappa: f64,
}

fn params(record: &NewformRecord) -> Params {
    Params {
        q_scale: (record.level as f64).sqrt() / (2.0 * PI),
        kappa: (record.weight as f64 - 1.0) / 2.0,
    }
}

/// Number of terms after which `Σ_n |a(n) (Q/n)^s Γ(s+κ, nδ/Q)|` is below
/// `TRUNCATION · scale`, using `|a(n)| ≤ d(n) ≤ 2√n` and
/// `|Γ(α+iτ, r e^{iφ})| ≤ 2 e^{−τφ} r^{α−1} e^{−r cos φ} / cos φ` once `r cos φ ≥ 2(α − 1)`.
fn truncation_point(p: &Params, s: Complex64, delta: Complex64, scale: f64) -> Result<usize> {
    let a = s + p.kappa;
    let phi = delta.arg();
    let c = phi.cos();
    let step = delta.norm() / p.q_scale;
    let sigma = s.re;
    let bound = |n: f64| -> f64 {
        let r = n * step;
        let ln = (2.0f64).ln() + 0.5 * n.ln() + sigma * (p.q_scale / n).ln() - a.im * phi
            + (2.0 / c).ln()
            + (a.re - 1.0) * r.ln()
            - r * c;
        ln.exp()
    };
    let min_r = (2.0 * (a.re - 1.0) / c).max(0.0);
    let mut n = ((min_r / step).ceil() as usize).max(1);
    // Consecutive bounds decrease at least geometrically past this point.
    loop {
        let nf = n as f64;
        let b = bound(nf + 1.0);
        let ratio = bound(nf + 2.0) / b;
        if ratio < 1.0 && b / (1.0 - ratio) <= TRUNCATION * scale {
            return Ok(n);
        }
        n = n + 1 + n / 8;
        if n > 50_000_000 {
            return Err(Error::NonConvergence {
                what: format!("approximate functional equation at s = {s}"),
                achieved: b,
            });
        }
    }
}

/// `Σ_{n ≤ N} a(n) (Q/n)^s Γ(s+κ, nδ/Q)`.
fn afe_sum(record: &NewformRecord, p: &Params, s: Complex64, delta: Complex64, scale: f64) -> Result<Complex64> {
    let n_max = truncation_point(p, s, delta, scale)?;
    record.require(n_max, "L-function evaluation")?;
    let a = s + p.kappa;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for n in 1..=n_max {
        let c = record.a(n);
        if c == 0.0 {
            continue;
        }
        let nf = n as f64;
        let z = delta * (nf / p.q_scale);
        let term = (s * (p.q_scale / nf).ln()).exp() * upper_gamma(a, z)? * c;
        // Kahan summation on both components.
        let y = term - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    Ok(acc)
}

/// `|Γ(s + κ)| Q^{Re s}`, the natural size of `Λ(s)`.
fn natural_scale(p: &Params, s: Complex64) -> f64 {
    (ln_gamma(s + p.kappa).re + s.re * p.q_scale.ln()).exp()
}

/// Rotation of the splitting point for height `t`.
fn rotation(t: f64) -> Complex64 {
    let theta = if t.abs() <= 4.0 / PI { 0.0 } else { t.signum() * (FRAC_PI_2 - 2.0 / t.abs()) };
    Complex64::from_polar(1.0, theta)
}

/// Both gamma arguments `s + κ` and `1 − s + κ` need real part at least this.
const MIN_GAMMA_RE: f64 = 0.05;

fn check_s(record: &NewformRecord, s: Complex64) -> Result<()> {
    let kappa = params(record).kappa;
    let lo = MIN_GAMMA_RE - kappa;
    let hi = 1.0 + kappa - MIN_GAMMA_RE;
    if !(s.im.abs() <= MAX_HEIGHT) || !(s.re >= lo && s.re <= hi) {
        return Err(Error::domain(format!(
            "s = {s} outside |Im s| ≤ {MAX_HEIGHT}, {lo} ≤ Re s ≤ {hi}"
        )));
    }
    Ok(())
}

/// `Λ(s, f)`.
pub fn completed_lambda(record: &NewformRecord, s: Complex64) -> Result<Complex64> {
    check_s(record, s)?;
    let eps = root_number(record)? as f64;
    lambda_with_sign(record, s, eps)
}

fn lambda_with_sign(record: &NewformRecord, s: Complex64, eps: f64) -> Result<Complex64> {
    let p = params(record);
    let delta = rotation(s.im);
    let scale = natural_scale(&p, s).max(natural_scale(&p, 1.0 - s));
    let first = afe_sum(record, &p, s, delta, scale)?;
    let second = afe_sum(record, &p, 1.0 - s, delta.inv(), scale)?;
    Ok(first + second * eps)
}

/// The sign `ε_f` of the functional equation.
///
/// Splitting at a small real `y₀` makes the dual sum negligible, so
/// `Λ̃(s) = Σ a(n) (Q/n)^s Γ(s+κ, n y₀/Q)` approximates `Λ(s)` without knowing
/// `ε`; then `ε = Λ̃(0.6)/Λ̃(0.4)`.
pub fn root_number(record: &NewformRecord) -> Result<i8> {
    if let Some(&e) = record.root_number.get() {
        return Ok(e);
    }
    let p = params(record);
    let y0 = Complex64::new(2.0 * PI / ((record.level as f64).sqrt() * 60.0), 0.0);
    let eval = |s: f64| -> Result<f64> {
        let s = Complex64::new(s, 0.0);
        let scale = natural_scale(&p, s);
        let main = afe_sum(record, &p, s, y0, scale)?;
        // The neglected dual sum is bounded through its truncation estimate.
        let dual_bound = dual_sum_bound(&p, 1.0 - s, y0.inv());
        if dual_bound > 1e-9 * main.norm() {
            return Err(Error::NonConvergence {
                what: "root-number evaluation (dual sum not negligible)".into(),
                achieved: dual_bound / main.norm(),
            });
        }
        Ok(main.re)
    };
    let ratio = eval(0.6)? / eval(0.4)?;
    let eps = if ratio > 0.0 { 1 } else { -1 };
    if (ratio - eps as f64).abs() > 1e-6 {
        return Err(Error::NonConvergence {
            what: format!("root number of {}: Λ(0.6)/Λ(0.4) = {ratio}", record.form),
            achieved: (ratio - eps as f64).abs(),
        });
    }
    let _ = record.root_number.set(eps);
    Ok(eps)
}

/// `Σ_n 2√n (Q/n)^σ |Γ(1−s+κ, n/(δQ))|` bounded as in [`truncation_point`], from `n = 1`.
fn dual_sum_bound(p: &Params, s: Complex64, delta: Complex64) -> f64 {
    let a = s + p.kappa;
    let step = delta.norm() / p.q_scale;
    let r1 = step;
    assert!(r1 >= 2.0 * (a.re - 1.0), "dual sum bound needs a far splitting point");
    let term = |n: f64| {
        let r = n * step;
        (2.0f64.ln() + 0.5 * n.ln() + s.re * (p.q_scale / n).ln() + 2f64.ln() + (a.re - 1.0) * r.ln() - r).exp()
    };
    let ratio = term(2.0) / term(1.0);
    term(1.0) / (1.0 - ratio)
}

/// `L(1/2, f)` with the root number; `ε = −1` forces an exact zero.
#[derive(Debug, Clone, Serialize)]
pub struct CentralValue {
    pub value: f64,
    pub root_number: i8,
    pub vanishing: bool,
}

pub fn central_value(record: &NewformRecord) -> Result<CentralValue> {
    let eps = root_number(record)?;
    if eps < 0 {
        return Ok(CentralValue {
            value: 0.0,
            root_number: eps,
            vanishing: true,
        });
    }
    let half = Complex64::new(0.5, 0.0);
    let lambda = completed_lambda(record, half)?;
    let p = params(record);
    let value = lambda.re / (0.5 * p.q_scale.ln() + ln_gamma(half + p.kappa).re).exp();
    Ok(CentralValue {
        value,
        root_number: eps,
        vanishing: false,
    })
}

/// `L(s, f) = Λ(s) / (Q^s Γ(s + κ))`.
pub fn l_value(record: &NewformRecord, s: Complex64) -> Result<Complex64> {
    let lambda = completed_lambda(record, s)?;
    let p = params(record);
    Ok(lambda / (s * p.q_scale.ln() + ln_gamma(s + p.kappa)).exp())
}

/// `Λ(1/2 + it) / (Q^{1/2} |Γ(1/2 + κ + it)|)`: real for `ε = +1`, with `|Z(t)| = |L(1/2 + it)|`.
pub fn hardy_z(record: &NewformRecord, t: f64) -> Result<f64> {
    let s = Complex64::new(0.5, t);
    let lambda = completed_lambda(record, s)?;
    let p = params(record);
    Ok(lambda.re / (0.5 * p.q_scale.ln() + ln_gamma(s + p.kappa).re).exp())
}

/// `γ̃ = γ log c(f) / 2π`.
pub fn rescale_zero(record: &NewformRecord, gamma: f64) -> f64 {
    gamma * record.conductor().ln() / (2.0 * PI)
}

/// Expected number of zeros with `0 < γ ≤ T`: `θ(T)/π` with
/// `θ(T) = T log Q + arg Γ(1/2 + κ + iT)`.
pub fn zero_count_prediction(record: &NewformRecord, t: f64) -> f64 {
    let p = params(record);
    let theta = t * p.q_scale.ln() + ln_gamma(Complex64::new(0.5 + p.kappa, t)).im;
    theta / PI
}

/// Grid step `2π / (8 log c(f))`: eight samples per mean zero spacing.
pub fn zero_grid_step(record: &NewformRecord) -> f64 {
    2.0 * PI / (8.0 * record.conductor().ln())
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroWarning {
    pub t: f64,
    pub value: f64,
    pub message: String,
}

/// Ordinates `0 < γ ≤ T` of zeros on the critical line found by sign changes.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroList {
    pub ordinates: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    pub scan_height: f64,
    pub step: f64,
    pub warnings: Vec<ZeroWarning>,
}

pub fn find_zeros(record: &NewformRecord, t_max: f64) -> Result<ZeroList> {
    find_zeros_with_step(record, t_max, zero_grid_step(record))
}

/// [`find_zeros`] on a grid of the given step.
pub fn find_zeros_with_step(record: &NewformRecord, t_max: f64, step: f64) -> Result<ZeroList> {
    if !(t_max > 0.0 && t_max <= MAX_SCAN) {
        return Err(Error::domain(format!("scan height must lie in (0, {MAX_SCAN}], got {t_max}")));
    }
    if !(step > 0.0) {
        return Err(Error::domain(format!("grid step must be positive, got {step}")));
    }
    if root_number(record)? < 0 {
        return Err(Error::domain(format!(
            "{} has root number −1; zero scanning needs ε = +1",
            record.form
        )));
    }
    let count = (t_max / step).ceil() as usize;
    let grid: Vec<f64> = (1..=count).map(|j| (j as f64 * step).min(t_max)).collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&t| hardy_z(record, t))
        .collect::<Result<_>>()?;
    let mut list = ZeroList {
        ordinates: Vec::new(),
        brackets: Vec::new(),
        scan_height: t_max,
        step,
        warnings: Vec::new(),
    };
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            list.ordinates.push(grid[i]);
            list.brackets.push((grid[i], grid[i]));
            continue;
        }
        if i + 1 < grid.len() && values[i] * values[i + 1] < 0.0 {
            let (a, b) = bisect(record, grid[i], grid[i + 1], values[i])?;
            list.ordinates.push(0.5 * (a + b));
            list.brackets.push((a, b));
        }
        if i >= 1 && i + 1 < grid.len() {
            let (l, m, r) = (values[i - 1], values[i], values[i + 1]);
            let same_sign = l * m > 0.0 && m * r > 0.0;
            if same_sign && m.abs() < l.abs() && m.abs() < r.abs() && m.abs() < 0.05 * l.abs().max(r.abs()) {
                list.warnings.push(ZeroWarning {
                    t: grid[i],
                    value: m,
                    message: "near-zero local minimum without sign change (possible double zero or missed pair)".into(),
                });
            }
        }
    }
    Ok(list)
}

fn bisect(record: &NewformRecord, mut a: f64, mut b: f64, mut fa: f64) -> Result<(f64, f64)> {
    while b - a > BRACKET_WIDTH {
        let mid = 0.5 * (a + b);
        let fm = hardy_z(record, mid)?;
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok((a, b))
}

/// Coefficients needed to evaluate `Λ` up to height `t_max` and the root number.
pub fn required_length(record: &NewformRecord, t_max: f64) -> Result<usize> {
    let p = params(record);
    let mut need = 0;
    for &sigma in &[0.0, 0.5, 1.0] {
        for &t in &[0.0, t_max] {
            let s = Complex64::new(sigma, t);
            let delta = rotation(t);
            let scale = natural_scale(&p, s).max(natural_scale(&p, 1.0 - s));
            need = need
                .max(truncation_point(&p, s, delta, scale)?)
                .max(truncation_point(&p, 1.0 - s, delta.inv(), scale)?);
        }
    }
    let y0 = Complex64::new(2.0 * PI / ((record.level as f64).sqrt() * 60.0), 0.0);
    for s in [0.4, 0.6] {
        let s = Complex64::new(s, 0.0);
        need = need.max(truncation_point(&p, s, y0, natural_scale(&p, s))?);
    }
    Ok(need)
}
