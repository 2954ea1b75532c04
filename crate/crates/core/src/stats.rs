//! Prime sums, explicit formulas, one-level densities, Gaussian moments and
//! the harmonic moment pipeline over newform families.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{gcd, sieve_primes};
use crate::error::{Error, Result};
use crate::forms::NewformRecord;
use crate::lfun::{self, ZeroList};
use crate::special::{digamma, integrate, oscillatory_tail, upper_gamma};
use crate::sum::CompensatedSum;
use crate::trace::{self, FamilySpec, Truncation};

/// Primes `p < x` (strict).
fn primes_below(x: f64) -> Vec<u64> {
    if !(x > 2.0) {
        return Vec::new();
    }
    let limit = (x.ceil() as u64).saturating_sub(1);
    sieve_primes(limit).into_iter().filter(|&p| (p as f64) < x).collect()
}

/// `P(f, x) = Σ_{p < x, p ∤ q} a_f(p)/√p`.
pub fn p_sum(record: &NewformRecord, x: f64) -> Result<f64> {
    if !(x >= 2.0) {
        return Err(Error::domain(format!("p_sum needs x ≥ 2, got {x}")));
    }
    let primes: Vec<u64> = primes_below(x).into_iter().filter(|&p| record.level % p != 0).collect();
    if let Some(&p) = primes.last() {
        record.require(p as usize, "prime sum")?;
    }
    Ok(primes
        .iter()
        .map(|&p| record.a(p as usize) / (p as f64).sqrt())
        .collect::<CompensatedSum>()
        .value())
}

/// `Σ_{p ≤ x, p ∤ q} a_f(p)²/p`.
pub fn rankin_sum(record: &NewformRecord, x: f64) -> Result<f64> {
    if !(x >= 2.0) {
        return Err(Error::domain(format!("rankin_sum needs x ≥ 2, got {x}")));
    }
    let primes: Vec<u64> = sieve_primes(x.floor() as u64)
        .into_iter()
        .filter(|&p| record.level % p != 0)
        .collect();
    if let Some(&p) = primes.last() {
        record.require(p as usize, "Rankin sum")?;
    }
    Ok(primes
        .iter()
        .map(|&p| record.a(p as usize).powi(2) / p as f64)
        .collect::<CompensatedSum>()
        .value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Fejer,
}

/// Even test function `h` with compactly supported Fourier transform
/// `ĥ(y) = ∫ h(x) e^{−2πixy} dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestKernel {
    pub kind: KernelKind,
    pub scale: f64,
}

/// `h(x) = (sin πsx / πsx)²`, `ĥ(y) = max(1 − |y|/s, 0)/s`.
pub fn fejer_kernel(scale: f64) -> Result<TestKernel> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!("kernel scale must be positive, got {scale}")));
    }
    Ok(TestKernel {
        kind: KernelKind::Fejer,
        scale,
    })
}

impl TestKernel {
    pub fn h(&self, x: f64) -> f64 {
        let u = PI * self.scale * x;
        if u.abs() < 1e-4 {
            let u2 = u * u;
            return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 45.0;
        }
        let s = u.sin() / u;
        s * s
    }

    pub fn h_hat(&self, y: f64) -> f64 {
        (1.0 - y.abs() / self.scale).max(0.0) / self.scale
    }

    /// `ĥ` vanishes outside `(−R, R)`.
    pub fn support_radius(&self) -> f64 {
        self.scale
    }

    pub fn h0(&self) -> f64 {
        1.0
    }

    pub fn h_hat0(&self) -> f64 {
        1.0 / self.scale
    }

    /// `∫_{−a}^{a} ĥ`.
    fn h_hat_mass(&self, a: f64) -> f64 {
        let s = self.scale;
        let a = a.min(s);
        (2.0 * a - a * a / s) / s
    }

    /// `h(x)` written as `Σ_j c_j cos(b_j x) / x²` for large `x`.
    fn cos_terms(&self) -> [(f64, f64); 2] {
        let s = self.scale;
        let c = 1.0 / (2.0 * PI * PI * s * s);
        [(c, 0.0), (-c, 2.0 * PI * s)]
    }
}

/// `∫_L^∞ cos(bx)/x^n` (`want_sin = false`) or `∫_L^∞ sin(bx)/x^n`.
fn trig_tail(b: f64, n: u32, l: f64, want_sin: bool) -> f64 {
    if b == 0.0 {
        return if want_sin { 0.0 } else { oscillatory_tail(0.0, n, l).re };
    }
    let pick = |z: num_complex::Complex64| if want_sin { z.im } else { z.re };
    let needed = (4 * n + 21) as f64;
    if b.abs() * l > needed {
        return pick(oscillatory_tail(b, n, l));
    }
    // Integrate up to where the asymptotic expansion applies.
    let far = needed / b.abs();
    let panels = (((far - l) * b.abs()).ceil() as usize + ((far / l).ln().ceil() as usize) * 50).max(50);
    let f = |x: f64| if want_sin { (b * x).sin() } else { (b * x).cos() } / x.powi(n as i32);
    integrate(f, l, far, panels) + pick(oscillatory_tail(b, n, far))
}

/// Quadrature range for kernel integrals; the rest is handled analytically.
const KERNEL_CUTOFF: f64 = 200.0;

/// `ĥ(y)` by quadrature of `2∫_0^∞ h(x) cos(2πxy) dx`.
pub fn fourier_transform_numeric(kernel: &TestKernel, y: f64) -> f64 {
    let l = KERNEL_CUTOFF;
    let w = 2.0 * PI * y;
    let panels = ((l * (kernel.scale + y.abs()) * 4.0).ceil() as usize).max(400);
    let near = integrate(|x| kernel.h(x) * (w * x).cos(), 0.0, l, panels);
    // cos(a) cos(b) = (cos(a+b) + cos(a−b))/2
    let mut tail = 0.0;
    for (c, b) in kernel.cos_terms() {
        tail += 0.5 * c * (trig_tail(b + w, 2, l, false) + trig_tail(b - w, 2, l, false));
    }
    2.0 * (near + tail)
}

/// Symmetry types of low-lying zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryGroup {
    U,
    O,
    SOeven,
    SOodd,
    Sp,
}

impl SymmetryGroup {
    pub const ALL: [SymmetryGroup; 5] = [
        SymmetryGroup::U,
        SymmetryGroup::O,
        SymmetryGroup::SOeven,
        SymmetryGroup::SOodd,
        SymmetryGroup::Sp,
    ];

    /// `(c, atom)` with `W(x) = 1 + c · sin 2πx / 2πx` away from 0 and mass `atom` at 0.
    fn shape(self) -> (f64, f64) {
        match self {
            SymmetryGroup::U => (0.0, 0.0),
            SymmetryGroup::O => (0.0, 0.5),
            SymmetryGroup::SOeven => (1.0, 0.0),
            SymmetryGroup::SOodd => (-1.0, 1.0),
            SymmetryGroup::Sp => (-1.0, 0.0),
        }
    }
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetryGroup::U => "U",
            SymmetryGroup::O => "O",
            SymmetryGroup::SOeven => "SOeven",
            SymmetryGroup::SOodd => "SOodd",
            SymmetryGroup::Sp => "Sp",
        })
    }
}

impl FromStr for SymmetryGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymmetryGroup::ALL
            .into_iter()
            .find(|g| g.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown symmetry group {s:?} (U, O, SOeven, SOodd, Sp)")))
    }
}

fn sinc_2pi(x: f64) -> f64 {
    let u = 2.0 * PI * x;
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `(continuous part of W_G(x), mass of δ₀)`.
pub fn density_w(group: SymmetryGroup, x: f64) -> (f64, f64) {
    let (c, atom) = group.shape();
    (1.0 + c * sinc_2pi(x), atom)
}

/// `∫ W_G h` by quadrature on `[0, 200]`, analytic tails, plus the atom.
pub fn density_integral(group: SymmetryGroup, kernel: &TestKernel) -> f64 {
    let (c, atom) = group.shape();
    let l = KERNEL_CUTOFF;
    let panels = ((l * (kernel.scale + 1.0) * 4.0).ceil() as usize).max(400);
    let near = integrate(|x| density_w(group, x).0 * kernel.h(x), 0.0, l, panels);
    let mut tail = 0.0;
    for (a, b) in kernel.cos_terms() {
        tail += a * trig_tail(b, 2, l, false);
        if c != 0.0 {
            // cos(bx) sin(2πx) / (2π x³) = (sin((2π+b)x) + sin((2π−b)x)) / (4π x³)
            let w = 2.0 * PI;
            tail += c * a / (4.0 * PI) * (trig_tail(w + b, 3, l, true) + trig_tail(w - b, 3, l, true));
        }
    }
    2.0 * (near + tail) + atom * kernel.h0()
}

/// `ĥ(0) + atom · h(0) + c · ½∫_{−1}^{1} ĥ`, the Fourier-side value of [`density_integral`].
pub fn density_integral_closed(group: SymmetryGroup, kernel: &TestKernel) -> f64 {
    let (c, atom) = group.shape();
    kernel.h_hat0() + atom * kernel.h0() + c * 0.5 * kernel.h_hat_mass(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimeSumValue {
    pub value: f64,
    /// Primes `p` with `ν log p < R log c(f)` would need coefficients beyond those loaded.
    pub truncated: bool,
    pub prime_cutoff: f64,
    pub primes_used: usize,
}

/// `P^{(ν)}(f, h) = (2/log c) Σ_{p ∤ q} a_f(p^ν) log p / p^{ν/2} ĥ(ν log p / log c)`,
/// with `a_f(p²) = a_f(p)² − 1`.
pub fn p_nu(record: &NewformRecord, kernel: &TestKernel, nu: u32) -> Result<PrimeSumValue> {
    if !(nu == 1 || nu == 2) {
        return Err(Error::domain(format!("ν must be 1 or 2, got {nu}")));
    }
    let log_c = record.conductor().ln();
    let cutoff = (kernel.support_radius() * log_c / nu as f64).exp();
    let available = record.len() as f64;
    let limit = cutoff.min(available + 1.0);
    let mut acc = CompensatedSum::new();
    let mut used = 0;
    for p in primes_below(limit) {
        if record.level % p == 0 {
            continue;
        }
        let a = record.a(p as usize);
        let apnu = if nu == 1 { a } else { a * a - 1.0 };
        let lp = (p as f64).ln();
        acc.add(apnu * lp / (p as f64).powf(nu as f64 / 2.0) * kernel.h_hat(nu as f64 * lp / log_c));
        used += 1;
    }
    Ok(PrimeSumValue {
        value: 2.0 / log_c * acc.value(),
        truncated: cutoff > available + 1.0,
        prime_cutoff: cutoff,
        primes_used: used,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityValue {
    pub value: f64,
    pub zeros_used: usize,
    /// Rough size of the contribution of zeros above the scan height.
    pub unscanned_tail_estimate: f64,
}

/// `D(f, h) = Σ h(γ̃)` over scanned zeros, counting `±γ`.
pub fn one_level_density(zeros: &ZeroList, record: &NewformRecord, kernel: &TestKernel) -> DensityValue {
    let value = zeros
        .ordinates
        .iter()
        .map(|&g| 2.0 * kernel.h(lfun::rescale_zero(record, g)))
        .collect::<CompensatedSum>()
        .value();
    // Zeros have unit mean spacing after rescaling and h(x) ≤ 1/(πsx)².
    let top = lfun::rescale_zero(record, zeros.scan_height);
    DensityValue {
        value,
        zeros_used: zeros.ordinates.len(),
        unscanned_tail_estimate: 2.0 / (PI * PI * kernel.scale * kernel.scale * top.max(1e-300)),
    }
}

/// Prime-side prediction `ĥ(0) + ½h(0) − P^{(1)} − P^{(2)}` for `D(f, h)`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityPrediction {
    pub h_hat0: f64,
    pub half_h0: f64,
    pub p1: PrimeSumValue,
    pub p2: PrimeSumValue,
    pub value: f64,
}

pub fn density_prediction(record: &NewformRecord, kernel: &TestKernel) -> Result<DensityPrediction> {
    let p1 = p_nu(record, kernel, 1)?;
    let p2 = p_nu(record, kernel, 2)?;
    let h_hat0 = kernel.h_hat0();
    let half_h0 = 0.5 * kernel.h0();
    Ok(DensityPrediction {
        value: h_hat0 + half_h0 - p1.value - p2.value,
        h_hat0,
        half_h0,
        p1,
        p2,
    })
}

/// Both sides of the exact explicit formula for `Σ_γ h(γ̃)`, `γ̃ = γ log c / 2π`:
///
/// `(1/L) ∫ h(x) (2 log Q + 2 Re ψ(1/2 + κ + 2πix/L)) dx − (2/L) Σ_n Λ_f(n) n^{−1/2} ĥ(log n / L)`
///
/// with `L = log c(f)`, `Λ_f(p^ν) = (α_p^ν + β_p^ν) log p`.
#[derive(Debug, Clone, Serialize)]
pub struct WeilBalance {
    pub archimedean: f64,
    pub primes: f64,
    pub value: f64,
    pub prime_cutoff: f64,
    pub truncated: bool,
}

/// Quadrature range of the archimedean integral.
const ARCHIMEDEAN_CUTOFF: f64 = 2000.0;

pub fn weil_explicit_formula(record: &NewformRecord, kernel: &TestKernel) -> Result<WeilBalance> {
    let log_c = record.conductor().ln();
    let q_scale = (record.level as f64).sqrt() / (2.0 * PI);
    let kappa = (record.weight as f64 - 1.0) / 2.0;
    let s = kernel.scale;
    let x_max = ARCHIMEDEAN_CUTOFF;
    let weight = |x: f64| {
        let z = num_complex::Complex64::new(0.5 + kappa, 2.0 * PI * x / log_c);
        2.0 * (q_scale.ln() + digamma(z).re)
    };
    let panels = ((x_max * s * 2.0).ceil() as usize).max(400);
    let near = integrate(|x| kernel.h(x) * weight(x), 0.0, x_max, panels);
    // h ≈ 1/(2π²s²x²) on average and Re ψ(1/2 + κ + iy) ≈ log y.
    let tail = (q_scale.ln() + (2.0 * PI / log_c).ln() + x_max.ln() + 1.0) / (PI * PI * s * s * x_max);
    let archimedean = 2.0 / log_c * (near + tail);

    let cutoff = (kernel.support_radius() * log_c).exp();
    let available = record.len() as f64;
    let mut acc = CompensatedSum::new();
    for p in primes_below(cutoff.min(available + 1.0)) {
        let a = record.a(p as usize);
        let ramified = record.level % p == 0;
        let lp = (p as f64).ln();
        // α^ν + β^ν by the recurrence s_ν = a s_{ν−1} − s_{ν−2}; α = a, β = 0 when p | q.
        let (mut prev, mut cur) = if ramified { (0.0, a) } else { (2.0, a) };
        let mut nu = 1;
        while (nu as f64) * lp < kernel.support_radius() * log_c {
            acc.add(cur * lp / (p as f64).powf(nu as f64 / 2.0) * kernel.h_hat(nu as f64 * lp / log_c));
            let next = if ramified { a * cur } else { a * cur - prev };
            prev = cur;
            cur = next;
            nu += 1;
        }
    }
    let primes = -2.0 / log_c * acc.value();
    Ok(WeilBalance {
        archimedean,
        primes,
        value: archimedean + primes,
        prime_cutoff: cutoff,
        truncated: cutoff > available + 1.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplicitFormulaResidual {
    pub residual: f64,
    pub zero_term: f64,
    pub central_value: f64,
    pub p_sum: f64,
    pub x: f64,
    pub zeros_used: usize,
    pub scan_height: f64,
}

/// `log L(1/2, f) − P(f, x) + ½ log log x`, with `Σ_{±γ} log(1 + (γ log x)^{−2})`
/// over the zeros found up to `scan_height`.
pub fn explicit_formula_residual(record: &NewformRecord, x: f64, scan_height: f64) -> Result<ExplicitFormulaResidual> {
    if !(x > 2.0 && x <= record.conductor()) {
        return Err(Error::domain(format!("x must lie in (2, c(f)], got {x}")));
    }
    let cv = lfun::central_value(record)?;
    if cv.vanishing || !(cv.value > 0.0) {
        return Err(Error::domain(format!(
            "log L(1/2) undefined: L(1/2, {}) = {}",
            record.form, cv.value
        )));
    }
    let zeros = lfun::find_zeros(record, scan_height)?;
    let lx = x.ln();
    let zero_term = zeros
        .ordinates
        .iter()
        .map(|&g| 2.0 * (1.0 / (g * lx).powi(2)).ln_1p())
        .collect::<CompensatedSum>()
        .value();
    let p = p_sum(record, x)?;
    Ok(ExplicitFormulaResidual {
        residual: cv.value.ln() - p + 0.5 * lx.ln(),
        zero_term,
        central_value: cv.value,
        p_sum: p,
        x,
        zeros_used: zeros.ordinates.len(),
        scan_height,
    })
}

/// `M_ℓ = ℓ!/(2^{ℓ/2} (ℓ/2)!)` for even `ℓ`, 0 for odd `ℓ`.
pub fn gaussian_moment(l: u32) -> Result<u128> {
    if l % 2 == 1 {
        return Ok(0);
    }
    if l > 60 {
        return Err(Error::Overflow(format!("Gaussian moment of order {l}")));
    }
    // (ℓ − 1)!!
    Ok((1..l as u128).step_by(2).product())
}

/// Number of perfect matchings of `k` points, `k!/((k/2)! 2^{k/2})`.
pub fn pairing_count(k: u32) -> Result<u128> {
    if k % 2 == 1 {
        return Err(Error::domain(format!("pairings need an even number of points, got {k}")));
    }
    if k > 32 {
        return Err(Error::Overflow(format!("pairing count for k = {k}")));
    }
    let fact = |n: u32| (1..=n as u128).product::<u128>();
    Ok(fact(k) / (fact(k / 2) << (k / 2)))
}

/// `∫ x^ℓ e^{−x²/2} dx / √(2π)` by quadrature on `[−40, 40]`.
pub fn gaussian_moment_numeric(l: u32) -> f64 {
    let norm = (2.0 * PI).sqrt();
    integrate(|x| x.powi(l as i32) * (-0.5 * x * x).exp(), -40.0, 40.0, 400) / norm
}

/// Standard normal mass of `(α, β)`; infinite endpoints allowed.
pub fn gaussian_mass(alpha: f64, beta: f64) -> Result<f64> {
    if alpha.is_nan() || beta.is_nan() || !(alpha < beta) {
        return Err(Error::domain(format!("need α < β, got ({alpha}, {beta})")));
    }
    let upper = normal_upper;
    // Subtract the smaller tails to keep precision far out.
    Ok(if alpha >= 0.0 {
        upper(alpha) - upper(beta)
    } else if beta <= 0.0 {
        upper(-beta) - upper(-alpha)
    } else {
        1.0 - upper(beta) - upper(-alpha)
    })
}

/// `P(X > t)` for a standard normal `X`, as `Γ(1/2, t²/2) / (2√π)` for `t > 0`.
fn normal_upper(t: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == 0.0 {
        return 0.5;
    }
    if t < 0.0 {
        return 1.0 - normal_upper(-t);
    }
    let z = num_complex::Complex64::new(0.5 * t * t, 0.0);
    let g = upper_gamma(num_complex::Complex64::new(0.5, 0.0), z).expect("Γ(1/2, z) for z > 0");
    0.5 * g.re / PI.sqrt()
}

fn normal_cdf(x: f64) -> f64 {
    normal_upper(-x)
}

/// A weighted observation; vanishing samples stand for `log L(1/2) = −∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Sample {
    pub value: f64,
    pub weight: f64,
    pub vanishing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    pub mass: f64,
    pub ks_distance: f64,
    pub gaussian_mass: f64,
    pub samples: usize,
    pub total_weight: f64,
    pub vanishing_samples: usize,
    pub vanishing_weight: f64,
}

/// Weighted mass in `(α, β)` and Kolmogorov–Smirnov distance to `N(0, 1)`.
///
/// Vanishing samples sit at `−∞`: they count towards the mass only when `α = −∞`
/// and lift the empirical CDF everywhere.
pub fn empirical_distribution(samples: &[Sample], alpha: f64, beta: f64) -> Result<DistributionReport> {
    let reference = gaussian_mass(alpha, beta)?;
    for s in samples {
        if !(s.weight >= 0.0 && s.weight.is_finite()) || (!s.vanishing && !s.value.is_finite()) {
            return Err(Error::domain(format!("bad sample {s:?}")));
        }
    }
    let total: f64 = samples.iter().map(|s| s.weight).collect::<CompensatedSum>().value();
    if !(total > 0.0) {
        return Err(Error::domain("all sample weights are zero"));
    }
    let vanishing: Vec<&Sample> = samples.iter().filter(|s| s.vanishing).collect();
    let vanishing_weight: f64 = vanishing.iter().map(|s| s.weight).sum();
    let inside: f64 = samples
        .iter()
        .filter(|s| {
            if s.vanishing {
                alpha == f64::NEG_INFINITY
            } else {
                s.value > alpha && s.value < beta
            }
        })
        .map(|s| s.weight)
        .collect::<CompensatedSum>()
        .value();

    let mut finite: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| !s.vanishing)
        .map(|s| (s.value, s.weight))
        .collect();
    finite.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = vanishing_weight / total;
    let mut ks: f64 = cum;
    let mut i = 0;
    while i < finite.len() {
        let v = finite[i].0;
        let before = cum;
        while i < finite.len() && finite[i].0 == v {
            cum += finite[i].1 / total;
            i += 1;
        }
        let phi = normal_cdf(v);
        ks = ks.max((before - phi).abs()).max((cum - phi).abs());
    }
    Ok(DistributionReport {
        mass: inside / total,
        ks_distance: ks,
        gaussian_mass: reference,
        samples: samples.len(),
        total_weight: total,
        vanishing_samples: vanishing.len(),
        vanishing_weight,
    })
}

/// Largest number of ordered prime tuples `harmonic_moment` will enumerate.
pub const ENUMERATION_BUDGET: f64 = 1e7;
pub const MAX_MOMENT: u32 = 4;

/// Multiplicity pattern of the primes in a tuple `(p_1, …, p_ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// Every prime appears exactly twice.
    A,
    /// Every prime appears at least twice, some more often.
    B,
    /// Some but not all primes appear once.
    C,
    /// All primes are distinct.
    D,
}

fn classify(alphas: &[u32]) -> Case {
    let ones = alphas.iter().filter(|&&a| a == 1).count();
    if ones == alphas.len() {
        Case::D
    } else if ones > 0 {
        Case::C
    } else if alphas.iter().all(|&a| a == 2) {
        Case::A
    } else {
        Case::B
    }
}

/// `a(p)^α = Σ_β c_β a(p^β)` for `p ∤ q`.
fn hecke_power(alpha: u32) -> &'static [(u32, f64)] {
    match alpha {
        1 => &[(1, 1.0)],
        2 => &[(2, 1.0), (0, 1.0)],
        3 => &[(3, 1.0), (1, 2.0)],
        4 => &[(4, 1.0), (2, 3.0), (0, 2.0)],
        _ => unreachable!("powers above 4 are rejected earlier"),
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CaseSplit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CaseSplit {
    fn slot(&mut self, case: Case) -> &mut f64 {
        match case {
            Case::A => &mut self.a,
            Case::B => &mut self.b,
            Case::C => &mut self.c,
            Case::D => &mut self.d,
        }
    }

    pub fn get(&self, case: Case) -> f64 {
        match case {
            Case::A => self.a,
            Case::B => self.b,
            Case::C => self.c,
            Case::D => self.d,
        }
    }

    pub fn total(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    fn scaled(&self, f: f64) -> CaseSplit {
        CaseSplit {
            a: self.a * f,
            b: self.b * f,
            c: self.c * f,
            d: self.d * f,
        }
    }
}

/// One level's share of the harmonic moment.
#[derive(Debug, Clone, Serialize)]
pub struct MomentLevel {
    pub q: u64,
    pub weight: f64,
    /// `Σ_f^h P(f, x)^ℓ` at this level.
    pub value: f64,
    pub tail_bound: f64,
    /// Coefficient of `Δ*_q(1, 1)` in the expansion.
    pub diagonal_coefficient: f64,
    pub diagonal_delta: f64,
    pub distinct_indices: usize,
    pub max_c: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub l: u32,
    pub x: f64,
    pub family: FamilySpec,
    pub truncation: Truncation,
    /// `Σ_q Ψ(q/Q) Σ_f^h P(f, x)^ℓ`.
    pub weighted_sum: f64,
    pub weighted_tail: f64,
    /// `N(Q)`.
    pub family_count: f64,
    pub family_count_tail: f64,
    /// `weighted_sum / N(Q)`.
    pub empirical: f64,
    /// Bound on `|empirical − exact|` from the trace tails.
    pub tail_bound: f64,
    /// `M_ℓ (log log x)^{ℓ/2}`.
    pub gaussian_reference: f64,
    /// Normalized like `empirical`; sums to it.
    pub cases: CaseSplit,
    /// Un-normalized `Δ*_q(1, 1)` terms, `Σ_q Ψ(q/Q) coefficient · Δ*_q(1, 1)`.
    pub diagonal_weighted: f64,
    pub levels: Vec<MomentLevel>,
}

/// Nondecreasing index tuples of length `l` into `0..n`, grouped as `(index, multiplicity)`.
fn multisets(n: usize, l: u32, mut visit: impl FnMut(&[(usize, u32)])) {
    fn rec(n: usize, left: u32, start: usize, cur: &mut Vec<(usize, u32)>, visit: &mut dyn FnMut(&[(usize, u32)])) {
        if left == 0 {
            visit(cur);
            return;
        }
        for i in start..n {
            for mult in (1..=left).rev() {
                cur.push((i, mult));
                rec(n, left - mult, i + 1, cur, visit);
                cur.pop();
            }
        }
    }
    rec(n, l, 0, &mut Vec::new(), &mut visit);
}

/// `ℓ! / Π α_i!`: ordered tuples realizing a multiset.
fn multinomial(l: u32, alphas: &[u32]) -> f64 {
    let fact = |n: u32| (1..=n).product::<u32>() as f64;
    fact(l) / alphas.iter().map(|&a| fact(a)).product::<f64>()
}

/// Expansion of `P(f, x)^ℓ` at level `q` as `Σ_M coefficient_case(M) a_f(M)`.
fn expand_power(primes: &[u64], l: u32) -> Result<BTreeMap<u64, CaseSplit>> {
    let mut sums: BTreeMap<u64, [CompensatedSum; 4]> = BTreeMap::new();
    let mut failure = None;
    multisets(primes.len(), l, |pattern| {
        let alphas: Vec<u32> = pattern.iter().map(|&(_, a)| a).collect();
        let case = classify(&alphas);
        let mut base = multinomial(l, &alphas);
        for &(i, a) in pattern {
            base /= (primes[i] as f64).powf(a as f64 / 2.0);
        }
        // Product over the primes of the Hecke expansions.
        let mut terms: Vec<(u64, f64)> = vec![(1, base)];
        for &(i, a) in pattern {
            let p = primes[i];
            let mut next = Vec::with_capacity(terms.len() * 3);
            for &(m, c) in &terms {
                for &(beta, h) in hecke_power(a) {
                    match p.checked_pow(beta).and_then(|pb| pb.checked_mul(m)) {
                        Some(mm) => next.push((mm, c * h)),
                        None => failure = Some(Error::Overflow(format!("index {m}·{p}^{beta}"))),
                    }
                }
            }
            terms = next;
        }
        for (m, c) in terms {
            sums.entry(m).or_default()[case as usize].add(c);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(sums
        .into_iter()
        .map(|(m, [a, b, c, d])| {
            let split = CaseSplit {
                a: a.value(),
                b: b.value(),
                c: c.value(),
                d: d.value(),
            };
            (m, split)
        })
        .collect())
}

/// Harmonic family average of `P(f, x)^ℓ` through the Petersson formula.
///
/// Each power is expanded over prime multisets, reduced with the Hecke relations
/// and multiplicativity into `Σ_M c(M) a_f(M)`, and `Σ_f^h a_f(M)` is `Δ*_q(M, 1)`.
pub fn harmonic_moment(spec: &FamilySpec, l: u32, x: f64, truncation: Truncation) -> Result<MomentReport> {
    if !(1..=MAX_MOMENT).contains(&l) {
        return Err(Error::domain(format!("moment order must be in 1..={MAX_MOMENT}, got {l}")));
    }
    if !(x >= 2.0) {
        return Err(Error::domain(format!("x must be at least 2, got {x}")));
    }
    let all_primes = primes_below(x);
    let work = (all_primes.len() as f64).powi(l as i32);
    if work > ENUMERATION_BUDGET {
        return Err(Error::Budget(format!(
            "π(x)^ℓ = {work:.3e} prime tuples exceeds {ENUMERATION_BUDGET:e}; lower x or ℓ"
        )));
    }
    let levels = spec.weighted_levels()?;
    if levels.is_empty() {
        return Err(Error::domain("family has no admitted levels"));
    }
    let per_level_truncation = match truncation {
        Truncation::TargetTail(t) => Truncation::TargetTail(t / levels.len() as f64),
        other => other,
    };

    let results: Vec<(MomentLevel, CaseSplit)> = levels
        .par_iter()
        .map(|&(q, weight)| {
            let primes: Vec<u64> = all_primes.iter().copied().filter(|&p| gcd(p, q) == 1).collect();
            let expansion = expand_power(&primes, l)?;
            let pairs: Vec<(u64, u64)> = expansion.keys().map(|&m| (m, 1)).collect();
            let target = match per_level_truncation {
                // Spread the level's budget according to the size of each coefficient.
                Truncation::TargetTail(t) => {
                    let mass: f64 = expansion.values().map(|c| c.total().abs()).sum();
                    Truncation::TargetTail(t / mass.max(1.0))
                }
                other => other,
            };
            let deltas = trace::delta_new_batch(&pairs, q, spec.k, target)?;
            let mut cases = CaseSplit::default();
            let mut value = CompensatedSum::new();
            let mut tail = 0.0;
            let mut max_c = 0;
            for ((&m, coeff), est) in expansion.iter().zip(&deltas) {
                debug_assert_eq!(est.m, m);
                for case in [Case::A, Case::B, Case::C, Case::D] {
                    *cases.slot(case) += coeff.get(case) * est.value;
                }
                value.add(coeff.total() * est.value);
                tail += coeff.total().abs() * est.tail_bound;
                max_c = max_c.max(est.c_max);
            }
            let diagonal_coefficient = expansion.get(&1).map_or(0.0, |c| c.total());
            let diagonal_delta = expansion
                .keys()
                .position(|&m| m == 1)
                .map_or(0.0, |i| deltas[i].value);
            Ok((
                MomentLevel {
                    q,
                    weight,
                    value: value.value(),
                    tail_bound: tail,
                    diagonal_coefficient,
                    diagonal_delta,
                    distinct_indices: pairs.len(),
                    max_c,
                },
                cases,
            ))
        })
        .collect::<Result<_>>()?;

    let count = trace::family_count(spec, truncation)?;
    let mut weighted = CompensatedSum::new();
    let mut weighted_tail = 0.0;
    let mut diagonal = CompensatedSum::new();
    let mut cases = CaseSplit::default();
    for (lvl, c) in &results {
        weighted.add(lvl.weight * lvl.value);
        weighted_tail += lvl.weight * lvl.tail_bound;
        diagonal.add(lvl.weight * lvl.diagonal_coefficient * lvl.diagonal_delta);
        for case in [Case::A, Case::B, Case::C, Case::D] {
            *cases.slot(case) += lvl.weight * c.get(case);
        }
    }
    let weighted_sum = weighted.value();
    let n = count.value;
    if !(n > 0.0) {
        return Err(Error::domain(format!("family count N(Q) = {n} is not positive")));
    }
    // |S/N − S'/N'| ≤ (|S| ε_N / N + ε_S) / (N − ε_N).
    let tail_bound = if count.tail_bound < n {
        (weighted_sum.abs() * count.tail_bound / n + weighted_tail) / (n - count.tail_bound)
    } else {
        f64::INFINITY
    };
    let m_l = gaussian_moment(l)? as f64;
    Ok(MomentReport {
        l,
        x,
        family: spec.clone(),
        truncation,
        weighted_sum,
        weighted_tail,
        family_count: n,
        family_count_tail: count.tail_bound,
        empirical: weighted_sum / n,
        tail_bound,
        gaussian_reference: m_l * x.ln().ln().max(0.0).powf(l as f64 / 2.0),
        cases: cases.scaled(1.0 / n),
        diagonal_weighted: diagonal.value(),
        levels: results.into_iter().map(|(lvl, _)| lvl).collect(),
    })
}
