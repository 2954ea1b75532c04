//! The acceptance suite, shared by `lvalue-lab verify` and `tests/acceptance.rs`.
//!
//! Every criterion is a list of checks `measured ≤ bound`; the criterion passes when all
//! checks do, and reports the check closest to (or furthest past) its bound.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{divisor_count, factorize, gcd, mertens_sum_coprime};
use crate::error::Result;
use crate::forms::{hecke_check, CatalogForm, NewformRecord};
use crate::kloosterman::{kloosterman, kloosterman_fast, weil_bound};
use crate::stats::{
    density_integral, explicit_formula_residual, fejer_kernel, gaussian_moment,
    gaussian_moment_numeric, harmonic_moment, p_sum, pairing_count, SymmetryGroup,
};
use crate::trace::{self, delta_full_batch, FamilySpec, LevelFilter, Truncation};
use crate::lfun;

/// Criteria run by `verify --quick`: each finishes in seconds.
pub const QUICK: [u32; 6] = [4, 5, 6, 7, 9, 10];

/// Number of criteria in the full suite.
pub const COUNT: u32 = 11;

#[derive(Debug, Clone, Serialize)]
pub struct Options {
    /// `c_max` for the weight-2 part of criterion 1.
    pub vanishing_c_max: u64,
    /// `c_max` for the moment-pipeline oracle (criterion 8).
    pub moment_c_max: u64,
    #[serde(skip)]
    pub cache: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            vanishing_c_max: 200_000,
            moment_c_max: 1_000_000,
            cache: None,
        }
    }
}

/// One `measured ≤ bound` comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
}

impl Check {
    fn new(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.bound
    }

    fn severity(&self) -> f64 {
        if self.measured.is_nan() {
            f64::INFINITY
        } else if self.bound > 0.0 {
            self.measured / self.bound
        } else if self.measured <= self.bound {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    /// The reported (worst) check.
    pub measured: f64,
    pub bound: f64,
    pub worst: String,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl Criterion {
    fn from_checks(id: u32, checks: Vec<Check>) -> Self {
        // First of the worst checks.
        let worst = checks
            .iter()
            .rev()
            .max_by(|a, b| a.severity().total_cmp(&b.severity()))
            .cloned()
            .unwrap_or_else(|| Check::new("no checks", f64::NAN, 0.0));
        Self {
            id,
            name: name(id),
            passed: !checks.is_empty() && checks.iter().all(Check::passed),
            measured: worst.measured,
            bound: worst.bound,
            worst: worst.label,
            checks,
            error: None,
        }
    }

    fn failed(id: u32, error: String) -> Self {
        Self {
            id,
            name: name(id),
            passed: false,
            measured: f64::NAN,
            bound: f64::NAN,
            worst: String::new(),
            checks: Vec::new(),
            error: Some(error),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} measured={:.6e} bound={:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        )
    }
}

pub fn name(id: u32) -> &'static str {
    match id {
        1 => "petersson_vanishing",
        2 => "rank_one_factorization",
        3 => "diagonal_limit",
        4 => "hecke_deligne",
        5 => "lvalue_oracle",
        6 => "zeros",
        7 => "kernels_and_moments",
        8 => "moment_pipeline_oracle",
        9 => "case_a_diagonal",
        10 => "explicit_formula_residual",
        11 => "kloosterman_properties",
        _ => "unknown",
    }
}

/// Runs one criterion; library errors become a failing criterion carrying the message.
pub fn run(id: u32, options: &Options) -> Criterion {
    let checks = match id {
        1 => petersson_vanishing(options),
        2 => rank_one(),
        3 => diagonal_limit(),
        4 => hecke_deligne(options),
        5 => lvalue_oracle(options),
        6 => zeros(options),
        7 => kernels_and_moments(),
        8 => moment_pipeline(options),
        9 => case_a_diagonal(),
        10 => explicit_residual(options),
        11 => kloosterman_properties(),
        _ => return Criterion::failed(id, format!("no criterion {id}")),
    };
    match checks {
        Ok(c) => Criterion::from_checks(id, c),
        Err(e) => Criterion::failed(id, e.to_string()),
    }
}

/// Criteria `ids` in order, reporting each through `report` as soon as it finishes.
pub fn run_many(ids: &[u32], options: &Options, mut report: impl FnMut(&Criterion)) -> Vec<Criterion> {
    ids.iter()
        .map(|&id| {
            let c = run(id, options);
            report(&c);
            c
        })
        .collect()
}

pub fn all_ids() -> Vec<u32> {
    (1..=COUNT).collect()
}

fn load(form: CatalogForm, n: usize, options: &Options) -> Result<NewformRecord> {
    NewformRecord::load(form, n, options.cache.as_deref())
}

/// Record long enough for `Λ` up to height `t_max` and for prime sums below `x`.
fn load_for(form: CatalogForm, t_max: f64, x: f64, options: &Options) -> Result<NewformRecord> {
    let probe = load(form, 1, options)?;
    let n = lfun::required_length(&probe, t_max)?.max(x.ceil() as usize + 1);
    load(form, n, options)
}

fn petersson_vanishing(options: &Options) -> Result<Vec<Check>> {
    let pairs = [(1, 1), (1, 2), (2, 3)];
    let mut checks = Vec::new();
    for k in [4, 6, 8, 10] {
        for est in delta_full_batch(&pairs, 1, k, Truncation::CMax(10_000))? {
            checks.push(Check::new(
                format!("k={k} (m,n)=({},{}) c_max={}", est.m, est.n, est.c_max),
                est.value.abs(),
                1e-8 + est.tail_bound,
            ));
        }
    }
    let c_max = options.vanishing_c_max;
    for est in delta_full_batch(&pairs, 1, 2, Truncation::CMax(c_max))? {
        checks.push(Check::new(
            format!("k=2 (m,n)=({},{}) c_max={c_max}", est.m, est.n),
            est.value.abs(),
            5e-3,
        ));
    }
    Ok(checks)
}

fn rank_one() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (form, c_max, tol) in [(CatalogForm::Delta, 10_000, 1e-6), (CatalogForm::F11, 200_000, 1e-3)] {
        let rec = NewformRecord::load(form, 50, None)?;
        let pairs: Vec<(u64, u64)> = (1..=6).flat_map(|m| (1..=6).map(move |n| (m, n))).collect();
        let est = delta_full_batch(&pairs, rec.level, rec.weight, Truncation::CMax(c_max))?;
        let r0 = est[0].value;
        for e in &est {
            let denom = rec.a(e.m as usize) * rec.a(e.n as usize);
            if denom == 0.0 {
                continue;
            }
            let ratio = e.value / denom;
            checks.push(Check::new(
                format!("{form} (m,n)=({},{})", e.m, e.n),
                ((ratio - r0) / r0).abs(),
                tol,
            ));
        }
    }
    Ok(checks)
}

/// `c_max` for criterion 3. At weight 2 no certified tail reaches 1e-6, so the value is
/// reported at a fixed truncation where it is stable to well below the tolerance.
pub const DIAGONAL_C_MAX: u64 = 10_000_000;

fn diagonal_limit() -> Result<Vec<Check>> {
    let est = delta_full_batch(&[(1, 1), (1, 2)], 10_007, 2, Truncation::CMax(DIAGONAL_C_MAX))?;
    Ok(vec![
        Check::new("|Δ(1,1) − 1|", (est[0].value - 1.0).abs(), 1e-6),
        Check::new("|Δ(1,2)|", est[1].value.abs(), 1e-6),
    ])
}

fn hecke_deligne(options: &Options) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for form in CatalogForm::ALL {
        let rec = load(form, 5000, options)?;
        let report = hecke_check(&rec, 5000)?;
        checks.push(Check::new(format!("{form} violations"), report.violations.len() as f64, 0.0));
        checks.push(Check::new(format!("{form} max |a(p)|"), report.max_abs_ap, 2.0));
    }
    Ok(checks)
}

fn lvalue_oracle(options: &Options) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let f11 = load_for(CatalogForm::F11, 40.0, 0.0, options)?;
    let mut oracle = crate::sum::CompensatedSum::new();
    for n in 1..=400 {
        oracle.add(f11.expansion.c(n) as f64 / n as f64 * (-2.0 * PI * n as f64 / 11f64.sqrt()).exp());
    }
    let cv = lfun::central_value(&f11)?;
    checks.push(Check::new("f11 L(1/2) vs theta series", (cv.value - 2.0 * oracle.value()).abs(), 1e-8));
    for form in CatalogForm::ALL {
        let rec = load_for(form, 40.0, 0.0, options)?;
        let eps = lfun::root_number(&rec)? as f64;
        let mut worst: f64 = 0.0;
        for sigma in [-0.4, 0.0, 0.3, 0.8, 1.4] {
            for t in [-20.0, -3.0, 0.0, 7.5, 40.0] {
                let s = Complex64::new(sigma, t);
                let a = lfun::completed_lambda(&rec, s)?;
                let b = lfun::completed_lambda(&rec, 1.0 - s)?;
                worst = worst.max((a - b * eps).norm() / a.norm().max(b.norm()));
            }
        }
        checks.push(Check::new(format!("{form} functional equation"), worst, 1e-10));
        if form != CatalogForm::F5 {
            checks.push(Check::new(format!("{form} |ε − 1|"), (eps - 1.0).abs(), 0.0));
        }
    }
    Ok(checks)
}

fn zeros(options: &Options) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for form in CatalogForm::ALL {
        let rec = load_for(form, 30.0, 0.0, options)?;
        let z = lfun::find_zeros(&rec, 30.0)?;
        if form == CatalogForm::Delta {
            let first = z.ordinates.first().copied().unwrap_or(f64::NAN);
            checks.push(Check::new("Δ first zero distance from 9.25", (first - 9.25).abs(), 0.25));
            let width = z.brackets.first().map_or(f64::NAN, |(a, b)| b - a);
            checks.push(Check::new("Δ first bracket width", width, 1e-6));
        }
        let predicted = lfun::zero_count_prediction(&rec, 30.0);
        checks.push(Check::new(
            format!("{form} zero count {} vs {predicted:.3}", z.ordinates.len()),
            (z.ordinates.len() as f64 - predicted).abs(),
            3.0,
        ));
    }
    Ok(checks)
}

fn kernels_and_moments() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let kernel = fejer_kernel(4.0)?;
    checks.push(Check::new(
        "∫ W_O h − 3/4",
        (density_integral(SymmetryGroup::O, &kernel) - 0.75).abs(),
        1e-10,
    ));
    for l in (0..=12).step_by(2) {
        let diff = gaussian_moment(l)?.abs_diff(pairing_count(l)?);
        checks.push(Check::new(format!("M_{l} − pairings"), diff as f64, 0.0));
    }
    for l in 0..=10 {
        let exact = gaussian_moment(l)? as f64;
        let numeric = gaussian_moment_numeric(l);
        let err = if exact == 0.0 { numeric.abs() } else { ((numeric - exact) / exact).abs() };
        checks.push(Check::new(format!("M_{l} quadrature"), err, 1e-9));
    }
    Ok(checks)
}

/// Family consisting of level 11 alone, at the peak `Ψ(3/2) = 1`.
pub fn dim_one_family() -> FamilySpec {
    FamilySpec::new(22.0 / 3.0, 2).with_levels(LevelFilter::Explicit(vec![11]))
}

fn moment_pipeline(options: &Options) -> Result<Vec<Check>> {
    let x = 100.0;
    let c_max = options.moment_c_max;
    let f11 = load(CatalogForm::F11, 200, options)?;
    let p = p_sum(&f11, x)?;
    let w = trace::delta_new_truncated(1, 1, 11, 2, c_max)?;
    let mut checks = Vec::new();
    for l in [1, 2] {
        let r = harmonic_moment(&dim_one_family(), l, x, Truncation::CMax(c_max))?;
        let oracle = w.value * p.powi(l as i32);
        let discrepancy = (r.weighted_sum - oracle).abs();
        let tails = r.weighted_tail + w.tail_bound * p.abs().powi(l as i32);
        checks.push(Check::new(format!("l={l} c_max={c_max} within tails"), discrepancy, tails + 1e-3));
        checks.push(Check::new(format!("l={l} c_max={c_max} raw discrepancy"), discrepancy, 1e-3));
    }
    Ok(checks)
}

fn case_a_diagonal() -> Result<Vec<Check>> {
    let (x, c_max) = (50.0, 5_000);
    let spec = FamilySpec::new(30.0, 2).with_levels(LevelFilter::Prime);
    let r = harmonic_moment(&spec, 2, x, Truncation::CMax(c_max))?;
    let mut checks = Vec::new();
    let mut expected = crate::sum::CompensatedSum::new();
    let mut tails = 0.0;
    for lvl in &r.levels {
        let mertens = mertens_sum_coprime(x, lvl.q);
        checks.push(Check::new(
            format!("q={} coefficient vs Mertens sum (exact)", lvl.q),
            (lvl.diagonal_coefficient - mertens).abs(),
            0.0,
        ));
        let d = trace::delta_new_truncated(1, 1, lvl.q, 2, c_max)?;
        expected.add(lvl.weight * mertens * d.value);
        tails += lvl.weight * mertens * d.tail_bound;
    }
    checks.push(Check::new(
        "weighted diagonal vs Σ Ψ Σ 1/p Δ*(1,1)",
        (r.diagonal_weighted - expected.value()).abs(),
        tails + 1e-12 * expected.value().abs(),
    ));
    Ok(checks)
}

fn explicit_residual(options: &Options) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for form in [CatalogForm::Delta, CatalogForm::F11] {
        let probe = load(form, 1, options)?;
        let c = probe.conductor();
        let rec = load_for(form, 30.0, c, options)?;
        let x = c;
        let r = explicit_formula_residual(&rec, x, 30.0)?;
        let band = 10.0 * (c.ln() / x.ln() + r.zero_term);
        let measured = if r.residual.is_finite() { r.residual.abs() } else { f64::INFINITY };
        checks.push(Check::new(format!("{form} at x = c(f) = {c}"), measured, band));
    }
    Ok(checks)
}

fn kloosterman_properties() -> Result<Vec<Check>> {
    let (mut weil, mut symmetry, mut paths) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for c in 1..=5000u64 {
        let f = factorize(c)?;
        let d = divisor_count(c)? as f64;
        for m in 1..=10u64 {
            for n in 1..=10u64 {
                let s = kloosterman_fast(m, n, c, &f)?;
                if n >= m {
                    let t = kloosterman_fast(n, m, c, &f)?;
                    symmetry = symmetry.max((s - t).abs());
                    let bound = d * (gcd(gcd(m, n), c) as f64).sqrt() * (c as f64).sqrt();
                    debug_assert_eq!(weil_bound(m, n, c)?, bound);
                    weil = weil.max(s.abs() / bound);
                }
                if c <= 2000 {
                    paths = paths.max((kloosterman(m, n, c)? - s).abs());
                }
            }
        }
    }
    Ok(vec![
        Check::new("max |S| / Weil bound", weil, 1.0 + 1e-12),
        Check::new("max |S(m,n) − S(n,m)|", symmetry, 1e-9),
        Check::new("max |fast − direct|, c ≤ 2000", paths, 1e-10),
    ])
}
