//! Exact q-expansions of the catalog newforms as eta products.
//!
//! `η(z) = q^{1/24} Π_{m ≥ 1} (1 − q^m)`. The products are built from the sparse
//! expansions `Π(1 − q^m) = Σ_k (−1)^k q^{k(3k−1)/2}` (pentagonal numbers) and
//! `Π(1 − q^m)^3 = Σ_{k ≥ 0} (−1)^k (2k+1) q^{k(k+1)/2}` (Jacobi), so every
//! factor costs one dense-by-sparse pass.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{self, gcd};
use crate::error::{Error, Result};

/// Largest expansion length accepted by [`eta_product`].
pub const MAX_LENGTH: usize = 1_000_000;

/// Environment variable naming the coefficient cache directory.
pub const CACHE_ENV: &str = "LVALUE_LAB_CACHE";

/// Integer Fourier coefficients `c(1), …, c(N)` of a cusp form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QExpansion {
    pub level: u64,
    pub weight: u32,
    /// `coefficients[i] = c(i + 1)`.
    pub coefficients: Vec<i128>,
}

impl QExpansion {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `c(n)` for `1 ≤ n ≤ len`.
    pub fn c(&self, n: usize) -> i128 {
        self.coefficients[n - 1]
    }

    /// `a(n) = c(n) / n^{(k−1)/2}`.
    pub fn normalized(&self, n: usize) -> f64 {
        let c = self.c(n);
        if n == 1 {
            return c as f64;
        }
        c as f64 / (n as f64).powf((self.weight as f64 - 1.0) / 2.0)
    }
}

/// A sparse power series `Σ coef · q^offset`, offsets ascending from 0.
struct Sparse {
    terms: Vec<(usize, i64)>,
    abs_sum: u128,
}

impl Sparse {
    fn pentagonal(dilation: usize, len: usize) -> Self {
        let mut terms = vec![(0usize, 1i64)];
        for k in 1usize.. {
            let a = k * (3 * k - 1) / 2 * dilation;
            if a >= len {
                break;
            }
            let sign = if k % 2 == 0 { 1 } else { -1 };
            terms.push((a, sign));
            let b = k * (3 * k + 1) / 2 * dilation;
            if b < len {
                terms.push((b, sign));
            }
        }
        terms.sort_unstable();
        Self::from_terms(terms)
    }

    fn jacobi(dilation: usize, len: usize) -> Self {
        let mut terms = Vec::new();
        for k in 0usize.. {
            let a = k * (k + 1) / 2 * dilation;
            if a >= len {
                break;
            }
            let v = (2 * k + 1) as i64;
            terms.push((a, if k % 2 == 0 { v } else { -v }));
        }
        Self::from_terms(terms)
    }

    fn from_terms(terms: Vec<(usize, i64)>) -> Self {
        let abs_sum = terms.iter().map(|t| t.1.unsigned_abs() as u128).sum();
        Self { terms, abs_sum }
    }
}

fn max_abs(series: &[i128]) -> u128 {
    series.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

const CHUNK: usize = 4096;

/// `series · factor`, truncated to the same length.
fn multiply(series: &[i128], factor: &Sparse) -> Result<Vec<i128>> {
    // Unchecked arithmetic is safe when the crude bound fits; otherwise every step is checked.
    let safe = max_abs(series)
        .checked_mul(factor.abs_sum)
        .is_some_and(|b| b <= i128::MAX as u128);
    let mut out = vec![0i128; series.len()];
    let overflowed = std::sync::atomic::AtomicBool::new(false);
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let base = ci * CHUNK;
        let end = base + chunk.len();
        for &(j, e) in &factor.terms {
            if j >= end {
                break;
            }
            let start = base.max(j);
            let src = &series[start - j..end - j];
            let dst = &mut chunk[start - base..];
            if safe {
                let e = e as i128;
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = d.wrapping_add(e.wrapping_mul(s));
                }
            } else {
                for (d, &s) in dst.iter_mut().zip(src) {
                    match (e as i128).checked_mul(s).and_then(|t| d.checked_add(t)) {
                        Some(v) => *d = v,
                        None => {
                            overflowed.store(true, std::sync::atomic::Ordering::Relaxed);
                            return;
                        }
                    }
                }
            }
        }
    });
    if overflowed.into_inner() {
        return Err(Error::Overflow("eta-product coefficients exceed 128 bits".into()));
    }
    Ok(out)
}

/// `series / factor` for a factor with constant term 1.
fn divide(series: &[i128], factor: &Sparse) -> Result<Vec<i128>> {
    let mut out = series.to_vec();
    for i in 0..out.len() {
        let mut acc = out[i];
        for &(j, e) in factor.terms.iter().skip(1) {
            if j > i {
                break;
            }
            acc = (e as i128)
                .checked_mul(out[i - j])
                .and_then(|t| acc.checked_sub(t))
                .ok_or_else(|| Error::Overflow("eta-quotient coefficients exceed 128 bits".into()))?;
        }
        out[i] = acc;
    }
    Ok(out)
}

fn check_recipe(recipe: &[(u64, i32)]) -> Result<(u32, u64, usize)> {
    if recipe.is_empty() || recipe.iter().any(|&(d, r)| d == 0 || r == 0) {
        return Err(Error::domain(format!("bad eta recipe {recipe:?}")));
    }
    let twice_weight: i64 = recipe.iter().map(|&(_, r)| r as i64).sum();
    let order: i64 = recipe.iter().map(|&(d, r)| d as i64 * r as i64).sum();
    if order % 24 != 0 {
        return Err(Error::domain(format!(
            "eta recipe {recipe:?} has Σ d·r = {order}, not divisible by 24"
        )));
    }
    if twice_weight <= 0 || twice_weight % 2 != 0 {
        return Err(Error::domain(format!("eta recipe {recipe:?} has non-integral weight")));
    }
    if order <= 0 {
        return Err(Error::domain(format!("eta recipe {recipe:?} is not a cusp form")));
    }
    let level = recipe.iter().fold(1u64, |l, &(d, _)| l / gcd(l, d) * d);
    Ok(((twice_weight / 2) as u32, level, (order / 24) as usize))
}

/// `Π_d η(d z)^{r_d}` expanded to `N` terms.
///
/// The weight is `Σ r_d / 2` and the level recorded is the lcm of the dilations.
pub fn eta_product(recipe: &[(u64, i32)], n: usize) -> Result<QExpansion> {
    let (weight, level, shift) = check_recipe(recipe)?;
    if n > MAX_LENGTH {
        return Err(Error::domain(format!("expansion length {n} exceeds {MAX_LENGTH}")));
    }
    // c(n) is the coefficient of q^{n − shift} in the product of the Π(1 − q^{dm}).
    let len = (n + 1).saturating_sub(shift);
    let mut series = vec![0i128; len];
    if len > 0 {
        series[0] = 1;
    }
    for &(d, r) in recipe {
        let d = d as usize;
        let cubes = Sparse::jacobi(d, len);
        let ones = Sparse::pentagonal(d, len);
        let steps = r.unsigned_abs();
        for _ in 0..steps / 3 {
            series = if r > 0 { multiply(&series, &cubes)? } else { divide(&series, &cubes)? };
        }
        for _ in 0..steps % 3 {
            series = if r > 0 { multiply(&series, &ones)? } else { divide(&series, &ones)? };
        }
    }
    let coefficients = (1..=n)
        .map(|i| if i >= shift { series[i - shift] } else { 0 })
        .collect();
    Ok(QExpansion {
        level,
        weight,
        coefficients,
    })
}

/// The three catalog newforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogForm {
    /// `Δ = η(z)^24`, level 1, weight 12.
    Delta,
    /// `η(z)² η(11z)²`, level 11, weight 2.
    F11,
    /// `η(z)^4 η(5z)^4`, level 5, weight 4.
    F5,
}

impl CatalogForm {
    pub const ALL: [CatalogForm; 3] = [CatalogForm::Delta, CatalogForm::F11, CatalogForm::F5];

    pub fn name(self) -> &'static str {
        match self {
            CatalogForm::Delta => "delta",
            CatalogForm::F11 => "f11",
            CatalogForm::F5 => "f5",
        }
    }

    pub fn level(self) -> u64 {
        match self {
            CatalogForm::Delta => 1,
            CatalogForm::F11 => 11,
            CatalogForm::F5 => 5,
        }
    }

    pub fn weight(self) -> u32 {
        match self {
            CatalogForm::Delta => 12,
            CatalogForm::F11 => 2,
            CatalogForm::F5 => 4,
        }
    }

    pub fn recipe(self) -> &'static [(u64, i32)] {
        match self {
            CatalogForm::Delta => &[(1, 24)],
            CatalogForm::F11 => &[(1, 2), (11, 2)],
            CatalogForm::F5 => &[(1, 4), (5, 4)],
        }
    }
}

impl fmt::Display for CatalogForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CatalogForm::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown form {s:?} (expected delta, f11 or f5)")))
    }
}

/// A catalog newform with its cached expansion.
#[derive(Debug, Serialize)]
pub struct NewformRecord {
    pub form: CatalogForm,
    pub level: u64,
    pub weight: u32,
    pub recipe: Vec<(u64, i32)>,
    #[serde(skip)]
    pub expansion: QExpansion,
    #[serde(skip)]
    pub(crate) root_number: OnceLock<i8>,
}

impl NewformRecord {
    /// Expansion to `n` terms, read from or written to `cache` when given.
    pub fn load(form: CatalogForm, n: usize, cache: Option<&Path>) -> Result<Self> {
        let expansion = match cache {
            Some(dir) => cached_eta_product(form.recipe(), n, dir)?,
            None => eta_product(form.recipe(), n)?,
        };
        let mut expansion = expansion;
        expansion.level = form.level();
        Ok(Self {
            form,
            level: form.level(),
            weight: form.weight(),
            recipe: form.recipe().to_vec(),
            expansion,
            root_number: OnceLock::new(),
        })
    }

    /// Analytic conductor `k² q`.
    pub fn conductor(&self) -> f64 {
        (self.weight as f64).powi(2) * self.level as f64
    }

    pub fn len(&self) -> usize {
        self.expansion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansion.is_empty()
    }

    /// `a_f(n)`; panics beyond the expansion length.
    pub fn a(&self, n: usize) -> f64 {
        self.expansion.normalized(n)
    }

    pub(crate) fn require(&self, n: usize, what: &str) -> Result<()> {
        if n > self.len() {
            return Err(Error::domain(format!(
                "{what} needs {n} coefficients of {}, only {} loaded",
                self.form,
                self.len()
            )));
        }
        Ok(())
    }
}

/// `a_f(1), …, a_f(N)` as reals.
pub fn coefficients(record: &NewformRecord, n: usize) -> Result<Vec<f64>> {
    record.require(n, "coefficients")?;
    Ok((1..=n).map(|i| record.a(i)).collect())
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn cache_path(dir: &Path, recipe: &[(u64, i32)], n: usize) -> PathBuf {
    let key: Vec<String> = recipe.iter().map(|(d, r)| format!("{d}^{r}")).collect();
    dir.join(format!("eta_{}_{n}.bin", key.join("_")))
}

const MAGIC: &[u8; 8] = b"LVLQEXP1";

fn cache_lock() -> &'static Mutex<()> {
    static LOCK: Mutex<()> = Mutex::new(());
    &LOCK
}

/// [`eta_product`] through a binary cache keyed by `(recipe, N)`.
pub fn cached_eta_product(recipe: &[(u64, i32)], n: usize, dir: &Path) -> Result<QExpansion> {
    let (weight, level, _) = check_recipe(recipe)?;
    let path = cache_path(dir, recipe, n);
    if let Some(coefficients) = read_cache(&path, n)? {
        return Ok(QExpansion {
            level,
            weight,
            coefficients,
        });
    }
    let expansion = eta_product(recipe, n)?;
    let _guard = cache_lock().lock().unwrap_or_else(|e| e.into_inner());
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        let mut buf = Vec::with_capacity(16 + 16 * n);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        for c in &expansion.coefficients {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        f.write_all(&buf)?;
    }
    fs::rename(&tmp, &path)?;
    Ok(expansion)
}

fn read_cache(path: &Path, n: usize) -> Result<Option<Vec<i128>>> {
    let mut f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() != 16 + 16 * n || &buf[..8] != MAGIC || buf[8..16] != (n as u64).to_le_bytes() {
        // A stale or truncated file is rebuilt rather than trusted.
        return Ok(None);
    }
    Ok(Some(
        buf[16..]
            .chunks_exact(16)
            .map(|c| i128::from_le_bytes(c.try_into().expect("16-byte chunk")))
            .collect(),
    ))
}

/// A failed identity found by [`hecke_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeckeViolation {
    /// `c(p^{ν+1}) ≠ c(p) c(p^ν) − p^{k−1} c(p^{ν−1})`.
    PrimePower { p: u64, nu: u32 },
    /// `c(mn) ≠ c(m) c(n)` for coprime `m, n`.
    Multiplicative { m: u64, n: u64 },
    /// `|a(p)| > 2`.
    Deligne { p: u64, value: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct HeckeReport {
    pub n: usize,
    pub prime_power_relations: usize,
    pub multiplicative_relations: usize,
    pub primes_bounded: usize,
    /// `max_p |a(p)|` over the primes checked.
    pub max_abs_ap: f64,
    pub violations: Vec<HeckeViolation>,
}

impl HeckeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Hecke relations in exact integers and the Deligne bound, up to `N`.
pub fn hecke_check(record: &NewformRecord, n: usize) -> Result<HeckeReport> {
    record.require(n, "hecke_check")?;
    let e = &record.expansion;
    let q = record.level;
    let overflow = || Error::Overflow("Hecke relation exceeds 128 bits".into());
    let mut report = HeckeReport {
        n,
        prime_power_relations: 0,
        multiplicative_relations: 0,
        primes_bounded: 0,
        max_abs_ap: 0.0,
        violations: Vec::new(),
    };
    let primes = arith::sieve_primes(n as u64);
    for &p in &primes {
        let a = e.normalized(p as usize).abs();
        report.max_abs_ap = report.max_abs_ap.max(a);
        report.primes_bounded += 1;
        if a > 2.0 * (1.0 + 1e-12) {
            report.violations.push(HeckeViolation::Deligne { p, value: a });
        }
        if q % p == 0 {
            continue;
        }
        if p * p > n as u64 {
            continue;
        }
        let pk = (p as i128)
            .checked_pow(record.weight - 1)
            .ok_or_else(overflow)?;
        let (mut prev, mut cur) = (1usize, p as usize); // p^{ν−1}, p^ν
        let mut nu = 1u32;
        while let Some(next) = cur.checked_mul(p as usize).filter(|&x| x <= n) {
            let rhs = e
                .c(p as usize)
                .checked_mul(e.c(cur))
                .and_then(|x| pk.checked_mul(e.c(prev)).and_then(|y| x.checked_sub(y)))
                .ok_or_else(overflow)?;
            report.prime_power_relations += 1;
            if e.c(next) != rhs {
                report.violations.push(HeckeViolation::PrimePower { p, nu });
            }
            prev = cur;
            cur = next;
            nu += 1;
        }
    }
    let root = arith::isqrt(n as u64);
    for a in 2..=root {
        for b in (a + 1)..=root {
            if gcd(a, b) != 1 || a * b > n as u64 {
                continue;
            }
            let prod = e.c(a as usize).checked_mul(e.c(b as usize)).ok_or_else(overflow)?;
            report.multiplicative_relations += 1;
            if e.c((a * b) as usize) != prod {
                report.violations.push(HeckeViolation::Multiplicative { m: a, n: b });
            }
        }
    }
    Ok(report)
}
