//! Harmonic averages over weight-k cusp forms of level q from the geometric
//! side of the Petersson formula:
//!
//! `Δ_q(m, n) = δ_{m,n} + 2π i^{−k} Σ_{q | c} S(m, n; c)/c · J_{k−1}(4π√(mn)/c)`,
//!
//! the newform averages `Δ*_q(m, n)` obtained from them by the Möbius sieve
//! over `q = L_1 L_2 d`, and the smoothed family count `N(Q)`.

mod series;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{self, factorize, gcd, Factorization};
use crate::error::{Error, Result};

pub(crate) use series::kloosterman_bessel_sums;

/// Largest modulus `c` the truncated c-sum may reach.
pub const C_MAX_CAP: u64 = 100_000_000;

/// A truncated Petersson average with a certified bound on the truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub value: f64,
    pub c_max: u64,
    pub tail_bound: f64,
    pub q: u64,
    pub k: u32,
    pub m: u64,
    pub n: u64,
}

/// How to truncate the c-sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Choose `c_max` so that the certified tail is at most this value.
    TargetTail(f64),
    /// Sum exactly the terms with `c ≤ c_max` and report the resulting tail.
    CMax(u64),
}

fn check_weight(k: u32) -> Result<()> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::domain(format!("weight must be even and ≥ 2, got {k}")));
    }
    if k - 1 > crate::bessel::MAX_ORDER {
        return Err(Error::domain(format!("weight {k} exceeds supported range")));
    }
    Ok(())
}

fn check_indices(m: u64, n: u64, q: u64) -> Result<()> {
    if m == 0 || n == 0 || q == 0 {
        return Err(Error::domain(format!(
            "indices must be positive (m={m}, n={n}, q={q})"
        )));
    }
    Ok(())
}

/// Exponent in the divisor majorant `d(c) ≤ K c^ε`.
pub const DIVISOR_EXPONENT: f64 = 0.31;

/// The least `K` with `d(c) ≤ K c^{0.31}` for every `c ≥ 1`.
///
/// `d(c)/c^ε = Π_p (a_p + 1)/p^{ε a_p}`; each local factor is at most 1 once
/// `p^ε ≥ 2`, so only primes below `2^{1/ε}` contribute their maxima.
pub fn divisor_majorant_constant() -> f64 {
    let eps = DIVISOR_EXPONENT;
    let cutoff = 2f64.powf(1.0 / eps).ceil() as u64;
    arith::sieve_primes(cutoff)
        .into_iter()
        .map(|p| {
            (0..64)
                .map(|a| (a as f64 + 1.0) / (p as f64).powf(eps * a as f64))
                .fold(1.0, f64::max)
        })
        .product()
}

/// Certified bound on `2π Σ_{c = q r, r > r_max} |S(m,n;c)/c · J_{k−1}(4π√(mn)/c)|`.
///
/// Each term is at most `2π K √gcd(m,n) c^{ε−1/2} min(1, A c^{1−k})` with
/// `A = (2π√(mn))^{k−1}/(k−1)!`; the summand decreases in `r`, so the tail is
/// bounded by the integral from `r_max`, which is evaluated in closed form.
pub fn series_tail_bound(m: u64, n: u64, q: u64, k: u32, r_max: u64) -> f64 {
    let kf = k as f64;
    let lead = 2.0 * PI * divisor_majorant_constant() * (gcd(m, n) as f64).sqrt();
    let beta = 0.5 - DIVISOR_EXPONENT; // c^{-β} from c^{ε}·√c / c
    let x = 2.0 * PI * ((m as f64) * (n as f64)).sqrt();
    let ln_a = (kf - 1.0) * x.ln() - ln_factorial(k - 1);
    // c0: where A c^{1-k} = 1.
    let c0 = (ln_a / (kf - 1.0)).exp();
    let qf = q as f64;
    let u0 = c0 / qf;
    let r = r_max as f64;
    let s = kf - 1.0 + beta;
    let power_tail = |from: f64| -> f64 {
        // ∫_from^∞ A (q u)^{-s} du
        (ln_a - s * qf.ln() + (1.0 - s) * from.ln()).exp() / (s - 1.0)
    };
    let flat = |from: f64, to: f64| -> f64 {
        // ∫_from^to (q u)^{-β} du
        qf.powf(-beta) * (to.powf(1.0 - beta) - from.powf(1.0 - beta)) / (1.0 - beta)
    };
    let integral = if r >= u0 {
        power_tail(r)
    } else {
        flat(r, u0) + power_tail(u0)
    };
    lead * integral
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Smallest `r_max` (with `q r_max ≤ C_MAX_CAP`) certifying `target`.
fn r_for_target(m: u64, n: u64, q: u64, k: u32, target: f64) -> Result<u64> {
    if !(target > 0.0) {
        return Err(Error::domain(format!("tail target must be positive, got {target}")));
    }
    let r_cap = C_MAX_CAP / q;
    let best = series_tail_bound(m, n, q, k, r_cap);
    if best > target {
        return Err(Error::Unreachable {
            what: format!("Petersson tail for (m={m}, n={n}, q={q}, k={k})"),
            target,
            achieved: best,
        });
    }
    if series_tail_bound(m, n, q, k, 0) <= target {
        return Ok(0);
    }
    let (mut lo, mut hi) = (0u64, r_cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if series_tail_bound(m, n, q, k, mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `Δ_q(m, n)` with certified tail at most `target_tail`.
pub fn delta_full(m: u64, n: u64, q: u64, k: u32, target_tail: f64) -> Result<DeltaEstimate> {
    Ok(delta_full_batch(&[(m, n)], q, k, Truncation::TargetTail(target_tail))?.remove(0))
}

/// `Δ_q(m, n)` summed over `c ≤ c_max`, with the (possibly large) certified tail.
pub fn delta_full_truncated(m: u64, n: u64, q: u64, k: u32, c_max: u64) -> Result<DeltaEstimate> {
    Ok(delta_full_batch(&[(m, n)], q, k, Truncation::CMax(c_max))?.remove(0))
}

/// `Δ_q(m, n)` for several pairs sharing one sweep over `c`.
pub fn delta_full_batch(
    pairs: &[(u64, u64)],
    q: u64,
    k: u32,
    truncation: Truncation,
) -> Result<Vec<DeltaEstimate>> {
    check_weight(k)?;
    for &(m, n) in pairs {
        check_indices(m, n, q)?;
    }
    let r_max = match truncation {
        Truncation::CMax(c) => {
            if c > C_MAX_CAP {
                return Err(Error::domain(format!("c_max {c} exceeds cap {C_MAX_CAP}")));
            }
            c / q
        }
        Truncation::TargetTail(t) => {
            let mut r = 0;
            for &(m, n) in pairs {
                r = r.max(r_for_target(m, n, q, k, t)?);
            }
            r
        }
    };
    let c_max = r_max * q;
    // Canonical order makes the symmetry Δ(m,n) = Δ(n,m) exact.
    let canon: Vec<(u64, u64)> = pairs.iter().map(|&(m, n)| (m.min(n), m.max(n))).collect();
    let sums = kloosterman_bessel_sums(q, k, c_max, &canon);
    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(pairs
        .iter()
        .zip(sums)
        .map(|(&(m, n), s)| DeltaEstimate {
            value: if m == n { 1.0 } else { 0.0 } + 2.0 * PI * sign * s,
            c_max,
            tail_bound: series_tail_bound(m, n, q, k, r_max),
            q,
            k,
            m,
            n,
        })
        .collect())
}

/// `dim S_k(Γ_0(N))` for even `k ≥ 2`, from the classical genus formula.
pub fn cusp_form_dimension(level: u64, k: u32) -> Result<u64> {
    check_weight(k)?;
    let f = factorize(level)?;
    let mut mu = level;
    for &(p, _) in f.factors() {
        mu = mu / p * (p + 1);
    }
    let eps2: i64 = if level % 4 == 0 {
        0
    } else {
        f.factors()
            .iter()
            .map(|&(p, _)| match p {
                2 => 1,
                _ if p % 4 == 1 => 2,
                _ => 0,
            })
            .product()
    };
    let eps3: i64 = if level % 9 == 0 {
        0
    } else {
        f.factors()
            .iter()
            .map(|&(p, _)| match p {
                3 => 1,
                _ if p % 3 == 1 => 2,
                _ => 0,
            })
            .product()
    };
    let cusps: i64 = f
        .divisors()
        .iter()
        .map(|&d| euler_phi(gcd(d, level / d)) as i64)
        .sum();
    let twelve_g = 12 + mu as i64 - 3 * eps2 - 4 * eps3 - 6 * cusps;
    debug_assert_eq!(twelve_g % 12, 0);
    let g = twelve_g / 12;
    let k = k as i64;
    let dim = if k == 2 {
        g
    } else {
        (k - 1) * (g - 1) + (k / 2 - 1) * cusps + eps2 * (k / 4) + eps3 * (k / 3)
    };
    Ok(dim.max(0) as u64)
}

fn euler_phi(n: u64) -> u64 {
    let f = factorize(n).expect("n ≥ 1");
    f.factors()
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

/// One term `q = L_1 L_2 d` of the newform sieve.
#[derive(Debug, Clone)]
struct SieveTerm {
    d: u64,
    coefficient: f64,
    /// Primes of `L_2`, over whose powers `e` runs.
    l2_primes: Vec<u64>,
}

fn sieve_terms(q_fact: &Factorization) -> Vec<SieveTerm> {
    let q = q_fact.n();
    let q1 = Factorization::from_parts_unchecked(
        q_fact.factors().iter().filter(|f| f.1 >= 2).map(|&(p, e)| p.pow(e)).product(),
        q_fact.factors().iter().copied().filter(|f| f.1 >= 2).collect(),
    );
    let q2_primes: Vec<u64> = q_fact
        .factors()
        .iter()
        .filter(|f| f.1 == 1)
        .map(|f| f.0)
        .collect();
    let q1_primes: Vec<u64> = q1.factors().iter().map(|f| f.0).collect();
    let mut terms = Vec::new();
    // μ(L_1 L_2) ≠ 0 forces both squarefree: subsets of the prime sets.
    for mask1 in 0u32..(1 << q1_primes.len()) {
        for mask2 in 0u32..(1 << q2_primes.len()) {
            let l1_primes: Vec<u64> = bits(&q1_primes, mask1);
            let l2_primes: Vec<u64> = bits(&q2_primes, mask2);
            let l1: u64 = l1_primes.iter().product();
            let l2: u64 = l2_primes.iter().product();
            let d = q / (l1 * l2);
            debug_assert_eq!(gcd(l2, d), 1, "L_2 = {l2} shares a factor with d = {d}");
            let sign = if (l1_primes.len() + l2_primes.len()) % 2 == 0 { 1.0 } else { -1.0 };
            let mut coefficient = sign / (l1 * l2) as f64;
            for &p in &l1_primes {
                if d % (p * p) != 0 {
                    coefficient /= 1.0 - 1.0 / (p * p) as f64;
                }
            }
            terms.push(SieveTerm {
                d,
                coefficient,
                l2_primes,
            });
        }
    }
    terms
}

fn bits(primes: &[u64], mask: u32) -> Vec<u64> {
    primes
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &p)| p)
        .collect()
}

/// `e | L_2^∞` in ascending order up to `limit`.
fn smooth_numbers(primes: &[u64], limit: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for &p in primes {
        let len = out.len();
        for i in 0..len {
            let mut v = out[i];
            while let Some(next) = v.checked_mul(p).filter(|&x| x <= limit) {
                v = next;
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

/// `Σ_{e | L^∞} d(e²)/e = Π_{p | L} (1 + 1/p)/(1 − 1/p)²`.
fn e_series_total(primes: &[u64]) -> f64 {
    primes
        .iter()
        .map(|&p| {
            let x = 1.0 / p as f64;
            (1.0 + x) / ((1.0 - x) * (1.0 - x))
        })
        .product()
}

fn e_series_tail(primes: &[u64], e_max: u64) -> f64 {
    let partial: f64 = smooth_numbers(primes, e_max)
        .iter()
        .map(|&e| divisor_count_of_square(e) as f64 / e as f64)
        .sum();
    (e_series_total(primes) - partial).max(0.0)
}

fn divisor_count_of_square(e: u64) -> u64 {
    factorize(e)
        .expect("e ≥ 1")
        .factors()
        .iter()
        .map(|&(_, a)| 2 * a as u64 + 1)
        .product()
}

/// Smallest `E` (a power-smooth bound) with `tail(E) · scale ≤ budget`.
fn choose_e_max(primes: &[u64], scale: f64, budget: f64) -> Option<u64> {
    if primes.is_empty() || scale == 0.0 {
        return Some(1);
    }
    let mut e_max = 1u64;
    loop {
        if e_series_tail(primes, e_max) * scale <= budget {
            return Some(e_max);
        }
        e_max = e_max.checked_mul(2)?;
        if e_max > 1 << 31 {
            return None;
        }
    }
}

/// Largest power of two `E ≤ 2^31` keeping `4π e √(mn) / d` within the Bessel range.
fn e_cap(m: u64, n: u64, d: u64) -> u64 {
    let limit = crate::bessel::MAX_ARGUMENT * d as f64
        / (4.0 * std::f64::consts::PI * ((m as f64) * (n as f64)).sqrt());
    let mut e = 1u64;
    while e < 1 << 31 && (2 * e) as f64 <= limit {
        e *= 2;
    }
    e
}

/// `Δ*_q(m, n)` with certified total tail at most `target_tail`.
pub fn delta_new(m: u64, n: u64, q: u64, k: u32, target_tail: f64) -> Result<DeltaEstimate> {
    Ok(delta_new_batch(&[(m, n)], q, k, Truncation::TargetTail(target_tail))?.remove(0))
}

/// `Δ*_q(m, n)` with every inner c-sum truncated at `c_max`.
pub fn delta_new_truncated(m: u64, n: u64, q: u64, k: u32, c_max: u64) -> Result<DeltaEstimate> {
    Ok(delta_new_batch(&[(m, n)], q, k, Truncation::CMax(c_max))?.remove(0))
}

/// Relative size at which the e-sum is cut when the c-sums are truncated by `c_max`.
const E_TAIL_RELATIVE: f64 = 1e-6;

/// `Δ*_q(m, n)` for several pairs, sharing the c-sweeps of each inner level.
///
/// Implements `Σ_{q = L_1 L_2 d} μ(L_1 L_2)/(L_1 L_2) Π_{p | L_1, p² ∤ d} (1 − p^{−2})^{−1}
/// Σ_{e | L_2^∞} Δ_d(m e², n)/e`. Levels `d` without cusp forms contribute exactly 0.
/// The e-sum is cut at `E`; its tail is bounded spectrally by
/// `|Δ_d(M, N)| ≤ d(M) d(N) Δ_d(1, 1)` for `gcd(MN, d) = 1` (Deligne).
pub fn delta_new_batch(
    pairs: &[(u64, u64)],
    q: u64,
    k: u32,
    truncation: Truncation,
) -> Result<Vec<DeltaEstimate>> {
    check_weight(k)?;
    for &(m, n) in pairs {
        check_indices(m, n, q)?;
        if gcd(m, q) != 1 || gcd(n, q) != 1 {
            return Err(Error::domain(format!(
                "newform average needs gcd(mn, q) = 1 (m={m}, n={n}, q={q})"
            )));
        }
    }
    let q_fact = factorize(q)?;
    let terms: Vec<SieveTerm> = sieve_terms(&q_fact)
        .into_iter()
        .filter(|t| cusp_form_dimension(t.d, k).map_or(true, |dim| dim > 0))
        .collect();
    let mut out: Vec<DeltaEstimate> = pairs
        .iter()
        .map(|&(m, n)| DeltaEstimate {
            value: 0.0,
            c_max: 0,
            tail_bound: 0.0,
            q,
            k,
            m,
            n,
        })
        .collect();
    if terms.is_empty() {
        return Ok(out);
    }
    let (e_budget, inner_target) = match truncation {
        Truncation::TargetTail(t) => {
            if !(t > 0.0) {
                return Err(Error::domain(format!("tail target must be positive, got {t}")));
            }
            (t / (10.0 * terms.len() as f64), Some(t))
        }
        Truncation::CMax(_) => (0.0, None),
    };

    // Δ_d(1,1) bounds the e-tails; one estimate per distinct d.
    let mut levels: Vec<u64> = terms.iter().map(|t| t.d).collect();
    levels.sort_unstable();
    levels.dedup();
    let diag_trunc = match truncation {
        Truncation::TargetTail(t) => Truncation::TargetTail(t / 10.0),
        other => other,
    };
    let diag: Vec<(u64, DeltaEstimate)> = levels
        .iter()
        .map(|&d| Ok((d, delta_full_batch(&[(1, 1)], d, k, diag_trunc)?.remove(0))))
        .collect::<Result<_>>()?;
    let diag_upper = |d: u64| {
        let est = &diag.iter().find(|x| x.0 == d).expect("level evaluated").1;
        est.value.abs() + est.tail_bound
    };

    // Plan: for each (pair, term) the list of e and the e-tail.
    struct Plan {
        pair: usize,
        term: usize,
        es: Vec<u64>,
        e_tail: f64,
    }
    let mut plans = Vec::new();
    for (pi, &(m, n)) in pairs.iter().enumerate() {
        let dm = factorize(m)?.divisor_count() as f64;
        let dn = factorize(n)?.divisor_count() as f64;
        for (ti, t) in terms.iter().enumerate() {
            let scale = t.coefficient.abs() * diag_upper(t.d) * dm * dn;
            let budget = match truncation {
                Truncation::TargetTail(_) => e_budget,
                Truncation::CMax(_) => E_TAIL_RELATIVE * scale.max(1e-300),
            };
            let e_max = match (choose_e_max(&t.l2_primes, scale, budget), truncation) {
                (Some(e), _) => e,
                // Under a fixed c_max the e-sum is cut where the Bessel argument at c = d
                // stays in range; the remaining tail is reported, not enforced.
                (None, Truncation::CMax(_)) => e_cap(m, n, t.d),
                (None, Truncation::TargetTail(_)) => {
                    return Err(Error::Unreachable {
                        what: format!("e-sum of the newform sieve at level {q}"),
                        target: budget,
                        achieved: scale * e_series_tail(&t.l2_primes, 1 << 31),
                    })
                }
            };
            let es = smooth_numbers(&t.l2_primes, e_max);
            let e_tail = scale * e_series_tail(&t.l2_primes, e_max);
            plans.push(Plan {
                pair: pi,
                term: ti,
                es,
                e_tail,
            });
        }
    }
    let total_inner: usize = plans.iter().map(|p| p.es.len()).sum();
    let inner = match (truncation, inner_target) {
        (Truncation::TargetTail(_), Some(t)) => Truncation::TargetTail(t / (10.0 * total_inner as f64)),
        (other, _) => other,
    };

    // One batched sweep per inner level d.
    let mut by_level: Vec<(u64, Vec<(u64, u64)>)> = levels.iter().map(|&d| (d, Vec::new())).collect();
    let mut index: Vec<Vec<(usize, usize)>> = Vec::new(); // plan -> (level slot, pair slot) per e
    for plan in &plans {
        let (m, n) = pairs[plan.pair];
        let d = terms[plan.term].d;
        let slot = levels.binary_search(&d).expect("level listed");
        let mut idx = Vec::with_capacity(plan.es.len());
        for &e in &plan.es {
            let big_m = e
                .checked_mul(e)
                .and_then(|e2| e2.checked_mul(m))
                .ok_or_else(|| Error::Overflow(format!("m e² with m={m}, e={e}")))?;
            let list = &mut by_level[slot].1;
            let pos = match list.iter().position(|&x| x == (big_m, n)) {
                Some(p) => p,
                None => {
                    list.push((big_m, n));
                    list.len() - 1
                }
            };
            idx.push((slot, pos));
        }
        index.push(idx);
    }
    let evaluated: Vec<Vec<DeltaEstimate>> = by_level
        .par_iter()
        .map(|(d, list)| delta_full_batch(list, *d, k, inner))
        .collect::<Result<_>>()?;

    for (plan, idx) in plans.iter().zip(&index) {
        let t = &terms[plan.term];
        let o = &mut out[plan.pair];
        for (&e, &(slot, pos)) in plan.es.iter().zip(idx) {
            let est = &evaluated[slot][pos];
            o.value += t.coefficient * est.value / e as f64;
            o.tail_bound += t.coefficient.abs() * est.tail_bound / e as f64;
            o.c_max = o.c_max.max(est.c_max);
        }
        o.tail_bound += plan.e_tail;
    }
    Ok(out)
}

/// Level filter for a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "levels")]
pub enum LevelFilter {
    All,
    Squarefree,
    Prime,
    Explicit(Vec<u64>),
}

impl LevelFilter {
    pub fn admits(&self, q: u64) -> bool {
        match self {
            LevelFilter::All => true,
            LevelFilter::Squarefree => factorize(q).map_or(false, |f| f.is_squarefree()),
            LevelFilter::Prime => arith::is_prime(q),
            LevelFilter::Explicit(list) => list.contains(&q),
        }
    }
}

/// A family of newforms of weight `k` and levels `q` weighted by `Ψ(q/Q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySpec {
    pub scale: f64,
    pub k: u32,
    /// Open support `(a, b)` of the bump `Ψ`.
    pub support: (f64, f64),
    pub levels: LevelFilter,
}

impl FamilySpec {
    pub fn new(scale: f64, k: u32) -> Self {
        Self {
            scale,
            k,
            support: (1.0, 2.0),
            levels: LevelFilter::All,
        }
    }

    pub fn with_levels(mut self, levels: LevelFilter) -> Self {
        self.levels = levels;
        self
    }

    /// Admitted levels with nonzero weight, ascending, paired with `Ψ(q/Q)`.
    pub fn weighted_levels(&self) -> Result<Vec<(u64, f64)>> {
        if !(self.scale > 0.0) {
            return Err(Error::domain(format!("family scale must be positive, got {}", self.scale)));
        }
        let (a, b) = self.support;
        if !(0.0 < a && a < b) {
            return Err(Error::domain(format!("bad weight support ({a}, {b})")));
        }
        let lo = (a * self.scale).floor().max(0.0) as u64;
        let hi = (b * self.scale).ceil() as u64;
        Ok((lo.max(1)..=hi)
            .filter(|&q| self.levels.admits(q))
            .map(|q| (q, smooth_weight(self, q as f64 / self.scale)))
            .filter(|&(_, w)| w > 0.0)
            .collect())
    }
}

/// The bump `Ψ(t) = exp(1 − 1/(1 − u²))`, `u` the affine image of `t` in `(−1, 1)`.
pub fn smooth_weight(spec: &FamilySpec, t: f64) -> f64 {
    let (a, b) = spec.support;
    let u = (2.0 * t - (a + b)) / (b - a);
    if !(u.abs() < 1.0) {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - u * u)).exp()
}

/// One level's contribution to `N(Q)`.
#[derive(Debug, Clone, Serialize)]
pub struct LevelTerm {
    pub q: u64,
    pub weight: f64,
    pub delta: DeltaEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyCount {
    pub value: f64,
    pub tail_bound: f64,
    pub levels: Vec<LevelTerm>,
}

/// `N(Q) = Σ_q Ψ(q/Q) Δ*_q(1, 1)` over admitted levels.
pub fn family_count(spec: &FamilySpec, truncation: Truncation) -> Result<FamilyCount> {
    let levels = spec.weighted_levels()?;
    let per_level = match truncation {
        Truncation::TargetTail(t) => Truncation::TargetTail(t / levels.len().max(1) as f64),
        other => other,
    };
    let terms: Vec<LevelTerm> = levels
        .par_iter()
        .map(|&(q, weight)| {
            Ok(LevelTerm {
                q,
                weight,
                delta: delta_new_batch(&[(1, 1)], q, spec.k, per_level)?.remove(0),
            })
        })
        .collect::<Result<_>>()?;
    let mut value = crate::sum::CompensatedSum::new();
    let mut tail = 0.0;
    for t in &terms {
        value.add(t.weight * t.delta.value);
        tail += t.weight * t.delta.tail_bound;
    }
    Ok(FamilyCount {
        value: value.value(),
        tail_bound: tail,
        levels: terms,
    })
}
