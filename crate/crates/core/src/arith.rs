//! Integer and prime utilities: sieving, 64-bit factorization, classical
//! multiplicative functions and prime reciprocal sums.

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Prime-power decomposition of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    n: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Builds a factorization from explicit parts, checking every invariant.
    pub fn from_parts(n: u64, factors: Vec<(u64, u32)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("factorization of 0"));
        }
        let mut prev = 1u64;
        let mut prod: u128 = 1;
        for &(p, e) in &factors {
            if p <= prev || e == 0 || !is_prime(p) {
                return Err(Error::domain(format!(
                    "invalid factor ({p}, {e}) in factorization of {n}"
                )));
            }
            prev = p;
            for _ in 0..e {
                prod *= p as u128;
                if prod > n as u128 {
                    return Err(Error::domain(format!("factors overshoot {n}")));
                }
            }
        }
        if prod != n as u128 {
            return Err(Error::domain(format!("factors multiply to {prod}, not {n}")));
        }
        Ok(Self { n, factors })
    }

    pub(crate) fn from_parts_unchecked(n: u64, factors: Vec<(u64, u32)>) -> Self {
        debug_assert_eq!(
            factors.iter().map(|&(p, e)| p.pow(e)).product::<u64>(),
            n
        );
        Self { n, factors }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `(prime, exponent)` pairs with strictly increasing primes.
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// Number of distinct prime divisors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    /// The prime powers `p^e` exactly dividing `n`.
    pub fn prime_powers(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, e)| p.pow(e))
    }

    /// Product of `p^e`; equals `n` by construction.
    pub fn reconstruct(&self) -> u64 {
        self.prime_powers().product()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn mobius(&self) -> i8 {
        if !self.is_squarefree() {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    /// All positive divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Exponent of `p` in `n` (0 when `p` does not divide `n`).
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(r, _)| r == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Factorization of `self * other`.
    pub fn mul(&self, other: &Factorization) -> Factorization {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (a, b) = (&self.factors, &other.factors);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
        Factorization {
            n: self.n * other.n,
            factors: out,
        }
    }
}

/// Primes in `[2, limit]`, ascending. Uses an odd-only segmented sieve.
pub fn sieve_primes(limit: u64) -> Vec<u64> {
    let mut primes = Vec::new();
    if limit < 2 {
        return primes;
    }
    primes.push(2);
    let root = isqrt(limit);
    // Base primes up to sqrt(limit) by a plain sieve.
    let mut small = vec![true; (root + 1) as usize];
    let mut base = Vec::new();
    for i in 2..=root as usize {
        if small[i] {
            if i > 2 {
                base.push(i as u64);
            }
            let mut j = i * i;
            while j <= root as usize {
                small[j] = false;
                j += i;
            }
        }
    }
    const SEGMENT: u64 = 1 << 18;
    let mut composite = vec![false; SEGMENT as usize];
    // Segment covers odd numbers lo, lo+2, ..., lo + 2*(SEGMENT-1).
    let mut lo = 3u64;
    while lo <= limit {
        let hi = (lo + 2 * (SEGMENT - 1)).min(limit);
        let len = ((hi - lo) / 2 + 1) as usize;
        composite[..len].iter_mut().for_each(|c| *c = false);
        for &p in &base {
            if p * p > hi {
                break;
            }
            let mut start = (p * p).max(lo.div_ceil(p) * p);
            if start % 2 == 0 {
                start += p;
            }
            let mut idx = ((start - lo) / 2) as usize;
            while idx < len {
                composite[idx] = true;
                idx += p as usize;
            }
        }
        for (i, &c) in composite[..len].iter().enumerate() {
            if !c {
                primes.push(lo + 2 * i as u64);
            }
        }
        lo = hi + 2;
        if hi % 2 == 0 {
            lo = hi + 1;
        }
    }
    primes
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|s| s <= n) {
        r += 1;
    }
    r
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard rho; `n` must be odd and composite.
fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut ys = y;
        let mut r = 1u64;
        const BATCH: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// Factorizes `n ≥ 1` by trial division, finishing large cofactors with
/// Miller-Rabin and Pollard rho.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::domain("cannot factorize 0"));
    }
    let mut rest = n;
    let mut factors = Vec::new();
    for p in [2u64, 3, 5] {
        if rest % p == 0 {
            let mut e = 0;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    // Wheel of 30 up to 2^12; beyond that switch to rho.
    const WHEEL: [u64; 8] = [7, 11, 13, 17, 19, 23, 29, 31];
    let mut base = 0u64;
    'trial: while base < 4096 {
        for w in WHEEL {
            let p = base + w;
            if p * p > rest {
                break 'trial;
            }
            if rest % p == 0 {
                let mut e = 0;
                while rest % p == 0 {
                    rest /= p;
                    e += 1;
                }
                factors.push((p, e));
            }
        }
        base += 30;
    }
    if rest > 1 {
        let mut big = Vec::new();
        split_into(rest, &mut big);
        big.sort_unstable();
        for p in big {
            match factors.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => factors.push((p, 1)),
            }
        }
    }
    Ok(Factorization { n, factors })
}

pub fn mobius(n: u64) -> Result<i8> {
    Ok(factorize(n)?.mobius())
}

pub fn divisor_count(n: u64) -> Result<u64> {
    Ok(factorize(n)?.divisor_count())
}

/// Inverse of `a` modulo `c`, in `[0, c)`. For `c = 1` the answer is 0.
pub fn mod_inverse(a: i64, c: u64) -> Result<u64> {
    if c == 0 {
        return Err(Error::domain("modulus must be positive"));
    }
    let a = (a as i128).rem_euclid(c as i128);
    let (mut r0, mut r1) = (c as i128, a);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return Err(Error::domain(format!(
            "{a} is not invertible modulo {c} (gcd {r0})"
        )));
    }
    Ok(s0.rem_euclid(c as i128) as u64)
}

/// Inverse modulo `c` for operands already known to be coprime to `c`.
#[inline]
pub(crate) fn inverse_unit(a: u64, c: u64) -> u64 {
    let (mut r0, mut r1) = (c as i64, (a % c) as i64);
    let (mut s0, mut s1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    debug_assert!(r0 == 1 || c == 1);
    s0.rem_euclid(c as i64) as u64
}

/// `Σ_{p ≤ x} 1/p`, compensated.
pub fn mertens_sum(x: f64) -> f64 {
    mertens_sum_coprime(x, 1)
}

/// `Σ_{p ≤ x, p ∤ q} 1/p`, compensated.
pub fn mertens_sum_coprime(x: f64, q: u64) -> f64 {
    if !(x >= 2.0) {
        return 0.0;
    }
    sieve_primes(x.floor() as u64)
        .into_iter()
        .filter(|&p| q % p != 0)
        .map(|p| 1.0 / p as f64)
        .collect::<CompensatedSum>()
        .value()
}

/// Factorizations of every integer in `[lo, hi)` produced block by block.
///
/// The callback receives each `n` together with its prime factorization.
pub fn for_each_factorization<F>(lo: u64, hi: u64, mut f: F)
where
    F: FnMut(u64, &[(u64, u32)]),
{
    if hi <= lo {
        return;
    }
    let lo = lo.max(1);
    let primes = sieve_primes(isqrt(hi) + 1);
    const BLOCK: u64 = 1 << 15;
    let mut rest = Vec::with_capacity(BLOCK as usize);
    let mut lists: Vec<Vec<(u64, u32)>> = vec![Vec::new(); BLOCK as usize];
    let mut start = lo;
    while start < hi {
        let end = (start + BLOCK).min(hi);
        let len = (end - start) as usize;
        rest.clear();
        rest.extend(start..end);
        for l in lists.iter_mut().take(len) {
            l.clear();
        }
        for &p in &primes {
            if p * p >= end {
                break;
            }
            let first = start.div_ceil(p) * p;
            let mut m = first;
            while m < end {
                let i = (m - start) as usize;
                let mut e = 0;
                while rest[i] % p == 0 {
                    rest[i] /= p;
                    e += 1;
                }
                lists[i].push((p, e));
                m += p;
            }
        }
        for i in 0..len {
            if rest[i] > 1 {
                lists[i].push((rest[i], 1));
            }
            f(start + i as u64, &lists[i]);
        }
        start = end;
    }
}

/// Smallest-prime-factor table for `0..=limit`.
pub(crate) fn spf_table(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    for i in 2..=limit {
        if spf[i] == 0 {
            let mut j = i;
            while j <= limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

pub(crate) fn factor_with_spf(mut n: u64, spf: &[u32]) -> Factorization {
    let n0 = n;
    let mut factors: Vec<(u64, u32)> = Vec::new();
    while n > 1 {
        let p = spf[n as usize] as u64;
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        factors.push((p, e));
    }
    Factorization::from_parts_unchecked(n0, factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_small_cases() {
        assert_eq!(sieve_primes(10), vec![2, 3, 5, 7]);
        assert_eq!(sieve_primes(2), vec![2]);
        assert!(sieve_primes(1).is_empty());
        assert_eq!(sieve_primes(3), vec![2, 3]);
    }

    #[test]
    fn sieve_matches_trial_division_across_segment_boundaries() {
        let limit = (1u64 << 19) + 1001;
        let sieved = sieve_primes(limit);
        let naive: Vec<u64> = (2..=limit)
            .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect();
        assert_eq!(sieved, naive);
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors().is_empty());
        assert_eq!(factorize(12).unwrap().factors(), &[(2, 2), (3, 1)]);
        assert_eq!(
            factorize(9_999_999_967).unwrap().factors(),
            &[(9_999_999_967, 1)]
        );
        assert!(factorize(0).is_err());
        // Semiprime with two large factors forces the rho path.
        let n = 4_294_967_291u64 * 4_294_967_279;
        assert_eq!(
            factorize(n).unwrap().factors(),
            &[(4_294_967_279, 1), (4_294_967_291, 1)]
        );
    }

    #[test]
    fn multiplicative_functions() {
        assert_eq!(mobius(1).unwrap(), 1);
        assert_eq!(mobius(12).unwrap(), 0);
        assert_eq!(mobius(30).unwrap(), -1);
        assert_eq!(divisor_count(12).unwrap(), 6);
        assert_eq!(gcd(0, 5), 5);
        assert_eq!(factorize(360).unwrap().divisors().len(), 24);
    }

    #[test]
    fn inverses() {
        assert_eq!(mod_inverse(1, 7).unwrap(), 1);
        assert_eq!(mod_inverse(2, 5).unwrap(), 3);
        let v = mod_inverse(314, 10007).unwrap();
        assert_eq!(314 * v % 10007, 1);
        assert_eq!(mod_inverse(-3, 7).unwrap(), 2);
        assert!(mod_inverse(6, 9).is_err());
        assert_eq!(inverse_unit(314, 10007), v);
    }

    #[test]
    fn mertens_examples() {
        assert_eq!(mertens_sum(2.0), 0.5);
        let ten = 0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0;
        assert!((mertens_sum(10.0) - ten).abs() < 1e-15);
        assert!((mertens_sum(100.0) - 1.802_817_2).abs() < 1e-6);
        assert!((mertens_sum_coprime(10.0, 6) - (0.2 + 1.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn range_factorizer_agrees_with_factorize() {
        let mut seen = 0;
        for_each_factorization(999_000, 1_001_000, |n, fs| {
            assert_eq!(fs, factorize(n).unwrap().factors(), "n = {n}");
            seen += 1;
        });
        assert_eq!(seen, 2000);
    }

    #[test]
    fn factorization_validation() {
        assert!(Factorization::from_parts(12, vec![(2, 2), (3, 1)]).is_ok());
        assert!(Factorization::from_parts(12, vec![(3, 1), (2, 2)]).is_err());
        assert!(Factorization::from_parts(12, vec![(2, 1), (3, 1)]).is_err());
        assert!(Factorization::from_parts(12, vec![(4, 1), (3, 1)]).is_err());
    }
}
