//! Classical Kloosterman sums `S(m, n; c) = Σ_{a (c)*} e((a m + ā n)/c)`.
//!
//! The direct evaluator is the reference. The prime-power machinery below it
//! (inverse tables, phase tables, FFT tables of `t ↦ S(t, 1; P)`) backs the
//! long c-sums in [`crate::trace`].

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::arith::{self, factorize, gcd, inverse_unit, Factorization};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Direct evaluation of `S(m, n; c)`.
pub fn kloosterman(m: u64, n: u64, c: u64) -> Result<f64> {
    check_args(m, n, c)?;
    Ok(direct_sum(m % c, n % c, c))
}

/// `S(m, n; c)` via twisted multiplicativity over the prime powers of `c`.
///
/// For `c = P u` with `gcd(P, u) = 1`, `S(m, n; c) = S(m ū, n ū; P) S(m P̄, n P̄; u)`
/// where bars are inverses modulo the other factor.
pub fn kloosterman_fast(m: u64, n: u64, c: u64, fact: &Factorization) -> Result<f64> {
    check_args(m, n, c)?;
    if fact.n() != c {
        return Err(Error::domain(format!(
            "factorization is of {}, not of {c}",
            fact.n()
        )));
    }
    let mut value = 1.0;
    for modulus in fact.prime_powers() {
        let ubar = inverse_unit((c / modulus) % modulus, modulus);
        let x = mul_small(m % modulus, ubar, modulus);
        let y = mul_small(n % modulus, ubar, modulus);
        value *= direct_sum(x, y, modulus);
    }
    Ok(value)
}

/// Weil's bound `d(c) √gcd(m, n, c) √c`.
pub fn weil_bound(m: u64, n: u64, c: u64) -> Result<f64> {
    check_args(m, n, c)?;
    let d = factorize(c)?.divisor_count() as f64;
    let g = gcd(gcd(m, n), c) as f64;
    Ok(d * g.sqrt() * (c as f64).sqrt())
}

fn check_args(m: u64, n: u64, c: u64) -> Result<()> {
    if m == 0 || n == 0 || c == 0 {
        return Err(Error::domain(format!(
            "Kloosterman sum needs m, n, c ≥ 1 (got {m}, {n}, {c})"
        )));
    }
    Ok(())
}

#[inline]
fn mul_small(a: u64, b: u64, modulus: u64) -> u64 {
    ((a as u128 * b as u128) % modulus as u128) as u64
}

/// Largest modulus whose unit inverses are built by batch inversion.
const BATCH_INVERSE_LIMIT: u64 = 1 << 22;

/// Reference sum for arbitrary residues `m, n` (zero allowed).
///
/// The terms for `a` and `−a` are complex conjugates, so only `a < c/2` is visited.
pub(crate) fn direct_sum(m: u64, n: u64, c: u64) -> f64 {
    if c <= 2 {
        // a = 0 for c = 1, a = 1 for c = 2: phase (m + n)/c.
        return if c == 1 || (m + n) % 2 == 0 { 1.0 } else { -1.0 };
    }
    let primes: Vec<u64> = factorize(c)
        .expect("c ≥ 1")
        .factors()
        .iter()
        .map(|&(p, _)| p)
        .collect();
    let units: Vec<u64> = (1..=(c - 1) / 2)
        .filter(|a| primes.iter().all(|p| a % p != 0))
        .collect();
    let inverses = if c <= BATCH_INVERSE_LIMIT {
        batch_inverses(&units, c)
    } else {
        units.iter().map(|&a| inverse_unit(a, c)).collect()
    };
    let mut re = CompensatedSum::new();
    #[cfg(debug_assertions)]
    let mut im = CompensatedSum::new();
    for (&a, &abar) in units.iter().zip(&inverses) {
        let phase = ((a as u128 * m as u128 + abar as u128 * n as u128) % c as u128) as f64;
        let angle = TAU * phase / c as f64;
        re.add(2.0 * angle.cos());
        #[cfg(debug_assertions)]
        {
            let mirrored = (((c - a) as u128 * m as u128 + (c - abar) as u128 * n as u128) % c as u128) as f64;
            im.add(angle.sin() + (TAU * mirrored / c as f64).sin());
        }
    }
    #[cfg(debug_assertions)]
    debug_assert!(
        im.value().abs() < 1e-12 * (c as f64).max(1.0),
        "imaginary part of S({m}, {n}; {c}) = {}",
        im.value()
    );
    re.value()
}

/// Inverses of units modulo `c` from prefix products and a single extended Euclid.
fn batch_inverses(units: &[u64], c: u64) -> Vec<u64> {
    if units.is_empty() {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(units.len());
    let mut acc = 1u64;
    for &a in units {
        acc = mul_small(acc, a, c);
        prefix.push(acc);
    }
    let mut inv = inverse_unit(acc, c);
    let mut out = vec![0; units.len()];
    for i in (0..units.len()).rev() {
        out[i] = if i == 0 { inv } else { mul_small(inv, prefix[i - 1], c) };
        inv = mul_small(inv, units[i], c);
    }
    out
}

/// `cos(2π r / P)` for integer `r ∈ [0, P)` from two short tables.
#[derive(Debug, Clone)]
pub(crate) struct PhaseTable {
    hi: Vec<(f64, f64)>,
    lo: Vec<(f64, f64)>,
}

const LO_BITS: u32 = 10;
const LO_MASK: u64 = (1 << LO_BITS) - 1;

impl PhaseTable {
    pub(crate) fn new(modulus: u64) -> Self {
        let p = modulus as f64;
        let lo = (0..=LO_MASK)
            .map(|l| {
                let t = TAU * (l as f64 / p);
                (t.cos(), t.sin())
            })
            .collect();
        let hi = (0..=(modulus >> LO_BITS))
            .map(|h| {
                let t = TAU * (((h << LO_BITS) % modulus) as f64 / p);
                (t.cos(), t.sin())
            })
            .collect();
        Self { hi, lo }
    }

    #[inline(always)]
    pub(crate) fn cos(&self, r: u64) -> f64 {
        let (hc, hs) = self.hi[(r >> LO_BITS) as usize];
        let (lc, ls) = self.lo[(r & LO_MASK) as usize];
        hc * lc - hs * ls
    }

    #[inline(always)]
    pub(crate) fn exp(&self, r: u64) -> (f64, f64) {
        let (hc, hs) = self.hi[(r >> LO_BITS) as usize];
        let (lc, ls) = self.lo[(r & LO_MASK) as usize];
        (hc * lc - hs * ls, hs * lc + hc * ls)
    }
}

/// Multiplication modulo `m < 2^32` without a hardware division.
#[derive(Debug, Clone, Copy)]
struct FastMod {
    m: u64,
    /// `⌊2^64 / m⌋`.
    magic: u64,
}

impl FastMod {
    fn new(m: u64) -> Self {
        Self {
            m,
            magic: u64::MAX / m,
        }
    }

    /// `a b mod m` for `a, b < m < 2^32` (Barrett; the estimate is off by at most one).
    #[inline(always)]
    fn mul(&self, a: u64, b: u64) -> u64 {
        let prod = a * b;
        let q = ((prod as u128 * self.magic as u128) >> 64) as u64;
        let r = prod - q * self.m;
        if r >= self.m {
            r - self.m
        } else {
            r
        }
    }
}

const NOT_A_UNIT: u32 = u32::MAX;

fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let phi = factorize(p - 1).expect("p - 1 ≥ 1");
    (2..p)
        .find(|&g| {
            phi.factors()
                .iter()
                .all(|&(q, _)| arith::pow_mod(g, (p - 1) / q, p) != 1)
        })
        .expect("prime modulus has a primitive root")
}

/// Residue data for a prime modulus: the powers `g^j` of a primitive root.
///
/// With `a = g^j`, `ā = g^{−j}` and `t a = g^{j + ind t}` are plain reads from
/// the same array, so sums over units need no modular multiplication.
#[derive(Debug, Clone)]
struct PrimitivePowers {
    powers: Vec<u32>,
    /// Baby steps `(g^j, j)` for `j < step`, sorted by value.
    baby: Vec<(u32, u32)>,
    step: u32,
    /// `g^{−step}`.
    giant: u64,
}

impl PrimitivePowers {
    fn new(p: u64) -> Self {
        let g = primitive_root(p);
        let fm = FastMod::new(p);
        let order = (p - 1) as usize;
        // Eight interleaved chains keep the multiplications independent.
        const LANES: usize = 8;
        let mut powers = vec![0u32; order];
        let mut x = 1u64;
        for slot in powers.iter_mut().take(LANES) {
            *slot = x as u32;
            x = fm.mul(x, g);
        }
        let stride = x;
        for j in LANES..order {
            powers[j] = fm.mul(powers[j - LANES] as u64, stride) as u32;
        }
        let step = ((order as f64).sqrt().ceil() as u32).max(1);
        let mut baby: Vec<(u32, u32)> = (0..step.min(order as u32))
            .map(|j| (powers[j as usize], j))
            .collect();
        baby.sort_unstable();
        let giant = powers[(order - step as usize % order) % order] as u64;
        Self {
            powers,
            baby,
            step,
            giant,
        }
    }

    /// Discrete logarithm of a unit `x` to base `g`.
    fn log(&self, x: u64, p: u64) -> u64 {
        let order = p - 1;
        let mut y = x;
        for i in 0..=self.step as u64 {
            if let Ok(pos) = self.baby.binary_search_by_key(&(y as u32), |b| b.0) {
                return (i * self.step as u64 + self.baby[pos].1 as u64) % order;
            }
            y = mul_small(y, self.giant, p);
        }
        unreachable!("{x} is not a unit modulo {p}")
    }
}

#[derive(Debug, Clone)]
enum Units {
    Prime(PrimitivePowers),
    /// Inverse table for a higher prime power; `NOT_A_UNIT` marks multiples of p.
    Power(Vec<u32>),
}

/// Arithmetic data for one prime-power modulus `P = p^e`.
#[derive(Debug, Clone)]
pub(crate) struct PrimePowerModulus {
    pub(crate) modulus: u64,
    pub(crate) prime: u64,
    units: Units,
    pub(crate) phase: PhaseTable,
}

impl PrimePowerModulus {
    pub(crate) fn new(prime: u64, exponent: u32) -> Self {
        let modulus = prime.pow(exponent);
        assert!(modulus < (1 << 31), "prime power {modulus} too large");
        let units = if exponent == 1 {
            Units::Prime(PrimitivePowers::new(prime))
        } else {
            let mut inv = vec![NOT_A_UNIT; modulus as usize];
            for a in 1..modulus {
                if a % prime != 0 {
                    inv[a as usize] = inverse_unit(a, modulus) as u32;
                }
            }
            Units::Power(inv)
        };
        Self {
            modulus,
            prime,
            units,
            phase: PhaseTable::new(modulus),
        }
    }

    /// Inverse of every residue (`NOT_A_UNIT` for non-units), indexed by residue.
    fn inverse_table(&self) -> Vec<u32> {
        match &self.units {
            Units::Power(inv) => inv.clone(),
            Units::Prime(pp) => {
                let p = self.modulus as usize;
                let order = p - 1;
                let mut inv = vec![NOT_A_UNIT; p];
                for j in 0..order {
                    inv[pp.powers[j] as usize] = pp.powers[(order - j) % order];
                }
                inv
            }
        }
    }

    /// `S(t, 1; P)` for each `t` in `ts` (residues mod `P`), written to `out`.
    pub(crate) fn sums_t1(&self, ts: &[u64], out: &mut [f64]) {
        let p = self.modulus;
        if p <= 2 {
            for (o, &t) in out.iter_mut().zip(ts) {
                *o = direct_sum(t, 1, p);
            }
            return;
        }
        match &self.units {
            Units::Prime(pp) => {
                for (o, &t) in out.iter_mut().zip(ts) {
                    *o = if t % p == 0 {
                        // Ramanujan sum c_p(1).
                        -1.0
                    } else {
                        self.prime_sum(pp, pp.log(t % p, p) as usize)
                    };
                }
            }
            Units::Power(inv) => {
                // a and P − a contribute equally.
                let half = ((p - 1) / 2) as usize;
                let p32 = p as u32;
                for (o, &t) in out.iter_mut().zip(ts) {
                    let t = (t % p) as u32;
                    let mut x = 0u32;
                    let mut acc = 0.0;
                    for &ia in &inv[1..=half] {
                        x += t;
                        if x >= p32 {
                            x -= p32;
                        }
                        if ia == NOT_A_UNIT {
                            continue;
                        }
                        let mut r = x + ia;
                        if r >= p32 {
                            r -= p32;
                        }
                        acc += self.phase.cos(r as u64);
                    }
                    *o = 2.0 * acc;
                }
            }
        }
    }

    /// `Σ_j cos(2π (g^{j+L} + g^{−j}) / p)`, using that `j` and `j + (p−1)/2`
    /// give negated phases.
    fn prime_sum(&self, pp: &PrimitivePowers, shift: usize) -> f64 {
        let x = &pp.powers;
        let order = x.len();
        let half = order / 2;
        let p32 = self.modulus as u32;
        let mut acc = [0.0f64; 2];
        let mut f = shift;
        // j = 0: g^L + 1.
        let mut r = x[f] + 1;
        if r >= p32 {
            r -= p32;
        }
        acc[0] += self.phase.cos(r as u64);
        for j in 1..half {
            f += 1;
            if f == order {
                f = 0;
            }
            let mut r = x[f] + x[order - j];
            if r >= p32 {
                r -= p32;
            }
            acc[j & 1] += self.phase.cos(r as u64);
        }
        2.0 * (acc[0] + acc[1])
    }

    /// `S(x, y; P)` for arbitrary residues.
    pub(crate) fn sum_general(&self, x: u64, y: u64) -> f64 {
        let p = self.modulus;
        if x % self.prime != 0 || y % self.prime != 0 {
            let mut out = [0.0];
            self.sums_t1(&[mul_small(x, y, p)], &mut out);
            return out[0];
        }
        direct_sum(x, y, p)
    }

    /// Full table `t ↦ S(t, 1; P)` for `t ∈ [0, P)`.
    pub(crate) fn table_t1(&self, planner: &mut FftPlanner<f64>) -> Vec<f64> {
        let p = self.modulus;
        if p <= 48 {
            let ts: Vec<u64> = (0..p).collect();
            let mut out = vec![0.0; p as usize];
            self.sums_t1(&ts, &mut out);
            return out;
        }
        // S(t, 1; P) = Σ_a g[a] e(a t / P) with g[a] = e(ā / P): one inverse DFT.
        let mut buf: Vec<Complex64> = self
            .inverse_table()
            .iter()
            .map(|&ia| {
                if ia == NOT_A_UNIT {
                    Complex64::new(0.0, 0.0)
                } else {
                    let (c, s) = self.phase.exp(ia as u64);
                    Complex64::new(c, s)
                }
            })
            .collect();
        let fft: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_inverse(p as usize);
        fft.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert!((kloosterman(1, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((kloosterman(1, 1, 3).unwrap() + 1.0).abs() < 1e-12);
        assert!((kloosterman(1, 1, 4).unwrap() + 2.0).abs() < 1e-12);
        assert!(kloosterman(0, 1, 3).is_err());
    }

    #[test]
    fn fast_path_matches_direct() {
        for (m, n, c) in [(1, 1, 6), (1, 1, 101), (2, 3, 35), (4, 6, 72), (9, 3, 243)] {
            let f = factorize(c).unwrap();
            let fast = kloosterman_fast(m, n, c, &f).unwrap();
            let direct = kloosterman(m, n, c).unwrap();
            assert!((fast - direct).abs() < 1e-10, "({m},{n},{c})");
        }
        let wrong = factorize(10).unwrap();
        assert!(kloosterman_fast(1, 1, 12, &wrong).is_err());
    }

    #[test]
    fn prime_power_tables_agree_with_direct() {
        let mut planner = FftPlanner::new();
        for (p, e) in [(2, 1), (2, 3), (3, 4), (5, 2), (7, 1), (53, 1), (1009, 1), (31, 2)] {
            let pp = PrimePowerModulus::new(p, e);
            let modulus = pp.modulus;
            let table = pp.table_t1(&mut planner);
            let ts: Vec<u64> = (0..modulus.min(60)).collect();
            let mut out = vec![0.0; ts.len()];
            pp.sums_t1(&ts, &mut out);
            for &t in &ts {
                let d = direct_sum(t, 1, modulus);
                assert!((table[t as usize] - d).abs() < 1e-9, "P={modulus} t={t}");
                assert!((out[t as usize] - d).abs() < 1e-9, "P={modulus} t={t}");
            }
            for (x, y) in [(0, 0), (p, 2 * p % modulus), (1, 0), (0, 3)] {
                let d = direct_sum(x % modulus, y % modulus, modulus);
                assert!((pp.sum_general(x % modulus, y % modulus) - d).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phase_table_accuracy() {
        let m = 999_983;
        let t = PhaseTable::new(m);
        for r in [0, 1, 12345, 500_000, 999_982] {
            let exact = (TAU * r as f64 / m as f64).cos();
            assert!((t.cos(r) - exact).abs() < 2e-15);
        }
    }
}
