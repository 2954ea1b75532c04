//! The Kloosterman–Bessel c-sum of the Petersson formula,
//! `Σ_{c ≤ C, q | c} S(m, n; c)/c · J_{k−1}(4π√(mn)/c)`, for many `(m, n)` at once.
//!
//! Every `c ≤ C` has at most one prime-power factor above `B = ⌊√C⌋ + 1`.
//! Moduli built only from prime powers `≤ B` ("smooth" c) use cached tables
//! `t ↦ S(t, 1; P)`. The remaining c are grouped by their large prime power
//! `P` and written `c = P s` with `s < B`; each group makes one pass over the
//! residues mod `P` (or one DFT when the group is large).
//!
//! Summation order is fixed: smooth c ascending, then groups by ascending `P`
//! with `s` ascending inside a group. Partial sums are compensated and merged
//! in that order, so results do not depend on the thread count.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::arith::{self, factor_with_spf, inverse_unit, isqrt, Factorization};
use crate::bessel::bessel_j_unchecked;
use crate::kloosterman::{direct_sum, PrimePowerModulus};
use crate::sum::CompensatedSum;

/// Table `t ↦ S(t, 1; P)` for a small prime power.
struct SmallTable {
    prime: u64,
    values: Vec<f64>,
}

struct Context<'a> {
    order: u32,
    pairs: &'a [(u64, u64)],
    sqrt_mn: Vec<f64>,
    small: Vec<Option<SmallTable>>,
}

impl Context<'_> {
    /// `S(m ū, n ū; P)` for a small prime power `P` exactly dividing `c`,
    /// where `ū` inverts `c/P` modulo `P`.
    #[inline]
    fn small_factor(&self, modulus: u64, ubar: u64, m: u64, n: u64) -> f64 {
        let table = self.small[modulus as usize]
            .as_ref()
            .expect("table for every small prime power");
        let x = mulm(m % modulus, ubar, modulus);
        let y = mulm(n % modulus, ubar, modulus);
        if x % table.prime != 0 || y % table.prime != 0 {
            table.values[mulm(x, y, modulus) as usize]
        } else {
            direct_sum(x, y, modulus)
        }
    }

    #[inline]
    fn add_term(&self, acc: &mut CompensatedSum, pair: usize, c: u64, s_value: f64) {
        if s_value == 0.0 {
            return;
        }
        let x = 4.0 * PI * self.sqrt_mn[pair] / c as f64;
        acc.add(s_value / c as f64 * bessel_j_unchecked(self.order, x));
    }
}

#[inline]
fn mulm(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Threshold (in uses per residue-pass) above which a full DFT table is cheaper.
fn prefer_table(uses: usize, modulus: u64) -> bool {
    uses as f64 > 3.0 * (modulus as f64).log2()
}

/// Σ over `c ≤ c_max` with `q | c` for each pair; order `k − 1` Bessel weight.
pub(crate) fn kloosterman_bessel_sums(
    q: u64,
    k: u32,
    c_max: u64,
    pairs: &[(u64, u64)],
) -> Vec<f64> {
    let r_max = c_max / q.max(1);
    if r_max == 0 || pairs.is_empty() {
        return vec![0.0; pairs.len()];
    }
    let bound = isqrt(c_max) + 1;
    let q_fact = arith::factorize(q).expect("q ≥ 1");

    // Small prime powers.
    let small_moduli: Vec<(u64, u32)> = arith::sieve_primes(bound)
        .into_iter()
        .flat_map(|p| {
            let mut v = Vec::new();
            let mut pe = p;
            let mut e = 1;
            while pe <= bound {
                v.push((p, e));
                pe *= p;
                e += 1;
            }
            v
        })
        .collect();
    let built: Vec<(u64, SmallTable)> = small_moduli
        .par_iter()
        .map(|&(p, e)| {
            let pp = PrimePowerModulus::new(p, e);
            let mut planner = FftPlanner::new();
            let values = pp.table_t1(&mut planner);
            (pp.modulus, SmallTable { prime: p, values })
        })
        .collect();
    let mut small: Vec<Option<SmallTable>> = (0..=bound).map(|_| None).collect();
    for (modulus, t) in built {
        small[modulus as usize] = Some(t);
    }
    let ctx = Context {
        order: k - 1,
        pairs,
        sqrt_mn: pairs
            .iter()
            .map(|&(m, n)| ((m as f64) * (n as f64)).sqrt())
            .collect(),
        small,
    };

    let mut totals: Vec<CompensatedSum> = vec![CompensatedSum::new(); pairs.len()];

    // Smooth c, in blocks of r.
    const BLOCK: u64 = 1 << 14;
    let blocks: Vec<(u64, u64)> = (0..r_max.div_ceil(BLOCK))
        .map(|b| (1 + b * BLOCK, (1 + (b + 1) * BLOCK).min(r_max + 1)))
        .collect();
    let smooth_parts: Vec<Vec<CompensatedSum>> = blocks
        .par_iter()
        .map(|&(lo, hi)| smooth_block(&ctx, &q_fact, bound, lo, hi))
        .collect();
    for part in &smooth_parts {
        for (t, p) in totals.iter_mut().zip(part) {
            t.merge(p);
        }
    }

    // Large prime powers P > bound, each with its cofactors s.
    let spf = arith::spf_table(bound as usize);
    let mut large: Vec<(u64, u32)> = Vec::new();
    for p in arith::sieve_primes(c_max) {
        let mut pe = p;
        let mut e = 1;
        loop {
            if pe > bound {
                large.push((p, e));
            }
            match pe.checked_mul(p) {
                Some(next) if next <= c_max => {
                    pe = next;
                    e += 1;
                }
                _ => break,
            }
        }
    }
    large.sort_unstable_by_key(|&(p, e)| p.pow(e));
    const CHUNK: usize = 2048;
    for chunk in large.chunks(CHUNK) {
        let parts: Vec<Option<Vec<CompensatedSum>>> = chunk
            .par_iter()
            .map(|&(p, e)| large_group(&ctx, &q_fact, &spf, c_max, p, e))
            .collect();
        for part in parts.iter().flatten() {
            for (t, p) in totals.iter_mut().zip(part) {
                t.merge(p);
            }
        }
    }
    totals.iter().map(|t| t.value()).collect()
}

fn smooth_block(
    ctx: &Context,
    q_fact: &Factorization,
    bound: u64,
    lo: u64,
    hi: u64,
) -> Vec<CompensatedSum> {
    let mut acc = vec![CompensatedSum::new(); ctx.pairs.len()];
    let q = q_fact.n();
    let mut powers: Vec<(u64, u64)> = Vec::new();
    arith::for_each_factorization(lo, hi, |r, r_factors| {
        let r_fact = Factorization::from_parts_unchecked(r, r_factors.to_vec());
        let c_fact = q_fact.mul(&r_fact);
        let c = q * r;
        powers.clear();
        for &(p, e) in c_fact.factors() {
            let pe = p.pow(e);
            if pe > bound {
                return;
            }
            powers.push((pe, inverse_unit((c / pe) % pe, pe)));
        }
        for (i, &(m, n)) in ctx.pairs.iter().enumerate() {
            let mut s = 1.0;
            for &(pe, ubar) in &powers {
                s *= ctx.small_factor(pe, ubar, m, n);
                if s == 0.0 {
                    break;
                }
            }
            ctx.add_term(&mut acc[i], i, c, s);
        }
    });
    acc
}

fn large_group(
    ctx: &Context,
    q_fact: &Factorization,
    spf: &[u32],
    c_max: u64,
    p: u64,
    e: u32,
) -> Option<Vec<CompensatedSum>> {
    let modulus = p.pow(e);
    let v = q_fact.valuation(p);
    if v > e {
        return None;
    }
    let q_rest = q_fact.n() / p.pow(v);
    let s_max = c_max / modulus;
    // Cofactors s: multiples of q_rest, coprime to p.
    let cofactors: Vec<u64> = (1..=s_max / q_rest)
        .map(|t| t * q_rest)
        .filter(|s| s % p != 0)
        .collect();
    if cofactors.is_empty() {
        return None;
    }
    let npairs = ctx.pairs.len();
    // For each (s, pair): the product over the small part, and the residue
    // t = m n ū² (mod P) feeding S(t, 1; P), or a flag for the degenerate case.
    let mut small_part = vec![0.0f64; cofactors.len() * npairs];
    let mut residues = vec![0u64; cofactors.len() * npairs];
    let mut degenerate = vec![None::<(u64, u64)>; cofactors.len() * npairs];
    let mut powers: Vec<(u64, u64)> = Vec::new();
    for (si, &s) in cofactors.iter().enumerate() {
        let s_fact = factor_with_spf(s, spf);
        let c = modulus * s;
        powers.clear();
        powers.extend(
            s_fact
                .prime_powers()
                .map(|pe| (pe, inverse_unit((c / pe) % pe, pe))),
        );
        let ubar = inverse_unit(s % modulus, modulus);
        for (i, &(m, n)) in ctx.pairs.iter().enumerate() {
            let idx = si * npairs + i;
            let mut sp = 1.0;
            for &(pe, pbar) in &powers {
                sp *= ctx.small_factor(pe, pbar, m, n);
            }
            small_part[idx] = sp;
            let x = mulm(m % modulus, ubar, modulus);
            let y = mulm(n % modulus, ubar, modulus);
            if x % p != 0 || y % p != 0 {
                residues[idx] = mulm(x, y, modulus);
            } else {
                degenerate[idx] = Some((x, y));
            }
        }
    }
    let pp = PrimePowerModulus::new(p, e);
    let live: Vec<usize> = (0..small_part.len())
        .filter(|&i| small_part[i] != 0.0 && degenerate[i].is_none())
        .collect();
    let mut big_part = vec![0.0f64; small_part.len()];
    if prefer_table(live.len(), modulus) {
        let mut planner = FftPlanner::new();
        let table = pp.table_t1(&mut planner);
        for &i in &live {
            big_part[i] = table[residues[i] as usize];
        }
    } else if !live.is_empty() {
        let ts: Vec<u64> = live.iter().map(|&i| residues[i]).collect();
        let mut out = vec![0.0; ts.len()];
        pp.sums_t1(&ts, &mut out);
        for (&i, v) in live.iter().zip(out) {
            big_part[i] = v;
        }
    }
    for (i, d) in degenerate.iter().enumerate() {
        if let Some((x, y)) = *d {
            if small_part[i] != 0.0 {
                big_part[i] = pp.sum_general(x, y);
            }
        }
    }
    let mut acc = vec![CompensatedSum::new(); npairs];
    for (si, &s) in cofactors.iter().enumerate() {
        let c = modulus * s;
        for (i, a) in acc.iter_mut().enumerate() {
            let idx = si * npairs + i;
            ctx.add_term(a, i, c, small_part[idx] * big_part[idx]);
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::kloosterman::kloosterman;

    fn naive(q: u64, k: u32, c_max: u64, m: u64, n: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        let mut c = q;
        while c <= c_max {
            let s = kloosterman(m, n, c).unwrap();
            let x = 4.0 * PI * ((m * n) as f64).sqrt() / c as f64;
            acc.add(s / c as f64 * bessel_j(k - 1, x).unwrap());
            c += q;
        }
        acc.value()
    }

    #[test]
    fn agrees_with_naive_sum() {
        let pairs = [(1, 1), (1, 2), (2, 3), (4, 4), (3, 9), (6, 10), (25, 5)];
        for (q, k, c_max) in [(1, 2, 3000), (1, 12, 2000), (11, 2, 5000), (12, 4, 4000), (49, 2, 6000)] {
            let fast = kloosterman_bessel_sums(q, k, c_max, &pairs);
            for (i, &(m, n)) in pairs.iter().enumerate() {
                let want = naive(q, k, c_max, m, n);
                assert!(
                    (fast[i] - want).abs() < 1e-11,
                    "q={q} k={k} ({m},{n}): {} vs {want}",
                    fast[i]
                );
            }
        }
    }

    #[test]
    fn empty_when_cmax_below_level() {
        assert_eq!(kloosterman_bessel_sums(100, 2, 99, &[(1, 1)]), vec![0.0]);
    }
}
