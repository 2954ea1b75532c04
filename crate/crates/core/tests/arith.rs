use lvalue_lab::arith::*;
use proptest::prelude::*;

/// Plain sieve of Eratosthenes.
fn eratosthenes(n: usize) -> Vec<u64> {
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

#[test]
fn sieve_examples() {
    assert_eq!(sieve_primes(10), vec![2, 3, 5, 7]);
    assert_eq!(sieve_primes(2), vec![2]);
    assert!(sieve_primes(1).is_empty());
    let big = sieve_primes(1_000_000);
    assert_eq!(big.len(), 78498);
    assert_eq!(big, eratosthenes(1_000_000));
}

#[test]
fn factorize_examples() {
    assert!(factorize(1).unwrap().factors().is_empty());
    assert_eq!(factorize(12).unwrap().factors(), &[(2, 2), (3, 1)]);
    assert_eq!(factorize(9_999_999_967).unwrap().factors(), &[(9_999_999_967, 1)]);
    // Trial division confirms primality.
    let n = 9_999_999_967u64;
    assert!((2..=isqrt(n)).all(|d| n % d != 0));
    assert!(factorize(0).is_err());
}

#[test]
fn multiplicative_function_examples() {
    assert_eq!(mobius(1).unwrap(), 1);
    assert_eq!(mobius(12).unwrap(), 0);
    assert_eq!(mobius(30).unwrap(), -1);
    assert_eq!(divisor_count(12).unwrap(), 6);
    assert_eq!(gcd(12, 18), 6);
    assert_eq!(gcd(0, 5), 5);
}

#[test]
fn inverse_examples() {
    assert_eq!(mod_inverse(1, 7).unwrap(), 1);
    assert_eq!(mod_inverse(2, 5).unwrap(), 3);
    let v = mod_inverse(314, 10007).unwrap();
    assert_eq!(314 * v % 10007, 1);
    assert!(mod_inverse(6, 9).is_err());
    assert_eq!(mod_inverse(-1, 7).unwrap(), 6);
}

#[test]
fn mertens_examples_and_band() {
    assert_eq!(mertens_sum(2.0), 0.5);
    assert!((mertens_sum(10.0) - (0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0)).abs() < 1e-15);
    let direct: f64 = eratosthenes(100).iter().map(|&p| 1.0 / p as f64).sum();
    assert!((mertens_sum(100.0) - direct).abs() < 1e-14);
    assert!((mertens_sum(100.0) - 1.802_817).abs() < 1e-6);
    for e in 1..=7 {
        let x = 10f64.powi(e);
        assert!((mertens_sum(x) - x.ln().ln()).abs() <= 1.0, "x = {x}");
    }
    assert!((mertens_sum_coprime(100.0, 6) - (mertens_sum(100.0) - 0.5 - 1.0 / 3.0)).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn factorization_reconstructs(n in 1u64..=1_000_000_000) {
        let f = factorize(n).unwrap();
        prop_assert_eq!(f.reconstruct(), n);
        let ps: Vec<u64> = f.factors().iter().map(|&(p, _)| p).collect();
        prop_assert!(ps.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(f.factors().iter().all(|&(p, e)| e >= 1 && is_prime(p)));
    }
}

proptest! {
    #[test]
    fn mobius_and_divisors_are_multiplicative(a in 1u64..100_000, b in 1u64..100_000) {
        prop_assume!(gcd(a, b) == 1);
        prop_assert_eq!(mobius(a * b).unwrap(), mobius(a).unwrap() * mobius(b).unwrap());
        prop_assert_eq!(divisor_count(a * b).unwrap(), divisor_count(a).unwrap() * divisor_count(b).unwrap());
    }
}
