//! Compensated summation.
//!
//! All long sums in the crate go through [`CompensatedSum`] (Neumaier's
//! variant of Kahan summation) so that results are reproducible to a few ulps
//! independently of the number of terms.

use std::iter::FromIterator;
use std::ops::AddAssign;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one, keeping both compensations.
    #[inline]
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of reals.
pub fn compensated<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let mut terms = vec![1.0e16];
        terms.extend(std::iter::repeat(1.0).take(1000));
        terms.push(-1.0e16);
        let naive: f64 = terms.iter().sum();
        assert_ne!(naive, 1000.0);
        assert_eq!(compensated(terms), 1000.0);
    }

    #[test]
    fn merge_is_order_stable() {
        let xs: Vec<f64> = (1..=10_000).map(|i| 1.0 / i as f64).collect();
        let whole = compensated(xs.iter().copied());
        let mut left: CompensatedSum = xs[..5000].iter().copied().collect();
        let right: CompensatedSum = xs[5000..].iter().copied().collect();
        left.merge(&right);
        assert!((left.value() - whole).abs() <= 1e-15);
    }
}
